#include "support/assignment.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

namespace dopose::testing {

double brute_force_assignment(const Eigen::MatrixXd &weights) {
  const Eigen::MatrixXd m =
      weights.rows() > weights.cols() ? Eigen::MatrixXd(weights.transpose()) : weights;
  std::vector<Eigen::Index> cols(static_cast<std::size_t>(m.cols()));
  std::iota(cols.begin(), cols.end(), 0);
  double best = -std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) s += m(r, cols[static_cast<std::size_t>(r)]);
    best = std::max(best, s);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

}  // namespace dopose::testing
