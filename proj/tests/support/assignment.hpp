#pragma once

#include <Eigen/Core>

namespace dopose::testing {

// Best total weight over all one-to-one assignments, by enumerating every
// permutation of the longer side. Only usable for a handful of rows/cols.
double brute_force_assignment(const Eigen::MatrixXd &weights);

}  // namespace dopose::testing
