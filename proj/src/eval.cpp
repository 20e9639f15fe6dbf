#include "dopose/eval.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "dopose/errors.hpp"

namespace dopose {

using nlohmann::json;
using nlohmann::ordered_json;

double mask_iou(const InstanceMask &a, const InstanceMask &b) {
  const long long inter = intersection_area(a, b);
  const long long uni = a.area() + b.area() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double box_iou(const BoundingBox &a, const BoundingBox &b) {
  const double iw = std::min<double>(a.x + a.w, b.x + b.w) - std::max<double>(a.x, b.x);
  const double ih = std::min<double>(a.y + a.h, b.y + b.h) - std::max<double>(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = static_cast<double>(a.area()) + static_cast<double>(b.area()) - inter;
  return uni <= 0.0 ? 0.0 : inter / uni;
}

std::vector<double> default_iou_thresholds() {
  // Same arithmetic as numpy.linspace(0.5, 0.95, 10).
  const double start = 0.5, stop = 0.95;
  const double step = (stop - start) / 9.0;
  std::vector<double> out(10);
  for (int i = 0; i < 10; ++i) out[static_cast<std::size_t>(i)] = i * step + start;
  out.back() = stop;
  return out;
}

namespace {

constexpr int kRecallPoints = 101;

double recall_point(int i) {
  // numpy.linspace(0, 1, 101)
  return i == kRecallPoints - 1 ? 1.0 : i * 0.01;
}

// Neumaier-compensated sum in a fixed order.
double stable_sum(const std::vector<double> &values) {
  double sum = 0.0, c = 0.0;
  for (double v : values) {
    const double t = sum + v;
    c += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  return sum + c;
}

double mean(const std::vector<double> &values) {
  return values.empty() ? 0.0 : stable_sum(values) / static_cast<double>(values.size());
}

struct ImageMatches {
  std::vector<double> scores;                // kept detections, ranked
  std::vector<std::vector<char>> matched;    // [threshold][detection]
  std::size_t num_gt = 0;
};

// Ranks detections by score, breaking ties by mask content so the result does
// not depend on input order.
std::vector<std::size_t> rank_detections(const std::vector<const Prediction *> &dets) {
  std::vector<RunLength> keys;
  keys.reserve(dets.size());
  for (const auto *d : dets) keys.push_back(rle_encode(d->mask));
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dets[a]->score != dets[b]->score) return dets[a]->score > dets[b]->score;
    return keys[a].counts < keys[b].counts;
  });
  return order;
}

ImageMatches match_image(const std::vector<const Prediction *> &all_dets,
                         const std::vector<InstanceMask> &gts, IouMode mode,
                         const CocoOptions &options) {
  ImageMatches out;
  out.num_gt = gts.size();
  std::vector<std::size_t> order = rank_detections(all_dets);
  if (order.size() > options.max_detections) order.resize(options.max_detections);

  std::vector<BoundingBox> gt_boxes;
  if (mode == IouMode::kBox)
    for (const auto &g : gts) gt_boxes.push_back(g.bbox());

  const std::size_t nd = order.size(), ng = gts.size();
  std::vector<double> ious(nd * ng, 0.0);
  for (std::size_t d = 0; d < nd; ++d) {
    const Prediction &det = *all_dets[order[d]];
    out.scores.push_back(det.score);
    const BoundingBox det_box = mode == IouMode::kBox ? det.mask.bbox() : BoundingBox{};
    for (std::size_t g = 0; g < ng; ++g)
      ious[d * ng + g] = mode == IouMode::kMask ? mask_iou(det.mask, gts[g])
                                                : box_iou(det_box, gt_boxes[g]);
  }

  for (double threshold : options.iou_thresholds) {
    std::vector<char> det_matched(nd, 0);
    std::vector<char> gt_matched(ng, 0);
    for (std::size_t d = 0; d < nd; ++d) {
      double best = std::min(threshold, 1.0 - 1e-10);
      std::ptrdiff_t match = -1;
      for (std::size_t g = 0; g < ng; ++g) {
        if (gt_matched[g]) continue;
        if (ious[d * ng + g] < best) continue;
        best = ious[d * ng + g];
        match = static_cast<std::ptrdiff_t>(g);
      }
      if (match < 0) continue;
      det_matched[d] = 1;
      gt_matched[static_cast<std::size_t>(match)] = 1;
    }
    out.matched.push_back(std::move(det_matched));
  }
  return out;
}

void check_disjoint(std::span<const InstanceMask> masks, const char *side) {
  if (masks.empty()) return;
  const int w = masks.front().width(), h = masks.front().height();
  std::vector<std::uint8_t> taken(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0);
  for (const auto &m : masks) {
    if (m.width() != w || m.height() != h)
      fail(ErrorCode::kDimensionMismatch, std::string(side) + " masks differ in size");
    for (std::size_t i = 0; i < taken.size(); ++i) {
      if (!m.test_index(i)) continue;
      if (taken[i]) fail(ErrorCode::kOverlappingMasks, std::string(side) + " masks overlap");
      taken[i] = 1;
    }
  }
}

}  // namespace

ApAr coco_ap_ar(std::span<const Prediction> predictions, const MasksByImage &ground_truth,
                IouMode mode, const CocoOptions &options, Execution exec) {
  if (options.iou_thresholds.empty())
    fail(ErrorCode::kInvalidArgument, "at least one IoU threshold is required");

  std::map<int, std::vector<const Prediction *>> by_image;
  for (const auto &p : predictions) {
    if (p.score < options.confidence_floor) continue;
    if (!ground_truth.count(p.image_id))
      fail(ErrorCode::kInvalidArgument,
           "prediction for image " + std::to_string(p.image_id) + " without a ground-truth entry");
    by_image[p.image_id].push_back(&p);
  }

  std::vector<int> image_ids;
  for (const auto &[id, gts] : ground_truth) image_ids.push_back(id);
  std::vector<ImageMatches> per_image(image_ids.size());
  std::vector<std::exception_ptr> errors(image_ids.size());
  static const std::vector<const Prediction *> kNone;

  const auto run = [&](std::size_t i) {
    try {
      const auto it = by_image.find(image_ids[i]);
      per_image[i] = match_image(it == by_image.end() ? kNone : it->second,
                                 ground_truth.at(image_ids[i]), mode, options);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const auto n = static_cast<std::ptrdiff_t>(image_ids.size());
  if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < n; ++i) run(static_cast<std::size_t>(i));
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) run(static_cast<std::size_t>(i));
  }
  for (const auto &e : errors)
    if (e) std::rethrow_exception(e);

  // Pool detections over images (image order, then per-image rank) and sort
  // stably by score.
  struct Pooled {
    double score;
    std::size_t image, det;
  };
  std::vector<Pooled> pooled;
  std::size_t num_gt = 0;
  for (std::size_t i = 0; i < per_image.size(); ++i) {
    num_gt += per_image[i].num_gt;
    for (std::size_t d = 0; d < per_image[i].scores.size(); ++d)
      pooled.push_back({per_image[i].scores[d], i, d});
  }
  std::stable_sort(pooled.begin(), pooled.end(),
                   [](const Pooled &a, const Pooled &b) { return a.score > b.score; });

  ApAr result;
  const double eps = std::numeric_limits<double>::epsilon();
  for (std::size_t t = 0; t < options.iou_thresholds.size(); ++t) {
    std::vector<double> q(kRecallPoints, 0.0);
    double recall = 0.0;
    if (num_gt > 0) {
      const std::size_t nd = pooled.size();
      std::vector<double> rc(nd), pr(nd);
      double tp = 0.0, fp = 0.0;
      for (std::size_t k = 0; k < nd; ++k) {
        if (per_image[pooled[k].image].matched[t][pooled[k].det])
          tp += 1.0;
        else
          fp += 1.0;
        rc[k] = tp / static_cast<double>(num_gt);
        pr[k] = tp / (fp + tp + eps);
      }
      recall = nd ? rc.back() : 0.0;
      for (std::size_t k = nd; k-- > 1;)
        if (pr[k] > pr[k - 1]) pr[k - 1] = pr[k];
      for (int r = 0; r < kRecallPoints; ++r) {
        const auto pos = static_cast<std::size_t>(
            std::lower_bound(rc.begin(), rc.end(), recall_point(r)) - rc.begin());
        if (pos >= nd) break;
        q[static_cast<std::size_t>(r)] = pr[pos];
      }
    }
    result.ap_per_threshold.push_back(100.0 * mean(q));
    result.ar_per_threshold.push_back(100.0 * recall);
    result.precision.push_back(std::move(q));
  }
  if (num_gt > 0) {
    std::vector<double> all;
    for (const auto &q : result.precision) all.insert(all.end(), q.begin(), q.end());
    result.ap = 100.0 * mean(all);
    result.ar = mean(result.ar_per_threshold);
  }
  return result;
}

std::vector<int> hungarian_maximize(const Eigen::MatrixXd &weights) {
  const auto rows = static_cast<int>(weights.rows());
  const auto cols = static_cast<int>(weights.cols());
  if (rows == 0) return {};
  if (cols == 0) return std::vector<int>(static_cast<std::size_t>(rows), -1);
  if (rows > cols) {
    const std::vector<int> col_to_row = hungarian_maximize(weights.transpose());
    std::vector<int> out(static_cast<std::size_t>(rows), -1);
    for (int c = 0; c < cols; ++c)
      if (col_to_row[static_cast<std::size_t>(c)] >= 0)
        out[static_cast<std::size_t>(col_to_row[static_cast<std::size_t>(c)])] = c;
    return out;
  }

  // Shortest augmenting paths with potentials on cost = −weight, rows ≤ cols.
  const int n = rows, m = cols;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(m + 1), 0.0);
  std::vector<int> p(static_cast<std::size_t>(m + 1), 0), way(static_cast<std::size_t>(m + 1), 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(m + 1), inf);
    std::vector<char> used(static_cast<std::size_t>(m + 1), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        const auto sj = static_cast<std::size_t>(j);
        if (used[sj]) continue;
        const double cur = -weights(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[sj];
        if (cur < minv[sj]) {
          minv[sj] = cur;
          way[sj] = j0;
        }
        if (minv[sj] < delta) {
          delta = minv[sj];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        const auto sj = static_cast<std::size_t>(j);
        if (used[sj]) {
          u[static_cast<std::size_t>(p[sj])] += delta;
          v[sj] -= delta;
        } else {
          minv[sj] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> out(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= m; ++j)
    if (p[static_cast<std::size_t>(j)] > 0) out[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return out;
}

OverlapPrf overlap_prf_image(std::span<const InstanceMask> predictions,
                             std::span<const InstanceMask> ground_truth) {
  check_disjoint(predictions, "predicted");
  check_disjoint(ground_truth, "ground-truth");
  if (!predictions.empty() && !ground_truth.empty() &&
      (predictions.front().width() != ground_truth.front().width() ||
       predictions.front().height() != ground_truth.front().height()))
    fail(ErrorCode::kDimensionMismatch, "predicted and ground-truth masks differ in size");

  const auto nc = static_cast<Eigen::Index>(predictions.size());
  const auto ng = static_cast<Eigen::Index>(ground_truth.size());
  std::vector<long long> pred_area(predictions.size()), gt_area(ground_truth.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) pred_area[i] = predictions[i].area();
  for (std::size_t j = 0; j < ground_truth.size(); ++j) gt_area[j] = ground_truth[j].area();
  const long long pred_total = std::accumulate(pred_area.begin(), pred_area.end(), 0LL);
  const long long gt_total = std::accumulate(gt_area.begin(), gt_area.end(), 0LL);
  if (pred_total == 0 && gt_total == 0) return {1.0, 1.0, 1.0};

  Eigen::MatrixXd f(nc, ng);
  Eigen::MatrixXd tp(nc, ng);
  for (Eigen::Index i = 0; i < nc; ++i) {
    for (Eigen::Index j = 0; j < ng; ++j) {
      const auto si = static_cast<std::size_t>(i), sj = static_cast<std::size_t>(j);
      const auto inter = static_cast<double>(intersection_area(predictions[si], ground_truth[sj]));
      tp(i, j) = inter;
      if (inter <= 0.0) {
        f(i, j) = 0.0;
        continue;
      }
      const double p = inter / static_cast<double>(pred_area[si]);
      const double r = inter / static_cast<double>(gt_area[sj]);
      f(i, j) = 2.0 * p * r / (p + r);
    }
  }
  const std::vector<int> assignment = hungarian_maximize(f);
  double matched = 0.0;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (assignment[i] >= 0) matched += tp(static_cast<Eigen::Index>(i), assignment[i]);

  OverlapPrf out;
  out.precision = pred_total > 0 ? matched / static_cast<double>(pred_total) : 0.0;
  out.recall = gt_total > 0 ? matched / static_cast<double>(gt_total) : 0.0;
  out.f = out.precision + out.recall > 0.0
              ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
              : 0.0;
  return out;
}

OverlapPrf overlap_prf(const MasksByImage &predictions, const MasksByImage &ground_truth,
                       Execution exec) {
  std::vector<int> ids;
  for (const auto &[id, masks] : ground_truth) ids.push_back(id);
  for (const auto &[id, masks] : predictions)
    if (!ground_truth.count(id)) ids.push_back(id);
  std::sort(ids.begin(), ids.end());

  std::vector<OverlapPrf> scores(ids.size());
  std::vector<std::exception_ptr> errors(ids.size());
  static const std::vector<InstanceMask> kNone;
  const auto run = [&](std::size_t i) {
    try {
      const auto p = predictions.find(ids[i]);
      const auto g = ground_truth.find(ids[i]);
      scores[i] = overlap_prf_image(p == predictions.end() ? kNone : p->second,
                                    g == ground_truth.end() ? kNone : g->second);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const auto n = static_cast<std::ptrdiff_t>(ids.size());
  if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < n; ++i) run(static_cast<std::size_t>(i));
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) run(static_cast<std::size_t>(i));
  }
  for (const auto &e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<double> p, r, f;
  for (const auto &s : scores) {
    p.push_back(s.precision);
    r.push_back(s.recall);
    f.push_back(s.f);
  }
  return {100.0 * mean(p), 100.0 * mean(r), 100.0 * mean(f)};
}

std::vector<InstanceMask> make_disjoint(std::vector<InstanceMask> masks) {
  if (masks.empty()) return masks;
  std::vector<std::size_t> order(masks.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return masks[a].confidence.value_or(-1.0) > masks[b].confidence.value_or(-1.0);
  });
  const std::size_t pixels = masks.front().bits().size();
  std::vector<std::uint8_t> taken(pixels, 0);
  for (std::size_t idx : order) {
    InstanceMask &m = masks[idx];
    if (m.bits().size() != pixels) fail(ErrorCode::kDimensionMismatch, "masks differ in size");
    for (std::size_t i = 0; i < pixels; ++i) {
      if (!m.test_index(i)) continue;
      if (taken[i])
        m.set_index(i, false);
      else
        taken[i] = 1;
    }
  }
  return masks;
}

// --- COCO documents ---------------------------------------------------------

namespace {

[[noreturn]] void schema_error(const std::string &where, const std::string &what) {
  fail(ErrorCode::kMalformedFile, where + ": " + what);
}

int require_int(const json &obj, const char *key, const std::string &where) {
  if (!obj.is_object() || !obj.contains(key) || !obj[key].is_number_integer())
    schema_error(where + "/" + key, "expected an integer");
  return obj[key].get<int>();
}

InstanceMask parse_segmentation(const json &seg, const std::string &where) {
  if (seg.is_array()) schema_error(where, "polygon segmentation is not supported, use RLE");
  if (!seg.is_object() || !seg.contains("size") || !seg.contains("counts"))
    schema_error(where, "expected an RLE object with size and counts");
  const json &size = seg["size"];
  if (!size.is_array() || size.size() != 2 || !size[0].is_number_integer() ||
      !size[1].is_number_integer())
    schema_error(where + "/size", "expected [height, width]");
  RunLength rle{size[0].get<int>(), size[1].get<int>(), {}};
  if (rle.height < 0 || rle.width < 0) schema_error(where + "/size", "negative dimension");
  const json &counts = seg["counts"];
  try {
    if (counts.is_string()) {
      rle.counts = rle_counts_from_string(counts.get<std::string>());
    } else if (counts.is_array()) {
      for (const auto &c : counts) {
        if (!c.is_number_integer() || c.get<long long>() < 0)
          schema_error(where + "/counts", "expected non-negative integers");
        rle.counts.push_back(c.get<std::uint32_t>());
      }
    } else {
      schema_error(where + "/counts", "expected a string or an integer array");
    }
    return rle_decode(rle);
  } catch (const Error &e) {
    if (e.code() == ErrorCode::kMalformedFile && std::string(e.what()).rfind(where, 0) != 0)
      schema_error(where + "/counts", e.what());
    throw;
  }
}

}  // namespace

CocoGroundTruth parse_coco_ground_truth(const json &doc) {
  if (!doc.is_object()) schema_error("/", "expected a COCO annotation object");
  if (!doc.contains("images") || !doc["images"].is_array()) schema_error("/images", "expected an array");
  if (!doc.contains("annotations") || !doc["annotations"].is_array())
    schema_error("/annotations", "expected an array");
  CocoGroundTruth gt;
  const json &images = doc["images"];
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string where = "/images/" + std::to_string(i);
    const int id = require_int(images[i], "id", where);
    const int w = require_int(images[i], "width", where);
    const int h = require_int(images[i], "height", where);
    gt.image_sizes[id] = {w, h};
    gt.masks[id];
  }
  const json &anns = doc["annotations"];
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const std::string where = "/annotations/" + std::to_string(i);
    const int image_id = require_int(anns[i], "image_id", where);
    const auto it = gt.image_sizes.find(image_id);
    if (it == gt.image_sizes.end()) schema_error(where + "/image_id", "unknown image");
    if (!anns[i].contains("segmentation")) schema_error(where + "/segmentation", "missing");
    InstanceMask mask = parse_segmentation(anns[i]["segmentation"], where + "/segmentation");
    if (mask.width() != it->second.first || mask.height() != it->second.second)
      schema_error(where + "/segmentation/size", "differs from the image size");
    if (anns[i].contains("id") && anns[i]["id"].is_number_integer())
      mask.instance_id = anns[i]["id"].get<int>();
    gt.masks[image_id].push_back(std::move(mask));
  }
  return gt;
}

std::vector<Prediction> parse_coco_results(const json &doc) {
  const json *list = &doc;
  std::string prefix;
  if (doc.is_object()) {
    if (!doc.contains("annotations") || !doc["annotations"].is_array())
      schema_error("/annotations", "expected an array");
    list = &doc["annotations"];
    prefix = "/annotations";
  } else if (!doc.is_array()) {
    schema_error("/", "expected a COCO results array");
  }
  std::vector<Prediction> out;
  for (std::size_t i = 0; i < list->size(); ++i) {
    const json &item = (*list)[i];
    const std::string where = prefix + "/" + std::to_string(i);
    Prediction p;
    p.image_id = require_int(item, "image_id", where);
    if (!item.contains("segmentation")) schema_error(where + "/segmentation", "missing");
    p.mask = parse_segmentation(item["segmentation"], where + "/segmentation");
    if (item.contains("score")) {
      if (!item["score"].is_number()) schema_error(where + "/score", "expected a number");
      p.score = item["score"].get<double>();
    }
    p.mask.confidence = p.score;
    out.push_back(std::move(p));
  }
  return out;
}

EvalReport evaluate(const CocoGroundTruth &gt, std::span<const Prediction> predictions,
                    const CocoOptions &options, Execution exec) {
  EvalReport report;
  report.iou_thresholds = options.iou_thresholds;
  report.max_detections = options.max_detections;
  report.num_images = gt.masks.size();
  for (const auto &[id, masks] : gt.masks) report.num_ground_truth += masks.size();

  report.segm = coco_ap_ar(predictions, gt.masks, IouMode::kMask, options, exec);
  report.bbox = coco_ap_ar(predictions, gt.masks, IouMode::kBox, options, exec);

  MasksByImage kept;
  for (const auto &p : predictions) {
    if (p.score < options.confidence_floor) continue;
    ++report.num_predictions;
    InstanceMask m = p.mask;
    m.confidence = p.score;
    kept[p.image_id].push_back(std::move(m));
  }
  for (auto &[id, masks] : kept) masks = make_disjoint(std::move(masks));
  report.overlap = overlap_prf(kept, gt.masks, exec);
  return report;
}

ordered_json EvalReport::to_json() const {
  const auto apar = [](const ApAr &m) {
    ordered_json j;
    j["ap"] = m.ap;
    j["ar"] = m.ar;
    j["ap_per_threshold"] = m.ap_per_threshold;
    j["ar_per_threshold"] = m.ar_per_threshold;
    return j;
  };
  ordered_json doc;
  doc["segm"] = apar(segm);
  doc["bbox"] = apar(bbox);
  doc["overlap"] = {{"precision", overlap.precision}, {"recall", overlap.recall}, {"f", overlap.f}};
  doc["iou_thresholds"] = iou_thresholds;
  doc["max_detections"] = max_detections;
  doc["num_images"] = num_images;
  doc["num_predictions"] = num_predictions;
  doc["num_ground_truth"] = num_ground_truth;
  return doc;
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(1);
  out << std::left << std::setw(16) << "" << std::right << std::setw(8) << "AP" << std::setw(8)
      << "AR" << "\n";
  out << std::left << std::setw(16) << "segmentation" << std::right << std::setw(8) << segm.ap
      << std::setw(8) << segm.ar << "\n";
  out << std::left << std::setw(16) << "bounding box" << std::right << std::setw(8) << bbox.ap
      << std::setw(8) << bbox.ar << "\n\n";
  out << std::left << std::setw(16) << "" << std::right << std::setw(8) << "P" << std::setw(8)
      << "R" << std::setw(8) << "F" << "\n";
  out << std::left << std::setw(16) << "overlap" << std::right << std::setw(8)
      << overlap.precision << std::setw(8) << overlap.recall << std::setw(8) << overlap.f << "\n";
  return out.str();
}

}  // namespace dopose
