#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "dopose/execution.hpp"
#include "dopose/mask.hpp"

namespace dopose {

// |a∩b| / |a∪b|; 0 when both are empty.
double mask_iou(const InstanceMask &a, const InstanceMask &b);
double box_iou(const BoundingBox &a, const BoundingBox &b);

enum class IouMode { kMask, kBox };

struct Prediction {
  int image_id = 0;
  InstanceMask mask;
  double score = 1.0;
};

using MasksByImage = std::map<int, std::vector<InstanceMask>>;

std::vector<double> default_iou_thresholds();  // 0.50:0.05:0.95

struct CocoOptions {
  std::vector<double> iou_thresholds = default_iou_thresholds();
  std::size_t max_detections = 100;
  double confidence_floor = 0.0;  // predictions scoring below are dropped
};

struct ApAr {
  double ap = 0.0;  // 0..100
  double ar = 0.0;  // 0..100
  std::vector<double> ap_per_threshold;  // 0..100
  std::vector<double> ar_per_threshold;  // 0..100
  // Interpolated precision at the 101 recall points, per threshold (0..1).
  std::vector<std::vector<double>> precision;
};

/**
 * Single-category COCO protocol. Per image, detections are sorted by score
 * (stable) and capped at `max_detections`; each is greedily matched to the
 * unmatched gt with highest IoU ≥ threshold. Detections are then pooled over
 * images, ranked by score, and precision is made monotone and sampled at
 * 101 recall points. AP/AR average over the thresholds.
 */
ApAr coco_ap_ar(std::span<const Prediction> predictions, const MasksByImage &ground_truth,
                IouMode mode, const CocoOptions &options = {},
                Execution exec = Execution::kParallel);

struct OverlapPrf {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

// One image, 0..1 scale. Masks within each side must be disjoint
// (kOverlappingMasks otherwise).
OverlapPrf overlap_prf_image(std::span<const InstanceMask> predictions,
                             std::span<const InstanceMask> ground_truth);

// Mean of per-image scores over the gt images, reported on the 0..100 scale.
OverlapPrf overlap_prf(const MasksByImage &predictions, const MasksByImage &ground_truth,
                       Execution exec = Execution::kParallel);

// Maximum-weight assignment for a rows × cols weight matrix (Kuhn–Munkres).
// result[row] is the assigned column, or -1 when rows > cols.
std::vector<int> hungarian_maximize(const Eigen::MatrixXd &weights);

// Resolves overlaps by letting higher-confidence masks claim pixels first.
std::vector<InstanceMask> make_disjoint(std::vector<InstanceMask> masks);

struct EvalReport {
  ApAr segm;
  ApAr bbox;
  OverlapPrf overlap;  // 0..100
  std::vector<double> iou_thresholds;
  std::size_t max_detections = 100;
  std::size_t num_images = 0;
  std::size_t num_predictions = 0;
  std::size_t num_ground_truth = 0;

  nlohmann::ordered_json to_json() const;
  std::string to_table() const;
};

struct CocoGroundTruth {
  std::map<int, std::pair<int, int>> image_sizes;  // id → (width, height)
  MasksByImage masks;
};

// Parses a COCO annotation document (images + annotations with RLE or
// uncompressed RLE segmentation). Errors name the offending JSON path.
CocoGroundTruth parse_coco_ground_truth(const nlohmann::json &doc);
// Parses a COCO results list (or a document with an "annotations" array).
std::vector<Prediction> parse_coco_results(const nlohmann::json &doc);

EvalReport evaluate(const CocoGroundTruth &gt, std::span<const Prediction> predictions,
                    const CocoOptions &options = {}, Execution exec = Execution::kParallel);

}  // namespace dopose
