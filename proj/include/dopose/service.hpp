#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>

#include "dopose/execution.hpp"
#include "dopose/image.hpp"

namespace dopose {

struct ServiceOptions {
  std::filesystem::path dataset_root;
  std::string split = "test";
  Execution exec = Execution::kParallel;
  // Called on the job thread before a propagate/masks job does its work.
  // Tests use it to hold a job open.
  std::function<void(const std::string &scene, const std::string &kind)> job_hook;
};

/**
 * HTTP service behind the annotation UI. Scene state lives on disk only; jobs
 * run on background threads and hold the scene directory lock for their
 * whole duration, so a second mutating request answers 409.
 *
 *   GET  /api/scenes
 *   GET  /api/scenes/{s}/views/{v}?layer=rgb|depth_vis
 *   POST /api/scenes/{s}/views/{v}/overlay
 *   GET  /api/scenes/{s}/annotation      PUT /api/scenes/{s}/annotation
 *   POST /api/scenes/{s}/propagate       POST /api/scenes/{s}/masks
 *   GET  /api/jobs/{id}
 */
class AnnotationService {
 public:
  explicit AnnotationService(ServiceOptions options);
  ~AnnotationService();
  AnnotationService(const AnnotationService &) = delete;
  AnnotationService &operator=(const AnnotationService &) = delete;

  // Binds; port 0 picks a free port. Returns the bound port.
  int bind(const std::string &host, int port);
  // Serves until stop(). Call after bind().
  void run();
  void stop();
  // Blocks until every started job has finished.
  void wait_for_jobs();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// 8-bit display image: invalid (0) pixels → 255, valid depths min..max → 0..254,
// constant valid depth → 127.
GrayImage depth_visualization(const DepthImage &depth);

}  // namespace dopose
