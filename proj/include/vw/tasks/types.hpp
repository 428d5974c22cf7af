#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vw/core/image.hpp"
#include "vw/core/types.hpp"

namespace vw::tasks {

enum class TaskId { kGeneration, kDetection, kClassification };

const char* task_name(TaskId task);
TaskId parse_task(std::string_view name);
inline constexpr TaskId kAllTasks[] = {TaskId::kGeneration, TaskId::kDetection,
                                       TaskId::kClassification};

/// Axis-aligned box in pixel coordinates.
struct Box {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;
  std::optional<std::string> class_label;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  bool valid() const { return x_max > x_min && y_max > y_min; }
  bool operator==(const Box&) const = default;
};

double iou(const Box& a, const Box& b);

struct ScoredBox {
  Box box;
  double score = 0.0;
};

/// Greedy non-maximum suppression; keeps at most `max_keep` boxes in
/// descending score order.
std::vector<ScoredBox> non_max_suppression(std::vector<ScoredBox> boxes, double iou_threshold,
                                           int max_keep);

struct MatchedItem {
  Vector feature;
  int weight = 1;  // -1 for the target concept, +1 otherwise
};

struct MatchedBatch {
  std::vector<MatchedItem> items;

  void add(Vector feature, int weight);
  bool empty() const { return items.empty(); }
};

/// Cumulative noise schedule with alpha_bar[t] for t = 0 .. n_steps-1.
struct DiffusionSchedule {
  std::vector<double> alpha_bar;

  int n_steps() const { return static_cast<int>(alpha_bar.size()); }
  /// Cosine schedule with offset 0.008 and per-step betas capped at 0.999.
  static DiffusionSchedule cosine(int n_steps = 50);
  void validate() const;
};

/// One image of a concept dataset with its annotations.
struct Example {
  std::string path;
  Image image;
  std::vector<Box> boxes;
  std::string label;
};

}  // namespace vw::tasks
