#include "vw/tasks/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vw/core/error.hpp"

namespace vw::tasks {

const char* task_name(TaskId task) {
  switch (task) {
    case TaskId::kGeneration: return "generation";
    case TaskId::kDetection: return "detection";
    case TaskId::kClassification: return "classification";
  }
  return "?";
}

TaskId parse_task(std::string_view name) {
  for (TaskId t : kAllTasks)
    if (name == task_name(t)) return t;
  throw Error(ErrorCode::kInvalidInput, "unknown task '" + std::string(name) + "'");
}

double iou(const Box& a, const Box& b) {
  if (!a.valid() || !b.valid()) throw Error(ErrorCode::kInvalidInput, "iou: degenerate box");
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

std::vector<ScoredBox> non_max_suppression(std::vector<ScoredBox> boxes, double iou_threshold,
                                           int max_keep) {
  std::stable_sort(boxes.begin(), boxes.end(),
                   [](const ScoredBox& a, const ScoredBox& b) { return a.score > b.score; });
  std::vector<ScoredBox> kept;
  for (auto& cand : boxes) {
    if (static_cast<int>(kept.size()) >= max_keep) break;
    bool suppressed = false;
    for (const auto& k : kept) {
      if (iou(cand.box, k.box) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(std::move(cand));
  }
  return kept;
}

void MatchedBatch::add(Vector feature, int weight) {
  if (weight != 1 && weight != -1) throw Error(ErrorCode::kInvalidInput, "matched batch: weight must be +-1");
  items.push_back({std::move(feature), weight});
}

DiffusionSchedule DiffusionSchedule::cosine(int n_steps) {
  if (n_steps < 1) throw Error(ErrorCode::kInvalidInput, "schedule: n_steps < 1");
  constexpr double s = 0.008;
  const double pi = std::acos(-1.0);
  auto f = [&](double t) {
    const double c = std::cos((t / n_steps + s) / (1 + s) * pi / 2);
    return c * c;
  };
  DiffusionSchedule out;
  double prev = 1.0;
  for (int t = 0; t < n_steps; ++t) {
    const double beta = std::min(1.0 - f(t + 1) / f(t), 0.999);
    prev *= 1.0 - beta;
    out.alpha_bar.push_back(prev);
  }
  out.validate();
  return out;
}

void DiffusionSchedule::validate() const {
  if (alpha_bar.empty()) throw Error(ErrorCode::kInvalidInput, "schedule: empty");
  for (size_t t = 0; t < alpha_bar.size(); ++t) {
    if (!(alpha_bar[t] > 0.0 && alpha_bar[t] <= 1.0))
      throw Error(ErrorCode::kInvalidInput, "schedule: alpha_bar outside (0, 1]");
    if (t > 0 && !(alpha_bar[t] < alpha_bar[t - 1]))
      throw Error(ErrorCode::kInvalidInput, "schedule: alpha_bar not strictly decreasing");
  }
}

}  // namespace vw::tasks
