#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <sstream>
#include <tuple>

#include "vw/bench/grid.hpp"
#include "vw/core/container.hpp"
#include "vw/core/digest.hpp"
#include "vw/core/error.hpp"

namespace vw::bench {

namespace {

// Linear interpolation between order statistics, as numpy's default.
double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

CIResult aggregate_ci(const std::vector<double>& values, double level, std::uint64_t seed, int n_resamples) {
  if (values.size() < 2) throw Error(ErrorCode::kInvalidInput, "aggregate_ci: need at least 2 values");
  if (!(level > 0 && level < 1)) throw Error(ErrorCode::kInvalidInput, "aggregate_ci: level outside (0, 1)");
  if (n_resamples < 1) throw Error(ErrorCode::kInvalidInput, "aggregate_ci: n_resamples < 1");
  // Sorting first makes the result independent of input order.
  std::vector<double> v = values;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  double total = 0;
  for (double x : v) total += x;
  const double mean = total / static_cast<double>(n);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<size_t> pick(0, n - 1);
  std::vector<double> means(static_cast<size_t>(n_resamples));
  for (auto& m : means) {
    double s = 0;
    for (size_t i = 0; i < n; ++i) s += v[pick(rng)];
    m = s / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  const double alpha = (1 - level) / 2;
  CIResult r;
  r.mean = mean;
  r.low = std::min(quantile(means, alpha), mean);
  r.high = std::max(quantile(means, 1 - alpha), mean);
  r.level = level;
  r.n_trials = static_cast<int>(n);
  if (v.front() == v.back()) r.low = r.high = r.mean = v.front();
  return r;
}

namespace {

struct GroupKey {
  std::string model, eval_model, train_task, eval_task, dataset;
  std::optional<double> delta;

  auto tie() const { return std::tie(model, eval_model, train_task, eval_task, dataset, delta); }
  bool operator<(const GroupKey& o) const { return tie() < o.tie(); }
  bool in_domain() const { return model == eval_model && train_task == eval_task; }
};

struct Group {
  std::vector<double> values;
  int failed = 0;
};

struct Summary {
  double mean = NAN, low = NAN, high = NAN;
  int n = 0;
  int failed = 0;
  bool degenerate = false;
};

Summary summarize(const Group& g, std::uint64_t seed) {
  Summary s;
  s.n = static_cast<int>(g.values.size());
  s.failed = g.failed;
  if (s.n == 0) return s;
  if (s.n == 1) {
    s.mean = s.low = s.high = g.values[0];
    s.degenerate = true;
    return s;
  }
  const CIResult ci = aggregate_ci(g.values, 0.95, seed);
  s.mean = ci.mean;
  s.low = ci.low;
  s.high = ci.high;
  return s;
}

std::string num(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string delta_label(const std::optional<double>& d) {
  if (!d) return "none";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", *d);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

// White to dark blue over [0, 1].
std::string heat(double v) {
  if (std::isnan(v)) return "#dddddd";
  const double t = std::clamp(v, 0.0, 1.0);
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(255 - 215 * t), static_cast<int>(255 - 175 * t),
                static_cast<int>(255 - 75 * t));
  return buf;
}

std::string matrix_svg(const std::map<GroupKey, Summary>& cells) {
  std::vector<std::string> rows, cols;
  std::map<std::pair<std::string, std::string>, double> value;
  for (const auto& [k, s] : cells) {
    if (k.delta) continue;
    const std::string r = k.dataset + " " + k.model + ":" + k.train_task;
    const std::string c = k.eval_model + ":" + k.eval_task;
    if (std::find(rows.begin(), rows.end(), r) == rows.end()) rows.push_back(r);
    if (std::find(cols.begin(), cols.end(), c) == cols.end()) cols.push_back(c);
    value[{r, c}] = s.mean;
  }
  const int cw = 120, ch = 28, left = 260, top = 70;
  const int w = left + cw * static_cast<int>(cols.size()) + 20, h = top + ch * static_cast<int>(rows.size()) + 20;
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<text x=\"10\" y=\"20\" font-size=\"14\">train (rows) vs eval (columns), mean metric</text>\n";
  for (size_t j = 0; j < cols.size(); ++j)
    o << "<text x=\"" << left + cw * j + cw / 2 << "\" y=\"" << top - 8 << "\" text-anchor=\"middle\">"
      << xml_escape(cols[j]) << "</text>\n";
  for (size_t i = 0; i < rows.size(); ++i) {
    o << "<text x=\"" << left - 6 << "\" y=\"" << top + ch * i + ch / 2 + 4 << "\" text-anchor=\"end\">"
      << xml_escape(rows[i]) << "</text>\n";
    for (size_t j = 0; j < cols.size(); ++j) {
      const auto it = value.find({rows[i], cols[j]});
      const double v = it == value.end() ? NAN : it->second;
      o << "<rect x=\"" << left + cw * j << "\" y=\"" << top + ch * i << "\" width=\"" << cw << "\" height=\"" << ch
        << "\" fill=\"" << heat(v) << "\" stroke=\"#ffffff\"/>\n";
      o << "<text x=\"" << left + cw * j + cw / 2 << "\" y=\"" << top + ch * i + ch / 2 + 4
        << "\" text-anchor=\"middle\">" << (std::isnan(v) ? "-" : num(v).substr(0, 5)) << "</text>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

std::string delta_svg(const std::map<GroupKey, Summary>& cells) {
  // One curve per group of all coordinates but delta; x positions are the
  // sorted deltas with "none" last.
  std::vector<std::optional<double>> xs;
  std::map<std::string, std::map<int, Summary>> curves;
  for (const auto& [k, s] : cells)
    if (std::find(xs.begin(), xs.end(), k.delta) == xs.end()) xs.push_back(k.delta);
  std::sort(xs.begin(), xs.end(), [](const auto& a, const auto& b) {
    if (!a) return false;
    if (!b) return true;
    return *a < *b;
  });
  for (const auto& [k, s] : cells) {
    const int x = static_cast<int>(std::find(xs.begin(), xs.end(), k.delta) - xs.begin());
    curves[k.dataset + " " + k.model + ":" + k.train_task + " -> " + k.eval_model + ":" + k.eval_task][x] = s;
  }
  const int left = 60, top = 40, pw = 420, ph = 260;
  const int w = left + pw + 360, h = top + ph + 60;
  const double step = xs.size() > 1 ? static_cast<double>(pw) / static_cast<double>(xs.size() - 1) : 0.0;
  auto px = [&](int x) { return left + (xs.size() > 1 ? step * x : pw / 2.0); };
  auto py = [&](double v) { return top + ph * (1.0 - std::clamp(v, 0.0, 1.0)); };
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<text x=\"10\" y=\"20\" font-size=\"14\">metric vs constraint level (95% CI)</text>\n";
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"#888888\"/>\n";
  for (int t = 0; t <= 4; ++t)
    o << "<text x=\"" << left - 6 << "\" y=\"" << py(t / 4.0) + 4 << "\" text-anchor=\"end\">" << t / 4.0 << "</text>\n";
  for (size_t x = 0; x < xs.size(); ++x)
    o << "<text x=\"" << px(static_cast<int>(x)) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">"
      << delta_label(xs[x]) << "</text>\n";
  int c = 0;
  for (const auto& [name, pts] : curves) {
    const char* color = palette[c % 10];
    std::ostringstream line;
    for (const auto& [x, s] : pts) {
      if (std::isnan(s.mean)) continue;
      line << px(x) << "," << py(s.mean) << " ";
      o << "<line x1=\"" << px(x) << "\" x2=\"" << px(x) << "\" y1=\"" << py(s.low) << "\" y2=\"" << py(s.high)
        << "\" stroke=\"" << color << "\"/>\n";
    }
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << line.str() << "\"/>\n";
    o << "<text x=\"" << left + pw + 16 << "\" y=\"" << top + 14 * c + 10 << "\" fill=\"" << color << "\">"
      << xml_escape(name) << "</text>\n";
    ++c;
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace

ReportFiles emit_report(const std::vector<RunRecord>& records, const std::filesystem::path& out_dir,
                        std::uint64_t seed) {
  if (records.empty()) throw Error(ErrorCode::kInvalidInput, "emit_report: no records");
  std::map<GroupKey, Group> groups;
  for (const auto& r : records) {
    const Cell& c = r.cell;
    GroupKey k{c.model, c.eval_model, tasks::task_name(c.train_task), tasks::task_name(c.eval_task), c.dataset, c.delta};
    Group& g = groups[k];
    if (r.status != RunStatus::kOk) {
      ++g.failed;
      continue;
    }
    if (r.repeats.empty()) g.values.push_back(r.value);
    else g.values.insert(g.values.end(), r.repeats.begin(), r.repeats.end());
  }
  std::map<GroupKey, Summary> summary;
  for (const auto& [k, g] : groups) {
    const GroupKey& kk = k;
    summary[k] = summarize(g, derive_seed(seed, kk.model + kk.eval_model + kk.train_task + kk.eval_task + kk.dataset +
                                                    delta_label(kk.delta)));
  }

  const std::string head = "model,eval_model,train_task,eval_task,dataset,";
  std::ostringstream matrix, deltas, eff;
  matrix << head << "mean,low,high,n_trials,n_failed,degenerate\n";
  deltas << head << "delta,mean,low,high,n_trials\n";
  eff << head << "transferred_mean,in_domain_mean,ratio\n";
  for (const auto& [k, s] : summary) {
    const std::string coords = k.model + "," + k.eval_model + "," + k.train_task + "," + k.eval_task + "," + k.dataset + ",";
    deltas << coords << delta_label(k.delta) << "," << num(s.mean) << "," << num(s.low) << "," << num(s.high) << ","
           << s.n << "\n";
    if (k.delta) continue;
    matrix << coords << num(s.mean) << "," << num(s.low) << "," << num(s.high) << "," << s.n << "," << s.failed << ","
           << (s.degenerate ? 1 : 0) << "\n";
    if (k.in_domain()) continue;
    GroupKey ref{k.eval_model, k.eval_model, k.eval_task, k.eval_task, k.dataset, std::nullopt};
    const auto it = summary.find(ref);
    const double in_domain = it == summary.end() ? NAN : it->second.mean;
    const double ratio = std::isnan(in_domain) || in_domain == 0 ? NAN : s.mean / in_domain;
    eff << coords << num(s.mean) << "," << num(in_domain) << "," << num(ratio) << "\n";
  }

  std::filesystem::create_directories(out_dir);
  ReportFiles files{out_dir / "transfer_matrix.csv", out_dir / "delta_curves.csv", out_dir / "efficiency.csv",
                    out_dir / "transfer_matrix.svg", out_dir / "delta_curves.svg"};
  io::write_file_atomic(files.matrix_csv, matrix.str());
  io::write_file_atomic(files.delta_csv, deltas.str());
  io::write_file_atomic(files.efficiency_csv, eff.str());
  io::write_file_atomic(files.matrix_svg, matrix_svg(summary));
  io::write_file_atomic(files.delta_svg, delta_svg(summary));
  return files;
}

}  // namespace vw::bench
