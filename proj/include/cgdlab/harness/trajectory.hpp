#pragma once

// Recorded time series of a run plus metastable-segment detection. Each row
// is a pre-step snapshot: the parameters at that iteration together with the
// payoff and gradients evaluated there (on that step's minibatch for
// stochastic games). Rows are strictly increasing in iteration and recording
// at stride s keeps at most floor(budget/s) + 1 of them.

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cgdlab::harness {

struct TrajectoryRow {
  std::int64_t iteration = 0;
  double loss = 0.0;
  double grad_norm_x = 0.0;
  double grad_norm_y = 0.0;
  std::vector<double> params;  // full parameters or norms, per param_columns
  std::vector<double> extras;  // named diagnostics, per extra_columns
};

struct Trajectory {
  std::vector<std::string> param_columns;
  std::vector<std::string> extra_columns;
  std::vector<TrajectoryRow> rows;

  void add_row(TrajectoryRow row) {
    if (!rows.empty() && row.iteration <= rows.back().iteration) {
      throw std::logic_error("trajectory iterations must be strictly increasing");
    }
    if (row.params.size() != param_columns.size() || row.extras.size() != extra_columns.size()) {
      throw std::logic_error("trajectory row width does not match declared columns");
    }
    rows.push_back(std::move(row));
  }

  std::string to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "iteration,loss,grad_norm_x,grad_norm_y";
    for (const std::string& c : param_columns) out << ',' << c;
    for (const std::string& c : extra_columns) out << ',' << c;
    out << '\n';
    for (const TrajectoryRow& r : rows) {
      out << r.iteration << ',' << r.loss << ',' << r.grad_norm_x << ',' << r.grad_norm_y;
      for (double v : r.params) out << ',' << v;
      for (double v : r.extras) out << ',' << v;
      out << '\n';
    }
    return out.str();
  }
};

struct MetastabilitySegment {
  std::int64_t start_iteration = 0;
  std::int64_t end_iteration = 0;
  std::size_t start_row = 0;
  std::size_t end_row = 0;  // inclusive
  int component_index = 0;
  double mean_abs_deviation = 0.0;

  // Segment length in recorded rows.
  std::int64_t length() const { return static_cast<std::int64_t>(end_row - start_row) + 1; }
};

// Maximal runs of >= min_len consecutive rows whose extras[extra_index]
// stays within rel_tol relative deviation of target.
inline std::vector<MetastabilitySegment> detect_metastable_segments(const Trajectory& traj,
                                                                    std::size_t extra_index,
                                                                    double target, double rel_tol,
                                                                    int min_len) {
  if (extra_index >= traj.extra_columns.size()) {
    throw std::invalid_argument("detect_metastable_segments: no such extra column");
  }
  if (!(target != 0.0) || !(rel_tol > 0.0)) {
    throw std::invalid_argument("detect_metastable_segments: target must be nonzero, rel_tol > 0");
  }
  if (min_len < 2) throw std::invalid_argument("detect_metastable_segments: min_len must be >= 2");
  std::vector<MetastabilitySegment> segments;
  std::size_t n = traj.rows.size();
  std::size_t i = 0;
  while (i < n) {
    double v = traj.rows[i].extras[extra_index];
    if (std::abs(v - target) / std::abs(target) >= rel_tol) {
      ++i;
      continue;
    }
    std::size_t j = i;
    double dev_sum = std::abs(v - target);
    while (j + 1 < n) {
      double w = traj.rows[j + 1].extras[extra_index];
      if (std::abs(w - target) / std::abs(target) >= rel_tol) break;
      dev_sum += std::abs(w - target);
      ++j;
    }
    std::size_t len = j - i + 1;
    if (len >= static_cast<std::size_t>(min_len)) {
      MetastabilitySegment seg;
      seg.start_iteration = traj.rows[i].iteration;
      seg.end_iteration = traj.rows[j].iteration;
      seg.start_row = i;
      seg.end_row = j;
      seg.component_index = static_cast<int>(extra_index);
      seg.mean_abs_deviation = dev_sum / static_cast<double>(len);
      segments.push_back(seg);
    }
    i = j + 1;
  }
  return segments;
}

}  // namespace cgdlab::harness
