#pragma once

// Experiment configuration: one flat struct covering every experiment kind,
// a documented key=value text format, and kind-dependent defaults. Configs
// round-trip losslessly through serialize/parse (doubles at max_digits10).

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cgdlab::harness {

struct ExperimentConfig {
  // Shared.
  std::string kind = "quadratic";  // quadratic | projection | synthgan | stability-map | freeze
  std::uint64_t seed = 1;
  std::int64_t iters = -1;   // -1: kind default
  std::int64_t stride = -1;  // -1: kind default
  std::string out_dir;       // empty: compute only, write nothing
  std::string optimizer;     // empty: kind default (simgd | cgd | acgd | adam)
  double eta_x = std::numeric_limits<double>::quiet_NaN();  // NaN: kind default
  double eta_y = std::numeric_limits<double>::quiet_NaN();

  // Quadratic game f = a x^2 + b xy + c y^2 and its start point.
  double a_coef = 1.0;
  double b_coef = 10.0;
  double c_coef = 1.0;
  double x0 = std::numeric_limits<double>::quiet_NaN();
  double y0 = std::numeric_limits<double>::quiet_NaN();

  // Projection experiment.
  int n_runs = 20;
  std::string eta_mode = "aniso";  // identity | aniso | custom
  double eta_d1 = 1.0;
  double eta_d2 = 0.01;
  double target = 2.0;
  double rel_tol = 0.05;
  int min_len = 500;

  // Adam / adaptive-CGD hyperparameters.
  double adam_alpha = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  bool log_trick = true;
  double acgd_alpha = 1e-4;
  double acgd_beta2 = 0.99;
  double acgd_eps = 1e-5;

  // Synthetic GAN.
  std::string loss = "ogan";  // ogan | wgan
  int batch_size = 64;
  int dataset_size = 2000;
  int modes = 8;
  double ring_radius = 2.0;
  double mode_std = 0.05;

  // Stability map (comma-separated lists; empty: default 20-value grid).
  std::string eta_x_list;
  std::string eta_y_list;

  // Freeze experiment.
  std::string game = "projection";  // projection | synthgan
  std::string checkpoint_path;
  std::int64_t warmup_iters = 0;
  std::int64_t freeze_steps = 1000;
  double freeze_eta = 0.01;
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw std::runtime_error("config: bad numeric value for " + key + ": '" + v + "'");
  }
}

inline std::int64_t parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    std::int64_t d = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw std::runtime_error("config: bad integer value for " + key + ": '" + v + "'");
  }
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    std::uint64_t d = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw std::runtime_error("config: bad unsigned value for " + key + ": '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::runtime_error("config: bad boolean value for " + key + ": '" + v + "'");
}

inline std::string fmt_double(double d) {
  std::ostringstream out;
  out.precision(17);
  out << d;
  return out.str();
}

}  // namespace detail

inline void set_config_key(ExperimentConfig& c, const std::string& key, const std::string& value) {
  using detail::parse_bool;
  using detail::parse_double;
  using detail::parse_int;
  using detail::parse_uint;
  if (key == "kind") c.kind = value;
  else if (key == "seed") c.seed = parse_uint(key, value);
  else if (key == "iters") c.iters = parse_int(key, value);
  else if (key == "stride") c.stride = parse_int(key, value);
  else if (key == "out_dir") c.out_dir = value;
  else if (key == "optimizer") c.optimizer = value;
  else if (key == "eta_x") c.eta_x = parse_double(key, value);
  else if (key == "eta_y") c.eta_y = parse_double(key, value);
  else if (key == "a_coef") c.a_coef = parse_double(key, value);
  else if (key == "b_coef") c.b_coef = parse_double(key, value);
  else if (key == "c_coef") c.c_coef = parse_double(key, value);
  else if (key == "x0") c.x0 = parse_double(key, value);
  else if (key == "y0") c.y0 = parse_double(key, value);
  else if (key == "n_runs") c.n_runs = static_cast<int>(parse_int(key, value));
  else if (key == "eta_mode") c.eta_mode = value;
  else if (key == "eta_d1") c.eta_d1 = parse_double(key, value);
  else if (key == "eta_d2") c.eta_d2 = parse_double(key, value);
  else if (key == "target") c.target = parse_double(key, value);
  else if (key == "rel_tol") c.rel_tol = parse_double(key, value);
  else if (key == "min_len") c.min_len = static_cast<int>(parse_int(key, value));
  else if (key == "adam_alpha") c.adam_alpha = parse_double(key, value);
  else if (key == "adam_beta1") c.adam_beta1 = parse_double(key, value);
  else if (key == "adam_beta2") c.adam_beta2 = parse_double(key, value);
  else if (key == "adam_eps") c.adam_eps = parse_double(key, value);
  else if (key == "log_trick") c.log_trick = parse_bool(key, value);
  else if (key == "acgd_alpha") c.acgd_alpha = parse_double(key, value);
  else if (key == "acgd_beta2") c.acgd_beta2 = parse_double(key, value);
  else if (key == "acgd_eps") c.acgd_eps = parse_double(key, value);
  else if (key == "loss") c.loss = value;
  else if (key == "batch_size") c.batch_size = static_cast<int>(parse_int(key, value));
  else if (key == "dataset_size") c.dataset_size = static_cast<int>(parse_int(key, value));
  else if (key == "modes") c.modes = static_cast<int>(parse_int(key, value));
  else if (key == "ring_radius") c.ring_radius = parse_double(key, value);
  else if (key == "mode_std") c.mode_std = parse_double(key, value);
  else if (key == "eta_x_list") c.eta_x_list = value;
  else if (key == "eta_y_list") c.eta_y_list = value;
  else if (key == "game") c.game = value;
  else if (key == "checkpoint_path") c.checkpoint_path = value;
  else if (key == "warmup_iters") c.warmup_iters = parse_int(key, value);
  else if (key == "freeze_steps") c.freeze_steps = parse_int(key, value);
  else if (key == "freeze_eta") c.freeze_eta = parse_double(key, value);
  else throw std::runtime_error("config: unknown key '" + key + "'");
}

// Parses `key = value` lines; '#' starts a comment; blank lines ignored.
inline ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig c;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string t = detail::trim(line);
    if (t.empty()) continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config: line " + std::to_string(lineno) + " is not key=value: '" +
                               t + "'");
    }
    set_config_key(c, detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
  }
  return c;
}

inline std::string serialize_config(const ExperimentConfig& c) {
  using detail::fmt_double;
  std::ostringstream out;
  out << "kind = " << c.kind << '\n';
  out << "seed = " << c.seed << '\n';
  out << "iters = " << c.iters << '\n';
  out << "stride = " << c.stride << '\n';
  out << "out_dir = " << c.out_dir << '\n';
  out << "optimizer = " << c.optimizer << '\n';
  out << "eta_x = " << fmt_double(c.eta_x) << '\n';
  out << "eta_y = " << fmt_double(c.eta_y) << '\n';
  out << "a_coef = " << fmt_double(c.a_coef) << '\n';
  out << "b_coef = " << fmt_double(c.b_coef) << '\n';
  out << "c_coef = " << fmt_double(c.c_coef) << '\n';
  out << "x0 = " << fmt_double(c.x0) << '\n';
  out << "y0 = " << fmt_double(c.y0) << '\n';
  out << "n_runs = " << c.n_runs << '\n';
  out << "eta_mode = " << c.eta_mode << '\n';
  out << "eta_d1 = " << fmt_double(c.eta_d1) << '\n';
  out << "eta_d2 = " << fmt_double(c.eta_d2) << '\n';
  out << "target = " << fmt_double(c.target) << '\n';
  out << "rel_tol = " << fmt_double(c.rel_tol) << '\n';
  out << "min_len = " << c.min_len << '\n';
  out << "adam_alpha = " << fmt_double(c.adam_alpha) << '\n';
  out << "adam_beta1 = " << fmt_double(c.adam_beta1) << '\n';
  out << "adam_beta2 = " << fmt_double(c.adam_beta2) << '\n';
  out << "adam_eps = " << fmt_double(c.adam_eps) << '\n';
  out << "log_trick = " << (c.log_trick ? "true" : "false") << '\n';
  out << "acgd_alpha = " << fmt_double(c.acgd_alpha) << '\n';
  out << "acgd_beta2 = " << fmt_double(c.acgd_beta2) << '\n';
  out << "acgd_eps = " << fmt_double(c.acgd_eps) << '\n';
  out << "loss = " << c.loss << '\n';
  out << "batch_size = " << c.batch_size << '\n';
  out << "dataset_size = " << c.dataset_size << '\n';
  out << "modes = " << c.modes << '\n';
  out << "ring_radius = " << fmt_double(c.ring_radius) << '\n';
  out << "mode_std = " << fmt_double(c.mode_std) << '\n';
  out << "eta_x_list = " << c.eta_x_list << '\n';
  out << "eta_y_list = " << c.eta_y_list << '\n';
  out << "game = " << c.game << '\n';
  out << "checkpoint_path = " << c.checkpoint_path << '\n';
  out << "warmup_iters = " << c.warmup_iters << '\n';
  out << "freeze_steps = " << c.freeze_steps << '\n';
  out << "freeze_eta = " << fmt_double(c.freeze_eta) << '\n';
  return out.str();
}

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

// Fills every unset (sentinel) field with its kind's documented default.
inline void apply_kind_defaults(ExperimentConfig& c) {
  auto set_eta = [&c](double ex, double ey) {
    if (std::isnan(c.eta_x)) c.eta_x = ex;
    if (std::isnan(c.eta_y)) c.eta_y = ey;
  };
  auto set_point = [&c](double x, double y) {
    if (std::isnan(c.x0)) c.x0 = x;
    if (std::isnan(c.y0)) c.y0 = y;
  };
  if (c.kind == "quadratic") {
    if (c.iters < 0) c.iters = 2000;
    if (c.stride < 0) c.stride = 1;
    if (c.optimizer.empty()) c.optimizer = "simgd";
    set_eta(0.09, 0.01);
    set_point(1.0, 1.0);
  } else if (c.kind == "projection") {
    if (c.iters < 0) c.iters = 100000;
    if (c.stride < 0) c.stride = 10;
    if (c.optimizer.empty()) c.optimizer = "simgd";
    set_eta(0.01, 0.01);
    set_point(0.0, 0.0);
  } else if (c.kind == "synthgan") {
    if (c.iters < 0) c.iters = 10000;
    if (c.stride < 0) c.stride = 50;
    if (c.optimizer.empty()) c.optimizer = "adam";
    set_eta(0.001, 0.001);
    set_point(0.0, 0.0);
  } else if (c.kind == "stability-map") {
    if (c.iters < 0) c.iters = 0;
    if (c.stride < 0) c.stride = 1;
    if (c.optimizer.empty()) c.optimizer = "simgd";
    set_eta(0.09, 0.01);
    set_point(0.0, 0.0);
  } else if (c.kind == "freeze") {
    if (c.iters < 0) c.iters = 0;
    if (c.stride < 0) c.stride = 10;
    if (c.optimizer.empty()) c.optimizer = "simgd";
    set_eta(0.01, 0.01);
    set_point(0.0, 0.0);
  } else {
    throw std::runtime_error("config: unknown experiment kind '" + c.kind + "'");
  }
}

}  // namespace cgdlab::harness
