#pragma once

// Experiment drivers. Each runner is a pure function of its config (plus the
// filesystem when out_dir is set): identical config + seed reproduces
// bit-identical artifacts. Multi-run experiments execute runs in parallel
// with no shared mutable state and aggregate in run-index order.
//
// Artifacts per run directory: config.txt (the resolved config), CSV time
// series, summary JSON, and a gnuplot-ready .dat file per figure.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cgdlab/games.hpp"
#include "cgdlab/harness/checkpoint.hpp"
#include "cgdlab/harness/config.hpp"
#include "cgdlab/harness/trajectory.hpp"
#include "cgdlab/optimizers.hpp"
#include "cgdlab/rng.hpp"
#include "cgdlab/stability.hpp"

namespace cgdlab::harness {

// Norm thresholds for run verdicts.
inline constexpr double kConvergedNorm = 1e-3;

// Default step-size grid for stability maps: stays clear of the marginal
// band everywhere on the reference quadratic game while covering the
// stable/unstable transition from both sides.
inline constexpr std::array<double, 20> kDefaultEtaGrid = {
    0.01, 0.025, 0.03, 0.035, 0.04, 0.045, 0.05, 0.06, 0.07, 0.08,
    0.09, 0.10, 0.11, 0.12, 0.13, 0.14, 0.15, 0.16, 0.18, 0.20};

namespace detail {

inline double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double d : v) s += d * d;
  return std::sqrt(s);
}

inline std::filesystem::path ensure_out_dir(const std::string& out_dir) {
  std::filesystem::path p(out_dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) {
    throw std::runtime_error("cannot create output directory '" + out_dir + "': " + ec.message());
  }
  return p;
}

inline void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::string tok;
  std::istringstream in(text);
  while (std::getline(in, tok, ',')) {
    std::string t = harness::detail::trim(tok);
    if (t.empty()) continue;
    out.push_back(harness::detail::parse_double("eta list entry", t));
  }
  return out;
}

enum class OptChoice { simgd, cgd, acgd, adam };

inline OptChoice parse_optimizer(const std::string& name) {
  if (name == "simgd") return OptChoice::simgd;
  if (name == "cgd") return OptChoice::cgd;
  if (name == "acgd") return OptChoice::acgd;
  if (name == "adam") return OptChoice::adam;
  throw std::runtime_error("unknown optimizer '" + name + "'");
}

inline void require_kind(const ExperimentConfig& cfg, const char* kind) {
  if (cfg.kind != kind) {
    throw std::runtime_error(std::string("runner for '") + kind + "' got config kind '" + cfg.kind +
                             "'");
  }
}

inline void validate_budget(const ExperimentConfig& cfg) {
  if (cfg.iters < 0) throw std::runtime_error("iters must be >= 0");
  if (cfg.stride < 1) throw std::runtime_error("stride must be >= 1");
}

// Binds (x, y), the game's bound constants, and any extra groups the graph
// declares, then evaluates the graph.
inline std::vector<autodiff::ParamGroup> bind_groups(const games::ZeroSumGame& game,
                                                     const autodiff::Graph& graph,
                                                     std::span<const double> x,
                                                     std::span<const double> y,
                                                     std::span<const autodiff::ParamGroup> extra) {
  std::vector<autodiff::ParamGroup> at;
  at.push_back({game.min_group, {x.begin(), x.end()}});
  at.push_back({game.max_group, {y.begin(), y.end()}});
  for (const autodiff::ParamGroup& g : game.bound_constants) {
    if (graph.group_index(g.name) >= 0) at.push_back(g);
  }
  for (const autodiff::ParamGroup& g : extra) {
    if (graph.group_index(g.name) >= 0) at.push_back(g);
  }
  return at;
}

inline double payoff_value(const games::ZeroSumGame& game, std::span<const double> x,
                           std::span<const double> y,
                           std::span<const autodiff::ParamGroup> extra = {}) {
  return autodiff::evaluate(game.payoff, bind_groups(game, game.payoff, x, y, extra));
}

// Fixed evaluation minibatch: the first batch_size dataset points plus
// latents from the "eval-loss" stream of the master seed. Used wherever two
// parameter sets must be compared on identical data.
inline games::Minibatch make_eval_batch(const games::SynthGanGame& game, std::uint64_t seed) {
  games::Minibatch mb;
  mb.size = game.batch_size();
  const std::vector<std::array<double, 2>>& ds = game.dataset();
  for (int i = 0; i < mb.size; ++i) {
    const std::array<double, 2>& p = ds[static_cast<std::size_t>(i) % ds.size()];
    mb.real_xy.push_back(p[0]);
    mb.real_xy.push_back(p[1]);
  }
  std::mt19937_64 stream = rng::make_stream(seed, "eval-loss");
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < 2 * mb.size; ++i) mb.latent.push_back(gauss(stream));
  return mb;
}

}  // namespace detail

// Euclidean distance between two models' outputs over the same reference
// set: sqrt(sum_i (t_i - c_i)^2).
inline double prediction_distance(std::span<const double> outputs_t,
                                  std::span<const double> outputs_c) {
  if (outputs_t.size() != outputs_c.size()) {
    throw std::invalid_argument("prediction_distance: output lists differ in size");
  }
  if (outputs_t.empty()) {
    throw std::invalid_argument("prediction_distance: reference set is empty");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < outputs_t.size(); ++i) {
    double d = outputs_t[i] - outputs_c[i];
    s += d * d;
  }
  return std::sqrt(s);
}

template <class ModelT, class ModelC, class Point>
double prediction_distance(ModelT&& model_t, ModelC&& model_c, const std::vector<Point>& refs) {
  std::vector<double> t, c;
  t.reserve(refs.size());
  c.reserve(refs.size());
  for (const Point& p : refs) {
    t.push_back(model_t(p));
    c.push_back(model_c(p));
  }
  return prediction_distance(t, c);
}

// --- Quadratic experiment ----------------------------------------------------

struct QuadraticResult {
  std::string verdict;  // converged | diverged | budget-exhausted
  std::int64_t steps_taken = 0;
  std::int64_t steps_to_converge = -1;
  std::int64_t first_iteration_norm_above_10 = -1;
  double final_norm = 0.0;
  double final_loss = 0.0;
  Trajectory trajectory;
  optimizers::OptimizerState state;
};

inline QuadraticResult run_quadratic(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  detail::require_kind(cfg, "quadratic");
  apply_kind_defaults(cfg);
  detail::validate_budget(cfg);
  detail::OptChoice opt = detail::parse_optimizer(cfg.optimizer);
  if (opt == detail::OptChoice::adam) {
    throw std::runtime_error("quadratic runner supports simgd, cgd, acgd");
  }

  games::QuadraticGame q = games::make_quadratic_game(cfg.a_coef, cfg.b_coef, cfg.c_coef);
  std::array<double, 1> x0 = {cfg.x0}, y0 = {cfg.y0};
  QuadraticResult result;
  result.state = optimizers::make_state(x0, y0);
  result.verdict = "budget-exhausted";
  result.trajectory.param_columns = {"x_0", "y_0"};
  result.trajectory.extra_columns = {"norm"};

  optimizers::AcgdHyper acgd{cfg.acgd_alpha, cfg.acgd_beta2, cfg.acgd_eps};
  for (std::int64_t i = 0; i < cfg.iters; ++i) {
    bool record = (i % cfg.stride == 0);
    double px = result.state.x[0], py = result.state.y[0];
    optimizers::StepReport rep;
    switch (opt) {
      case detail::OptChoice::simgd:
        rep = optimizers::simgd_step(q.game, result.state, {cfg.eta_x, cfg.eta_y});
        break;
      case detail::OptChoice::cgd:
        rep = optimizers::cgd_step(q.game, result.state, cfg.eta_x);
        break;
      default:
        rep = optimizers::acgd_step(q.game, result.state, acgd);
        break;
    }
    result.steps_taken = i + 1;
    if (record) {
      result.trajectory.add_row({i, rep.loss_before, rep.grad_norm_x, rep.grad_norm_y,
                                 {px, py},
                                 {std::sqrt(px * px + py * py)}});
    }
    if (rep.diverged) {
      result.verdict = "diverged";
      break;
    }
    double norm = optimizers::combined_param_norm(result.state);
    if (result.first_iteration_norm_above_10 < 0 && norm > 10.0) {
      result.first_iteration_norm_above_10 = i + 1;
    }
    if (norm < kConvergedNorm) {
      result.verdict = "converged";
      result.steps_to_converge = i + 1;
      break;
    }
    if (norm > optimizers::kDivergenceCutoff) {
      result.verdict = "diverged";
      break;
    }
  }
  result.final_norm = optimizers::combined_param_norm(result.state);
  result.final_loss = result.state.diverged
                          ? std::numeric_limits<double>::quiet_NaN()
                          : detail::payoff_value(q.game, result.state.x, result.state.y);

  if (!cfg.out_dir.empty()) {
    std::filesystem::path dir = detail::ensure_out_dir(cfg.out_dir);
    detail::write_text_file(dir / "config.txt", serialize_config(cfg));
    detail::write_text_file(dir / "trajectory.csv", result.trajectory.to_csv());
    nlohmann::json j;
    j["kind"] = cfg.kind;
    j["optimizer"] = cfg.optimizer;
    j["seed"] = cfg.seed;
    j["eta_x"] = cfg.eta_x;
    j["eta_y"] = cfg.eta_y;
    j["iters"] = cfg.iters;
    j["verdict"] = result.verdict;
    j["steps_taken"] = result.steps_taken;
    j["steps_to_converge"] = result.steps_to_converge;
    j["first_iteration_norm_above_10"] = result.first_iteration_norm_above_10;
    j["final_norm"] = result.final_norm;
    j["final_loss"] = result.final_loss;
    detail::write_text_file(dir / "summary.json", j.dump(2) + "\n");
    std::ostringstream dat;
    dat.precision(17);
    dat << "# iteration norm\n";
    for (const TrajectoryRow& r : result.trajectory.rows) {
      dat << r.iteration << ' ' << r.extras[0] << '\n';
    }
    detail::write_text_file(dir / "fig_quadratic.dat", dat.str());
  }
  return result;
}

// --- Projection experiment ---------------------------------------------------

struct ProjectionRunResult {
  int run_index = 0;
  std::uint64_t run_seed = 0;
  bool diverged = false;
  Trajectory trajectory;
  std::vector<MetastabilitySegment> segments;
};

struct ProjectionAggregate {
  std::string optimizer;
  std::string eta_mode;
  int n_runs = 0;
  int runs_with_segment = 0;
  int total_segments = 0;
  double fraction_metastable = 0.0;
  double mean_segment_duration = 0.0;  // recorded rows, averaged over segments
  std::vector<ProjectionRunResult> runs;
};

namespace detail {

inline std::array<double, 2> projection_eta(const ExperimentConfig& cfg) {
  if (cfg.eta_mode == "identity") return {1.0, 1.0};
  if (cfg.eta_mode == "aniso") return {1.0, 1e-2};
  if (cfg.eta_mode == "custom") return {cfg.eta_d1, cfg.eta_d2};
  throw std::runtime_error("unknown eta_mode '" + cfg.eta_mode + "'");
}

inline ProjectionRunResult run_one_projection(const ExperimentConfig& cfg,
                                              std::array<double, 2> eta_diag, OptChoice opt,
                                              int run_index) {
  ProjectionRunResult result;
  result.run_index = run_index;
  result.run_seed = rng::derive_stream_seed(cfg.seed, "run-" + std::to_string(run_index));
  games::ProjectionGame game(eta_diag, {cfg.target, cfg.target});
  std::mt19937_64 init_rng = rng::make_stream(result.run_seed, "init");
  auto [wg, wd] = game.init_params(init_rng);
  optimizers::OptimizerState state = optimizers::make_state(wg, wd);
  result.trajectory.param_columns = {"param_norm_x", "param_norm_y"};
  result.trajectory.extra_columns = {"g1", "g2"};

  optimizers::AcgdHyper acgd{cfg.acgd_alpha, cfg.acgd_beta2, cfg.acgd_eps};
  optimizers::AdamHyper adam{cfg.adam_alpha, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};
  for (std::int64_t i = 0; i < cfg.iters; ++i) {
    bool record = (i % cfg.stride == 0);
    double pnx = 0.0, pny = 0.0;
    std::array<double, 2> gen = {0.0, 0.0};
    if (record) {
      pnx = norm2(state.x);
      pny = norm2(state.y);
      gen = game.generator_output(state.x);
    }
    optimizers::StepReport rep;
    switch (opt) {
      case OptChoice::simgd:
        rep = optimizers::simgd_step(game.game(), state, {cfg.eta_x, cfg.eta_y});
        break;
      case OptChoice::cgd:
        rep = optimizers::cgd_step(game.game(), state, cfg.eta_x);
        break;
      case OptChoice::acgd:
        rep = optimizers::acgd_step(game.game(), state, acgd);
        break;
      case OptChoice::adam:
        rep = optimizers::adam_step_simultaneous(game.game(), state, adam);
        break;
    }
    if (record) {
      result.trajectory.add_row({i, rep.loss_before, rep.grad_norm_x, rep.grad_norm_y,
                                 {pnx, pny},
                                 {gen[0], gen[1]}});
    }
    if (rep.diverged || optimizers::combined_param_norm(state) > optimizers::kDivergenceCutoff) {
      result.diverged = true;
      break;
    }
  }
  result.segments =
      detect_metastable_segments(result.trajectory, 0, cfg.target, cfg.rel_tol, cfg.min_len);
  return result;
}

}  // namespace detail

inline ProjectionAggregate run_projection(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  detail::require_kind(cfg, "projection");
  apply_kind_defaults(cfg);
  detail::validate_budget(cfg);
  if (cfg.n_runs < 1) throw std::runtime_error("projection: n_runs must be >= 1");
  detail::OptChoice opt = detail::parse_optimizer(cfg.optimizer);
  std::array<double, 2> eta_diag = detail::projection_eta(cfg);

  ProjectionAggregate agg;
  agg.optimizer = cfg.optimizer;
  agg.eta_mode = cfg.eta_mode;
  agg.n_runs = cfg.n_runs;
  std::vector<std::future<ProjectionRunResult>> futures;
  futures.reserve(static_cast<std::size_t>(cfg.n_runs));
  for (int k = 0; k < cfg.n_runs; ++k) {
    futures.push_back(std::async(std::launch::async, detail::run_one_projection, std::cref(cfg),
                                 eta_diag, opt, k));
  }
  std::int64_t duration_sum = 0;
  for (int k = 0; k < cfg.n_runs; ++k) {
    ProjectionRunResult r = futures[static_cast<std::size_t>(k)].get();
    if (!r.segments.empty()) agg.runs_with_segment += 1;
    agg.total_segments += static_cast<int>(r.segments.size());
    for (const MetastabilitySegment& s : r.segments) duration_sum += s.length();
    agg.runs.push_back(std::move(r));
  }
  agg.fraction_metastable = static_cast<double>(agg.runs_with_segment) / cfg.n_runs;
  agg.mean_segment_duration =
      agg.total_segments == 0 ? 0.0
                              : static_cast<double>(duration_sum) / agg.total_segments;

  if (!cfg.out_dir.empty()) {
    std::filesystem::path dir = detail::ensure_out_dir(cfg.out_dir);
    detail::write_text_file(dir / "config.txt", serialize_config(cfg));
    nlohmann::json j;
    j["kind"] = cfg.kind;
    j["optimizer"] = cfg.optimizer;
    j["eta_mode"] = cfg.eta_mode;
    j["n_runs"] = cfg.n_runs;
    j["iters"] = cfg.iters;
    j["stride"] = cfg.stride;
    j["target"] = cfg.target;
    j["rel_tol"] = cfg.rel_tol;
    j["min_len"] = cfg.min_len;
    j["fraction_metastable"] = agg.fraction_metastable;
    j["runs_with_segment"] = agg.runs_with_segment;
    j["total_segments"] = agg.total_segments;
    j["mean_segment_duration"] = agg.mean_segment_duration;
    j["runs"] = nlohmann::json::array();
    for (const ProjectionRunResult& r : agg.runs) {
      nlohmann::json jr;
      jr["run_index"] = r.run_index;
      jr["seed"] = r.run_seed;
      jr["diverged"] = r.diverged;
      jr["n_segments"] = r.segments.size();
      jr["segments"] = nlohmann::json::array();
      for (const MetastabilitySegment& s : r.segments) {
        jr["segments"].push_back({{"start_iteration", s.start_iteration},
                                  {"end_iteration", s.end_iteration},
                                  {"length_rows", s.length()},
                                  {"mean_abs_deviation", s.mean_abs_deviation}});
      }
      j["runs"].push_back(std::move(jr));
      detail::write_text_file(
          dir / ("run" + std::to_string(r.run_index) + "_trajectory.csv"),
          r.trajectory.to_csv());
    }
    detail::write_text_file(dir / "aggregate.json", j.dump(2) + "\n");
    if (!agg.runs.empty()) {
      std::ostringstream dat;
      dat.precision(17);
      dat << "# iteration g1\n";
      for (const TrajectoryRow& r : agg.runs[0].trajectory.rows) {
        dat << r.iteration << ' ' << r.extras[0] << '\n';
      }
      detail::write_text_file(dir / "fig_projection.dat", dat.str());
    }
  }
  return agg;
}

// --- Synthetic GAN experiment ------------------------------------------------

struct SynthganResult {
  std::string verdict;  // completed | diverged
  std::int64_t steps_taken = 0;
  double final_eval_loss = 0.0;
  Trajectory trajectory;
  std::vector<std::array<double, 2>> final_samples;
  optimizers::OptimizerState state;
  std::string checkpoint_file;
};

inline SynthganResult run_synthgan(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  detail::require_kind(cfg, "synthgan");
  apply_kind_defaults(cfg);
  detail::validate_budget(cfg);
  detail::OptChoice opt = detail::parse_optimizer(cfg.optimizer);
  games::GanLoss loss;
  if (cfg.loss == "ogan") loss = games::GanLoss::ogan;
  else if (cfg.loss == "wgan") loss = games::GanLoss::wgan;
  else throw std::runtime_error("unknown loss '" + cfg.loss + "'");
  if (cfg.batch_size < 1 || cfg.dataset_size < 1 || cfg.modes < 1) {
    throw std::runtime_error("synthgan: batch_size, dataset_size, modes must be >= 1");
  }

  games::SynthGanConfig gcfg{cfg.batch_size, cfg.dataset_size, cfg.modes, cfg.ring_radius,
                             cfg.mode_std};
  games::SynthGanGame game(loss, cfg.seed, gcfg);
  std::mt19937_64 init_rng = rng::make_stream(cfg.seed, "init");
  auto [wg, wd] = game.init_params(init_rng);
  SynthganResult result;
  result.state = optimizers::make_state(wg, wd);
  result.verdict = "completed";
  result.trajectory.param_columns = {"param_norm_x", "param_norm_y"};

  std::mt19937_64 mb_rng = rng::make_stream(cfg.seed, "minibatch");
  std::mt19937_64 eval_rng = rng::make_stream(cfg.seed, "eval");
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::array<double, 2>> eval_latents(64);
  for (std::array<double, 2>& z : eval_latents) z = {gauss(eval_rng), gauss(eval_rng)};

  std::ostringstream samples_csv;
  samples_csv.precision(17);
  samples_csv << "iteration,sample_index,x,y\n";
  auto dump_samples = [&](std::int64_t iteration, std::span<const double> gen_params,
                          std::vector<std::array<double, 2>>* keep) {
    for (std::size_t s = 0; s < eval_latents.size(); ++s) {
      std::array<double, 2> p = game.generator_sample(gen_params, eval_latents[s]);
      samples_csv << iteration << ',' << s << ',' << p[0] << ',' << p[1] << '\n';
      if (keep != nullptr) keep->push_back(p);
    }
  };

  optimizers::AcgdHyper acgd{cfg.acgd_alpha, cfg.acgd_beta2, cfg.acgd_eps};
  optimizers::AdamHyper adam{cfg.adam_alpha, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};
  const autodiff::Graph* min_obj =
      (cfg.log_trick && loss == games::GanLoss::ogan) ? &game.nonsat_graph() : nullptr;
  for (std::int64_t i = 0; i < cfg.iters; ++i) {
    games::Minibatch mb = game.sample_minibatch(mb_rng);
    std::vector<autodiff::ParamGroup> extra = game.minibatch_groups(mb);
    bool record = (i % cfg.stride == 0);
    double pnx = 0.0, pny = 0.0;
    if (record) {
      pnx = detail::norm2(result.state.x);
      pny = detail::norm2(result.state.y);
      dump_samples(i, result.state.x, nullptr);
    }
    optimizers::StepReport rep;
    switch (opt) {
      case detail::OptChoice::adam:
        rep = optimizers::adam_step_simultaneous(game.game(), result.state, adam, extra, min_obj);
        break;
      case detail::OptChoice::simgd:
        rep = optimizers::simgd_step(game.game(), result.state, {cfg.eta_x, cfg.eta_y}, extra);
        break;
      case detail::OptChoice::cgd:
        rep = optimizers::cgd_step(game.game(), result.state, cfg.eta_x, extra);
        break;
      case detail::OptChoice::acgd:
        rep = optimizers::acgd_step(game.game(), result.state, acgd, extra);
        break;
    }
    result.steps_taken = i + 1;
    if (record) {
      result.trajectory.add_row(
          {i, rep.loss_before, rep.grad_norm_x, rep.grad_norm_y, {pnx, pny}, {}});
    }
    if (rep.diverged ||
        optimizers::combined_param_norm(result.state) > optimizers::kDivergenceCutoff) {
      result.verdict = "diverged";
      break;
    }
  }
  dump_samples(result.steps_taken, result.state.x, &result.final_samples);
  games::Minibatch eval_mb = detail::make_eval_batch(game, cfg.seed);
  std::vector<autodiff::ParamGroup> eval_groups = game.minibatch_groups(eval_mb);
  result.final_eval_loss = result.state.diverged
                               ? std::numeric_limits<double>::quiet_NaN()
                               : detail::payoff_value(game.game(), result.state.x, result.state.y,
                                                      eval_groups);

  if (!cfg.out_dir.empty()) {
    std::filesystem::path dir = detail::ensure_out_dir(cfg.out_dir);
    detail::write_text_file(dir / "config.txt", serialize_config(cfg));
    detail::write_text_file(dir / "trajectory.csv", result.trajectory.to_csv());
    detail::write_text_file(dir / "samples.csv", samples_csv.str());
    Checkpoint ckpt;
    ckpt.state = result.state;
    ckpt.streams["minibatch"] = mb_rng;
    std::filesystem::path ckpt_path = dir / "checkpoint.txt";
    save_checkpoint(ckpt_path.string(), ckpt);
    result.checkpoint_file = ckpt_path.string();
    nlohmann::json j;
    j["kind"] = cfg.kind;
    j["optimizer"] = cfg.optimizer;
    j["loss"] = cfg.loss;
    j["seed"] = cfg.seed;
    j["iters"] = cfg.iters;
    j["verdict"] = result.verdict;
    j["steps_taken"] = result.steps_taken;
    j["final_eval_loss"] = result.final_eval_loss;
    j["checkpoint"] = result.checkpoint_file;
    detail::write_text_file(dir / "summary.json", j.dump(2) + "\n");
    std::ostringstream dat;
    dat.precision(17);
    dat << "# iteration loss\n";
    for (const TrajectoryRow& r : result.trajectory.rows) dat << r.iteration << ' ' << r.loss << '\n';
    detail::write_text_file(dir / "fig_synthgan.dat", dat.str());
  }
  return result;
}

// --- Freeze experiment ---------------------------------------------------

struct FreezeBranchMetrics {
  double disc_loss_start = 0.0;
  double disc_loss_end = 0.0;
  double improvement = 0.0;  // disc_loss_start - disc_loss_end
  double prediction_distance = 0.0;
  double param_distance_x = 0.0;
  double param_distance_y = 0.0;
};

struct FreezeResult {
  std::string game_kind;
  std::int64_t steps = 0;
  FreezeBranchMetrics joint;
  FreezeBranchMetrics frozen;
  bool property_holds = false;
};

namespace detail {

struct FreezeCurves {
  std::vector<std::int64_t> iterations;
  std::vector<double> joint_disc_loss;
  std::vector<double> frozen_disc_loss;
};

// Runs one branch for K steps. trained_only selects the frozen-discriminator
// branch; otherwise both players train jointly.
template <class SampleExtra>
optimizers::OptimizerState run_freeze_branch(
    const games::ZeroSumGame& game, const optimizers::OptimizerState& start, bool trained_only,
    OptChoice opt, const ExperimentConfig& cfg, std::int64_t steps, SampleExtra&& sample_extra,
    const std::function<double(const optimizers::OptimizerState&)>& disc_loss,
    std::vector<std::int64_t>* iterations, std::vector<double>* losses) {
  optimizers::OptimizerState state = start;
  optimizers::AdamHyper adam{cfg.adam_alpha, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};
  auto maybe_record = [&](std::int64_t iter) {
    if (losses == nullptr) return;
    if (iter % cfg.stride == 0 || iter == steps) {
      if (iterations != nullptr) iterations->push_back(iter);
      losses->push_back(disc_loss(state));
    }
  };
  maybe_record(0);
  for (std::int64_t i = 1; i <= steps; ++i) {
    std::vector<autodiff::ParamGroup> extra = sample_extra();
    optimizers::StepReport rep;
    if (trained_only) {
      if (opt == OptChoice::adam) {
        rep = optimizers::adam_step(game, state, optimizers::Player::y, adam, extra);
      } else {
        rep = optimizers::frozen_step(game, state, optimizers::Player::y, cfg.freeze_eta, extra);
      }
    } else {
      if (opt == OptChoice::adam) {
        rep = optimizers::adam_step_simultaneous(game, state, adam, extra);
      } else {
        rep = optimizers::simgd_step(game, state, {cfg.freeze_eta, cfg.freeze_eta}, extra);
      }
    }
    if (rep.diverged) break;
    maybe_record(i);
  }
  return state;
}

inline FreezeBranchMetrics freeze_metrics(
    const optimizers::OptimizerState& branch, const optimizers::OptimizerState& ckpt,
    double disc_loss_start, double disc_loss_end,
    const std::vector<double>& branch_outputs, const std::vector<double>& ckpt_outputs) {
  FreezeBranchMetrics m;
  m.disc_loss_start = disc_loss_start;
  m.disc_loss_end = disc_loss_end;
  m.improvement = disc_loss_start - disc_loss_end;
  m.prediction_distance = harness::prediction_distance(branch_outputs, ckpt_outputs);
  std::vector<double> dx(branch.x.size()), dy(branch.y.size());
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = branch.x[i] - ckpt.x[i];
  for (std::size_t i = 0; i < dy.size(); ++i) dy[i] = branch.y[i] - ckpt.y[i];
  m.param_distance_x = norm2(dx);
  m.param_distance_y = norm2(dy);
  return m;
}

}  // namespace detail

inline FreezeResult run_freeze(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  detail::require_kind(cfg, "freeze");
  apply_kind_defaults(cfg);
  if (cfg.stride < 1) throw std::runtime_error("stride must be >= 1");
  if (cfg.freeze_steps < 0) throw std::runtime_error("freeze_steps must be >= 0");
  detail::OptChoice opt = detail::parse_optimizer(cfg.optimizer);
  if (opt != detail::OptChoice::simgd && opt != detail::OptChoice::adam) {
    throw std::runtime_error("freeze runner supports simgd and adam");
  }

  FreezeResult result;
  result.game_kind = cfg.game;
  result.steps = cfg.freeze_steps;
  detail::FreezeCurves curves;

  // Fills result.joint/result.frozen. Must run while the game object the
  // closures capture is still alive.
  auto finalize = [&result](
                      const std::function<double(const optimizers::OptimizerState&)>& dl,
                      const std::function<std::vector<double>(const optimizers::OptimizerState&)>&
                          dout,
                      const optimizers::OptimizerState& joint_state,
                      const optimizers::OptimizerState& frozen_state,
                      const optimizers::OptimizerState& ckpt_state) {
    double start_loss = dl(ckpt_state);
    std::vector<double> ckpt_outputs = dout(ckpt_state);
    result.joint = detail::freeze_metrics(joint_state, ckpt_state, start_loss, dl(joint_state),
                                          dout(joint_state), ckpt_outputs);
    result.frozen = detail::freeze_metrics(frozen_state, ckpt_state, start_loss, dl(frozen_state),
                                           dout(frozen_state), ckpt_outputs);
  };

  if (cfg.game == "projection") {
    games::ProjectionGame game(detail::projection_eta(cfg), {cfg.target, cfg.target});
    Checkpoint ckpt;
    if (!cfg.checkpoint_path.empty()) {
      ckpt = load_checkpoint(cfg.checkpoint_path);
    } else if (cfg.warmup_iters > 0) {
      std::mt19937_64 init_rng = rng::make_stream(cfg.seed, "init");
      auto [wg, wd] = game.init_params(init_rng);
      ckpt.state = optimizers::make_state(wg, wd);
      auto no_extra = []() { return std::vector<autodiff::ParamGroup>{}; };
      ckpt.state = detail::run_freeze_branch(game.game(), ckpt.state, /*trained_only=*/false, opt,
                                             cfg, cfg.warmup_iters, no_extra, nullptr, nullptr,
                                             nullptr);
    } else {
      throw std::runtime_error(
          "freeze: set checkpoint_path to a joint-run checkpoint or warmup_iters > 0");
    }

    std::mt19937_64 ref_rng = rng::make_stream(cfg.seed, "reference");
    std::uniform_real_distribution<double> u(0.0, 3.0);
    std::vector<std::array<double, 2>> refs(16);
    for (std::array<double, 2>& p : refs) p = {u(ref_rng), u(ref_rng)};
    std::function<double(const optimizers::OptimizerState&)> disc_loss =
        [&game](const optimizers::OptimizerState& s) {
          return -detail::payoff_value(game.game(), s.x, s.y);
        };
    std::function<std::vector<double>(const optimizers::OptimizerState&)> disc_outputs =
        [&game, refs](const optimizers::OptimizerState& s) {
          std::vector<double> out;
          out.reserve(refs.size());
          for (const std::array<double, 2>& p : refs) {
            out.push_back(game.discriminator_output(s.y, p));
          }
          return out;
        };

    auto no_extra = []() { return std::vector<autodiff::ParamGroup>{}; };
    optimizers::OptimizerState joint_state = detail::run_freeze_branch(
        game.game(), ckpt.state, false, opt, cfg, cfg.freeze_steps, no_extra, disc_loss,
        &curves.iterations, &curves.joint_disc_loss);
    optimizers::OptimizerState frozen_state = detail::run_freeze_branch(
        game.game(), ckpt.state, true, opt, cfg, cfg.freeze_steps, no_extra, disc_loss, nullptr,
        &curves.frozen_disc_loss);
    finalize(disc_loss, disc_outputs, joint_state, frozen_state, ckpt.state);
  } else if (cfg.game == "synthgan") {
    games::GanLoss loss;
    if (cfg.loss == "ogan") loss = games::GanLoss::ogan;
    else if (cfg.loss == "wgan") loss = games::GanLoss::wgan;
    else throw std::runtime_error("unknown loss '" + cfg.loss + "'");
    games::SynthGanConfig gcfg{cfg.batch_size, cfg.dataset_size, cfg.modes, cfg.ring_radius,
                               cfg.mode_std};
    games::SynthGanGame game(loss, cfg.seed, gcfg);

    Checkpoint ckpt;
    std::mt19937_64 warm_mb_rng = rng::make_stream(cfg.seed, "minibatch");
    if (!cfg.checkpoint_path.empty()) {
      ckpt = load_checkpoint(cfg.checkpoint_path);
    } else if (cfg.warmup_iters > 0) {
      std::mt19937_64 init_rng = rng::make_stream(cfg.seed, "init");
      auto [wg, wd] = game.init_params(init_rng);
      ckpt.state = optimizers::make_state(wg, wd);
      auto warm_extra = [&game, &warm_mb_rng]() {
        return game.minibatch_groups(game.sample_minibatch(warm_mb_rng));
      };
      ckpt.state = detail::run_freeze_branch(game.game(), ckpt.state, false, opt, cfg,
                                             cfg.warmup_iters, warm_extra, nullptr, nullptr,
                                             nullptr);
      ckpt.streams["minibatch"] = warm_mb_rng;
    } else {
      throw std::runtime_error(
          "freeze: set checkpoint_path to a joint-run checkpoint or warmup_iters > 0");
    }
    std::mt19937_64 branch_rng = ckpt.streams.count("minibatch")
                                     ? ckpt.streams.at("minibatch")
                                     : rng::make_stream(cfg.seed, "freeze-minibatch");

    games::Minibatch eval_mb = detail::make_eval_batch(game, cfg.seed);
    std::vector<autodiff::ParamGroup> eval_groups = game.minibatch_groups(eval_mb);
    std::function<double(const optimizers::OptimizerState&)> disc_loss =
        [&game, eval_groups](const optimizers::OptimizerState& s) {
          return -detail::payoff_value(game.game(), s.x, s.y, eval_groups);
        };

    std::mt19937_64 ref_rng = rng::make_stream(cfg.seed, "reference");
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::array<double, 2>> refs;
    for (int i = 0; i < 32; ++i) {
      refs.push_back(game.dataset()[static_cast<std::size_t>(i) % game.dataset().size()]);
    }
    for (int i = 0; i < 32; ++i) {
      std::array<double, 2> z = {gauss(ref_rng), gauss(ref_rng)};
      refs.push_back(game.generator_sample(ckpt.state.x, z));
    }
    bool prob_head = loss == games::GanLoss::ogan;
    std::function<std::vector<double>(const optimizers::OptimizerState&)> disc_outputs =
        [&game, refs, prob_head](const optimizers::OptimizerState& s) {
          std::vector<double> out;
          out.reserve(refs.size());
          for (const std::array<double, 2>& p : refs) {
            out.push_back(prob_head ? game.discriminator_prob(s.y, p)
                                    : game.discriminator_raw(s.y, p));
          }
          return out;
        };

    // Both branches consume identical minibatch sequences (cloned stream).
    std::mt19937_64 joint_rng = branch_rng, frozen_rng = branch_rng;
    auto joint_extra = [&game, &joint_rng]() {
      return game.minibatch_groups(game.sample_minibatch(joint_rng));
    };
    auto frozen_extra = [&game, &frozen_rng]() {
      return game.minibatch_groups(game.sample_minibatch(frozen_rng));
    };
    optimizers::OptimizerState joint_state = detail::run_freeze_branch(
        game.game(), ckpt.state, false, opt, cfg, cfg.freeze_steps, joint_extra, disc_loss,
        &curves.iterations, &curves.joint_disc_loss);
    optimizers::OptimizerState frozen_state = detail::run_freeze_branch(
        game.game(), ckpt.state, true, opt, cfg, cfg.freeze_steps, frozen_extra, disc_loss,
        nullptr, &curves.frozen_disc_loss);
    finalize(disc_loss, disc_outputs, joint_state, frozen_state, ckpt.state);
  } else {
    throw std::runtime_error("freeze: game must be projection or synthgan");
  }

  result.property_holds = result.frozen.improvement > result.joint.improvement &&
                          result.frozen.prediction_distance > result.joint.prediction_distance;

  if (!cfg.out_dir.empty()) {
    std::filesystem::path dir = detail::ensure_out_dir(cfg.out_dir);
    detail::write_text_file(dir / "config.txt", serialize_config(cfg));
    std::ostringstream csv;
    csv.precision(17);
    csv << "iteration,joint_disc_loss,frozen_disc_loss\n";
    // A diverged branch stops recording early; emit only complete rows.
    std::size_t n_rows = std::min({curves.iterations.size(), curves.joint_disc_loss.size(),
                                   curves.frozen_disc_loss.size()});
    for (std::size_t i = 0; i < n_rows; ++i) {
      csv << curves.iterations[i] << ',' << curves.joint_disc_loss[i] << ','
          << curves.frozen_disc_loss[i] << '\n';
    }
    detail::write_text_file(dir / "freeze_curves.csv", csv.str());
    auto branch_json = [](const FreezeBranchMetrics& m) {
      return nlohmann::json{{"disc_loss_start", m.disc_loss_start},
                            {"disc_loss_end", m.disc_loss_end},
                            {"improvement", m.improvement},
                            {"prediction_distance", m.prediction_distance},
                            {"param_distance_x", m.param_distance_x},
                            {"param_distance_y", m.param_distance_y}};
    };
    nlohmann::json j;
    j["kind"] = cfg.kind;
    j["game"] = cfg.game;
    j["seed"] = cfg.seed;
    j["optimizer"] = cfg.optimizer;
    j["freeze_steps"] = cfg.freeze_steps;
    j["freeze_eta"] = cfg.freeze_eta;
    j["joint"] = branch_json(result.joint);
    j["frozen"] = branch_json(result.frozen);
    j["property_holds"] = result.property_holds;
    detail::write_text_file(dir / "report.json", j.dump(2) + "\n");
    std::ostringstream dj, df;
    dj.precision(17);
    df.precision(17);
    dj << "# iteration joint_disc_loss\n";
    df << "# iteration frozen_disc_loss\n";
    for (std::size_t i = 0; i < n_rows; ++i) {
      dj << curves.iterations[i] << ' ' << curves.joint_disc_loss[i] << '\n';
      df << curves.iterations[i] << ' ' << curves.frozen_disc_loss[i] << '\n';
    }
    detail::write_text_file(dir / "fig_freeze_joint.dat", dj.str());
    detail::write_text_file(dir / "fig_freeze_frozen.dat", df.str());
  }
  return result;
}

// --- Stability map -------------------------------------------------------

struct StabilityMapResult {
  stability::SweepGrid grid;
  std::string csv;
};

inline StabilityMapResult run_stability_map(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  detail::require_kind(cfg, "stability-map");
  apply_kind_defaults(cfg);
  std::vector<double> xs = detail::parse_double_list(cfg.eta_x_list);
  std::vector<double> ys = detail::parse_double_list(cfg.eta_y_list);
  if (xs.empty()) xs.assign(kDefaultEtaGrid.begin(), kDefaultEtaGrid.end());
  if (ys.empty()) ys.assign(kDefaultEtaGrid.begin(), kDefaultEtaGrid.end());
  stability::OptimizerKind kind;
  if (cfg.optimizer == "simgd") kind = stability::OptimizerKind::simgd;
  else if (cfg.optimizer == "cgd") kind = stability::OptimizerKind::cgd;
  else throw std::runtime_error("stability-map supports simgd and cgd");

  games::QuadraticGame q = games::make_quadratic_game(cfg.a_coef, cfg.b_coef, cfg.c_coef);
  std::array<double, 1> x = {cfg.x0}, y = {cfg.y0};
  StabilityMapResult result;
  result.grid = stability::stability_sweep(q.game, kind, xs, ys, x, y);
  result.csv = result.grid.to_csv();

  if (!cfg.out_dir.empty()) {
    std::filesystem::path dir = detail::ensure_out_dir(cfg.out_dir);
    detail::write_text_file(dir / "config.txt", serialize_config(cfg));
    detail::write_text_file(dir / "sweep.csv", result.csv);
    int stable = 0, unstable = 0, marginal = 0;
    for (const stability::SweepGrid::Cell& c : result.grid.cells) {
      if (c.classification == stability::Classification::stable) ++stable;
      else if (c.classification == stability::Classification::unstable) ++unstable;
      else ++marginal;
    }
    nlohmann::json j;
    j["kind"] = cfg.kind;
    j["optimizer"] = cfg.optimizer;
    j["a_coef"] = cfg.a_coef;
    j["b_coef"] = cfg.b_coef;
    j["c_coef"] = cfg.c_coef;
    j["n_cells"] = result.grid.cells.size();
    j["n_stable"] = stable;
    j["n_unstable"] = unstable;
    j["n_marginal"] = marginal;
    detail::write_text_file(dir / "summary.json", j.dump(2) + "\n");
    std::ostringstream dat;
    dat.precision(17);
    dat << "# eta_x eta_y spectral_radius\n";
    for (const stability::SweepGrid::Cell& c : result.grid.cells) {
      dat << c.eta_x << ' ' << c.eta_y << ' ' << c.spectral_radius << '\n';
    }
    detail::write_text_file(dir / "fig_stability_map.dat", dat.str());
  }
  return result;
}

}  // namespace cgdlab::harness
