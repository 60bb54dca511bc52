// Command-line driver for the experiment runners.
//
// Exit codes: 0 on success, 2 when a run ends with a divergence verdict,
// 1 on any error (bad arguments, bad config, runtime failure).

#include <deque>
#include <exception>
#include <iostream>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>

#include "cgdlab/harness/config.hpp"
#include "cgdlab/harness/runners.hpp"

namespace {

using cgdlab::harness::ExperimentConfig;

// One CLI option mapped onto a config key. Values pass through the same
// strict parser as config files, so CLI and file accept identical syntax.
struct KeyOption {
  std::string key;
  std::string value;
  CLI::Option* opt = nullptr;
};

struct SubCommand {
  std::string kind;
  CLI::App* cmd = nullptr;
  std::string config_path;
  bool print_config = false;
  std::deque<KeyOption> options;  // deque: stable addresses for CLI11 bindings

  void add(const std::string& flag, const std::string& key, const std::string& desc) {
    options.push_back({key, "", nullptr});
    options.back().opt = cmd->add_option(flag, options.back().value, desc);
  }

  // File first, CLI overrides second. The subcommand decides the kind; a
  // kind= line in the file is ignored.
  ExperimentConfig resolve() const {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = cgdlab::harness::load_config_file(config_path);
    cfg.kind = kind;
    for (const KeyOption& o : options) {
      if (o.opt->count() > 0) cgdlab::harness::set_config_key(cfg, o.key, o.value);
    }
    return cfg;
  }
};

void add_common(SubCommand& sc) {
  sc.cmd->add_option("--config", sc.config_path, "key = value config file");
  sc.cmd->add_flag("--print-config", sc.print_config, "print the resolved config and exit");
  sc.add("--seed", "seed", "master seed");
  sc.add("--iters", "iters", "iteration budget");
  sc.add("--stride", "stride", "recording stride");
  sc.add("--out-dir", "out_dir", "artifact directory (no files written when unset)");
  sc.add("--optimizer", "optimizer", "simgd | cgd | acgd | adam");
  sc.add("--eta-x", "eta_x", "min-player step size");
  sc.add("--eta-y", "eta_y", "max-player step size");
}

void add_quadratic_coefs(SubCommand& sc) {
  sc.add("--a-coef", "a_coef", "coefficient of x^2");
  sc.add("--b-coef", "b_coef", "coefficient of x*y");
  sc.add("--c-coef", "c_coef", "coefficient of y^2");
  sc.add("--x0", "x0", "initial min-player value");
  sc.add("--y0", "y0", "initial max-player value");
}

void add_adam_acgd(SubCommand& sc) {
  sc.add("--adam-alpha", "adam_alpha", "adam step size");
  sc.add("--adam-beta1", "adam_beta1", "adam first-moment decay");
  sc.add("--adam-beta2", "adam_beta2", "adam second-moment decay");
  sc.add("--adam-eps", "adam_eps", "adam denominator floor");
  sc.add("--acgd-alpha", "acgd_alpha", "acgd step size");
  sc.add("--acgd-beta2", "acgd_beta2", "acgd second-moment decay");
  sc.add("--acgd-eps", "acgd_eps", "acgd denominator floor");
}

void add_gan_knobs(SubCommand& sc) {
  sc.add("--loss", "loss", "ogan | wgan");
  sc.add("--batch-size", "batch_size", "minibatch size");
  sc.add("--dataset-size", "dataset_size", "dataset size");
  sc.add("--modes", "modes", "ring mode count");
  sc.add("--ring-radius", "ring_radius", "ring radius");
  sc.add("--mode-std", "mode_std", "per-mode standard deviation");
  sc.add("--log-trick", "log_trick", "true | false: non-saturating generator objective");
}

int dispatch(const SubCommand& sc) {
  ExperimentConfig cfg = sc.resolve();
  if (sc.print_config) {
    cgdlab::harness::apply_kind_defaults(cfg);
    std::cout << cgdlab::harness::serialize_config(cfg);
    return 0;
  }
  std::cout.precision(10);
  if (sc.kind == "quadratic") {
    cgdlab::harness::QuadraticResult r = cgdlab::harness::run_quadratic(cfg);
    std::cout << "verdict=" << r.verdict << " steps=" << r.steps_taken
              << " final_norm=" << r.final_norm;
    if (r.steps_to_converge >= 0) std::cout << " steps_to_converge=" << r.steps_to_converge;
    if (r.first_iteration_norm_above_10 >= 0) {
      std::cout << " first_iteration_norm_above_10=" << r.first_iteration_norm_above_10;
    }
    std::cout << '\n';
    return r.verdict == "diverged" ? 2 : 0;
  }
  if (sc.kind == "projection") {
    cgdlab::harness::ProjectionAggregate agg = cgdlab::harness::run_projection(cfg);
    std::cout << "runs=" << agg.n_runs << " runs_with_segment=" << agg.runs_with_segment
              << " fraction_metastable=" << agg.fraction_metastable
              << " total_segments=" << agg.total_segments
              << " mean_segment_duration=" << agg.mean_segment_duration << '\n';
    return 0;
  }
  if (sc.kind == "synthgan") {
    cgdlab::harness::SynthganResult r = cgdlab::harness::run_synthgan(cfg);
    std::cout << "verdict=" << r.verdict << " steps=" << r.steps_taken
              << " final_eval_loss=" << r.final_eval_loss;
    if (!r.checkpoint_file.empty()) std::cout << " checkpoint=" << r.checkpoint_file;
    std::cout << '\n';
    return r.verdict == "diverged" ? 2 : 0;
  }
  if (sc.kind == "freeze") {
    cgdlab::harness::FreezeResult r = cgdlab::harness::run_freeze(cfg);
    std::cout << "joint: improvement=" << r.joint.improvement
              << " prediction_distance=" << r.joint.prediction_distance << '\n';
    std::cout << "frozen: improvement=" << r.frozen.improvement
              << " prediction_distance=" << r.frozen.prediction_distance << '\n';
    std::cout << "property_holds=" << (r.property_holds ? "true" : "false") << '\n';
    return 0;
  }
  if (sc.kind == "stability-map") {
    cgdlab::harness::StabilityMapResult r = cgdlab::harness::run_stability_map(cfg);
    if (cfg.out_dir.empty()) {
      std::cout << r.csv;
    } else {
      std::cout << "cells=" << r.grid.cells.size() << " written to " << cfg.out_dir << '\n';
    }
    return 0;
  }
  throw std::logic_error("unhandled subcommand '" + sc.kind + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Competitive-optimization experiment driver"};
  app.require_subcommand(1);
  std::deque<SubCommand> subs;

  auto make = [&](const std::string& kind, const std::string& desc) -> SubCommand& {
    subs.push_back({});
    SubCommand& sc = subs.back();
    sc.kind = kind;
    sc.cmd = app.add_subcommand(kind, desc);
    add_common(sc);
    return sc;
  };

  SubCommand& quad = make("quadratic", "bilinear-quadratic game run");
  add_quadratic_coefs(quad);
  add_adam_acgd(quad);

  SubCommand& proj = make("projection", "multi-run metastability experiment");
  proj.add("--n-runs", "n_runs", "number of independent runs");
  proj.add("--eta-mode", "eta_mode", "identity | aniso | custom");
  proj.add("--eta-d1", "eta_d1", "first diagonal entry for custom eta");
  proj.add("--eta-d2", "eta_d2", "second diagonal entry for custom eta");
  proj.add("--target", "target", "metastability target value");
  proj.add("--rel-tol", "rel_tol", "relative deviation tolerance");
  proj.add("--min-len", "min_len", "minimum segment length in rows");
  add_adam_acgd(proj);

  SubCommand& gan = make("synthgan", "synthetic two-dimensional GAN run");
  add_gan_knobs(gan);
  add_adam_acgd(gan);

  SubCommand& frz = make("freeze", "joint vs frozen-discriminator comparison");
  frz.add("--game", "game", "projection | synthgan");
  frz.add("--checkpoint", "checkpoint_path", "checkpoint file to branch from");
  frz.add("--warmup-iters", "warmup_iters", "joint warmup steps when no checkpoint is given");
  frz.add("--freeze-steps", "freeze_steps", "steps per branch");
  frz.add("--freeze-eta", "freeze_eta", "branch step size for simgd");
  frz.add("--eta-mode", "eta_mode", "identity | aniso | custom");
  frz.add("--eta-d1", "eta_d1", "first diagonal entry for custom eta");
  frz.add("--eta-d2", "eta_d2", "second diagonal entry for custom eta");
  frz.add("--target", "target", "projection target value");
  add_gan_knobs(frz);
  add_adam_acgd(frz);

  SubCommand& map = make("stability-map", "fixed-point stability sweep");
  add_quadratic_coefs(map);
  map.add("--eta-x-list", "eta_x_list", "comma-separated eta_x grid");
  map.add("--eta-y-list", "eta_y_list", "comma-separated eta_y grid");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    for (const SubCommand& sc : subs) {
      if (sc.cmd->parsed()) return dispatch(sc);
    }
    throw std::logic_error("no subcommand parsed");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
