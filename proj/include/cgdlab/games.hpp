#pragma once

// Every payoff in the lab, recorded as autodiff graphs:
//  - QuadraticGame: f(x, y) = a*x^2 + b*x*y + c*y^2 on scalar players.
//  - ProjectionGame: 28-parameter generator vs 28-parameter discriminator
//    with an anisotropic input metric and a one-point target distribution.
//  - SynthGanGame: tiny dense GAN on a 2-D Gaussian-ring dataset with the
//    original (sigmoid) and Wasserstein-style (raw) losses.
//
// Zero-sum convention: one scalar payoff per game; the minimizing player
// descends it and the maximizing player ascends it. No separate loss graph
// exists for the maximizing player.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cgdlab/autodiff.hpp"
#include "cgdlab/rng.hpp"

namespace cgdlab::games {

// A payoff plus the declared player partition. bound_constants are groups
// that must accompany every evaluation (game constants such as the input
// metric); per-step data (minibatches) are supplied by the caller on top.
struct ZeroSumGame {
  autodiff::Graph payoff;
  std::string min_group = "x";
  std::string max_group = "y";
  std::vector<autodiff::ParamGroup> bound_constants;
};

// Probability clamp for the sigmoid-head losses. Clamping the logit to
// +/- log((1-eps)/eps) is exactly equivalent to clamping the probability
// into [eps, 1-eps] (the sigmoid is monotone) and never overflows exp.
inline constexpr double kProbEps = 1e-7;

inline double logit_clamp_bound() { return std::log((1.0 - kProbEps) / kProbEps); }

namespace detail {

using autodiff::GraphBuilder;
using autodiff::NodeId;

// Dense layer out[r] = sum_c w[r*cols+c]*in[c] (+ bias[r] if given); weights
// are consumed row-major from `w` starting at `w_offset`.
inline std::vector<NodeId> dense(GraphBuilder& b, std::span<const NodeId> w, int w_offset,
                                 int rows, int cols, std::span<const NodeId> in,
                                 std::span<const NodeId> bias = {}) {
  std::vector<NodeId> out;
  out.reserve(static_cast<std::size_t>(rows));
  std::vector<std::pair<double, NodeId>> terms;
  for (int r = 0; r < rows; ++r) {
    terms.clear();
    for (int c = 0; c < cols; ++c) {
      terms.emplace_back(1.0, b.mul(w[static_cast<std::size_t>(w_offset + r * cols + c)],
                                    in[static_cast<std::size_t>(c)]));
    }
    if (!bias.empty()) terms.emplace_back(1.0, bias[static_cast<std::size_t>(r)]);
    out.push_back(b.affine(0.0, terms));
  }
  return out;
}

inline std::vector<NodeId> atan_all(GraphBuilder& b, std::span<const NodeId> xs) {
  std::vector<NodeId> out;
  out.reserve(xs.size());
  for (NodeId x : xs) out.push_back(b.atan(x));
  return out;
}

// softplus(u) = log(1 + exp(u)); finite for the clamped logits used below.
inline NodeId softplus(GraphBuilder& b, NodeId u) {
  return b.log(b.affine(1.0, {{1.0, b.exp(u)}}));
}

// --- 28-parameter projection nets ------------------------------------------

inline constexpr int kProjParams = 28;

// Generator: params 1-4 are the (fixed) inputs, arctan'd; then 4x4 dense +
// arctan; then 2x4 dense to (u, v); output (exp(atan(v)/pi + u),
// exp(atan(v)/pi - u)), which lands in {(e^{s+t}, e^{s-t}) : |s| <= 1/2}.
inline std::array<NodeId, 2> append_projection_generator(GraphBuilder& b,
                                                         std::span<const NodeId> w) {
  std::vector<NodeId> h1;
  for (int i = 0; i < 4; ++i) h1.push_back(b.atan(w[static_cast<std::size_t>(i)]));
  std::vector<NodeId> h2 = atan_all(b, dense(b, w, 4, 4, 4, h1));
  std::vector<NodeId> o = dense(b, w, 20, 2, 4, h2);
  NodeId s = b.scale(1.0 / 3.14159265358979323846, b.atan(o[1]));
  NodeId out0 = b.exp(b.add(s, o[0]));
  NodeId out1 = b.exp(b.sub(s, o[0]));
  return {out0, out1};
}

// Discriminator: input rescaled coordinate-wise by the metric nodes, then
// 4x2 dense + arctan, 4x4 dense + arctan, 1x4 dense + arctan.
inline NodeId append_projection_discriminator(GraphBuilder& b, std::span<const NodeId> w,
                                              std::array<NodeId, 2> point,
                                              std::array<NodeId, 2> metric) {
  std::vector<NodeId> q = {b.mul(metric[0], point[0]), b.mul(metric[1], point[1])};
  std::vector<NodeId> h1 = atan_all(b, dense(b, w, 0, 4, 2, q));
  std::vector<NodeId> h2 = atan_all(b, dense(b, w, 8, 4, 4, h1));
  return b.atan(dense(b, w, 24, 1, 4, h2)[0]);
}

inline autodiff::Graph build_projection_generator_graph(int comp) {
  GraphBuilder b;
  std::vector<NodeId> x = b.add_group("x", kProjParams);
  std::array<NodeId, 2> out = append_projection_generator(b, x);
  b.set_output(out[static_cast<std::size_t>(comp)]);
  return std::move(b).finish();
}

inline const autodiff::Graph& projection_generator_graph(int comp) {
  static const autodiff::Graph g0 = build_projection_generator_graph(0);
  static const autodiff::Graph g1 = build_projection_generator_graph(1);
  return comp == 0 ? g0 : g1;
}

inline const autodiff::Graph& projection_discriminator_graph() {
  static const autodiff::Graph g = [] {
    GraphBuilder b;
    std::vector<NodeId> y = b.add_group("y", kProjParams);
    std::vector<NodeId> p = b.add_group("p", 2);
    std::vector<NodeId> eta = b.add_group("eta", 2);
    b.set_output(append_projection_discriminator(b, y, {p[0], p[1]}, {eta[0], eta[1]}));
    return std::move(b).finish();
  }();
  return g;
}

inline const autodiff::Graph& projection_payoff_graph() {
  static const autodiff::Graph g = [] {
    GraphBuilder b;
    std::vector<NodeId> x = b.add_group("x", kProjParams);
    std::vector<NodeId> y = b.add_group("y", kProjParams);
    std::vector<NodeId> eta = b.add_group("eta", 2);
    std::vector<NodeId> pdata = b.add_group("pdata", 2);
    NodeId d_data =
        append_projection_discriminator(b, y, {pdata[0], pdata[1]}, {eta[0], eta[1]});
    std::array<NodeId, 2> gen = append_projection_generator(b, x);
    NodeId d_gen = append_projection_discriminator(b, y, gen, {eta[0], eta[1]});
    b.set_output(b.sub(d_data, d_gen));
    return std::move(b).finish();
  }();
  return g;
}

}  // namespace detail

// --- Quadratic game ---------------------------------------------------------

// f(x, y) = a_coef*x^2 + b_coef*x*y + c_coef*y^2 on scalar players, so the
// second derivatives are D_xx = 2*a_coef, D_xy = b_coef, D_yy = 2*c_coef.
struct QuadraticGame {
  double a_coef = 1.0;
  double b_coef = 10.0;
  double c_coef = 1.0;
  ZeroSumGame game;
};

inline QuadraticGame make_quadratic_game(double a_coef, double b_coef, double c_coef) {
  autodiff::GraphBuilder b;
  std::vector<autodiff::NodeId> x = b.add_group("x", 1);
  std::vector<autodiff::NodeId> y = b.add_group("y", 1);
  autodiff::NodeId xx = b.mul(x[0], x[0]);
  autodiff::NodeId xy = b.mul(x[0], y[0]);
  autodiff::NodeId yy = b.mul(y[0], y[0]);
  b.set_output(b.affine(0.0, {{a_coef, xx}, {b_coef, xy}, {c_coef, yy}}));
  QuadraticGame q;
  q.a_coef = a_coef;
  q.b_coef = b_coef;
  q.c_coef = c_coef;
  q.game.payoff = std::move(b).finish();
  return q;
}

// --- Projection game --------------------------------------------------------

// Generator output set: {(e^{s+t}, e^{s-t}) : s in [-1/2, 1/2], t real}.
// The component product e^{2s} stays in (1/e, e), so the one-point target
// (2, 2) (product 4) is unreachable and the game has no interior optimum.
class ProjectionGame {
 public:
  static constexpr int kParamCount = detail::kProjParams;

  explicit ProjectionGame(std::array<double, 2> eta_diag = {1.0, 1e-2},
                          std::array<double, 2> p_data = {2.0, 2.0})
      : eta_(eta_diag), p_data_(p_data) {
    game_.payoff = detail::projection_payoff_graph();
    game_.min_group = "x";
    game_.max_group = "y";
    game_.bound_constants = {
        {"eta", {eta_[0], eta_[1]}},
        {"pdata", {p_data_[0], p_data_[1]}},
    };
  }

  const ZeroSumGame& game() const { return game_; }
  std::array<double, 2> eta() const { return eta_; }
  std::array<double, 2> p_data() const { return p_data_; }

  std::array<double, 2> generator_output(std::span<const double> w_g) const {
    autodiff::ParamGroup x{"x", {w_g.begin(), w_g.end()}};
    std::array<autodiff::ParamGroup, 1> at = {x};
    return {autodiff::evaluate(detail::projection_generator_graph(0), at),
            autodiff::evaluate(detail::projection_generator_graph(1), at)};
  }

  double discriminator_output(std::span<const double> w_d, std::array<double, 2> point) const {
    std::array<autodiff::ParamGroup, 3> at = {
        autodiff::ParamGroup{"y", {w_d.begin(), w_d.end()}},
        autodiff::ParamGroup{"p", {point[0], point[1]}},
        autodiff::ParamGroup{"eta", {eta_[0], eta_[1]}},
    };
    return autodiff::evaluate(detail::projection_discriminator_graph(), at);
  }

  double loss(std::span<const double> w_g, std::span<const double> w_d) const {
    std::array<autodiff::ParamGroup, 4> at = {
        autodiff::ParamGroup{"x", {w_g.begin(), w_g.end()}},
        autodiff::ParamGroup{"y", {w_d.begin(), w_d.end()}},
        autodiff::ParamGroup{"eta", {eta_[0], eta_[1]}},
        autodiff::ParamGroup{"pdata", {p_data_[0], p_data_[1]}},
    };
    return autodiff::evaluate(detail::projection_payoff_graph(), at);
  }

  // Both nets: i.i.d. uniform(-1, 1) scaled by 1/sqrt(fan_in), layer by
  // layer in declaration order. The first four generator parameters act as
  // the (trainable) input layer with fan-in 1.
  std::pair<std::vector<double>, std::vector<double>> init_params(std::mt19937_64& stream) const {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> w_g(kParamCount), w_d(kParamCount);
    for (int i = 0; i < 4; ++i) w_g[static_cast<std::size_t>(i)] = u(stream);
    for (int i = 4; i < 20; ++i) w_g[static_cast<std::size_t>(i)] = u(stream) / 2.0;
    for (int i = 20; i < 28; ++i) w_g[static_cast<std::size_t>(i)] = u(stream) / 2.0;
    for (int i = 0; i < 8; ++i) w_d[static_cast<std::size_t>(i)] = u(stream) / std::sqrt(2.0);
    for (int i = 8; i < 24; ++i) w_d[static_cast<std::size_t>(i)] = u(stream) / 2.0;
    for (int i = 24; i < 28; ++i) w_d[static_cast<std::size_t>(i)] = u(stream) / 2.0;
    return {std::move(w_g), std::move(w_d)};
  }

 private:
  std::array<double, 2> eta_;
  std::array<double, 2> p_data_;
  ZeroSumGame game_;
};

// Spec-shaped free functions over the same recorded graphs.
inline std::array<double, 2> generator_forward(std::span<const double> w_g) {
  autodiff::ParamGroup x{"x", {w_g.begin(), w_g.end()}};
  std::array<autodiff::ParamGroup, 1> at = {x};
  return {autodiff::evaluate(detail::projection_generator_graph(0), at),
          autodiff::evaluate(detail::projection_generator_graph(1), at)};
}

inline double discriminator_forward(std::span<const double> w_d, std::array<double, 2> point,
                                    std::array<double, 2> eta_diag) {
  std::array<autodiff::ParamGroup, 3> at = {
      autodiff::ParamGroup{"y", {w_d.begin(), w_d.end()}},
      autodiff::ParamGroup{"p", {point[0], point[1]}},
      autodiff::ParamGroup{"eta", {eta_diag[0], eta_diag[1]}},
  };
  return autodiff::evaluate(detail::projection_discriminator_graph(), at);
}

inline double projection_loss(std::span<const double> w_g, std::span<const double> w_d,
                              std::array<double, 2> eta_diag,
                              std::array<double, 2> p_data = {2.0, 2.0}) {
  std::array<autodiff::ParamGroup, 4> at = {
      autodiff::ParamGroup{"x", {w_g.begin(), w_g.end()}},
      autodiff::ParamGroup{"y", {w_d.begin(), w_d.end()}},
      autodiff::ParamGroup{"eta", {eta_diag[0], eta_diag[1]}},
      autodiff::ParamGroup{"pdata", {p_data[0], p_data[1]}},
  };
  return autodiff::evaluate(detail::projection_payoff_graph(), at);
}

// --- Synthetic 2-D GAN ------------------------------------------------------

enum class GanLoss { ogan, wgan };

struct SynthGanConfig {
  int batch_size = 64;
  int dataset_size = 2000;
  int modes = 8;
  double ring_radius = 2.0;
  double mode_std = 0.05;
};

// One sampled step of data: real points and latent draws, both flattened as
// (x0, y0, x1, y1, ...).
struct Minibatch {
  std::vector<double> real_xy;
  std::vector<double> latent;
  int size = 0;
};

// Generator 2 -> 8 -> 8 -> 2 and discriminator 2 -> 8 -> 8 -> 1, arctan
// hidden activations, biases included, linear raw head. The sigmoid head for
// the OGAN loss is applied inside the loss graphs on clamped logits.
class SynthGanGame {
 public:
  static constexpr int kGenParams = 114;
  static constexpr int kDiscParams = 105;
  static constexpr int kLatentDim = 2;

  SynthGanGame(GanLoss loss, std::uint64_t dataset_seed, SynthGanConfig cfg = {})
      : loss_(loss), cfg_(cfg) {
    build_dataset(dataset_seed);
    ogan_payoff_ = build_batch_graph(BatchGraphKind::kOgan);
    wgan_payoff_ = build_batch_graph(BatchGraphKind::kWgan);
    nonsat_ = build_batch_graph(BatchGraphKind::kNonsat);
    gen_out_[0] = build_gen_graph(0);
    gen_out_[1] = build_gen_graph(1);
    disc_raw_ = build_disc_graph(/*prob=*/false);
    disc_prob_ = build_disc_graph(/*prob=*/true);
    game_.payoff = (loss_ == GanLoss::ogan) ? ogan_payoff_ : wgan_payoff_;
    game_.min_group = "x";
    game_.max_group = "y";
  }

  GanLoss loss() const { return loss_; }
  int batch_size() const { return cfg_.batch_size; }
  const SynthGanConfig& config() const { return cfg_; }
  const ZeroSumGame& game() const { return game_; }
  const autodiff::Graph& ogan_payoff_graph() const { return ogan_payoff_; }
  const autodiff::Graph& wgan_payoff_graph() const { return wgan_payoff_; }
  const autodiff::Graph& nonsat_graph() const { return nonsat_; }
  const std::vector<std::array<double, 2>>& dataset() const { return dataset_; }

  // Minibatch sampling uses a caller-supplied stream so parallel runs never
  // share generator state.
  Minibatch sample_minibatch(std::mt19937_64& stream) const {
    Minibatch mb;
    mb.size = cfg_.batch_size;
    mb.real_xy.reserve(static_cast<std::size_t>(2 * mb.size));
    mb.latent.reserve(static_cast<std::size_t>(2 * mb.size));
    std::uniform_int_distribution<int> pick(0, static_cast<int>(dataset_.size()) - 1);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int i = 0; i < mb.size; ++i) {
      const std::array<double, 2>& p = dataset_[static_cast<std::size_t>(pick(stream))];
      mb.real_xy.push_back(p[0]);
      mb.real_xy.push_back(p[1]);
    }
    for (int i = 0; i < 2 * mb.size; ++i) mb.latent.push_back(gauss(stream));
    return mb;
  }

  std::vector<autodiff::ParamGroup> minibatch_groups(const Minibatch& mb) const {
    return {{"X", mb.real_xy}, {"Z", mb.latent}};
  }

  // Weights uniform(-1, 1) / sqrt(fan_in), biases zero.
  std::pair<std::vector<double>, std::vector<double>> init_params(std::mt19937_64& stream) const {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto layer = [&](std::vector<double>& out, int rows, int cols) {
      double s = 1.0 / std::sqrt(static_cast<double>(cols));
      for (int i = 0; i < rows * cols; ++i) out.push_back(u(stream) * s);
      for (int i = 0; i < rows; ++i) out.push_back(0.0);
    };
    std::vector<double> gen, disc;
    layer(gen, 8, 2);
    layer(gen, 8, 8);
    layer(gen, 2, 8);
    layer(disc, 8, 2);
    layer(disc, 8, 8);
    layer(disc, 1, 8);
    return {std::move(gen), std::move(disc)};
  }

  std::array<double, 2> generator_sample(std::span<const double> gen_params,
                                         std::array<double, 2> z) const {
    std::array<autodiff::ParamGroup, 2> at = {
        autodiff::ParamGroup{"x", {gen_params.begin(), gen_params.end()}},
        autodiff::ParamGroup{"z", {z[0], z[1]}},
    };
    return {autodiff::evaluate(gen_out_[0], at), autodiff::evaluate(gen_out_[1], at)};
  }

  double discriminator_raw(std::span<const double> disc_params, std::array<double, 2> p) const {
    std::array<autodiff::ParamGroup, 2> at = {
        autodiff::ParamGroup{"y", {disc_params.begin(), disc_params.end()}},
        autodiff::ParamGroup{"p", {p[0], p[1]}},
    };
    return autodiff::evaluate(disc_raw_, at);
  }

  double discriminator_prob(std::span<const double> disc_params, std::array<double, 2> p) const {
    std::array<autodiff::ParamGroup, 2> at = {
        autodiff::ParamGroup{"y", {disc_params.begin(), disc_params.end()}},
        autodiff::ParamGroup{"p", {p[0], p[1]}},
    };
    return autodiff::evaluate(disc_prob_, at);
  }

 private:
  enum class BatchGraphKind { kOgan, kWgan, kNonsat };

  void build_dataset(std::uint64_t dataset_seed) {
    std::mt19937_64 stream = rng::make_stream(dataset_seed, "dataset");
    std::normal_distribution<double> gauss(0.0, cfg_.mode_std);
    dataset_.reserve(static_cast<std::size_t>(cfg_.dataset_size));
    for (int i = 0; i < cfg_.dataset_size; ++i) {
      int mode = i % cfg_.modes;
      double angle = 2.0 * 3.14159265358979323846 * mode / cfg_.modes;
      dataset_.push_back({cfg_.ring_radius * std::cos(angle) + gauss(stream),
                          cfg_.ring_radius * std::sin(angle) + gauss(stream)});
    }
  }

  // Generator branch shared by all batch graphs: layout W1(8x2) b1 W2(8x8)
  // b2 W3(2x8) b3.
  static std::array<autodiff::NodeId, 2> append_gen(autodiff::GraphBuilder& b,
                                                    std::span<const autodiff::NodeId> w,
                                                    std::array<autodiff::NodeId, 2> z) {
    std::vector<autodiff::NodeId> in = {z[0], z[1]};
    std::vector<autodiff::NodeId> h1 = detail::atan_all(
        b, detail::dense(b, w, 0, 8, 2, in, w.subspan(16, 8)));
    std::vector<autodiff::NodeId> h2 = detail::atan_all(
        b, detail::dense(b, w, 24, 8, 8, h1, w.subspan(88, 8)));
    std::vector<autodiff::NodeId> out = detail::dense(b, w, 96, 2, 8, h2, w.subspan(112, 2));
    return {out[0], out[1]};
  }

  // Discriminator raw head: layout W1(8x2) b1 W2(8x8) b2 W3(1x8) b3.
  static autodiff::NodeId append_disc_raw(autodiff::GraphBuilder& b,
                                          std::span<const autodiff::NodeId> w,
                                          std::array<autodiff::NodeId, 2> p) {
    std::vector<autodiff::NodeId> in = {p[0], p[1]};
    std::vector<autodiff::NodeId> h1 = detail::atan_all(
        b, detail::dense(b, w, 0, 8, 2, in, w.subspan(16, 8)));
    std::vector<autodiff::NodeId> h2 = detail::atan_all(
        b, detail::dense(b, w, 24, 8, 8, h1, w.subspan(88, 8)));
    return detail::dense(b, w, 96, 1, 8, h2, w.subspan(104, 1))[0];
  }

  autodiff::Graph build_batch_graph(BatchGraphKind kind) const {
    const int batch = cfg_.batch_size;
    const double zbound = logit_clamp_bound();
    autodiff::GraphBuilder b;
    std::vector<autodiff::NodeId> x = b.add_group("x", kGenParams);
    std::vector<autodiff::NodeId> y = b.add_group("y", kDiscParams);
    std::vector<autodiff::NodeId> xdata;
    if (kind != BatchGraphKind::kNonsat) xdata = b.add_group("X", 2 * batch);
    std::vector<autodiff::NodeId> zdata = b.add_group("Z", 2 * batch);

    std::vector<autodiff::NodeId> real_terms, fake_terms;
    if (kind != BatchGraphKind::kNonsat) {
      for (int i = 0; i < batch; ++i) {
        autodiff::NodeId raw = append_disc_raw(
            b, y, {xdata[static_cast<std::size_t>(2 * i)], xdata[static_cast<std::size_t>(2 * i + 1)]});
        if (kind == BatchGraphKind::kWgan) {
          real_terms.push_back(raw);
        } else {
          // log D(x) = -softplus(-z) on the clamped logit.
          autodiff::NodeId zc = b.clamp(raw, -zbound, zbound);
          real_terms.push_back(b.scale(-1.0, detail::softplus(b, b.scale(-1.0, zc))));
        }
      }
    }
    for (int i = 0; i < batch; ++i) {
      std::array<autodiff::NodeId, 2> g = append_gen(
          b, x, {zdata[static_cast<std::size_t>(2 * i)], zdata[static_cast<std::size_t>(2 * i + 1)]});
      autodiff::NodeId raw = append_disc_raw(b, y, g);
      switch (kind) {
        case BatchGraphKind::kWgan:
          fake_terms.push_back(raw);
          break;
        case BatchGraphKind::kOgan: {
          // log(1 - D(G(z))) = -softplus(z) on the clamped logit.
          autodiff::NodeId zc = b.clamp(raw, -zbound, zbound);
          fake_terms.push_back(b.scale(-1.0, detail::softplus(b, zc)));
          break;
        }
        case BatchGraphKind::kNonsat: {
          // -log D(G(z)) = softplus(-z) on the clamped logit.
          autodiff::NodeId zc = b.clamp(raw, -zbound, zbound);
          fake_terms.push_back(detail::softplus(b, b.scale(-1.0, zc)));
          break;
        }
      }
    }

    switch (kind) {
      case BatchGraphKind::kOgan:
        b.set_output(b.affine(0.0, {{0.5, b.mean(real_terms)}, {0.5, b.mean(fake_terms)}}));
        break;
      case BatchGraphKind::kWgan:
        b.set_output(b.sub(b.mean(real_terms), b.mean(fake_terms)));
        break;
      case BatchGraphKind::kNonsat:
        b.set_output(b.mean(fake_terms));
        break;
    }
    return std::move(b).finish();
  }

  autodiff::Graph build_gen_graph(int comp) const {
    autodiff::GraphBuilder b;
    std::vector<autodiff::NodeId> x = b.add_group("x", kGenParams);
    std::vector<autodiff::NodeId> z = b.add_group("z", 2);
    std::array<autodiff::NodeId, 2> out = append_gen(b, x, {z[0], z[1]});
    b.set_output(out[static_cast<std::size_t>(comp)]);
    return std::move(b).finish();
  }

  autodiff::Graph build_disc_graph(bool prob) const {
    const double zbound = logit_clamp_bound();
    autodiff::GraphBuilder b;
    std::vector<autodiff::NodeId> y = b.add_group("y", kDiscParams);
    std::vector<autodiff::NodeId> p = b.add_group("p", 2);
    autodiff::NodeId raw = append_disc_raw(b, y, {p[0], p[1]});
    if (prob) {
      // sigmoid(z) = exp(-softplus(-z)) on the clamped logit.
      autodiff::NodeId zc = b.clamp(raw, -zbound, zbound);
      raw = b.exp(b.scale(-1.0, detail::softplus(b, b.scale(-1.0, zc))));
    }
    b.set_output(raw);
    return std::move(b).finish();
  }

  GanLoss loss_;
  SynthGanConfig cfg_;
  std::vector<std::array<double, 2>> dataset_;
  autodiff::Graph ogan_payoff_;
  autodiff::Graph wgan_payoff_;
  autodiff::Graph nonsat_;
  std::array<autodiff::Graph, 2> gen_out_;
  autodiff::Graph disc_raw_;
  autodiff::Graph disc_prob_;
  ZeroSumGame game_;
};

inline std::vector<autodiff::ParamGroup> player_groups(std::span<const double> x,
                                                       std::span<const double> y) {
  return {{"x", {x.begin(), x.end()}}, {"y", {y.begin(), y.end()}}};
}

inline double ogan_loss(const SynthGanGame& game, std::span<const double> x,
                        std::span<const double> y, const Minibatch& mb) {
  std::vector<autodiff::ParamGroup> at = player_groups(x, y);
  for (autodiff::ParamGroup& g : game.minibatch_groups(mb)) at.push_back(std::move(g));
  return autodiff::evaluate(game.ogan_payoff_graph(), at);
}

inline double wgan_loss(const SynthGanGame& game, std::span<const double> x,
                        std::span<const double> y, const Minibatch& mb) {
  std::vector<autodiff::ParamGroup> at = player_groups(x, y);
  for (autodiff::ParamGroup& g : game.minibatch_groups(mb)) at.push_back(std::move(g));
  return autodiff::evaluate(game.wgan_payoff_graph(), at);
}

inline double nonsat_generator_loss(const SynthGanGame& game, std::span<const double> x,
                                    std::span<const double> y, const Minibatch& mb) {
  std::vector<autodiff::ParamGroup> at = player_groups(x, y);
  at.push_back({"Z", mb.latent});
  return autodiff::evaluate(game.nonsat_graph(), at);
}

}  // namespace cgdlab::games
