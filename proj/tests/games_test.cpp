#include "cgdlab/games.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "cgdlab/autodiff.hpp"
#include "cgdlab/rng.hpp"
#include "test_util.hpp"

namespace ad = cgdlab::autodiff;
namespace games = cgdlab::games;

namespace {

TEST(QuadraticGame, MatchesClosedForm) {
  games::QuadraticGame q = games::make_quadratic_game(1.0, 10.0, 1.0);
  EXPECT_EQ(q.game.min_group, "x");
  EXPECT_EQ(q.game.max_group, "y");
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 10; ++trial) {
    double x = u(rng), y = u(rng);
    std::vector<ad::ParamGroup> at = {{"x", {x}}, {"y", {y}}};
    EXPECT_NEAR(ad::evaluate(q.game.payoff, at), testutil::quad_f(1.0, 10.0, 1.0, x, y), 1e-13);
    EXPECT_NEAR(ad::gradient(q.game.payoff, at, "x")[0],
                testutil::quad_gx(1.0, 10.0, 1.0, x, y), 1e-13);
    EXPECT_NEAR(ad::gradient(q.game.payoff, at, "y")[0],
                testutil::quad_gy(1.0, 10.0, 1.0, x, y), 1e-13);
  }
}

TEST(QuadraticGame, SecondDerivativesAreTheCoefficients) {
  games::QuadraticGame q = games::make_quadratic_game(2.5, -4.0, 0.5);
  std::vector<ad::ParamGroup> at = {{"x", {0.7}}, {"y", {-1.3}}};
  EXPECT_NEAR(ad::hessian_block(q.game.payoff, at, "x", "x")(0, 0), 2.0 * 2.5, 1e-12);
  EXPECT_NEAR(ad::hessian_block(q.game.payoff, at, "x", "y")(0, 0), -4.0, 1e-12);
  EXPECT_NEAR(ad::hessian_block(q.game.payoff, at, "y", "y")(0, 0), 2.0 * 0.5, 1e-12);
}

TEST(ProjectionGame, GeneratorMatchesReference) {
  games::ProjectionGame pg;
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 8; ++trial) {
    std::vector<double> w = testutil::rand_vec(rng, games::ProjectionGame::kParamCount, -1.5, 1.5);
    std::array<double, 2> got = pg.generator_output(w);
    std::array<double, 2> want = testutil::ref_proj_gen(w);
    EXPECT_LT(testutil::rel_err(got[0], want[0]), 1e-13);
    EXPECT_LT(testutil::rel_err(got[1], want[1]), 1e-13);
  }
}

TEST(ProjectionGame, DiscriminatorMatchesReference) {
  games::ProjectionGame pg;
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 8; ++trial) {
    std::vector<double> w = testutil::rand_vec(rng, games::ProjectionGame::kParamCount, -1.5, 1.5);
    std::array<double, 2> p = {testutil::rand_vec(rng, 1, 0.0, 3.0)[0],
                               testutil::rand_vec(rng, 1, 0.0, 3.0)[0]};
    EXPECT_LT(testutil::rel_err(pg.discriminator_output(w, p),
                                testutil::ref_proj_disc(w, p, pg.eta())),
              1e-13);
  }
}

TEST(ProjectionGame, PayoffMatchesReferenceAndBoundConstants) {
  games::ProjectionGame pg({1.0, 0.01}, {2.0, 2.0});
  std::mt19937_64 rng(23);
  std::vector<double> wg = testutil::rand_vec(rng, games::ProjectionGame::kParamCount, -1.0, 1.0);
  std::vector<double> wd = testutil::rand_vec(rng, games::ProjectionGame::kParamCount, -1.0, 1.0);
  double loss = pg.loss(wg, wd);
  EXPECT_LT(testutil::rel_err(loss, testutil::ref_proj_payoff(wg, wd, {1.0, 0.01}, {2.0, 2.0})),
            1e-13);

  // The stored game carries eta and pdata as bound constants, so evaluating
  // the payoff graph with only the player groups plus those constants agrees.
  std::vector<ad::ParamGroup> at = {{"x", wg}, {"y", wd}};
  for (const ad::ParamGroup& g : pg.game().bound_constants) at.push_back(g);
  EXPECT_NEAR(ad::evaluate(pg.game().payoff, at), loss, 1e-13);

  bool saw_eta = false, saw_pdata = false;
  for (const ad::ParamGroup& g : pg.game().bound_constants) {
    if (g.name == "eta") {
      saw_eta = true;
      ASSERT_EQ(g.values.size(), 2u);
      EXPECT_DOUBLE_EQ(g.values[1], 0.01);
    }
    if (g.name == "pdata") {
      saw_pdata = true;
      ASSERT_EQ(g.values.size(), 2u);
      EXPECT_DOUBLE_EQ(g.values[0], 2.0);
    }
  }
  EXPECT_TRUE(saw_eta);
  EXPECT_TRUE(saw_pdata);
}

TEST(ProjectionGame, GeneratorProductStaysInsideExpBand) {
  // The output pair is (e^{s+u}, e^{s-u}) with s = atan(.)/pi, so the product
  // e^{2s} is pinned to (1/e, e) and the target (2, 2) is unreachable.
  games::ProjectionGame pg;
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> w = testutil::rand_vec(rng, games::ProjectionGame::kParamCount, -3.0, 3.0);
    std::array<double, 2> g = pg.generator_output(w);
    double product = g[0] * g[1];
    EXPECT_GT(product, std::exp(-1.0));
    EXPECT_LT(product, std::exp(1.0));
    double dist = std::hypot(g[0] - 2.0, g[1] - 2.0);
    EXPECT_GT(dist, 0.05);
  }
}

TEST(ProjectionGame, InitParamsLayout) {
  games::ProjectionGame pg;
  std::mt19937_64 stream = cgdlab::rng::make_stream(1, "init");
  auto [wg, wd] = pg.init_params(stream);
  ASSERT_EQ(wg.size(), 28u);
  ASSERT_EQ(wd.size(), 28u);
  for (int i = 0; i < 4; ++i) EXPECT_LT(std::abs(wg[static_cast<std::size_t>(i)]), 1.0);
  for (int i = 4; i < 28; ++i) EXPECT_LT(std::abs(wg[static_cast<std::size_t>(i)]), 0.5);
  for (int i = 0; i < 8; ++i) {
    EXPECT_LT(std::abs(wd[static_cast<std::size_t>(i)]), 1.0 / std::sqrt(2.0));
  }
  for (int i = 8; i < 28; ++i) EXPECT_LT(std::abs(wd[static_cast<std::size_t>(i)]), 0.5);

  // The draw is a pure function of the stream.
  std::mt19937_64 again = cgdlab::rng::make_stream(1, "init");
  auto [wg2, wd2] = pg.init_params(again);
  EXPECT_EQ(wg, wg2);
  EXPECT_EQ(wd, wd2);
}

TEST(ProjectionGame, FreeFunctionsMatchClassMethods) {
  games::ProjectionGame pg;
  std::mt19937_64 rng(31);
  std::vector<double> wg = testutil::rand_vec(rng, 28, -1.0, 1.0);
  std::vector<double> wd = testutil::rand_vec(rng, 28, -1.0, 1.0);
  std::array<double, 2> g = games::generator_forward(wg);
  std::array<double, 2> gm = pg.generator_output(wg);
  EXPECT_DOUBLE_EQ(g[0], gm[0]);
  EXPECT_DOUBLE_EQ(g[1], gm[1]);
  EXPECT_DOUBLE_EQ(games::discriminator_forward(wd, {1.5, 0.5}, pg.eta()),
                   pg.discriminator_output(wd, {1.5, 0.5}));
  EXPECT_DOUBLE_EQ(games::projection_loss(wg, wd, pg.eta(), pg.p_data()), pg.loss(wg, wd));
}

TEST(ProjectionGame, PayoffGradientMatchesFiniteDifferences) {
  games::ProjectionGame pg;
  std::mt19937_64 rng(37);
  std::vector<double> wg = testutil::rand_vec(rng, 28, -0.8, 0.8);
  std::vector<double> wd = testutil::rand_vec(rng, 28, -0.8, 0.8);
  std::vector<ad::ParamGroup> at = {{"x", wg}, {"y", wd}};
  for (const ad::ParamGroup& g : pg.game().bound_constants) at.push_back(g);

  std::vector<double> gx = ad::gradient(pg.game().payoff, at, "x");
  auto f = [&](const std::vector<double>& w) { return pg.loss(w, wd); };
  std::vector<double> fd = testutil::fd_gradient(f, wg);
  for (std::size_t i = 0; i < gx.size(); ++i) {
    EXPECT_LT(testutil::rel_err(gx[i], fd[i]), 1e-6) << "component " << i;
  }
}

games::SynthGanConfig small_cfg() {
  games::SynthGanConfig cfg;
  cfg.batch_size = 8;
  cfg.dataset_size = 64;
  return cfg;
}

TEST(SynthGanGame, DatasetShapeAndDeterminism) {
  games::SynthGanGame g1(games::GanLoss::ogan, 7);
  games::SynthGanGame g2(games::GanLoss::ogan, 7);
  games::SynthGanGame g3(games::GanLoss::ogan, 8);
  ASSERT_EQ(g1.dataset().size(), 2000u);
  EXPECT_EQ(g1.dataset(), g2.dataset());
  EXPECT_NE(g1.dataset(), g3.dataset());

  const games::SynthGanConfig& cfg = g1.config();
  for (std::size_t i = 0; i < g1.dataset().size(); ++i) {
    int mode = static_cast<int>(i) % cfg.modes;
    double angle = 2.0 * testutil::kPi * mode / cfg.modes;
    std::array<double, 2> center = {cfg.ring_radius * std::cos(angle),
                                    cfg.ring_radius * std::sin(angle)};
    EXPECT_LT(std::abs(g1.dataset()[i][0] - center[0]), 7.0 * cfg.mode_std);
    EXPECT_LT(std::abs(g1.dataset()[i][1] - center[1]), 7.0 * cfg.mode_std);
  }
}

TEST(SynthGanGame, MinibatchShapesAndProvenance) {
  games::SynthGanGame game(games::GanLoss::ogan, 3, small_cfg());
  std::mt19937_64 stream = cgdlab::rng::make_stream(3, "minibatch");
  games::Minibatch mb = game.sample_minibatch(stream);
  ASSERT_EQ(mb.size, 8);
  ASSERT_EQ(mb.real_xy.size(), 16u);
  ASSERT_EQ(mb.latent.size(), 16u);
  for (int i = 0; i < mb.size; ++i) {
    std::array<double, 2> p = {mb.real_xy[static_cast<std::size_t>(2 * i)],
                               mb.real_xy[static_cast<std::size_t>(2 * i + 1)]};
    bool found = std::ranges::any_of(game.dataset(), [&p](const std::array<double, 2>& d) {
      return d[0] == p[0] && d[1] == p[1];
    });
    EXPECT_TRUE(found) << "real point " << i << " is not a dataset point";
  }
  std::vector<ad::ParamGroup> groups = game.minibatch_groups(mb);
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_EQ(groups[0].name, "X");
  EXPECT_EQ(groups[1].name, "Z");
  EXPECT_EQ(groups[0].values, mb.real_xy);
  EXPECT_EQ(groups[1].values, mb.latent);
}

TEST(SynthGanGame, InitParamsLayout) {
  games::SynthGanGame game(games::GanLoss::ogan, 3, small_cfg());
  std::mt19937_64 stream = cgdlab::rng::make_stream(11, "init");
  auto [gen, disc] = game.init_params(stream);
  ASSERT_EQ(gen.size(), static_cast<std::size_t>(games::SynthGanGame::kGenParams));
  ASSERT_EQ(disc.size(), static_cast<std::size_t>(games::SynthGanGame::kDiscParams));
  auto check_layer = [](const std::vector<double>& w, int off, int rows, int cols) {
    double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    for (int i = 0; i < rows * cols; ++i) {
      EXPECT_LT(std::abs(w[static_cast<std::size_t>(off + i)]), bound);
    }
    for (int i = 0; i < rows; ++i) {
      EXPECT_EQ(w[static_cast<std::size_t>(off + rows * cols + i)], 0.0);
    }
  };
  check_layer(gen, 0, 8, 2);
  check_layer(gen, 24, 8, 8);
  check_layer(gen, 96, 2, 8);
  check_layer(disc, 0, 8, 2);
  check_layer(disc, 24, 8, 8);
  check_layer(disc, 96, 1, 8);
}

TEST(SynthGanGame, GeneratorAndDiscriminatorMatchReferences) {
  games::SynthGanGame game(games::GanLoss::ogan, 3, small_cfg());
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> gen =
        testutil::rand_vec(rng, games::SynthGanGame::kGenParams, -0.7, 0.7);
    std::vector<double> disc =
        testutil::rand_vec(rng, games::SynthGanGame::kDiscParams, -0.7, 0.7);
    std::array<double, 2> z = {testutil::rand_vec(rng, 1, -2.0, 2.0)[0],
                               testutil::rand_vec(rng, 1, -2.0, 2.0)[0]};
    std::array<double, 2> got = game.generator_sample(gen, z);
    std::array<double, 2> want = testutil::ref_gan_gen(gen, z);
    EXPECT_LT(testutil::rel_err(got[0], want[0]), 1e-13);
    EXPECT_LT(testutil::rel_err(got[1], want[1]), 1e-13);

    double raw = game.discriminator_raw(disc, got);
    EXPECT_LT(testutil::rel_err(raw, testutil::ref_gan_disc_raw(disc, want)), 1e-13);
    double prob = game.discriminator_prob(disc, got);
    EXPECT_LT(testutil::rel_err(prob, testutil::ref_sigmoid_clamped(raw)), 1e-12);
    EXPECT_GT(prob, 0.0);
    EXPECT_LT(prob, 1.0);
  }
}

TEST(SynthGanGame, LossesMatchReferences) {
  games::SynthGanGame game(games::GanLoss::ogan, 5, small_cfg());
  std::mt19937_64 init = cgdlab::rng::make_stream(5, "init");
  auto [gen, disc] = game.init_params(init);
  std::mt19937_64 batch = cgdlab::rng::make_stream(5, "minibatch");
  games::Minibatch mb = game.sample_minibatch(batch);

  EXPECT_LT(testutil::rel_err(games::ogan_loss(game, gen, disc, mb),
                              testutil::ref_ogan(gen, disc, mb)),
            1e-12);
  EXPECT_LT(testutil::rel_err(games::wgan_loss(game, gen, disc, mb),
                              testutil::ref_wgan(gen, disc, mb)),
            1e-12);
  EXPECT_LT(testutil::rel_err(games::nonsat_generator_loss(game, gen, disc, mb),
                              testutil::ref_nonsat(gen, disc, mb)),
            1e-12);
}

TEST(SynthGanGame, StoredPayoffFollowsLossChoice) {
  games::SynthGanConfig cfg = small_cfg();
  games::SynthGanGame ogan(games::GanLoss::ogan, 5, cfg);
  games::SynthGanGame wgan(games::GanLoss::wgan, 5, cfg);
  std::mt19937_64 rng(43);
  std::vector<double> gen = testutil::rand_vec(rng, games::SynthGanGame::kGenParams, -0.5, 0.5);
  std::vector<double> disc = testutil::rand_vec(rng, games::SynthGanGame::kDiscParams, -0.5, 0.5);
  std::mt19937_64 batch = cgdlab::rng::make_stream(5, "minibatch");
  games::Minibatch mb = ogan.sample_minibatch(batch);

  auto eval_payoff = [&](const games::SynthGanGame& g) {
    std::vector<ad::ParamGroup> at = games::player_groups(gen, disc);
    for (ad::ParamGroup& grp : g.minibatch_groups(mb)) at.push_back(std::move(grp));
    return ad::evaluate(g.game().payoff, at);
  };
  EXPECT_DOUBLE_EQ(eval_payoff(ogan), games::ogan_loss(ogan, gen, disc, mb));
  EXPECT_DOUBLE_EQ(eval_payoff(wgan), games::wgan_loss(wgan, gen, disc, mb));
}

TEST(SynthGanGame, NonsatGraphHasNoRealBatchGroup) {
  games::SynthGanGame game(games::GanLoss::ogan, 5, small_cfg());
  EXPECT_EQ(game.nonsat_graph().group_index("X"), -1);
  EXPECT_GE(game.nonsat_graph().group_index("Z"), 0);
  EXPECT_GE(game.ogan_payoff_graph().group_index("X"), 0);
  EXPECT_GE(game.ogan_payoff_graph().group_index("Z"), 0);
}

TEST(SynthGanGame, ClampedHeadKeepsLossesFiniteUnderExtremeLogits) {
  games::SynthGanGame game(games::GanLoss::ogan, 5, small_cfg());
  std::mt19937_64 rng(47);
  std::vector<double> gen = testutil::rand_vec(rng, games::SynthGanGame::kGenParams, -0.5, 0.5);
  // Head weights of 1e5 push the raw logit far past the clamp bound.
  std::vector<double> disc(games::SynthGanGame::kDiscParams, 0.3);
  for (int i = 96; i < 105; ++i) disc[static_cast<std::size_t>(i)] = 1e5;
  std::mt19937_64 batch = cgdlab::rng::make_stream(5, "minibatch");
  games::Minibatch mb = game.sample_minibatch(batch);

  double loss = games::ogan_loss(game, gen, disc, mb);
  EXPECT_TRUE(std::isfinite(loss));
  EXPECT_LT(testutil::rel_err(loss, testutil::ref_ogan(gen, disc, mb)), 1e-10);
  double prob = game.discriminator_prob(disc, {2.0, 0.0});
  EXPECT_LT(prob, 1.0);
  EXPECT_GT(prob, 0.0);
}

TEST(SynthGanGame, PayoffGradientMatchesFiniteDifferences) {
  games::SynthGanGame game(games::GanLoss::ogan, 9, small_cfg());
  std::mt19937_64 init = cgdlab::rng::make_stream(9, "init");
  auto [gen, disc] = game.init_params(init);
  std::mt19937_64 batch = cgdlab::rng::make_stream(9, "minibatch");
  games::Minibatch mb = game.sample_minibatch(batch);

  std::vector<ad::ParamGroup> at = games::player_groups(gen, disc);
  for (ad::ParamGroup& grp : game.minibatch_groups(mb)) at.push_back(std::move(grp));
  std::vector<double> gx = ad::gradient(game.ogan_payoff_graph(), at, "x");
  auto f = [&](const std::vector<double>& w) { return testutil::ref_ogan(w, disc, mb); };
  std::vector<double> fd = testutil::fd_gradient(f, gen);
  for (std::size_t i = 0; i < gx.size(); ++i) {
    EXPECT_LT(testutil::rel_err(gx[i], fd[i]), 1e-6) << "component " << i;
  }
}

}  // namespace
