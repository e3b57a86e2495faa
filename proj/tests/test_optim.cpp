#include <cmath>
#include <numbers>

#include "common.hpp"
#include "derev/optim.hpp"
#include "doctest.h"

using namespace derev;
using testutil::noise;

namespace {

OperatorConfig tiny_op() {
  OperatorConfig op;
  op.n_frames = 3;
  return op;
}

}  // namespace

TEST_CASE("first Adam step moves every coordinate by lr against the gradient sign") {
  const OperatorConfig op = tiny_op();
  const RirParams p = RirParams::initial(op, 10.0, 2.0, 1);
  RirParams g = RirParams::zeros_like(p);
  g.weights_db.setConstant(3.0);
  g.decays.setConstant(-0.02);
  g.phases.setConstant(1e-3);
  AdamState state(AdamConfig{}, p);
  const RirParams q = adam_step(state, p, g);
  CHECK(state.step_count == 1);
  CHECK((q.weights_db - p.weights_db).array().isApprox(Eigen::ArrayXd::Constant(26, -0.1), 1e-6));
  CHECK((q.decays - p.decays).array().isApprox(Eigen::ArrayXd::Constant(26, 0.1), 1e-4));
  CHECK(((q.phases - p.phases).array() + 0.1).abs().maxCoeff() < 1e-5);
}

TEST_CASE("Adam minimises a quadratic") {
  const OperatorConfig op = tiny_op();
  RirParams p = RirParams::initial(op, 30.0, 10.0, 2);
  const RirParams target = RirParams::initial(op, 12.0, 3.0, 3);
  AdamState state(AdamConfig{}, p);
  for (int i = 0; i < 2000; ++i) {
    RirParams g = p;
    g.weights_db -= target.weights_db;
    g.decays -= target.decays;
    g.phases -= target.phases;
    p = adam_step(state, p, g);
  }
  CHECK((p.weights_db - target.weights_db).cwiseAbs().maxCoeff() < 5e-2);
  CHECK((p.decays - target.decays).cwiseAbs().maxCoeff() < 5e-2);
  CHECK((p.phases - target.phases).cwiseAbs().maxCoeff() < 5e-2);
}

TEST_CASE("Adam rejects bad gradients") {
  const OperatorConfig op = tiny_op();
  const RirParams p = RirParams::initial(op, 0.0, 10.0, 4);
  AdamState state(AdamConfig{}, p);
  RirParams g = RirParams::zeros_like(p);
  g.decays[3] = std::nan("");
  try {
    adam_step(state, p, g);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("band decays") != std::string::npos);
  }
  g = RirParams::zeros_like(p);
  g.phases(0, 0) = INFINITY;
  CHECK_THROWS_WITH_AS(adam_step(state, p, g), doctest::Contains("phases"), NumericalError);
  g = RirParams::zeros_like(p);
  g.weights_db.resize(5);
  CHECK_THROWS_AS(adam_step(state, p, g), ShapeError);
  AdamConfig bad;
  bad.beta2 = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("Adam state re-initialises on shape change and resets") {
  OperatorConfig op = tiny_op();
  RirParams p = RirParams::initial(op, 0.0, 10.0, 5);
  AdamState state(AdamConfig{}, p);
  p = adam_step(state, p, p);
  op.n_frames = 5;
  const RirParams bigger = RirParams::initial(op, 0.0, 10.0, 6);
  adam_step(state, bigger, bigger);
  CHECK(state.step_count == 1);
  CHECK(state.first_moment.phases.rows() == 5);
  state.reset();
  CHECK(state.step_count == 0);
  CHECK(state.second_moment.weights_db.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("parameter projection clamps the box and wraps phases") {
  const OperatorConfig op = tiny_op();
  RirParams p = RirParams::initial(op, 0.0, 10.0, 7);
  p.weights_db[0] = -3.0;
  p.weights_db[1] = 55.0;
  p.decays[0] = 0.1;
  p.decays[1] = 100.0;
  p.phases(0, 0) = std::numbers::pi;
  p.phases(0, 1) = -std::numbers::pi;
  p.phases(0, 2) = 7.0;
  p.phases(0, 3) = -20.0;
  const RirParams q = project_params(p);
  CHECK(q.weights_db[0] == 0.0);
  CHECK(q.weights_db[1] == 40.0);
  CHECK(q.decays[0] == 0.5);
  CHECK(q.decays[1] == 28.0);
  CHECK(q.phases(0, 0) == doctest::Approx(std::numbers::pi));
  CHECK(q.phases(0, 1) == doctest::Approx(std::numbers::pi));
  CHECK(q.phases(0, 2) == doctest::Approx(7.0 - 2.0 * std::numbers::pi));
  CHECK(q.phases(0, 3) == doctest::Approx(-20.0 + 6.0 * std::numbers::pi));
  CHECK(q.phases.maxCoeff() <= std::numbers::pi);
  CHECK(q.phases.minCoeff() > -std::numbers::pi);
  const RirParams r = project_params(q);
  CHECK(r.weights_db == q.weights_db);
  CHECK(r.decays == q.decays);
  CHECK(r.phases == q.phases);
}

TEST_CASE("inner RIR loop reduces the reconstruction cost") {
  OperatorConfig op;
  op.n_frames = 4;
  CompressionConfig comp;
  RirOptConfig cfg;
  const Waveform x = noise(4000, 8, 0.05);
  RirParams truth = RirParams::initial(op, 15.0, 1.0, 9);
  const Waveform y = apply_operator(x, truth, op);
  const RirParams init = RirParams::initial(op, 0.0, 10.0, 10);
  AdamState state(cfg.adam, init);
  const RirOptResult r = rir_opt_loop(init, x, y, 60, 0.1, state, cfg, op, comp, 1);
  REQUIRE(r.trace.cost.size() == 60);
  REQUIRE(r.trace.regularizer.size() == 60);
  CHECK(r.trace.cost.back() < 0.5 * r.trace.cost.front());
  CHECK(state.step_count == 60);
  CHECK(r.params.decays.minCoeff() >= 0.5);

  AdamState again(cfg.adam, init);
  const RirOptResult r2 = rir_opt_loop(init, x, y, 60, 0.1, again, cfg, op, comp, 1);
  CHECK(r2.params.phases == r.params.phases);

  AdamState untouched(cfg.adam, init);
  const RirOptResult none = rir_opt_loop(init, x, y, 0, 0.1, untouched, cfg, op, comp, 1);
  CHECK(none.params.weights_db == init.weights_db);
  CHECK(none.trace.cost.empty());
  CHECK_THROWS_AS(rir_opt_loop(init, x, y, -1, 0.1, untouched, cfg, op, comp, 1), ConfigError);
}
