#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "core/dynamics.hpp"
#include "core/games.hpp"
#include "core/protocols.hpp"
#include "core/typegrid.hpp"

using namespace heterodyn;

namespace {

TypeGrid discrete_grid(Matrix points, Vector masses) {
  DistSpec d;
  d.kind = DistSpec::Kind::Discrete;
  d.points = std::move(points);
  d.masses = std::move(masses);
  return TypeGrid::build(d, 0);
}

TypeGrid single_node_grid() {
  Matrix p(1, 1);
  p << 0.0;
  Vector m(1);
  m << 1.0;
  return discrete_grid(p, m);
}

ProtocolAssignment uniform_assignment(const TypeGrid& grid, ProtocolSpec proto) {
  AssignmentRule rule;  // uniform, protocol 0
  return assign_protocols(grid, rule, {std::move(proto)});
}

// Homogeneous-population pairwise-difference dynamic, written from scratch:
// v_s = sum_t x_t [pi_s - pi_t]+ - x_s sum_t [pi_t - pi_s]+ with pi = F0(x).
Vector homogeneous_smith(const CommonPayoff& f0, const Vector& x) {
  Vector pi = f0.value(x);
  const int n = static_cast<int>(x.size());
  Vector v = Vector::Zero(n);
  for (int s = 0; s < n; ++s)
    for (int t = 0; t < n; ++t) {
      v(s) += x(t) * std::max(pi(s) - pi(t), 0.0);
      v(s) -= x(s) * std::max(pi(t) - pi(s), 0.0);
    }
  return v;
}

GameSpec swap_game() {
  Matrix a(2, 2);
  a << 0.0, 1.0, 1.0, 0.0;
  return GameSpec::asag(CommonPayoff::linear(a, Vector::Zero(2)),
                        ThetaMap{ThetaMap::Kind::Linear, {}, Matrix::Zero(2, 1)});
}

}  // namespace

TEST_CASE("field sends each node toward its own optimum at unit rate") {
  Matrix pts(2, 2);
  pts << 1.0, 0.0, 0.0, 1.0;
  Vector ms(2);
  ms << 0.5, 0.5;
  TypeGrid grid = discrete_grid(pts, ms);
  GameSpec game = GameSpec::asag(CommonPayoff::zero(2), ThetaMap{});
  ProtocolAssignment asg = uniform_assignment(grid, ProtocolSpec::standard_brd());

  Matrix state(2, 2);
  state << 0.5, 0.5, 0.5, 0.5;
  FieldEval eval = field(game, asg, state, grid);
  CHECK(eval.v(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(eval.v(0, 1) == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(eval.v(1, 0) == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(eval.v(1, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(eval.realized_max_rate == 1.0);
}

TEST_CASE("field rows equal the per-node mean dynamic of the payoff rows") {
  std::mt19937_64 rng(601);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix pts(3, 1);
  pts << -1.0, 0.2, 0.9;
  Vector ms(3);
  ms << 0.2, 0.5, 0.3;
  TypeGrid grid = discrete_grid(pts, ms);
  Matrix a(2, 2);
  a << -0.5, 0.2, 0.2, -1.0;
  Matrix tmap(2, 1);
  tmap << 1.0, 0.0;
  GameSpec game = GameSpec::asag(CommonPayoff::linear(a, Vector::Zero(2)),
                                 ThetaMap{ThetaMap::Kind::Linear, {}, tmap});
  AssignmentRule rule;
  rule.kind = AssignmentRule::Kind::ByNode;
  rule.node_list = {0, 1, 2};
  ProtocolAssignment asg = assign_protocols(
      grid, rule,
      {ProtocolSpec::smith(), ProtocolSpec::bnn(), ProtocolSpec::logit(0.5)});

  Matrix state(3, 2);
  for (int k = 0; k < 3; ++k) {
    state(k, 0) = unif(rng);
    state(k, 1) = 1.0 - state(k, 0);
  }
  FieldEval eval = field(game, asg, state, grid);
  Matrix pi = game.payoff_profile(state, grid);
  CHECK((eval.payoffs - pi).cwiseAbs().maxCoeff() == 0.0);
  for (int k = 0; k < 3; ++k) {
    Vector v_direct = mean_dynamic(asg.at(k), pi.row(k).transpose(),
                                   state.row(k).transpose(), 1e-9);
    CHECK((eval.v.row(k).transpose() - v_direct).cwiseAbs().maxCoeff() == 0.0);
  }
  // Rows sum to zero.
  CHECK(eval.v.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("single-node field reduces to the homogeneous dynamic") {
  std::mt19937_64 rng(602);
  std::uniform_real_distribution<double> unif(0.05, 0.95);
  Matrix a(3, 3);
  a << -1.0, 0.3, 0.0, 0.3, -0.5, 0.1, 0.0, 0.1, -2.0;
  CommonPayoff f0 = CommonPayoff::linear(a, Vector::Zero(3));
  GameSpec game = GameSpec::asag(f0, ThetaMap{ThetaMap::Kind::Linear, {}, Matrix::Zero(3, 1)});
  TypeGrid grid = single_node_grid();
  ProtocolAssignment asg = uniform_assignment(grid, ProtocolSpec::smith());

  for (int trial = 0; trial < 100; ++trial) {
    Vector x(3);
    double sum = 0.0;
    for (int s = 0; s < 3; ++s) {
      x(s) = unif(rng);
      sum += x(s);
    }
    x /= sum;
    Matrix state = x.transpose();
    FieldEval eval = field(game, asg, state, grid);
    Vector expected = homogeneous_smith(f0, x);
    CHECK((eval.v.row(0).transpose() - expected).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("zero field leaves the state bitwise constant") {
  // Distinct nodes collapsed onto the zero payoff vector by a zero map.
  Matrix pts(3, 1);
  pts << -1.0, 0.0, 1.0;
  Vector ms(3);
  ms << 0.4, 0.3, 0.3;
  TypeGrid grid = discrete_grid(pts, ms);
  GameSpec game = GameSpec::asag(CommonPayoff::zero(2),
                                 ThetaMap{ThetaMap::Kind::Linear, {}, Matrix::Zero(2, 1)});
  ProtocolAssignment asg = uniform_assignment(grid, ProtocolSpec::smith());

  Matrix x0(3, 2);
  x0 << 0.3, 0.7, 0.5, 0.5, 0.9, 0.1;
  IntegratorConfig cfg;
  cfg.dt = 0.01;
  cfg.t_end = 10.0;
  cfg.sample_every = 100;
  Trajectory traj = integrate(game, asg, x0, grid, cfg);
  REQUIRE(!traj.states.empty());
  CHECK(traj.times.front() == 0.0);
  CHECK(traj.times.back() == doctest::Approx(10.0).epsilon(1e-12));
  CHECK((traj.states.back() - x0).cwiseAbs().maxCoeff() == 0.0);
  CHECK(traj.renorm_total == 0.0);
  CHECK(!traj.step_size_failure);
}

TEST_CASE("pairwise-difference flow settles at the symmetric rest point") {
  GameSpec game = swap_game();
  TypeGrid grid = single_node_grid();
  ProtocolAssignment asg = uniform_assignment(grid, ProtocolSpec::smith());
  Matrix x0(1, 2);
  x0 << 0.9, 0.1;
  IntegratorConfig cfg;
  cfg.dt = 0.01;
  cfg.t_end = 50.0;
  cfg.sample_every = 100;
  Trajectory traj = integrate(game, asg, x0, grid, cfg);
  CHECK(traj.diagnostics.back().residual <= 1e-6);
  CHECK(traj.states.back()(0, 0) == doctest::Approx(0.5).epsilon(1e-6));
  // Simplex and marginal conservation at every sample.
  for (const Matrix& s : traj.states) CHECK(rows_in_simplex(s, 1e-6));
  CHECK(traj.renorm_total <= 1e-6);
  // Realized switching rates stay inside the payoff box diameter.
  CHECK(traj.realized_max_rate <= 1.0);
}

TEST_CASE("sampling grid includes endpoints and increases strictly") {
  GameSpec game = swap_game();
  TypeGrid grid = single_node_grid();
  ProtocolAssignment asg = uniform_assignment(grid, ProtocolSpec::smith());
  Matrix x0(1, 2);
  x0 << 0.8, 0.2;
  IntegratorConfig cfg;
  cfg.dt = 0.1;
  cfg.t_end = 1.05;  // steps don't divide sample_every evenly
  cfg.sample_every = 4;
  Trajectory traj = integrate(game, asg, x0, grid, cfg);
  REQUIRE(traj.times.size() >= 3);
  CHECK(traj.times.front() == 0.0);
  for (size_t i = 1; i < traj.times.size(); ++i) CHECK(traj.times[i] > traj.times[i - 1]);
  CHECK(traj.times.back() == doctest::Approx(traj.times.size() >= 2 ? traj.times.back() : 0.0));
  CHECK(traj.states.size() == traj.times.size());
  CHECK(traj.velocities.size() == traj.times.size());
  CHECK(traj.diagnostics.size() == traj.times.size());
}

TEST_CASE("fourth-order scheme shows fourth-order step convergence") {
  // Smooth field: softmax choice on the swap game.
  GameSpec game = swap_game();
  TypeGrid grid = single_node_grid();
  ProtocolAssignment asg = uniform_assignment(grid, ProtocolSpec::logit(0.5));
  Matrix x0(1, 2);
  x0 << 0.9, 0.1;

  auto endpoint = [&](IntegratorConfig::Method method, double dt) {
    IntegratorConfig cfg;
    cfg.method = method;
    cfg.dt = dt;
    cfg.t_end = 2.0;
    cfg.sample_every = 1 << 20;  // endpoint only
    return integrate(game, asg, x0, grid, cfg).states.back();
  };

  Matrix ref = endpoint(IntegratorConfig::Method::Rk4, 1.0 / 1024.0);
  const double e1 = (endpoint(IntegratorConfig::Method::Rk4, 0.2) - ref).cwiseAbs().maxCoeff();
  const double e2 = (endpoint(IntegratorConfig::Method::Rk4, 0.1) - ref).cwiseAbs().maxCoeff();
  REQUIRE(e1 > 1e-13);  // above rounding noise, else the order is meaningless
  const double order = std::log2(e1 / e2);
  CHECK(order >= 3.5);

  // The first-order scheme converges at first order.
  const double f1 = (endpoint(IntegratorConfig::Method::Euler, 0.2) - ref).cwiseAbs().maxCoeff();
  const double f2 = (endpoint(IntegratorConfig::Method::Euler, 0.1) - ref).cwiseAbs().maxCoeff();
  const double euler_order = std::log2(f1 / f2);
  CHECK(euler_order > 0.7);
  CHECK(euler_order < 1.5);
}

TEST_CASE("forward-backward Euler step composes to identity at second order") {
  GameSpec game = swap_game();
  TypeGrid grid = single_node_grid();
  ProtocolAssignment asg = uniform_assignment(grid, ProtocolSpec::logit(0.5));
  Matrix x0(1, 2);
  x0 << 0.7, 0.3;

  auto roundtrip_gap = [&](double dt) {
    Matrix x1 = x0 + dt * field(game, asg, x0, grid).v;
    Matrix x2 = x1 - dt * field(game, asg, x1, grid).v;
    return (x2 - x0).cwiseAbs().maxCoeff();
  };
  const double g1 = roundtrip_gap(0.1);
  const double g2 = roundtrip_gap(0.05);
  CHECK(g1 <= 0.05);  // already small at coarse steps
  const double order = std::log2(g1 / g2);
  CHECK(order >= 1.7);
  CHECK(order <= 2.3);
}

TEST_CASE("integrator rejects invalid configurations and states") {
  IntegratorConfig cfg;
  cfg.dt = 0.0;
  CHECK_THROWS(cfg.validate());
  cfg.dt = 2.0;
  cfg.t_end = 1.0;
  CHECK_THROWS(cfg.validate());
  cfg.dt = 0.1;
  cfg.sample_every = 0;
  CHECK_THROWS(cfg.validate());

  GameSpec game = swap_game();
  TypeGrid grid = single_node_grid();
  ProtocolAssignment asg = uniform_assignment(grid, ProtocolSpec::smith());
  Matrix bad(1, 2);
  bad << 0.9, 0.4;  // row sum 1.3
  IntegratorConfig ok;
  CHECK_THROWS(integrate(game, asg, bad, grid, ok));
}

TEST_CASE("payoff overflow surfaces as a non-finite state error with a time stamp") {
  // Payoffs at the edge of the floating range make the pairwise rate
  // difference overflow, so the very first step produces a non-finite state.
  Vector b(2);
  b << 1e308, -1e308;
  GameSpec game = GameSpec::asag(CommonPayoff::linear(Matrix::Zero(2, 2), b),
                                 ThetaMap{ThetaMap::Kind::Linear, {}, Matrix::Zero(2, 1)});
  TypeGrid grid = single_node_grid();
  ProtocolAssignment asg = uniform_assignment(grid, ProtocolSpec::smith());
  Matrix x0(1, 2);
  x0 << 0.5, 0.5;
  IntegratorConfig cfg;
  cfg.dt = 0.01;
  cfg.t_end = 1.0;
  bool threw = false;
  try {
    integrate(game, asg, x0, grid, cfg);
  } catch (const NonFiniteStateError& e) {
    threw = true;
    CHECK(e.time() > 0.0);
    CHECK(e.time() <= 1.0);
  }
  CHECK(threw);
}

TEST_CASE("disaggregation probe exposes aggregate-velocity spread") {
  // Two nodes with opposite, unequal idiosyncratic gaps: (0, 1) and (0, -2).
  // Different disaggregations of the aggregate (0.5, 0.5) then move the
  // aggregate differently.
  Matrix pts(2, 1);
  pts << 1.0, -2.0;
  Vector ms(2);
  ms << 0.5, 0.5;
  TypeGrid grid = discrete_grid(pts, ms);
  Matrix tmap(2, 1);
  tmap << 0.0, 1.0;
  GameSpec game = GameSpec::asag(CommonPayoff::zero(2),
                                 ThetaMap{ThetaMap::Kind::Linear, {}, tmap});
  ProtocolAssignment asg = uniform_assignment(grid, ProtocolSpec::smith());
  Vector target(2);
  target << 0.5, 0.5;

  AggregabilityReport report = aggregability_probe(game, asg, grid, target, 4);
  CHECK(report.n_states == 4);
  CHECK(report.spread > 0.1);

  // Direct-evaluation oracle: the two crossed pure disaggregations.
  Matrix crossed_a(2, 2), crossed_b(2, 2);
  crossed_a << 1.0, 0.0, 0.0, 1.0;  // node 0 on its worse strategy, node 1 too
  crossed_b << 0.0, 1.0, 1.0, 0.0;  // both nodes on their better strategy
  Vector va = Vector::Zero(2), vb = Vector::Zero(2);
  FieldEval ea = field(game, asg, crossed_a, grid);
  FieldEval eb = field(game, asg, crossed_b, grid);
  for (int k = 0; k < 2; ++k) {
    va += grid.weights()(k) * ea.v.row(k).transpose();
    vb += grid.weights()(k) * eb.v.row(k).transpose();
  }
  const double direct_gap = (va - vb).lpNorm<1>();
  CHECK(direct_gap > 0.1);
  CHECK(report.spread >= direct_gap - 1e-12);
}

TEST_CASE("symmetric opposite gaps cancel in the crossed pure states") {
  // With gaps of equal magnitude the mismatched crossed state produces
  // per-node velocities that cancel in the aggregate, exactly like the
  // matched one; the probe needs asymmetry to show motion.
  Matrix pts(2, 1);
  pts << 1.0, -1.0;
  Vector ms(2);
  ms << 0.5, 0.5;
  TypeGrid grid = discrete_grid(pts, ms);
  Matrix tmap(2, 1);
  tmap << 0.0, 1.0;
  GameSpec game = GameSpec::asag(CommonPayoff::zero(2),
                                 ThetaMap{ThetaMap::Kind::Linear, {}, tmap});
  ProtocolAssignment asg = uniform_assignment(grid, ProtocolSpec::smith());

  Matrix mismatched(2, 2);
  mismatched << 1.0, 0.0, 0.0, 1.0;
  FieldEval eval = field(game, asg, mismatched, grid);
  Vector vbar = Vector::Zero(2);
  for (int k = 0; k < 2; ++k) vbar += grid.weights()(k) * eval.v.row(k).transpose();
  CHECK(vbar.cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("probe degenerate cases") {
  Vector target(2);
  target << 0.5, 0.5;

  SUBCASE("single node grid has zero spread") {
    TypeGrid grid = single_node_grid();
    GameSpec game = swap_game();
    ProtocolAssignment asg = uniform_assignment(grid, ProtocolSpec::smith());
    AggregabilityReport report = aggregability_probe(game, asg, grid, target, 4);
    CHECK(report.spread <= 1e-15);
  }
  SUBCASE("identical payoffs across nodes give zero spread") {
    // Distinct nodes, but a zero map plus constant common payoff makes every
    // node's payoff vector identical and state-independent.
    Matrix pts(2, 1);
    pts << 0.7, -0.7;
    Vector ms(2);
    ms << 0.5, 0.5;
    TypeGrid grid = discrete_grid(pts, ms);
    Vector b(2);
    b << 0.3, 0.1;
    GameSpec game = GameSpec::asag(CommonPayoff::linear(Matrix::Zero(2, 2), b),
                                   ThetaMap{ThetaMap::Kind::Linear, {}, Matrix::Zero(2, 1)});
    ProtocolAssignment asg = uniform_assignment(grid, ProtocolSpec::smith());
    AggregabilityReport report = aggregability_probe(game, asg, grid, target, 4);
    CHECK(report.spread <= 1e-12);
  }
  SUBCASE("invalid requests are rejected") {
    Matrix pts(2, 1);
    pts << 0.0, 1.0;
    Vector ms(2);
    ms << 0.5, 0.5;
    TypeGrid grid = discrete_grid(pts, ms);
    GameSpec game = GameSpec::asag(CommonPayoff::zero(2),
                                   ThetaMap{ThetaMap::Kind::Linear, {}, Matrix::Zero(2, 1)});
    ProtocolAssignment asg = uniform_assignment(grid, ProtocolSpec::smith());
    CHECK_THROWS(aggregability_probe(game, asg, grid, target, 1));
    Vector bad(2);
    bad << 0.9, 0.9;
    CHECK_THROWS(aggregability_probe(game, asg, grid, bad, 4));
    Vector short_target(1);
    short_target << 1.0;
    CHECK_THROWS(aggregability_probe(game, asg, grid, short_target, 4));
  }
}

TEST_CASE("probe states and report are reproducible for a fixed seed") {
  Matrix pts(3, 1);
  pts << -1.0, 0.0, 2.0;
  Vector ms(3);
  ms << 0.3, 0.4, 0.3;
  TypeGrid grid = discrete_grid(pts, ms);
  Matrix tmap(2, 1);
  tmap << 0.0, 0.5;
  GameSpec game = GameSpec::asag(CommonPayoff::zero(2),
                                 ThetaMap{ThetaMap::Kind::Linear, {}, tmap});
  ProtocolAssignment asg = uniform_assignment(grid, ProtocolSpec::smith());
  Vector target(2);
  target << 0.4, 0.6;
  AggregabilityReport a = aggregability_probe(game, asg, grid, target, 6, 42);
  AggregabilityReport b = aggregability_probe(game, asg, grid, target, 6, 42);
  REQUIRE(a.aggregate_velocities.size() == b.aggregate_velocities.size());
  for (size_t i = 0; i < a.aggregate_velocities.size(); ++i)
    CHECK((a.aggregate_velocities[i] - b.aggregate_velocities[i]).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.spread == b.spread);
}
