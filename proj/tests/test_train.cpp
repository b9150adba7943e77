#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "neupde/errors.hpp"
#include "neupde/systems.hpp"
#include "neupde/train.hpp"

using namespace neupde;

namespace {

Trajectory ramp(int n_stamps, int d = 1) {
  Trajectory tr;
  tr.timestamps = Eigen::VectorXd::LinSpaced(n_stamps, 0.0, n_stamps - 1.0);
  for (int i = 0; i < n_stamps; ++i)
    tr.states.push_back(Eigen::VectorXd::Constant(d, double(i)));
  return tr;
}

VectorField fresh_model(const std::vector<Trajectory>& data, int degree, int h,
                        std::uint64_t seed) {
  VectorField vf;
  vf.spec = DictionarySpec::make(data.front().dim(), degree, false);
  vf.bounds = fit_bounds(data);
  vf.time_range = TimeRange{data.front().timestamps[0],
                            data.front().timestamps[data.front().n_stamps() - 1]};
  vf.mlp = init_params(vf.spec.n_terms(), h, data.front().dim(),
                       Activation::Tanh, seed);
  return vf;
}

}  // namespace

TEST_CASE("sample_minibatch geometry") {
  std::mt19937_64 rng(0);
  // 11 stamps, k = 10: exactly one possible window
  auto batch = sample_minibatch(rng, {ramp(11)}, 10, 4, true);
  for (const auto& w : batch) {
    CHECK(w.start == 0);
    CHECK(w.data.n_stamps() == 11);
  }

  // too short
  CHECK_THROWS_AS(sample_minibatch(rng, {ramp(5)}, 10, 1, true), TooShort);

  // without overlap: 16 disjoint ranges over 100 stamps, k = 3
  auto disjoint = sample_minibatch(rng, {ramp(100)}, 3, 16, false);
  CHECK(disjoint.size() == 16);
  std::vector<std::pair<int, int>> spans;
  for (const auto& w : disjoint) {
    CHECK(w.data.n_stamps() == 4);
    for (const auto& [a, b] : spans) {
      const bool apart = w.start + 3 <= a || b <= w.start;
      CHECK(apart);
    }
    spans.emplace_back(w.start, w.start + 3);
  }

  // window content matches the source trajectory
  const Trajectory src = ramp(30, 2);
  auto wins = sample_minibatch(rng, {src}, 4, 3, true);
  for (const auto& w : wins) {
    CHECK(w.traj_index == 0);
    for (int i = 0; i <= 4; ++i) {
      CHECK(w.data.timestamps[i] == src.timestamps[w.start + i]);
      CHECK(w.data.states[static_cast<size_t>(i)] ==
            src.states[static_cast<size_t>(w.start + i)]);
    }
  }

  // seeded rng reproduces the window set
  std::mt19937_64 r1(7), r2(7);
  auto a = sample_minibatch(r1, {ramp(50), ramp(60)}, 5, 6, true);
  auto b = sample_minibatch(r2, {ramp(50), ramp(60)}, 5, 6, true);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].traj_index == b[i].traj_index);
    CHECK(a[i].start == b[i].start);
  }
}

TEST_CASE("adam_step") {
  Eigen::VectorXd theta = Eigen::Vector3d(1.0, -2.0, 0.5);
  AdamState st(3);
  adam_step(theta, Eigen::Vector3d::Zero(), st, 0.1);
  CHECK(theta == Eigen::Vector3d(1.0, -2.0, 0.5));

  // first step moves by ~lr in the gradient's sign direction
  Eigen::VectorXd t2 = Eigen::Vector3d(0.0, 0.0, 0.0);
  AdamState st2(3);
  adam_step(t2, Eigen::Vector3d(3.0, -0.001, 7.0), st2, 0.1);
  CHECK(t2[0] == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(t2[1] == doctest::Approx(0.1).epsilon(1e-3));
  CHECK(t2[2] == doctest::Approx(-0.1).epsilon(1e-6));

  // 100 steps on f(theta) = theta^2 from 1
  Eigen::VectorXd t3 = Eigen::VectorXd::Constant(1, 1.0);
  AdamState st3(1);
  for (int i = 0; i < 100; ++i)
    adam_step(t3, Eigen::VectorXd::Constant(1, 2.0 * t3[0]), st3, 0.1);
  CHECK(std::abs(t3[0]) < 0.05);
}

TEST_CASE("full_data_loss on a zero field") {
  VectorField vf = fresh_model({ramp(10, 2)}, 2, 3, 0);
  vf.mlp.A1.setZero();
  vf.mlp.A2.setZero();
  Trajectory constant;
  constant.timestamps = Eigen::VectorXd::LinSpaced(7, 0.0, 6.0);
  for (int i = 0; i < 7; ++i)
    constant.states.push_back(Eigen::Vector2d(1.0, -1.0));
  SolverConfig solver;
  CHECK(full_data_loss(vf, {constant}, 3, solver) == 0.0);
}

TEST_CASE("train_ode recovers an in-span field") {
  // ground truth: a seeded dictionary-MLP field; its own trajectories are
  // exactly representable, so training must crush the misfit
  std::vector<Trajectory> seed_data = {ramp(3, 2)};
  seed_data[0].states = {Eigen::Vector2d(0.4, -0.6), Eigen::Vector2d(1, 1),
                         Eigen::Vector2d(-1, -1)};
  VectorField truth = fresh_model(seed_data, 2, 6, 17);
  truth.mlp.A2 *= 2.0;

  SolverConfig fine{Scheme::Rk4, 4, 1e-8};
  Eigen::VectorXd ts = Eigen::VectorXd::LinSpaced(61, 0.0, 3.0);
  const Trajectory data = integrate(truth, Eigen::Vector2d(0.4, -0.6), ts, fine);

  VectorField model = fresh_model({data}, 2, 6, 99);
  model.bounds = truth.bounds;

  TrainConfig cfg;
  cfg.iterations = 400;
  cfg.learning_rate = 2e-2;
  cfg.window = 5;
  cfg.batch_size = 8;
  cfg.beta1 = 0.0;
  cfg.beta2_smooth = 0.0;
  cfg.seed = 3;

  const double before = full_data_loss(model, {data}, cfg.window, cfg.solver);
  const TrainResult res = train_ode(model, {data}, cfg);
  model.set_params(res.theta);
  const double after = full_data_loss(model, {data}, cfg.window, cfg.solver);
  CHECK(after < before / 100.0);
  CHECK(!res.diverged);
  CHECK(res.theta.size() == model.n_params());
}

TEST_CASE("training is reproducible bit-for-bit") {
  GeneratorConfig gen = default_spiral_config();
  gen.n_stamps = 61;
  gen.tN = 1.2;
  const Trajectory data = generate(gen).noisy;

  TrainConfig cfg;
  cfg.iterations = 30;
  cfg.seed = 5;
  cfg.threads = 2;  // the ordered reduction keeps threading deterministic

  auto run = [&] {
    VectorField m = fresh_model({data}, 2, 4, 11);
    return train_ode(m, {data}, cfg);
  };
  const TrainResult a = run(), b = run();
  REQUIRE(a.loss_history.size() == b.loss_history.size());
  for (size_t i = 0; i < a.loss_history.size(); ++i)
    CHECK(a.loss_history[i] == b.loss_history[i]);
  CHECK(a.theta == b.theta);
}

TEST_CASE("training does not mutate the dataset and conserves the count") {
  GeneratorConfig gen = default_lorenz_config();
  gen.n_stamps = 41;
  gen.tN = 0.4;
  const Trajectory data = generate(gen).clean;
  const Trajectory copy = data;

  VectorField m = fresh_model({data}, 2, 5, 2);
  const long n_before = m.n_params();
  TrainConfig cfg;
  cfg.iterations = 20;
  const TrainResult res = train_ode(m, {data}, cfg);
  CHECK(res.theta.size() == n_before);
  CHECK(data.timestamps == copy.timestamps);
  for (size_t i = 0; i < data.states.size(); ++i)
    CHECK(data.states[i] == copy.states[i]);
}

TEST_CASE("smoothness weight reduces the roughness of the fit") {
  GeneratorConfig gen = default_spiral_config();
  gen.n_stamps = 81;
  gen.tN = 2.0;
  gen.noise_sigma = 0.15;
  const Trajectory data = generate(gen).noisy;

  auto roughness_after = [&](double beta2) {
    VectorField m = fresh_model({data}, 2, 4, 21);
    TrainConfig cfg;
    cfg.iterations = 250;
    cfg.seed = 9;
    cfg.beta1 = 0.0;
    cfg.beta2_smooth = beta2;
    const TrainResult res = train_ode(m, {data}, cfg);
    m.set_params(res.theta);
    const Trajectory pred =
        integrate(m, data.states[0], data.timestamps, cfg.solver);
    double r = 0.0;
    for (int i = 0; i + 1 < pred.n_stamps(); ++i)
      r += (pred.states[static_cast<size_t>(i) + 1] -
            pred.states[static_cast<size_t>(i)])
               .squaredNorm();
    return r;
  };
  CHECK(roughness_after(1e-2) <= roughness_after(0.0));
}

TEST_CASE("loss history length and full-loss recording") {
  const Trajectory data = ramp(20, 2);
  VectorField m = fresh_model({data}, 2, 3, 1);
  TrainConfig cfg;
  cfg.iterations = 12;
  cfg.record_full_loss = true;
  const TrainResult res = train_ode(m, {data}, cfg);
  CHECK(res.loss_history.size() == 12);
  for (double v : res.loss_history) CHECK(std::isfinite(v));
}
