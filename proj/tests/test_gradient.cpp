#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "neupde/errors.hpp"
#include "neupde/gradient.hpp"

using namespace neupde;

namespace {

/// Constant vector field g(t, x) = theta; the simplest dynamics with a
/// parameter dependence, used to pin closed-form gradient values.
class ConstantField : public Dynamics {
 public:
  Eigen::VectorXd theta;

  int state_dim() const override { return static_cast<int>(theta.size()); }
  long n_params() const override { return theta.size(); }
  Eigen::VectorXd params() const override { return theta; }
  void set_params(const Eigen::Ref<const Eigen::VectorXd>& t) override {
    theta = t;
  }
  Eigen::VectorXd eval(double, const Eigen::VectorXd&) const override {
    return theta;
  }
  void vjp(double, const Eigen::VectorXd& x, const Eigen::VectorXd& w,
           Eigen::VectorXd& bar_x,
           Eigen::Ref<Eigen::VectorXd> grad) const override {
    bar_x = Eigen::VectorXd::Zero(x.size());
    grad += w;
  }
  Eigen::MatrixXd jacobian_state(double, const Eigen::VectorXd& x) const override {
    return Eigen::MatrixXd::Zero(x.size(), x.size());
  }
};

/// g = 0 independent of the parameters: the objective reduces to constants
/// plus the l1 term.
class InertField : public Dynamics {
 public:
  Eigen::VectorXd theta;
  int dim = 3;

  int state_dim() const override { return dim; }
  long n_params() const override { return theta.size(); }
  Eigen::VectorXd params() const override { return theta; }
  void set_params(const Eigen::Ref<const Eigen::VectorXd>& t) override {
    theta = t;
  }
  Eigen::VectorXd eval(double, const Eigen::VectorXd& x) const override {
    return Eigen::VectorXd::Zero(x.size());
  }
  void vjp(double, const Eigen::VectorXd& x, const Eigen::VectorXd&,
           Eigen::VectorXd& bar_x, Eigen::Ref<Eigen::VectorXd>) const override {
    bar_x = Eigen::VectorXd::Zero(x.size());
  }
  Eigen::MatrixXd jacobian_state(double, const Eigen::VectorXd& x) const override {
    return Eigen::MatrixXd::Zero(x.size(), x.size());
  }
};

/// Forwards to an inner field but doubles one parameter-gradient
/// contribution; the injected fault grad_check must flag.
class CorruptedField : public Dynamics {
 public:
  CorruptedField(VectorField inner, long index)
      : inner_(std::move(inner)), index_(index) {}

  int state_dim() const override { return inner_.state_dim(); }
  long n_params() const override { return inner_.n_params(); }
  Eigen::VectorXd params() const override { return inner_.params(); }
  void set_params(const Eigen::Ref<const Eigen::VectorXd>& t) override {
    inner_.set_params(t);
  }
  Eigen::VectorXd eval(double t, const Eigen::VectorXd& x) const override {
    return inner_.eval(t, x);
  }
  void vjp(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& w,
           Eigen::VectorXd& bar_x,
           Eigen::Ref<Eigen::VectorXd> grad) const override {
    Eigen::VectorXd part = Eigen::VectorXd::Zero(grad.size());
    inner_.vjp(t, x, w, bar_x, part);
    part[index_] *= 2.0;
    grad += part;
  }

 private:
  VectorField inner_;
  long index_;
};

VectorField tiny_field(std::uint64_t seed, int d = 2, int h = 3,
                       bool include_time = false) {
  VectorField vf;
  vf.spec = DictionarySpec::make(d, 2, include_time);
  vf.bounds = NormalizationBounds{-2.0, 2.0};
  vf.time_range = TimeRange{0.0, 1.0};
  vf.mlp = init_params(vf.spec.n_terms(), h, d, Activation::Tanh, seed);
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> g(0.0, 0.3);
  for (int i = 0; i < vf.mlp.b1.size(); ++i) vf.mlp.b1[i] = g(rng);
  for (int i = 0; i < vf.mlp.b2.size(); ++i) vf.mlp.b2[i] = g(rng);
  return vf;
}

Trajectory random_window(int n_stamps, int d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Trajectory w;
  w.timestamps = Eigen::VectorXd::LinSpaced(n_stamps, 0.0, 0.3 * (n_stamps - 1));
  for (int i = 0; i < n_stamps; ++i) {
    Eigen::VectorXd x(d);
    for (int j = 0; j < d; ++j) x[j] = u(rng);
    w.states.push_back(x);
  }
  return w;
}

}  // namespace

TEST_CASE("objective pins the three terms") {
  ConstantField dyn;
  dyn.theta = Eigen::Vector3d(0, 0, 0);
  Trajectory window;
  window.timestamps = Eigen::Vector3d(0.0, 1.0, 2.0);
  window.states = {Eigen::Vector3d(1, 2, 3), Eigen::Vector3d(1, 2, 3),
                   Eigen::Vector3d(1, 2, 3)};
  SolverConfig solver;

  // zero field, constant targets: everything vanishes
  auto res = objective(dyn, window, solver, LossSpec{0.0, 0.0, 0.0});
  CHECK(res.loss == 0.0);
  CHECK(res.misfit == 0.0);

  // constant targets but the zero field also keeps consecutive predictions
  // equal, so the smoothness term stays zero
  res = objective(dyn, window, solver, LossSpec{0.0, 1.0, 0.0});
  CHECK(res.loss == 0.0);

  // l1 term: theta = (1, -2, 3), beta1 = 1e-4 adds exactly 6e-4
  dyn.theta = Eigen::Vector3d(1, -2, 3);
  const double with = objective(dyn, window, solver, LossSpec{1e-4, 0.0, 0.0}).loss;
  const double without = objective(dyn, window, solver, LossSpec{0.0, 0.0, 0.0}).loss;
  CHECK(with - without == doctest::Approx(6e-4).epsilon(1e-12));

  // the initial datum is the initial condition: no misfit at stamp 0
  Trajectory shifted = window;
  shifted.states[0] = Eigen::Vector3d(9, 9, 9);
  dyn.theta.setZero();
  const auto r2 = objective(dyn, shifted, solver, LossSpec{0.0, 0.0, 0.0});
  CHECK(r2.predicted.states[0] == shifted.states[0]);
  CHECK(r2.misfit ==
        doctest::Approx(2.0 * (Eigen::Vector3d(9, 9, 9) - Eigen::Vector3d(1, 2, 3))
                                  .squaredNorm())
            .epsilon(1e-12));
}

TEST_CASE("bptt gradient is zero at a stationary point") {
  ConstantField dyn;
  dyn.theta = Eigen::Vector3d::Zero();
  Trajectory window;
  window.timestamps = Eigen::Vector3d(0.0, 0.5, 1.0);
  window.states = {Eigen::Vector3d(1, 1, 1), Eigen::Vector3d(1, 1, 1),
                   Eigen::Vector3d(1, 1, 1)};
  SolverConfig solver;
  // beta2 on: predictions are all equal so the smoothness gradient vanishes
  const Eigen::VectorXd g =
      bptt_gradient(dyn, window, solver, LossSpec{0.0, 0.5, 0.0});
  CHECK(g.isZero());
}

TEST_CASE("l1 subgradient contributes exactly beta1 sign(theta)") {
  std::mt19937_64 rng(7);
  VectorField vf = tiny_field(42);
  const Trajectory window = random_window(3, 2, rng);
  SolverConfig solver;
  const Eigen::VectorXd base =
      bptt_gradient(vf, window, solver, LossSpec{0.0, 0.0, 0.0});
  const Eigen::VectorXd reg =
      bptt_gradient(vf, window, solver, LossSpec{1e-4, 0.0, 0.0});
  const Eigen::VectorXd theta = vf.params();
  for (long i = 0; i < theta.size(); ++i) {
    const double expect = theta[i] > 0 ? 1e-4 : (theta[i] < 0 ? -1e-4 : 0.0);
    CHECK(reg[i] - base[i] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("bptt matches finite differences on 100 random instances") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> substeps(1, 3);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    VectorField vf = tiny_field(1000 + rep, 2, 3, rep % 2 == 1);
    const Trajectory window = random_window(2 + rep % 2, 2, rng);
    SolverConfig solver{Scheme::Rk4, substeps(rng), 1e-8};
    const LossSpec loss{1e-4, 1e-5, 0.0};

    const Eigen::VectorXd g = bptt_gradient(vf, window, solver, loss);
    Eigen::VectorXd theta = vf.params(), fd(theta.size());
    const double h = 1e-6;
    for (long i = 0; i < theta.size(); ++i) {
      Eigen::VectorXd tp = theta, tm = theta;
      tp[i] += h;
      tm[i] -= h;
      vf.set_params(tp);
      const double fp = objective(vf, window, solver, loss).loss;
      vf.set_params(tm);
      const double fm = objective(vf, window, solver, loss).loss;
      fd[i] = (fp - fm) / (2 * h);
    }
    vf.set_params(theta);
    worst = std::max(worst, relative_gradient_error(g, fd));
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("adjoint with parameter-free dynamics reduces to the l1 subgradient") {
  InertField dyn;
  dyn.theta = Eigen::Vector3d(1.0, -2.0, 0.0);
  std::mt19937_64 rng(3);
  Trajectory window = random_window(4, 3, rng);
  SolverConfig solver;
  const Eigen::VectorXd g =
      adjoint_gradient(dyn, window, solver, LossSpec{1e-3, 0.0, 0.0}, 20);
  CHECK(g[0] == 1e-3);
  CHECK(g[1] == -1e-3);
  CHECK(g[2] == 0.0);
}

TEST_CASE("adjoint jump accumulation on zero dynamics") {
  // g = theta with theta = 0: lambda is piecewise constant and built purely
  // from the stamp jumps, and g_theta = I makes the quadrature exact, so the
  // adjoint must match bptt to rounding
  ConstantField dyn;
  dyn.theta = Eigen::Vector3d::Zero();
  std::mt19937_64 rng(5);
  const Trajectory window = random_window(4, 3, rng);
  SolverConfig solver;
  const LossSpec loss{0.0, 0.0, 0.0};
  const Eigen::VectorXd adj = adjoint_gradient(dyn, window, solver, loss, 10);
  const Eigen::VectorXd ref = bptt_gradient(dyn, window, solver, loss);
  CHECK(relative_gradient_error(adj, ref) < 1e-12);
}

TEST_CASE("adjoint converges to bptt as substeps double") {
  std::mt19937_64 rng(17);
  VectorField vf = tiny_field(5);
  Trajectory window = random_window(3, 2, rng);
  // shrink the window so the continuous and discrete objectives are close
  window.timestamps *= 0.5;
  SolverConfig solver{Scheme::Rk4, 20, 1e-8};
  const LossSpec loss{0.0, 0.0, 0.0};
  const Eigen::VectorXd ref = bptt_gradient(vf, window, solver, loss);

  CHECK(relative_gradient_error(adjoint_gradient(vf, window, solver, loss, 50),
                                ref) <= 1e-3);
  // the backward RK4 error dominates at coarse substep counts and must decay
  // as they double
  double prev = -1.0;
  for (int substeps : {4, 8, 16}) {
    const double err = relative_gradient_error(
        adjoint_gradient(vf, window, solver, loss, substeps), ref);
    if (prev >= 0.0) CHECK(err < prev);
    prev = err;
  }
}

TEST_CASE("adjoint handles the continuous beta2 term") {
  // finite differences of the continuous objective are unavailable, but the
  // beta2 path must still converge to a fixed vector as substeps grow
  std::mt19937_64 rng(23);
  VectorField vf = tiny_field(8, 2, 3, true);
  Trajectory window = random_window(3, 2, rng);
  window.timestamps *= 0.5;
  SolverConfig solver{Scheme::Rk4, 20, 1e-8};
  const LossSpec loss{0.0, 0.0, 1e-3};
  const Eigen::VectorXd a = adjoint_gradient(vf, window, solver, loss, 100);
  const Eigen::VectorXd b = adjoint_gradient(vf, window, solver, loss, 200);
  CHECK(relative_gradient_error(a, b) < 1e-3);
}

TEST_CASE("grad_check reports") {
  std::mt19937_64 rng(31);
  VectorField vf = tiny_field(12);
  Trajectory window = random_window(3, 2, rng);
  SolverConfig solver;
  const LossSpec loss{1e-4, 1e-5, 0.0};

  const auto bptt = grad_check(vf, window, solver, loss, 1e-6, GradEngine::Bptt);
  CHECK(bptt.worst_rel_err <= 1e-6);
  CHECK(bptt.engine == "bptt");

  Trajectory short_window = window;
  short_window.timestamps *= 0.5;
  const auto adj = grad_check(vf, short_window, solver, loss, 1e-6,
                              GradEngine::Adjoint, 50);
  CHECK(adj.worst_rel_err <= 1e-3);

  // parameters must be restored after the sweep
  const Eigen::VectorXd before = vf.params();
  grad_check(vf, window, solver, loss, 1e-6, GradEngine::Bptt);
  CHECK(vf.params() == before);

  // report serialization
  CHECK(bptt.to_json().find("worst_rel_err") != std::string::npos);
}

TEST_CASE("grad_check flags an injected fault") {
  std::mt19937_64 rng(37);
  VectorField clean = tiny_field(14);
  const Trajectory window = random_window(3, 2, rng);
  SolverConfig solver;
  const LossSpec loss{0.0, 0.0, 0.0};
  // corrupt the dominant entry so the doubling is visible against the
  // gradient's own magnitude
  long target = 0;
  bptt_gradient(clean, window, solver, loss).cwiseAbs().maxCoeff(&target);
  CorruptedField bad(clean, target);
  const auto report = grad_check(bad, window, solver, loss, 1e-6,
                                 GradEngine::Bptt);
  CHECK(report.worst_rel_err >= 0.1);
  CHECK(report.index == target);
}

TEST_CASE("relative_gradient_error definition") {
  const Eigen::VectorXd a = Eigen::Vector3d(1.0, 2.0, -4.0);
  Eigen::VectorXd b = a;
  b[1] = 2.2;
  long idx = -1;
  CHECK(relative_gradient_error(a, b, &idx) ==
        doctest::Approx(0.2 / 4.0).epsilon(1e-12));
  CHECK(idx == 1);
  CHECK(relative_gradient_error(a, a) == 0.0);
  // tiny vectors fall back to the absolute floor rather than dividing by 0
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(3);
  CHECK(std::isfinite(relative_gradient_error(z, z)));
}
