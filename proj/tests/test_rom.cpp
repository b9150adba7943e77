#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/SVD>
#include <random>

#include "neupde/errors.hpp"
#include "neupde/rom.hpp"

using namespace neupde;

namespace {

Eigen::MatrixXd random_matrix(int m, int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd X(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) X(i, j) = g(rng);
  return X;
}

// truncated Taylor series of exp(A), enough terms for the scales used here
Eigen::MatrixXd expm(const Eigen::MatrixXd& A) {
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(A.rows(), A.cols());
  Eigen::MatrixXd sum = term;
  for (int k = 1; k <= 25; ++k) {
    term = term * A / double(k);
    sum += term;
  }
  return sum;
}

}  // namespace

TEST_CASE("svd_truncate on exact low-rank data") {
  std::mt19937_64 rng(1);
  const int r = 3;
  const Eigen::MatrixXd X =
      random_matrix(20, r, rng) * random_matrix(r, 15, rng);
  const RomBasis basis = svd_truncate(X, r);
  basis.validate();
  CHECK((basis.Ur * basis.Ur.transpose() * X - X).cwiseAbs().maxCoeff() < 1e-10);
  CHECK_THROWS_AS(svd_truncate(X, 16), RankTooLarge);
  CHECK_THROWS_AS(svd_truncate(X, 0), RankTooLarge);
}

TEST_CASE("svd_truncate of a diagonal matrix sorts the magnitudes") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(4, 4);
  X(0, 0) = 2.0;
  X(1, 1) = -7.0;
  X(2, 2) = 0.5;
  X(3, 3) = 4.0;
  const RomBasis basis = svd_truncate(X, 4);
  CHECK(basis.singular_values[0] == doctest::Approx(7.0));
  CHECK(basis.singular_values[1] == doctest::Approx(4.0));
  CHECK(basis.singular_values[2] == doctest::Approx(2.0));
  CHECK(basis.singular_values[3] == doctest::Approx(0.5));
}

TEST_CASE("Eckart-Young identity against a full SVD oracle") {
  std::mt19937_64 rng(7);
  const Eigen::MatrixXd X = random_matrix(64, 50, rng);
  Eigen::JacobiSVD<Eigen::MatrixXd> full(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  for (int r : {1, 5, 20}) {
    const RomBasis basis = svd_truncate(X, r);
    basis.validate();
    const Eigen::MatrixXd approx = basis.Ur * basis.Ur.transpose() * X;
    const double err = (X - approx).norm();
    const double tail = std::sqrt(
        full.singularValues().tail(full.singularValues().size() - r).squaredNorm());
    CHECK(err == doctest::Approx(tail).epsilon(1e-10));
  }
}

TEST_CASE("project basics") {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd X = random_matrix(12, 9, rng);
  const RomBasis basis = svd_truncate(X, 4);
  const Eigen::VectorXd ts = Eigen::VectorXd::LinSpaced(9, 0.0, 2.0);

  // columns equal to Ur e1 project onto e1
  Eigen::MatrixXd cols(12, 3);
  cols.colwise() = Eigen::VectorXd(basis.Ur.col(0));
  const Trajectory a = project(basis, cols, Eigen::Vector3d(0, 1, 2));
  for (const auto& s : a.states) {
    CHECK(s[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.tail(3).cwiseAbs().maxCoeff() < 1e-12);
  }

  // orthonormal projection is non-expansive
  const Trajectory alpha = project(basis, X, ts);
  for (int i = 0; i < 9; ++i)
    CHECK(alpha.states[static_cast<size_t>(i)].norm() <= X.col(i).norm() + 1e-12);

  CHECK_THROWS_AS(project(basis, random_matrix(5, 9, rng), ts), ShapeMismatch);
}

TEST_CASE("project then reconstruct is the identity on the span") {
  std::mt19937_64 rng(11);
  Grid2D g{4, 3, 0.25, 1.0 / 3};
  const int m = static_cast<int>(g.n_points());
  const Eigen::MatrixXd X = random_matrix(m, 4, rng) * random_matrix(4, 8, rng);
  RomBasis basis = svd_truncate(X, 4);
  basis.grid = g;
  const Eigen::VectorXd ts = Eigen::VectorXd::LinSpaced(8, 0.0, 1.0);
  const Trajectory alpha = project(basis, X, ts);
  const FieldSeries recon = reconstruct(basis, alpha);
  for (int i = 0; i < 8; ++i)
    CHECK((flatten(recon.fields[static_cast<size_t>(i)]) - X.col(i))
              .lpNorm<Eigen::Infinity>() < 1e-10);

  // zero alpha reconstructs zero fields
  Trajectory zero = alpha;
  for (auto& s : zero.states) s.setZero();
  for (const auto& f : reconstruct(basis, zero).fields)
    CHECK(f.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("terminal relative L2 error matches a straight-line oracle") {
  std::mt19937_64 rng(13);
  Grid2D g{3, 3, 1.0 / 3, 1.0 / 3};
  const Eigen::MatrixXd X = random_matrix(9, 6, rng);
  RomBasis basis = svd_truncate(X, 2);
  basis.grid = g;
  const Eigen::VectorXd ts = Eigen::VectorXd::LinSpaced(6, 0.0, 1.0);
  const FieldSeries recon = reconstruct(basis, project(basis, X, ts));

  const Eigen::VectorXd pred = flatten(recon.fields.back());
  const Eigen::VectorXd truth = X.col(5);
  double num = 0.0, den = 0.0;
  for (int i = 0; i < 9; ++i) {
    num += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    den += truth[i] * truth[i];
  }
  CHECK((pred - truth).norm() / truth.norm() ==
        doctest::Approx(std::sqrt(num / den)).epsilon(1e-12));
}

TEST_CASE("train_rom with the closure disabled recovers a linear generator") {
  const Eigen::MatrixXd A =
      (Eigen::MatrixXd(2, 2) << 0.0, 1.0, -1.0, -0.2).finished();
  const double dt = 0.1;
  const Eigen::MatrixXd step = expm(A * dt);

  std::vector<Trajectory> data;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int tr = 0; tr < 4; ++tr) {
    Trajectory t;
    t.timestamps = Eigen::VectorXd::LinSpaced(41, 0.0, 4.0);
    Eigen::VectorXd x = Eigen::Vector2d(u(rng), u(rng));
    t.states.push_back(x);
    for (int i = 1; i < 41; ++i) {
      x = step * x;
      t.states.push_back(x);
    }
    data.push_back(t);
  }

  TrainConfig cfg;
  cfg.iterations = 1500;
  cfg.learning_rate = 5e-2;
  cfg.beta1 = 0.0;
  cfg.beta2_smooth = 0.0;
  cfg.window = 5;
  cfg.seed = 2;
  const RomTrainResult res = train_rom(data, 2, 4, Activation::Tanh, cfg, false);
  CHECK(!res.model.use_mlp);

  // one-step map of the trained linear model vs the data's true propagator
  const Eigen::MatrixXd learned = expm(res.model.linear_part * dt);
  CHECK((learned - step).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("the nonlinear closure beats the pure linear fit") {
  // mildly nonlinear synthetic dynamics: linear rotation plus a cubic term
  std::vector<Trajectory> data;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  const Rhs rhs = [](double, const Eigen::VectorXd& x) {
    return Eigen::VectorXd(Eigen::Vector2d(
        x[1] - 0.8 * x[0] * x[0] * x[0], -x[0] - 0.8 * x[1] * x[1] * x[1]));
  };
  SolverConfig fine{Scheme::Rk4, 8, 1e-8};
  for (int tr = 0; tr < 3; ++tr) {
    const Eigen::VectorXd x0 = Eigen::Vector2d(u(rng), u(rng));
    data.push_back(integrate(rhs, x0,
                             Eigen::VectorXd::LinSpaced(41, 0.0, 4.0), fine));
  }

  TrainConfig cfg;
  cfg.iterations = 600;
  cfg.learning_rate = 2e-2;
  cfg.beta1 = 0.0;
  cfg.window = 5;
  cfg.seed = 4;
  const RomTrainResult with = train_rom(data, 3, 6, Activation::Tanh, cfg, true);
  const RomTrainResult without =
      train_rom(data, 3, 6, Activation::Tanh, cfg, false);
  const double mis_with =
      full_data_loss(with.model, data, cfg.window, cfg.solver);
  const double mis_without =
      full_data_loss(without.model, data, cfg.window, cfg.solver);
  CHECK(mis_with < mis_without);
}

TEST_CASE("non-uniform timestamps are accepted") {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> jitter(0.01, 0.15);
  Trajectory t;
  std::vector<double> ts = {0.0};
  for (int i = 1; i < 25; ++i) ts.push_back(ts.back() + jitter(rng));
  t.timestamps = Eigen::Map<Eigen::VectorXd>(ts.data(), 25);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 25; ++i)
    t.states.push_back(Eigen::Vector2d(u(rng), u(rng)));

  TrainConfig cfg;
  cfg.iterations = 10;
  CHECK_NOTHROW(train_rom({t}, 2, 3, Activation::Tanh, cfg, true));
}
