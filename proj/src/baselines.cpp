#include "neupde/baselines.hpp"

#include <Eigen/QR>
#include <fstream>
#include <iomanip>

#include "neupde/errors.hpp"

namespace neupde {

Eigen::MatrixXd estimate_derivatives(const Trajectory& traj) {
  traj.validate();
  const int N = traj.n_stamps(), d = traj.dim();
  if (N < 3) throw TooShort("estimate_derivatives: need at least 3 stamps");
  Eigen::MatrixXd dX(N, d);
  const auto& t = traj.timestamps;
  auto row = [&](int i) { return traj.states[static_cast<size_t>(i)].transpose(); };

  // Three-point formulas on a possibly non-uniform grid, all second order.
  for (int i = 1; i + 1 < N; ++i) {
    const double h1 = t[i] - t[i - 1], h2 = t[i + 1] - t[i];
    dX.row(i) = -h2 / (h1 * (h1 + h2)) * row(i - 1) +
                (h2 - h1) / (h1 * h2) * row(i) +
                h1 / (h2 * (h1 + h2)) * row(i + 1);
  }
  {
    const double h1 = t[1] - t[0], h2 = t[2] - t[1];
    dX.row(0) = -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * row(0) +
                (h1 + h2) / (h1 * h2) * row(1) -
                h1 / (h2 * (h1 + h2)) * row(2);
  }
  {
    const double h1 = t[N - 2] - t[N - 3], h2 = t[N - 1] - t[N - 2];
    dX.row(N - 1) = h2 / (h1 * (h1 + h2)) * row(N - 3) -
                    (h1 + h2) / (h1 * h2) * row(N - 2) +
                    (2.0 * h2 + h1) / (h2 * (h1 + h2)) * row(N - 1);
  }
  return dX;
}

std::string RegressionProblem::feature_string(int j) const {
  if (constant_column) {
    if (j == 0) return "1";
    --j;
  }
  return spec.term_string(j);
}

RegressionProblem build_problem(const std::vector<Trajectory>& data,
                                const DictionarySpec& spec,
                                bool constant_column) {
  if (data.empty()) throw TooShort("build_problem: no trajectories");
  long N = 0;
  for (const auto& tr : data) N += tr.n_stamps();
  const int d = data.front().dim();
  if (d != spec.dim)
    throw ShapeMismatch("build_problem: dictionary dim != data dim");
  const int off = constant_column ? 1 : 0;

  RegressionProblem p;
  p.spec = spec;
  p.constant_column = constant_column;
  p.Theta.resize(N, spec.n_terms() + off);
  p.targets.resize(N, d);
  long r = 0;
  for (const auto& tr : data) {
    const Eigen::MatrixXd dX = estimate_derivatives(tr);
    for (int i = 0; i < tr.n_stamps(); ++i, ++r) {
      if (constant_column) p.Theta(r, 0) = 1.0;
      p.Theta.row(r).tail(spec.n_terms()) =
          eval_dictionary(spec, tr.timestamps[i], tr.states[static_cast<size_t>(i)])
              .transpose();
      p.targets.row(r) = dX.row(i);
    }
  }
  return p;
}

namespace {

/// Least squares of y on the columns of Theta listed in `support`; scattered
/// back into a full-length coefficient vector. Sets `rank_deficient` when the
/// solve fell back to a minimum-norm answer.
Eigen::VectorXd support_lstsq(const Eigen::MatrixXd& Theta,
                              const Eigen::VectorXd& y,
                              const std::vector<int>& support,
                              bool* rank_deficient) {
  Eigen::VectorXd xi = Eigen::VectorXd::Zero(Theta.cols());
  if (support.empty()) return xi;
  Eigen::MatrixXd sub(Theta.rows(), static_cast<long>(support.size()));
  for (size_t k = 0; k < support.size(); ++k) sub.col(static_cast<long>(k)) = Theta.col(support[k]);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(sub);
  if (rank_deficient && cod.rank() < static_cast<long>(support.size()))
    *rank_deficient = true;
  const Eigen::VectorXd c = cod.solve(y);
  for (size_t k = 0; k < support.size(); ++k) xi[support[k]] = c[static_cast<long>(k)];
  return xi;
}

}  // namespace

StlsqResult stlsq(const RegressionProblem& problem, double threshold,
                  int max_iters) {
  if (threshold < 0.0) throw ConfigError("stlsq: threshold must be >= 0");
  const int n = problem.n_features(), d = static_cast<int>(problem.targets.cols());
  StlsqResult res;
  res.Xi.resize(n, d);
  int worst_iters = 0;
  for (int c = 0; c < d; ++c) {
    std::vector<int> support(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) support[static_cast<size_t>(j)] = j;
    Eigen::VectorXd xi;
    int it = 0;
    for (; it < max_iters; ++it) {
      xi = support_lstsq(problem.Theta, problem.targets.col(c), support,
                         &res.rank_deficient);
      std::vector<int> kept;
      for (int j : support)
        if (std::abs(xi[j]) >= threshold) kept.push_back(j);
      if (kept == support) break;
      support = std::move(kept);
    }
    // zero the thresholded entries of the final fit
    for (int j = 0; j < n; ++j)
      if (std::abs(xi[j]) < threshold) xi[j] = 0.0;
    res.Xi.col(c) = xi;
    worst_iters = std::max(worst_iters, it + 1);
  }
  res.iterations = worst_iters;
  return res;
}

LassoResult lasso_debias(const RegressionProblem& problem, double lambda,
                         int max_iters) {
  if (lambda < 0.0) throw ConfigError("lasso_debias: lambda must be >= 0");
  const int n = problem.n_features(), d = static_cast<int>(problem.targets.cols());
  const Eigen::MatrixXd& Theta = problem.Theta;
  const Eigen::MatrixXd gram = Theta.transpose() * Theta;
  // Lipschitz constant of the smooth part: largest eigenvalue of Theta^T Theta.
  const double L =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram).eigenvalues().maxCoeff();
  const double step = L > 0.0 ? 1.0 / L : 1.0;

  LassoResult res;
  res.Xi = Eigen::MatrixXd::Zero(n, d);
  res.converged = true;
  Eigen::MatrixXd XiIsta = Eigen::MatrixXd::Zero(n, d);

  std::vector<std::vector<double>> hist(static_cast<size_t>(d));
  size_t max_len = 0;
  for (int c = 0; c < d; ++c) {
    const Eigen::VectorXd y = problem.targets.col(c);
    Eigen::VectorXd xi = Eigen::VectorXd::Zero(n);
    auto objective = [&](const Eigen::VectorXd& v) {
      return 0.5 * (Theta * v - y).squaredNorm() + lambda * v.lpNorm<1>();
    };
    double prev = objective(xi);
    hist[static_cast<size_t>(c)].push_back(prev);
    bool done = false;
    for (int it = 0; it < max_iters; ++it) {
      const Eigen::VectorXd g = gram * xi - Theta.transpose() * y;
      Eigen::VectorXd z = xi - step * g;
      const double tau = step * lambda;
      for (int j = 0; j < n; ++j)
        z[j] = std::copysign(std::max(std::abs(z[j]) - tau, 0.0), z[j]);
      const double obj = objective(z);
      hist[static_cast<size_t>(c)].push_back(obj);
      const bool small_change =
          (xi - z).lpNorm<Eigen::Infinity>() <= 1e-8 * std::max(1.0, xi.lpNorm<Eigen::Infinity>());
      xi = std::move(z);
      prev = obj;
      if (small_change) {
        done = true;
        break;
      }
    }
    if (!done) res.converged = false;
    XiIsta.col(c) = xi;
    max_len = std::max(max_len, hist[static_cast<size_t>(c)].size());
  }

  res.objective_history.assign(max_len, 0.0);
  for (int c = 0; c < d; ++c) {
    const auto& h = hist[static_cast<size_t>(c)];
    for (size_t i = 0; i < max_len; ++i)
      res.objective_history[i] += h[std::min(i, h.size() - 1)];
  }

  // debias: unregularized least squares on the recovered support
  for (int c = 0; c < d; ++c) {
    std::vector<int> support;
    for (int j = 0; j < n; ++j)
      if (XiIsta(j, c) != 0.0) support.push_back(j);
    res.Xi.col(c) =
        support_lstsq(Theta, problem.targets.col(c), support, nullptr);
  }
  return res;
}

void save_coefficients_csv(const std::string& path,
                           const RegressionProblem& problem,
                           const Eigen::MatrixXd& Xi) {
  if (Xi.rows() != problem.n_features())
    throw ShapeMismatch("save_coefficients_csv: row count mismatch");
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "term";
  for (int c = 0; c < Xi.cols(); ++c) os << ",c" << c + 1;
  os << "\n" << std::setprecision(17);
  for (int j = 0; j < Xi.rows(); ++j) {
    os << problem.feature_string(j);
    for (int c = 0; c < Xi.cols(); ++c) os << "," << Xi(j, c);
    os << "\n";
  }
  if (!os) throw IoError("write failed: " + path);
}

}  // namespace neupde
