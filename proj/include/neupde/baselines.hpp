#pragma once

#include "neupde/odeint.hpp"

namespace neupde {

/// Finite-difference time derivatives at every stamp: non-uniform central
/// differences at interior stamps, second-order one-sided at the ends.
/// Returns an n_stamps x dim matrix.
Eigen::MatrixXd estimate_derivatives(const Trajectory& traj);

/// dX ~= Theta * Xi on UNNORMALIZED monomial features (optionally with a
/// leading constant column).
struct RegressionProblem {
  DictionarySpec spec;
  bool constant_column = false;
  Eigen::MatrixXd Theta;    // N x n  (n = terms [+1])
  Eigen::MatrixXd targets;  // N x d

  int n_features() const { return static_cast<int>(Theta.cols()); }
  /// Printable name of feature column j ("1" for the constant column).
  std::string feature_string(int j) const;
};

RegressionProblem build_problem(const std::vector<Trajectory>& data,
                                const DictionarySpec& spec,
                                bool constant_column = false);

struct StlsqResult {
  Eigen::MatrixXd Xi;  // n_features x d
  int iterations = 0;
  bool rank_deficient = false;  // some support needed a minimum-norm solve
};

/// Sequentially thresholded least squares: alternate full least squares on
/// the active support with hard-thresholding |xi| < threshold, until the
/// support stabilizes or max_iters.
StlsqResult stlsq(const RegressionProblem& problem, double threshold,
                  int max_iters = 10);

struct LassoResult {
  Eigen::MatrixXd Xi;  // debiased coefficients, n_features x d
  std::vector<double> objective_history;  // summed over components
  bool converged = false;
};

/// Proximal-gradient (ISTA) on 0.5||Theta xi - y||^2 + lambda||xi||_1 per
/// target component, to tolerance 1e-8 or max_iters, then an unregularized
/// least-squares refit on the recovered support.
LassoResult lasso_debias(const RegressionProblem& problem, double lambda,
                         int max_iters = 5000);

/// `term,c1,...,cd` rows; used by the CLI baseline command.
void save_coefficients_csv(const std::string& path,
                           const RegressionProblem& problem,
                           const Eigen::MatrixXd& Xi);

}  // namespace neupde
