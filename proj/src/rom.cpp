#include "neupde/rom.hpp"

#include <Eigen/SVD>

#include "neupde/errors.hpp"

namespace neupde {

void RomBasis::validate() const {
  if (Ur.cols() != r || singular_values.size() != r)
    throw ShapeMismatch("RomBasis: rank mismatch");
  const double ortho =
      (Ur.transpose() * Ur - Eigen::MatrixXd::Identity(r, r)).cwiseAbs().maxCoeff();
  if (ortho > 1e-10) throw ShapeMismatch("RomBasis: columns not orthonormal");
  for (int i = 1; i < r; ++i)
    if (singular_values[i] > singular_values[i - 1] || singular_values[i] < 0.0)
      throw ShapeMismatch("RomBasis: singular values not sorted");
}

RomBasis svd_truncate(const Eigen::MatrixXd& X, int r) {
  if (r < 1 || r > std::min(X.rows(), X.cols()))
    throw RankTooLarge("svd_truncate: rank outside [1, min(m, N)]");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU);
  RomBasis basis;
  basis.r = r;
  basis.Ur = svd.matrixU().leftCols(r);
  basis.singular_values = svd.singularValues().head(r);
  return basis;
}

Eigen::MatrixXd snapshot_matrix(const FieldSeries& fs) {
  fs.validate();
  Eigen::MatrixXd X(fs.grid.n_points(), fs.n_stamps());
  for (int i = 0; i < fs.n_stamps(); ++i)
    X.col(i) = flatten(fs.fields[static_cast<size_t>(i)]);
  return X;
}

Trajectory project(const RomBasis& basis, const Eigen::MatrixXd& X,
                   const Eigen::VectorXd& timestamps) {
  if (X.rows() != basis.Ur.rows())
    throw ShapeMismatch("project: snapshot row count mismatch");
  if (X.cols() != timestamps.size())
    throw ShapeMismatch("project: stamp count mismatch");
  if (X.cols() < 1) throw ShapeMismatch("project: empty snapshot matrix");
  Trajectory alpha;
  alpha.timestamps = timestamps;
  alpha.states.reserve(static_cast<size_t>(X.cols()));
  for (int i = 0; i < X.cols(); ++i)
    alpha.states.push_back(basis.Ur.transpose() * X.col(i));
  return alpha;
}

Trajectory project(const RomBasis& basis, const FieldSeries& fs) {
  return project(basis, snapshot_matrix(fs), fs.timestamps);
}

FieldSeries reconstruct(const RomBasis& basis, const Trajectory& alpha) {
  if (basis.Ur.rows() != basis.grid.n_points())
    throw ShapeMismatch("reconstruct: basis rows != grid points");
  FieldSeries fs;
  fs.grid = basis.grid;
  fs.timestamps = alpha.timestamps;
  fs.fields.reserve(alpha.states.size());
  for (const auto& a : alpha.states) {
    if (a.size() != basis.r) throw ShapeMismatch("reconstruct: rank mismatch");
    fs.fields.push_back(unflatten(basis.Ur * a, basis.grid));
  }
  return fs;
}

RomTrainResult train_rom(const std::vector<Trajectory>& alpha_series,
                         int degree, int hidden, Activation act,
                         const TrainConfig& config, bool use_mlp) {
  if (alpha_series.empty()) throw TooShort("train_rom: no trajectories");
  const int r = alpha_series.front().dim();

  RomTrainResult out;
  VectorField& vf = out.model;
  vf.spec = DictionarySpec::make(r, degree, false);
  vf.bounds = fit_bounds(alpha_series);
  vf.time_range = TimeRange{alpha_series.front().timestamps[0],
                            alpha_series.front().timestamps
                                [alpha_series.front().timestamps.size() - 1]};
  vf.mlp = init_params(vf.spec.n_terms(), hidden, r, act, config.seed);
  vf.linear_part = Eigen::MatrixXd::Zero(r, r);
  vf.use_mlp = use_mlp;

  out.train = train_ode(vf, alpha_series, config);
  vf.set_params(out.train.theta);
  return out;
}

}  // namespace neupde
