#pragma once

#include "neupde/pde.hpp"
#include "neupde/train.hpp"

namespace neupde {

/// Rank-r POD basis of a snapshot matrix, with grid metadata so projected
/// trajectories can be mapped back to fields.
struct RomBasis {
  Eigen::MatrixXd Ur;               // m x r, orthonormal columns
  Eigen::VectorXd singular_values;  // r, non-increasing
  int r = 0;
  Grid2D grid;  // de-vectorization metadata

  void validate() const;
};

/// Top-r left singular vectors/values of X (m x N snapshot matrix).
RomBasis svd_truncate(const Eigen::MatrixXd& X, int r);

/// Snapshot matrix of a field series: one flattened field per column.
Eigen::MatrixXd snapshot_matrix(const FieldSeries& fs);

/// alpha(t_i) = Ur^T X_col(i), keeping the source timestamps.
Trajectory project(const RomBasis& basis, const Eigen::MatrixXd& X,
                   const Eigen::VectorXd& timestamps);
Trajectory project(const RomBasis& basis, const FieldSeries& fs);

/// De-vectorizes Ur * alpha per stamp.
FieldSeries reconstruct(const RomBasis& basis, const Trajectory& alpha);

struct RomTrainResult {
  VectorField model;  // linear_part = A0, plus the MLP closure
  TrainResult train;
};

/// Trains alpha_dot = A0 alpha + F(D(N(alpha)), theta) with A0 starting at
/// zero. With use_mlp=false only A0 trains (the pure linear baseline).
RomTrainResult train_rom(const std::vector<Trajectory>& alpha_series,
                         int degree, int hidden, Activation act,
                         const TrainConfig& config, bool use_mlp = true);

}  // namespace neupde
