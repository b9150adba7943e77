#pragma once

#include <cstdint>
#include <vector>

#include "neupde/odeint.hpp"

namespace neupde {

/// Uniform periodic grid on [0, nx*hx) x [0, ny*hy).
struct Grid2D {
  int nx = 32;
  int ny = 32;
  double hx = 1.0 / 32;
  double hy = 1.0 / 32;
  long n_points() const { return static_cast<long>(nx) * ny; }
};

/// Scalar field sampled on a Grid2D; entry (ix, iy).
using Field2D = Eigen::MatrixXd;

struct FieldSeries {
  Grid2D grid;
  Eigen::VectorXd timestamps;
  std::vector<Field2D> fields;

  int n_stamps() const { return static_cast<int>(fields.size()); }
  void validate() const;
};

/// The six 3x3 kernels: identity and the five central second-order
/// finite-difference approximations.
enum class Stencil { Identity, Dx, Dy, Dxx, Dxy, Dyy };

/// Periodic 3x3 convolution approximating the named derivative.
Field2D apply_stencil(const Field2D& u, Stencil k, const Grid2D& grid);

/// Adjoint (transpose) of apply_stencil, for reverse-mode passes.
Field2D apply_stencil_adjoint(const Field2D& w, Stencil k, const Grid2D& grid);

enum class Channel { T, X, Y, U, DxU, DyU, DxxU, DxyU, DyyU };

Channel channel_from_string(const std::string& name);
const char* to_string(Channel c);
std::vector<Channel> default_burgers_channels();  // 8 channels, no DxyU

/// u_t = F(D(N([channels])), theta): a shared perceptron applied at every
/// grid point over pointwise monomials of the channel values (the 1x1
/// convolution form). Implements Dynamics on the flattened nx*ny state.
///
/// `channel_bounds` holds one (m, M) pair per channel when per-channel
/// normalization is enabled, or a single pair applied uniformly.
class PdeDynamics : public Dynamics {
 public:
  Grid2D grid;
  std::vector<Channel> channels;
  DictionarySpec spec;  // dim = channels.size(), include_time = false
  std::vector<NormalizationBounds> channel_bounds;
  TimeRange time_range;  // normalizes the T channel to [0, 1]
  MlpParams mlp;         // n_in = spec terms, n_out = 1

  int state_dim() const override { return static_cast<int>(grid.n_points()); }
  long n_params() const override { return mlp.size(); }
  Eigen::VectorXd params() const override { return mlp.pack(); }
  void set_params(const Eigen::Ref<const Eigen::VectorXd>& theta) override {
    mlp.unpack(theta);
  }

  Eigen::VectorXd eval(double t, const Eigen::VectorXd& x) const override;
  void vjp(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& w,
           Eigen::VectorXd& bar_x,
           Eigen::Ref<Eigen::VectorXd> grad) const override;

  /// Channel matrix (n_channels x n_points) at time t for flattened state x.
  Eigen::MatrixXd compute_channels(double t, const Eigen::VectorXd& x) const;

  /// Fits channel_bounds over every stamp of the given series.
  void fit_channel_bounds(const std::vector<FieldSeries>& data,
                          bool per_channel);
};

/// Convenience wrapper of eval on an unflattened field.
Field2D pde_rhs(const PdeDynamics& model, double t, const Field2D& u);

Eigen::VectorXd flatten(const Field2D& u);
Field2D unflatten(const Eigen::VectorXd& x, const Grid2D& grid);

/// Converts a field series to a flattened Trajectory (for the shared
/// training loop) and back.
Trajectory fieldseries_to_trajectory(const FieldSeries& fs);
FieldSeries trajectory_to_fieldseries(const Trajectory& tr, const Grid2D& grid);

/// Reference 2-D Burgers solver: u_t + 0.5 div(u^2) = nu Lap(u) on the
/// periodic grid, RK4 in time, central differences in space (divergence
/// form). Stores every `store_every`-th step, including the initial state.
/// Throws UnstableStep when dt violates the explicit stability bound or the
/// solution exceeds 10x its initial amplitude.
FieldSeries burgers_reference(const Field2D& ic, const Grid2D& grid, double dt,
                              int steps, int store_every, double nu = 0.01);

struct BurgersDataset {
  std::vector<FieldSeries> train;  // 5 series
  FieldSeries test;                // 1 series
};

/// 32x32 grid, dt = 1.5e-5, 100 stored stamps per series. Training initial
/// conditions are A sin(2 pi x) plus smooth seeded Gaussian perturbations;
/// the test initial condition is the clean x<->y transpose A sin(2 pi y).
BurgersDataset make_burgers_dataset(std::uint64_t seed, double amplitude = 1.5,
                                    double noise_sigma = 0.1);

struct TrainConfig;  // from train.hpp

/// Mean of the per-stamp grid-summed squared error over teacher-forced
/// windows of k intervals tiling the series (the evaluation metric for the
/// Burgers experiments).
double windowed_field_mse(const PdeDynamics& model,
                          const std::vector<FieldSeries>& data, int k,
                          const SolverConfig& solver);

}  // namespace neupde
