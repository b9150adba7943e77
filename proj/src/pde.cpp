#include "neupde/pde.hpp"

#include <cmath>
#include <random>

#include "neupde/errors.hpp"
#include "neupde/train.hpp"

namespace neupde {

void FieldSeries::validate() const {
  if (static_cast<int>(fields.size()) != timestamps.size())
    throw ShapeMismatch("FieldSeries: stamp/field count mismatch");
  for (const auto& f : fields)
    if (f.rows() != grid.nx || f.cols() != grid.ny)
      throw ShapeMismatch("FieldSeries: field shape mismatch");
}

namespace {

inline int wrap(int i, int n) { return (i % n + n) % n; }

}  // namespace

Field2D apply_stencil(const Field2D& u, Stencil k, const Grid2D& grid) {
  if (u.rows() != grid.nx || u.cols() != grid.ny)
    throw ShapeMismatch("apply_stencil: field shape mismatch");
  const int nx = grid.nx, ny = grid.ny;
  Field2D out(nx, ny);
  const double cx = 1.0 / (2.0 * grid.hx), cy = 1.0 / (2.0 * grid.hy);
  const double cxx = 1.0 / (grid.hx * grid.hx), cyy = 1.0 / (grid.hy * grid.hy);
  const double cxy = 1.0 / (4.0 * grid.hx * grid.hy);
  for (int i = 0; i < nx; ++i) {
    const int ip = wrap(i + 1, nx), im = wrap(i - 1, nx);
    for (int j = 0; j < ny; ++j) {
      const int jp = wrap(j + 1, ny), jm = wrap(j - 1, ny);
      switch (k) {
        case Stencil::Identity:
          out(i, j) = u(i, j);
          break;
        case Stencil::Dx:
          out(i, j) = cx * (u(ip, j) - u(im, j));
          break;
        case Stencil::Dy:
          out(i, j) = cy * (u(i, jp) - u(i, jm));
          break;
        case Stencil::Dxx:
          out(i, j) = cxx * (u(ip, j) - 2.0 * u(i, j) + u(im, j));
          break;
        case Stencil::Dyy:
          out(i, j) = cyy * (u(i, jp) - 2.0 * u(i, j) + u(i, jm));
          break;
        case Stencil::Dxy:
          out(i, j) = cxy * (u(ip, jp) - u(ip, jm) - u(im, jp) + u(im, jm));
          break;
      }
    }
  }
  return out;
}

Field2D apply_stencil_adjoint(const Field2D& w, Stencil k, const Grid2D& grid) {
  // Dx and Dy are antisymmetric under the periodic wraparound; the
  // second-derivative kernels are symmetric.
  switch (k) {
    case Stencil::Dx:
    case Stencil::Dy:
      return -apply_stencil(w, k, grid);
    default:
      return apply_stencil(w, k, grid);
  }
}

Channel channel_from_string(const std::string& name) {
  if (name == "t") return Channel::T;
  if (name == "x") return Channel::X;
  if (name == "y") return Channel::Y;
  if (name == "u") return Channel::U;
  if (name == "dx_u") return Channel::DxU;
  if (name == "dy_u") return Channel::DyU;
  if (name == "dxx_u") return Channel::DxxU;
  if (name == "dxy_u") return Channel::DxyU;
  if (name == "dyy_u") return Channel::DyyU;
  throw ConfigError("unknown channel: " + name);
}

const char* to_string(Channel c) {
  switch (c) {
    case Channel::T: return "t";
    case Channel::X: return "x";
    case Channel::Y: return "y";
    case Channel::U: return "u";
    case Channel::DxU: return "dx_u";
    case Channel::DyU: return "dy_u";
    case Channel::DxxU: return "dxx_u";
    case Channel::DxyU: return "dxy_u";
    case Channel::DyyU: return "dyy_u";
  }
  return "?";
}

std::vector<Channel> default_burgers_channels() {
  return {Channel::T,   Channel::X,   Channel::Y,   Channel::U,
          Channel::DxU, Channel::DyU, Channel::DxxU, Channel::DyyU};
}

Eigen::VectorXd flatten(const Field2D& u) {
  Eigen::VectorXd x(u.size());
  long k = 0;
  for (int i = 0; i < u.rows(); ++i)
    for (int j = 0; j < u.cols(); ++j) x[k++] = u(i, j);
  return x;
}

Field2D unflatten(const Eigen::VectorXd& x, const Grid2D& grid) {
  if (x.size() != grid.n_points())
    throw ShapeMismatch("unflatten: size mismatch");
  Field2D u(grid.nx, grid.ny);
  long k = 0;
  for (int i = 0; i < grid.nx; ++i)
    for (int j = 0; j < grid.ny; ++j) u(i, j) = x[k++];
  return u;
}

Trajectory fieldseries_to_trajectory(const FieldSeries& fs) {
  Trajectory tr;
  tr.timestamps = fs.timestamps;
  tr.states.reserve(fs.fields.size());
  for (const auto& f : fs.fields) tr.states.push_back(flatten(f));
  return tr;
}

FieldSeries trajectory_to_fieldseries(const Trajectory& tr,
                                      const Grid2D& grid) {
  FieldSeries fs;
  fs.grid = grid;
  fs.timestamps = tr.timestamps;
  fs.fields.reserve(tr.states.size());
  for (const auto& s : tr.states) fs.fields.push_back(unflatten(s, grid));
  return fs;
}

Eigen::MatrixXd PdeDynamics::compute_channels(double t,
                                              const Eigen::VectorXd& x) const {
  const long P = grid.n_points();
  if (x.size() != P) throw ShapeMismatch("PdeDynamics: state size mismatch");
  const Field2D u = unflatten(x, grid);
  Eigen::MatrixXd C(static_cast<long>(channels.size()), P);
  const double tn = time_range.normalize(t);
  for (size_t c = 0; c < channels.size(); ++c) {
    switch (channels[c]) {
      case Channel::T:
        C.row(static_cast<long>(c)).setConstant(tn);
        break;
      case Channel::X: {
        long k = 0;
        for (int i = 0; i < grid.nx; ++i)
          for (int j = 0; j < grid.ny; ++j) C(static_cast<long>(c), k++) = i * grid.hx;
        break;
      }
      case Channel::Y: {
        long k = 0;
        for (int i = 0; i < grid.nx; ++i)
          for (int j = 0; j < grid.ny; ++j) C(static_cast<long>(c), k++) = j * grid.hy;
        break;
      }
      case Channel::U:
        C.row(static_cast<long>(c)) = x.transpose();
        break;
      case Channel::DxU:
        C.row(static_cast<long>(c)) = flatten(apply_stencil(u, Stencil::Dx, grid)).transpose();
        break;
      case Channel::DyU:
        C.row(static_cast<long>(c)) = flatten(apply_stencil(u, Stencil::Dy, grid)).transpose();
        break;
      case Channel::DxxU:
        C.row(static_cast<long>(c)) = flatten(apply_stencil(u, Stencil::Dxx, grid)).transpose();
        break;
      case Channel::DxyU:
        C.row(static_cast<long>(c)) = flatten(apply_stencil(u, Stencil::Dxy, grid)).transpose();
        break;
      case Channel::DyyU:
        C.row(static_cast<long>(c)) = flatten(apply_stencil(u, Stencil::Dyy, grid)).transpose();
        break;
    }
  }
  return C;
}

namespace {

void normalize_channels(const std::vector<NormalizationBounds>& bounds,
                        Eigen::MatrixXd& C) {
  if (bounds.empty()) throw ConfigError("PdeDynamics: bounds not fitted");
  if (bounds.size() == 1) {
    C = (2.0 * (C.array() - bounds[0].m) / (bounds[0].M - bounds[0].m) - 1.0)
            .matrix();
    return;
  }
  if (static_cast<long>(bounds.size()) != C.rows())
    throw ShapeMismatch("PdeDynamics: channel bounds count mismatch");
  for (long c = 0; c < C.rows(); ++c)
    C.row(c) =
        (2.0 * (C.row(c).array() - bounds[static_cast<size_t>(c)].m) /
             (bounds[static_cast<size_t>(c)].M - bounds[static_cast<size_t>(c)].m) -
         1.0)
            .matrix();
}

}  // namespace

void PdeDynamics::fit_channel_bounds(const std::vector<FieldSeries>& data,
                                     bool per_channel) {
  const size_t nc = channels.size();
  std::vector<BoundsAccumulator> acc(per_channel ? nc : 1);
  for (const auto& fs : data) {
    fs.validate();
    for (int i = 0; i < fs.n_stamps(); ++i) {
      const Eigen::MatrixXd C =
          compute_channels(fs.timestamps[i], flatten(fs.fields[static_cast<size_t>(i)]));
      if (per_channel) {
        for (size_t c = 0; c < nc; ++c) acc[c].add(C.row(static_cast<long>(c)));
      } else {
        acc[0].add(C);
      }
    }
  }
  channel_bounds.clear();
  for (auto& a : acc) channel_bounds.push_back(a.finish());
}

Eigen::VectorXd PdeDynamics::eval(double t, const Eigen::VectorXd& x) const {
  Eigen::MatrixXd C = compute_channels(t, x);
  normalize_channels(channel_bounds, C);
  const Eigen::MatrixXd D =
      eval_dictionary_batch(spec, Eigen::VectorXd(), C);
  return mlp_forward_batch(mlp, D).row(0).transpose();
}

void PdeDynamics::vjp(double t, const Eigen::VectorXd& x,
                      const Eigen::VectorXd& w, Eigen::VectorXd& bar_x,
                      Eigen::Ref<Eigen::VectorXd> grad) const {
  Eigen::MatrixXd C = compute_channels(t, x);
  normalize_channels(channel_bounds, C);
  const Eigen::MatrixXd D = eval_dictionary_batch(spec, Eigen::VectorXd(), C);

  Eigen::MatrixXd barD;
  mlp_vjp_batch(mlp, D, w.transpose(), barD, grad);
  Eigen::MatrixXd barC =
      dictionary_vjp_batch(spec, Eigen::VectorXd(), C, barD);

  // undo normalization scale per channel
  if (channel_bounds.size() == 1) {
    barC *= channel_bounds[0].scale();
  } else {
    for (long c = 0; c < barC.rows(); ++c)
      barC.row(c) *= channel_bounds[static_cast<size_t>(c)].scale();
  }

  // map channel cotangents back to the state through the stencils
  bar_x = Eigen::VectorXd::Zero(x.size());
  for (size_t c = 0; c < channels.size(); ++c) {
    const Eigen::VectorXd row = barC.row(static_cast<long>(c)).transpose();
    switch (channels[c]) {
      case Channel::T:
      case Channel::X:
      case Channel::Y:
        break;  // no state dependence
      case Channel::U:
        bar_x += row;
        break;
      case Channel::DxU:
        bar_x += flatten(apply_stencil_adjoint(unflatten(row, grid), Stencil::Dx, grid));
        break;
      case Channel::DyU:
        bar_x += flatten(apply_stencil_adjoint(unflatten(row, grid), Stencil::Dy, grid));
        break;
      case Channel::DxxU:
        bar_x += flatten(apply_stencil_adjoint(unflatten(row, grid), Stencil::Dxx, grid));
        break;
      case Channel::DxyU:
        bar_x += flatten(apply_stencil_adjoint(unflatten(row, grid), Stencil::Dxy, grid));
        break;
      case Channel::DyyU:
        bar_x += flatten(apply_stencil_adjoint(unflatten(row, grid), Stencil::Dyy, grid));
        break;
    }
  }
}

Field2D pde_rhs(const PdeDynamics& model, double t, const Field2D& u) {
  return unflatten(model.eval(t, flatten(u)), model.grid);
}

FieldSeries burgers_reference(const Field2D& ic, const Grid2D& grid, double dt,
                              int steps, int store_every, double nu) {
  if (dt <= 0.0 || steps < 0 || store_every < 1)
    throw ConfigError("burgers_reference: invalid stepping parameters");
  const double h = std::min(grid.hx, grid.hy);
  const double umax0 = std::max(ic.cwiseAbs().maxCoeff(), 1e-12);
  const double bound = std::min(h * h / (8.0 * nu), h / (2.0 * umax0));
  if (dt > bound)
    throw UnstableStep("burgers_reference: dt exceeds the stability bound");

  auto rhs = [&](const Field2D& u) -> Field2D {
    const Field2D u2 = u.cwiseProduct(u);
    return -0.5 * (apply_stencil(u2, Stencil::Dx, grid) +
                   apply_stencil(u2, Stencil::Dy, grid)) +
           nu * (apply_stencil(u, Stencil::Dxx, grid) +
                 apply_stencil(u, Stencil::Dyy, grid));
  };

  FieldSeries out;
  out.grid = grid;
  std::vector<double> stamps;
  Field2D u = ic;
  stamps.push_back(0.0);
  out.fields.push_back(u);
  for (int s = 1; s <= steps; ++s) {
    const Field2D k1 = rhs(u);
    const Field2D k2 = rhs(u + 0.5 * dt * k1);
    const Field2D k3 = rhs(u + 0.5 * dt * k2);
    const Field2D k4 = rhs(u + dt * k3);
    u += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!u.allFinite() || u.cwiseAbs().maxCoeff() > 10.0 * umax0)
      throw UnstableStep("burgers_reference: solution blew up at step " +
                         std::to_string(s));
    if (s % store_every == 0) {
      stamps.push_back(s * dt);
      out.fields.push_back(u);
    }
  }
  out.timestamps = Eigen::Map<Eigen::VectorXd>(stamps.data(),
                                               static_cast<long>(stamps.size()));
  return out;
}

BurgersDataset make_burgers_dataset(std::uint64_t seed, double amplitude,
                                    double noise_sigma) {
  Grid2D grid;  // 32x32 on [0,1)^2
  const double dt = 1.5e-5;
  const int steps = 990;        // 100 stored stamps including t=0
  const int store_every = 10;

  auto base_x = [&](int i, int /*j*/) {
    return amplitude * std::sin(2.0 * M_PI * i * grid.hx);
  };

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  BurgersDataset out;
  for (int s = 0; s < 5; ++s) {
    // Smooth perturbation: a few low Fourier modes with Gaussian amplitudes,
    // scaled so the pointwise standard deviation is noise_sigma.
    constexpr int n_modes = 4;
    double ax[n_modes], bx[n_modes], ay[n_modes], by[n_modes];
    for (int m = 0; m < n_modes; ++m) {
      ax[m] = gauss(rng);
      bx[m] = gauss(rng);
      ay[m] = gauss(rng);
      by[m] = gauss(rng);
    }
    // each of the 4*n_modes independent modes has pointwise variance 1/2
    const double scale = noise_sigma / std::sqrt(4.0 * n_modes * 0.5);
    Field2D ic(grid.nx, grid.ny);
    for (int i = 0; i < grid.nx; ++i)
      for (int j = 0; j < grid.ny; ++j) {
        const double px = 2.0 * M_PI * i * grid.hx;
        const double py = 2.0 * M_PI * j * grid.hy;
        double eta = 0.0;
        for (int m = 0; m < n_modes; ++m)
          eta += ax[m] * std::sin((m + 1) * px) + bx[m] * std::cos((m + 1) * px) +
                 ay[m] * std::sin((m + 1) * py) + by[m] * std::cos((m + 1) * py);
        ic(i, j) = base_x(i, j) + scale * eta;
      }
    out.train.push_back(burgers_reference(ic, grid, dt, steps, store_every));
  }

  Field2D test_ic(grid.nx, grid.ny);
  for (int i = 0; i < grid.nx; ++i)
    for (int j = 0; j < grid.ny; ++j)
      test_ic(i, j) = amplitude * std::sin(2.0 * M_PI * j * grid.hy);
  out.test = burgers_reference(test_ic, grid, dt, steps, store_every);
  return out;
}

double windowed_field_mse(const PdeDynamics& model,
                          const std::vector<FieldSeries>& data, int k,
                          const SolverConfig& solver) {
  std::vector<Trajectory> trajs;
  trajs.reserve(data.size());
  for (const auto& fs : data) trajs.push_back(fieldseries_to_trajectory(fs));
  // full_data_loss is per sample and component; scale back to the per-stamp
  // grid-summed convention.
  return full_data_loss(model, trajs, k, solver) *
         static_cast<double>(model.grid.n_points());
}

}  // namespace neupde
