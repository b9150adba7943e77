#include "neupde/odeint.hpp"

#include <cmath>

#include "neupde/errors.hpp"

namespace neupde {

void Trajectory::validate() const {
  if (static_cast<int>(states.size()) != timestamps.size())
    throw ShapeMismatch("Trajectory: stamp/state count mismatch");
  for (int i = 1; i < timestamps.size(); ++i)
    if (!(timestamps[i] > timestamps[i - 1]))
      throw ShapeMismatch("Trajectory: timestamps not strictly increasing");
  for (const auto& s : states)
    if (s.size() != dim()) throw ShapeMismatch("Trajectory: ragged states");
}

NormalizationBounds fit_bounds(const Trajectory& traj) {
  BoundsAccumulator acc;
  for (const auto& s : traj.states) acc.add(s);
  return acc.finish();
}

NormalizationBounds fit_bounds(const std::vector<Trajectory>& trajs) {
  BoundsAccumulator acc;
  for (const auto& tr : trajs)
    for (const auto& s : tr.states) acc.add(s);
  return acc.finish();
}

Scheme scheme_from_string(const std::string& name) {
  if (name == "euler") return Scheme::Euler;
  if (name == "rk4") return Scheme::Rk4;
  if (name == "rk45") return Scheme::Rk45;
  throw ConfigError("unknown scheme: " + name);
}

const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::Euler: return "euler";
    case Scheme::Rk4: return "rk4";
    case Scheme::Rk45: return "rk45";
  }
  return "?";
}

Eigen::MatrixXd Dynamics::jacobian_state(double, const Eigen::VectorXd&) const {
  throw ConfigError("jacobian_state is not available for this dynamics");
}

Eigen::VectorXd Dynamics::time_partial(double, const Eigen::VectorXd& x) const {
  return Eigen::VectorXd::Zero(x.size());
}

long VectorField::n_params() const {
  long n = use_mlp ? mlp.size() : 0;
  if (has_linear()) n += linear_part.size();
  return n;
}

Eigen::VectorXd VectorField::params() const {
  Eigen::VectorXd theta(n_params());
  long k = 0;
  if (use_mlp) {
    theta.head(mlp.size()) = mlp.pack();
    k = mlp.size();
  }
  if (has_linear())
    for (int i = 0; i < linear_part.rows(); ++i)
      for (int j = 0; j < linear_part.cols(); ++j) theta[k++] = linear_part(i, j);
  return theta;
}

void VectorField::set_params(const Eigen::Ref<const Eigen::VectorXd>& theta) {
  if (theta.size() != n_params())
    throw ShapeMismatch("VectorField::set_params: size mismatch");
  long k = 0;
  if (use_mlp) {
    mlp.unpack(theta.head(mlp.size()));
    k = mlp.size();
  }
  if (has_linear())
    for (int i = 0; i < linear_part.rows(); ++i)
      for (int j = 0; j < linear_part.cols(); ++j) linear_part(i, j) = theta[k++];
}

Eigen::VectorXd VectorField::eval(double t, const Eigen::VectorXd& x) const {
  if (x.size() != spec.dim)
    throw ShapeMismatch("VectorField::eval: state dimension mismatch");
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
  if (has_linear()) g += linear_part * x;
  if (use_mlp) {
    const Eigen::VectorXd z = normalize(x, bounds);
    const double tn = spec.include_time ? time_range.normalize(t) : 0.0;
    g += mlp_forward(mlp, eval_dictionary(spec, tn, z));
  }
  return g;
}

void VectorField::vjp(double t, const Eigen::VectorXd& x,
                      const Eigen::VectorXd& w, Eigen::VectorXd& bar_x,
                      Eigen::Ref<Eigen::VectorXd> grad) const {
  bar_x = Eigen::VectorXd::Zero(x.size());
  long k = 0;
  if (use_mlp) {
    const Eigen::VectorXd z = normalize(x, bounds);
    const double tn = spec.include_time ? time_range.normalize(t) : 0.0;
    const Eigen::VectorXd feats = eval_dictionary(spec, tn, z);
    Eigen::VectorXd bar_feats;
    mlp_vjp(mlp, feats, w, bar_feats, grad.head(mlp.size()));
    // back through dictionary and the affine normalization
    const Eigen::MatrixXd jac = dictionary_jacobian(spec, tn, z);
    bar_x += bounds.scale() * (jac.transpose() * bar_feats);
    k = mlp.size();
  }
  if (has_linear()) {
    bar_x += linear_part.transpose() * w;
    for (int i = 0; i < linear_part.rows(); ++i)
      for (int j = 0; j < linear_part.cols(); ++j) grad[k++] += w[i] * x[j];
  }
}

Eigen::MatrixXd VectorField::jacobian_state(double t,
                                            const Eigen::VectorXd& x) const {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(x.size(), x.size());
  if (has_linear()) J += linear_part;
  if (use_mlp) {
    const Eigen::VectorXd z = normalize(x, bounds);
    const double tn = spec.include_time ? time_range.normalize(t) : 0.0;
    const Eigen::VectorXd feats = eval_dictionary(spec, tn, z);
    J += bounds.scale() * mlp_jacobian_input(mlp, feats) *
         dictionary_jacobian(spec, tn, z);
  }
  return J;
}

Eigen::VectorXd VectorField::time_partial(double t,
                                          const Eigen::VectorXd& x) const {
  if (!use_mlp || !spec.include_time)
    return Eigen::VectorXd::Zero(x.size());
  const Eigen::VectorXd z = normalize(x, bounds);
  const double tn = time_range.normalize(t);
  const Eigen::VectorXd feats = eval_dictionary(spec, tn, z);
  return time_range.deriv() *
         (mlp_jacobian_input(mlp, feats) * dictionary_time_partial(spec, tn, z));
}

namespace {

void check_finite(const Eigen::VectorXd& x, const char* where) {
  if (!x.allFinite()) throw NonFiniteState(std::string(where) + ": non-finite state");
}

Eigen::VectorXd euler_step(const Rhs& f, double t, const Eigen::VectorXd& x,
                           double h) {
  return x + h * f(t, x);
}

Eigen::VectorXd rk4_step(const Rhs& f, double t, const Eigen::VectorXd& x,
                         double h) {
  const Eigen::VectorXd k1 = f(t, x);
  const Eigen::VectorXd k2 = f(t + 0.5 * h, x + 0.5 * h * k1);
  const Eigen::VectorXd k3 = f(t + 0.5 * h, x + 0.5 * h * k2);
  const Eigen::VectorXd k4 = f(t + h, x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Dormand-Prince 5(4) pair, one accepted macro step with error control.
// Advances exactly to t_end.
Eigen::VectorXd dopri_advance(const Rhs& f, double t, Eigen::VectorXd x,
                              double t_end, double tol) {
  static const double c[7] = {0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
  static const double a[7][6] = {
      {},
      {1.0 / 5},
      {3.0 / 40, 9.0 / 40},
      {44.0 / 45, -56.0 / 15, 32.0 / 9},
      {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
      {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
      {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
  static const double b5[7] = {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192,
                               -2187.0 / 6784, 11.0 / 84, 0.0};
  static const double b4[7] = {5179.0 / 57600,  0.0,           7571.0 / 16695,
                               393.0 / 640,     -92097.0 / 339200,
                               187.0 / 2100,    1.0 / 40};

  double h = t_end - t;
  int guard = 0;
  while (t < t_end) {
    if (++guard > 1000000) throw NonFiniteState("rk45: step count exceeded");
    h = std::min(h, t_end - t);
    Eigen::VectorXd k[7];
    k[0] = f(t, x);
    for (int s = 1; s < 7; ++s) {
      Eigen::VectorXd xs = x;
      for (int j = 0; j < s; ++j) xs += h * a[s][j] * k[j];
      k[s] = f(t + c[s] * h, xs);
    }
    Eigen::VectorXd x5 = x, err = Eigen::VectorXd::Zero(x.size());
    for (int s = 0; s < 7; ++s) {
      x5 += h * b5[s] * k[s];
      err += h * (b5[s] - b4[s]) * k[s];
    }
    const double scale = tol * (1.0 + x.cwiseAbs().maxCoeff());
    const double e = err.cwiseAbs().maxCoeff() / scale;
    if (!x5.allFinite()) throw NonFiniteState("rk45: non-finite state");
    if (e <= 1.0) {
      t += h;
      x = std::move(x5);
    }
    const double fac = (e > 0.0) ? 0.9 * std::pow(e, -0.2) : 5.0;
    h *= std::clamp(fac, 0.2, 5.0);
    if (h <= 0.0 || t + h == t) throw NonFiniteState("rk45: step underflow");
  }
  return x;
}

}  // namespace

Eigen::VectorXd rk_step(const Rhs& f, double t, const Eigen::VectorXd& x,
                        double h, Scheme scheme) {
  Eigen::VectorXd out;
  switch (scheme) {
    case Scheme::Euler: out = euler_step(f, t, x, h); break;
    case Scheme::Rk4: out = rk4_step(f, t, x, h); break;
    case Scheme::Rk45: out = dopri_advance(f, t, x, t + h, 1e-8); break;
  }
  check_finite(out, "rk_step");
  return out;
}

Eigen::VectorXd rk_step(const Dynamics& f, double t, const Eigen::VectorXd& x,
                        double h, Scheme scheme) {
  return rk_step([&f](double tt, const Eigen::VectorXd& xx) { return f.eval(tt, xx); },
                 t, x, h, scheme);
}

Trajectory integrate(const Rhs& f, const Eigen::VectorXd& x0,
                     const Eigen::VectorXd& timestamps,
                     const SolverConfig& solver) {
  if (timestamps.size() < 1) throw TooShort("integrate: no timestamps");
  if (solver.substeps < 1) throw ConfigError("integrate: substeps must be >= 1");
  Trajectory out;
  out.timestamps = timestamps;
  out.states.reserve(static_cast<size_t>(timestamps.size()));
  out.states.push_back(x0);
  Eigen::VectorXd x = x0;
  for (int i = 0; i + 1 < timestamps.size(); ++i) {
    try {
      if (solver.scheme == Scheme::Rk45) {
        x = dopri_advance(f, timestamps[i], x, timestamps[i + 1], solver.rk45_tol);
      } else {
        const double h = (timestamps[i + 1] - timestamps[i]) / solver.substeps;
        for (int s = 0; s < solver.substeps; ++s) {
          const double t = timestamps[i] + s * h;
          x = (solver.scheme == Scheme::Euler) ? euler_step(f, t, x, h)
                                               : rk4_step(f, t, x, h);
        }
      }
      check_finite(x, "integrate");
    } catch (const NonFiniteState& e) {
      throw NonFiniteState(std::string(e.what()) + " (interval " +
                               std::to_string(i) + ")",
                           i);
    }
    out.states.push_back(x);
  }
  return out;
}

Trajectory integrate(const Dynamics& f, const Eigen::VectorXd& x0,
                     const Eigen::VectorXd& timestamps,
                     const SolverConfig& solver) {
  return integrate(
      [&f](double t, const Eigen::VectorXd& x) { return f.eval(t, x); }, x0,
      timestamps, solver);
}

}  // namespace neupde
