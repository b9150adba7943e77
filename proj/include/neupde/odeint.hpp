#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "neupde/dictionary.hpp"
#include "neupde/network.hpp"

namespace neupde {

/// Time stamps plus state samples; the unit of data for training and
/// forecasting.
struct Trajectory {
  Eigen::VectorXd timestamps;              // strictly increasing
  std::vector<Eigen::VectorXd> states;     // one per stamp

  int n_stamps() const { return static_cast<int>(states.size()); }
  int dim() const { return states.empty() ? 0 : static_cast<int>(states[0].size()); }
  void validate() const;
};

NormalizationBounds fit_bounds(const Trajectory& traj);
NormalizationBounds fit_bounds(const std::vector<Trajectory>& trajs);

enum class Scheme { Euler, Rk4, Rk45 };

Scheme scheme_from_string(const std::string& name);
const char* to_string(Scheme s);

struct SolverConfig {
  Scheme scheme = Scheme::Rk4;
  int substeps = 1;       // uniform internal steps per data interval
  double rk45_tol = 1e-8; // adaptive scheme only
};

struct TimeRange {
  double t0 = 0.0;
  double t1 = 1.0;
  double normalize(double t) const { return (t - t0) / (t1 - t0); }
  double deriv() const { return 1.0 / (t1 - t0); }
};

/// Right-hand side g(t, x) of the learned ODE, with the reverse-mode hooks
/// the gradient engines need. Implementations are pure given their inputs.
class Dynamics {
 public:
  virtual ~Dynamics() = default;
  virtual int state_dim() const = 0;
  virtual long n_params() const = 0;
  virtual Eigen::VectorXd params() const = 0;
  virtual void set_params(const Eigen::Ref<const Eigen::VectorXd>& theta) = 0;

  virtual Eigen::VectorXd eval(double t, const Eigen::VectorXd& x) const = 0;

  /// bar_x <- g_x^T w (overwritten); grad += g_theta^T w.
  virtual void vjp(double t, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& w, Eigen::VectorXd& bar_x,
                   Eigen::Ref<Eigen::VectorXd> grad) const = 0;

  /// Dense state Jacobian; only the adjoint engine's beta2 path needs it.
  virtual Eigen::MatrixXd jacobian_state(double t,
                                         const Eigen::VectorXd& x) const;

  /// Explicit time partial g_t; zero by default (autonomous fields).
  virtual Eigen::VectorXd time_partial(double t,
                                       const Eigen::VectorXd& x) const;
};

/// g(t, x) = [A0 x +] F(D(N(x) [, t]), theta): the dictionary-MLP vector
/// field of the regression path, optionally with a trainable linear part
/// for the reduced-order models.
class VectorField : public Dynamics {
 public:
  DictionarySpec spec;
  NormalizationBounds bounds;
  TimeRange time_range;           // used when spec.include_time
  MlpParams mlp;
  Eigen::MatrixXd linear_part;    // r x r; empty when unused
  bool use_mlp = true;

  bool has_linear() const { return linear_part.size() > 0; }

  int state_dim() const override { return spec.dim; }
  long n_params() const override;
  /// Flat layout: MLP pack() (when enabled), then A0 row-major (when present).
  Eigen::VectorXd params() const override;
  void set_params(const Eigen::Ref<const Eigen::VectorXd>& theta) override;

  Eigen::VectorXd eval(double t, const Eigen::VectorXd& x) const override;
  void vjp(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& w,
           Eigen::VectorXd& bar_x,
           Eigen::Ref<Eigen::VectorXd> grad) const override;
  Eigen::MatrixXd jacobian_state(double t,
                                 const Eigen::VectorXd& x) const override;
  Eigen::VectorXd time_partial(double t,
                               const Eigen::VectorXd& x) const override;
};

using Rhs = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;

/// One explicit step. Throws NonFiniteState when the result is not finite.
Eigen::VectorXd rk_step(const Rhs& f, double t, const Eigen::VectorXd& x,
                        double h, Scheme scheme);
Eigen::VectorXd rk_step(const Dynamics& f, double t, const Eigen::VectorXd& x,
                        double h, Scheme scheme);

/// States at every timestamp, `substeps` uniform internal steps per interval
/// (Rk45 adapts internally but lands exactly on the stamps).
Trajectory integrate(const Rhs& f, const Eigen::VectorXd& x0,
                     const Eigen::VectorXd& timestamps,
                     const SolverConfig& solver);
Trajectory integrate(const Dynamics& f, const Eigen::VectorXd& x0,
                     const Eigen::VectorXd& timestamps,
                     const SolverConfig& solver);

}  // namespace neupde
