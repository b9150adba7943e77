#pragma once

#include <string>

#include "neupde/odeint.hpp"

namespace neupde {

/// Weights of the regularized squared-error objective. `beta2_smooth` is the
/// discrete smoothness weight of the BPTT objective; `beta2_cont` is the
/// continuous |xdot|^2 weight the adjoint engine uses.
struct LossSpec {
  double beta1 = 0.0;
  double beta2_smooth = 0.0;
  double beta2_cont = 0.0;
};

struct ObjectiveResult {
  double loss = 0.0;
  double misfit = 0.0;  // data term only
  Trajectory predicted;
};

/// Integrates the window from its first state (the initial datum carries no
/// misfit term) and evaluates
///   sum_i ||x(t_i) - target_i||^2 + beta1 ||theta||_1
///   + (beta2_smooth / 2) sum_i ||x(t_{i+1}) - x(t_i)||^2.
ObjectiveResult objective(const Dynamics& dyn, const Trajectory& window,
                          const SolverConfig& solver, const LossSpec& loss);

/// Exact gradient of the discrete objective by reverse chain rule through
/// every RK stage. Fixed-step schemes only. The l1 subgradient uses
/// sign(0) = 0.
Eigen::VectorXd bptt_gradient(const Dynamics& dyn, const Trajectory& window,
                              const SolverConfig& solver,
                              const LossSpec& loss);

/// Continuous adjoint of the same objective (beta2_cont in place of the
/// discrete smoothness term): integrates (x, lambda, q) backward from t_N
/// with RK4 at `adjoint_substeps` steps per data interval, re-using the
/// forward stamp states as checkpoints and applying the jump
/// lambda(t_i+) = lambda(t_i-) + L_x(t_i) at interior stamps.
Eigen::VectorXd adjoint_gradient(const Dynamics& dyn, const Trajectory& window,
                                 const SolverConfig& solver,
                                 const LossSpec& loss, int adjoint_substeps);

struct GradCheckReport {
  std::string engine;
  double worst_rel_err = 0.0;
  long index = -1;
  double step = 0.0;
  std::string to_json() const;
};

enum class GradEngine { Bptt, Adjoint };

GradEngine engine_from_string(const std::string& name);
const char* to_string(GradEngine e);

/// Central finite differences of the discrete objective per parameter;
/// reports the worst relative error (scaled by the gradient magnitude) and
/// its index. Restores the parameters it perturbs.
GradCheckReport grad_check(Dynamics& dyn, const Trajectory& window,
                           const SolverConfig& solver, const LossSpec& loss,
                           double step, GradEngine engine,
                           int adjoint_substeps = 50);

/// max_i |a_i - b_i| / max(scale, floor) with scale = max(|a|_inf, |b|_inf).
double relative_gradient_error(const Eigen::VectorXd& a,
                               const Eigen::VectorXd& b,
                               long* worst_index = nullptr);

}  // namespace neupde
