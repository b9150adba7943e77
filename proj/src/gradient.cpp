#include "neupde/gradient.hpp"

#include <cmath>
#include <sstream>

#include "neupde/errors.hpp"

namespace neupde {

namespace {

Eigen::VectorXd l1_subgradient(const Eigen::VectorXd& theta) {
  Eigen::VectorXd s(theta.size());
  for (long i = 0; i < theta.size(); ++i)
    s[i] = (theta[i] > 0.0) ? 1.0 : (theta[i] < 0.0 ? -1.0 : 0.0);
  return s;
}

// Gradient of the data + smoothness terms with respect to predicted stamp i
// (1 <= i <= last). Stamp 0 is the fixed initial datum.
Eigen::VectorXd stamp_loss_gradient(const Trajectory& pred,
                                    const Trajectory& target, int i,
                                    double beta2_smooth) {
  Eigen::VectorXd g = 2.0 * (pred.states[static_cast<size_t>(i)] -
                             target.states[static_cast<size_t>(i)]);
  if (beta2_smooth != 0.0) {
    const int last = pred.n_stamps() - 1;
    if (i >= 1)
      g += beta2_smooth * (pred.states[static_cast<size_t>(i)] -
                           pred.states[static_cast<size_t>(i - 1)]);
    if (i < last)
      g += beta2_smooth * (pred.states[static_cast<size_t>(i)] -
                           pred.states[static_cast<size_t>(i + 1)]);
  }
  return g;
}

struct ForwardTape {
  Trajectory predicted;
  // substep start states per interval: tape[i][s] is the state at
  // t_i + s * h_i before the s-th internal step of interval i.
  std::vector<std::vector<Eigen::VectorXd>> substep_states;
};

ForwardTape forward_with_tape(const Dynamics& dyn, const Trajectory& window,
                              const SolverConfig& solver) {
  if (solver.scheme == Scheme::Rk45)
    throw ConfigError("bptt requires a fixed-step scheme (euler or rk4)");
  ForwardTape tape;
  tape.predicted.timestamps = window.timestamps;
  tape.predicted.states.push_back(window.states[0]);
  const int n_int = window.n_stamps() - 1;
  tape.substep_states.resize(static_cast<size_t>(n_int));
  Eigen::VectorXd x = window.states[0];
  for (int i = 0; i < n_int; ++i) {
    const double h =
        (window.timestamps[i + 1] - window.timestamps[i]) / solver.substeps;
    auto& sub = tape.substep_states[static_cast<size_t>(i)];
    sub.reserve(static_cast<size_t>(solver.substeps));
    for (int s = 0; s < solver.substeps; ++s) {
      sub.push_back(x);
      const double t = window.timestamps[i] + s * h;
      x = rk_step(dyn, t, x, h, solver.scheme);
    }
    if (!x.allFinite())
      throw NonFiniteState("bptt forward: non-finite state", i);
    tape.predicted.states.push_back(x);
  }
  return tape;
}

}  // namespace

ObjectiveResult objective(const Dynamics& dyn, const Trajectory& window,
                          const SolverConfig& solver, const LossSpec& loss) {
  window.validate();
  if (window.n_stamps() < 2) throw TooShort("objective: window needs >= 2 stamps");
  ObjectiveResult res;
  res.predicted =
      integrate(dyn, window.states[0], window.timestamps, solver);
  double misfit = 0.0, smooth = 0.0;
  for (int i = 1; i < window.n_stamps(); ++i)
    misfit += (res.predicted.states[static_cast<size_t>(i)] -
               window.states[static_cast<size_t>(i)])
                  .squaredNorm();
  for (int i = 0; i + 1 < window.n_stamps(); ++i)
    smooth += (res.predicted.states[static_cast<size_t>(i + 1)] -
               res.predicted.states[static_cast<size_t>(i)])
                  .squaredNorm();
  res.misfit = misfit;
  res.loss = misfit + loss.beta1 * dyn.params().lpNorm<1>() +
             0.5 * loss.beta2_smooth * smooth;
  return res;
}

Eigen::VectorXd bptt_gradient(const Dynamics& dyn, const Trajectory& window,
                              const SolverConfig& solver,
                              const LossSpec& loss) {
  window.validate();
  if (window.n_stamps() < 2) throw TooShort("bptt: window needs >= 2 stamps");
  const ForwardTape tape = forward_with_tape(dyn, window, solver);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(dyn.n_params());

  const int last = window.n_stamps() - 1;
  Eigen::VectorXd lambda =
      stamp_loss_gradient(tape.predicted, window, last, loss.beta2_smooth);

  Eigen::VectorXd v;
  for (int i = last; i >= 1; --i) {
    const double h =
        (window.timestamps[i] - window.timestamps[i - 1]) / solver.substeps;
    const auto& sub = tape.substep_states[static_cast<size_t>(i - 1)];
    for (int s = solver.substeps - 1; s >= 0; --s) {
      const double t = window.timestamps[i - 1] + s * h;
      const Eigen::VectorXd& x = sub[static_cast<size_t>(s)];
      if (solver.scheme == Scheme::Euler) {
        dyn.vjp(t, x, h * lambda, v, grad);
        lambda += v;
      } else {  // Rk4
        const Eigen::VectorXd k1 = dyn.eval(t, x);
        const Eigen::VectorXd x2 = x + 0.5 * h * k1;
        const Eigen::VectorXd k2 = dyn.eval(t + 0.5 * h, x2);
        const Eigen::VectorXd x3 = x + 0.5 * h * k2;
        const Eigen::VectorXd k3 = dyn.eval(t + 0.5 * h, x3);
        const Eigen::VectorXd x4 = x + h * k3;

        Eigen::VectorXd bk1 = (h / 6.0) * lambda;
        Eigen::VectorXd bk2 = (h / 3.0) * lambda;
        Eigen::VectorXd bk3 = (h / 3.0) * lambda;
        const Eigen::VectorXd bk4 = (h / 6.0) * lambda;

        dyn.vjp(t + h, x4, bk4, v, grad);
        lambda += v;
        bk3 += h * v;
        dyn.vjp(t + 0.5 * h, x3, bk3, v, grad);
        lambda += v;
        bk2 += 0.5 * h * v;
        dyn.vjp(t + 0.5 * h, x2, bk2, v, grad);
        lambda += v;
        bk1 += 0.5 * h * v;
        dyn.vjp(t, x, bk1, v, grad);
        lambda += v;
      }
    }
    if (i - 1 >= 1)
      lambda +=
          stamp_loss_gradient(tape.predicted, window, i - 1, loss.beta2_smooth);
  }

  grad += loss.beta1 * l1_subgradient(dyn.params());
  return grad;
}

Eigen::VectorXd adjoint_gradient(const Dynamics& dyn, const Trajectory& window,
                                 const SolverConfig& solver,
                                 const LossSpec& loss, int adjoint_substeps) {
  window.validate();
  if (window.n_stamps() < 2)
    throw TooShort("adjoint: window needs >= 2 stamps");
  if (adjoint_substeps < 1)
    throw ConfigError("adjoint: substeps must be >= 1");

  // Forward pass supplies the checkpoint states at the stamps.
  const Trajectory pred =
      integrate(dyn, window.states[0], window.timestamps, solver);
  const int last = window.n_stamps() - 1;
  const int d = dyn.state_dim();
  const long P = dyn.n_params();
  const double b2 = loss.beta2_cont;

  // Augmented backward state [x; lambda; q], q(tN) = 0.
  Eigen::VectorXd lambda =
      2.0 * (pred.states[static_cast<size_t>(last)] -
             window.states[static_cast<size_t>(last)]);
  if (b2 != 0.0)
    lambda += b2 * dyn.eval(window.timestamps[last],
                            pred.states[static_cast<size_t>(last)]);
  Eigen::VectorXd q = Eigen::VectorXd::Zero(P);

  auto aug_rhs = [&](double t, const Eigen::VectorXd& s) {
    const Eigen::VectorXd x = s.head(d);
    const Eigen::VectorXd lam = s.segment(d, d);
    Eigen::VectorXd out(2 * d + P);
    const Eigen::VectorXd g = dyn.eval(t, x);
    out.head(d) = g;
    Eigen::VectorXd gxT_lam;
    Eigen::VectorXd dq = Eigen::VectorXd::Zero(P);
    dyn.vjp(t, x, lam, gxT_lam, dq);
    Eigen::VectorXd lam_dot = -gxT_lam;
    if (b2 != 0.0) {
      const Eigen::MatrixXd gx = dyn.jacobian_state(t, x);
      lam_dot += b2 * (gx * g + dyn.time_partial(t, x));
    }
    out.segment(d, d) = lam_dot;
    out.tail(P) = dq;  // q_dot = g_theta^T lambda
    return out;
  };

  for (int i = last; i >= 1; --i) {
    // checkpoint: restart x from the stored forward state at t_i
    Eigen::VectorXd s(2 * d + P);
    s.head(d) = pred.states[static_cast<size_t>(i)];
    s.segment(d, d) = lambda;
    s.tail(P) = q;
    const double h =
        (window.timestamps[i] - window.timestamps[i - 1]) / adjoint_substeps;
    for (int k = 0; k < adjoint_substeps; ++k) {
      const double t = window.timestamps[i] - k * h;
      try {
        s = rk_step([&aug_rhs](double tt, const Eigen::VectorXd& ss) { return aug_rhs(tt, ss); },
                    t, s, -h, Scheme::Rk4);
      } catch (const NonFiniteState& e) {
        throw NonFiniteState(std::string("adjoint backward: ") + e.what(), i - 1);
      }
    }
    lambda = s.segment(d, d);
    q = s.tail(P);
    if (i - 1 >= 1)
      lambda += 2.0 * (pred.states[static_cast<size_t>(i - 1)] -
                       window.states[static_cast<size_t>(i - 1)]);
  }

  // q(t0) = -int_{t0}^{tN} g_theta^T lambda dtau
  return loss.beta1 * l1_subgradient(dyn.params()) - q;
}

GradEngine engine_from_string(const std::string& name) {
  if (name == "bptt") return GradEngine::Bptt;
  if (name == "adjoint") return GradEngine::Adjoint;
  throw ConfigError("unknown gradient engine: " + name);
}

const char* to_string(GradEngine e) {
  return e == GradEngine::Bptt ? "bptt" : "adjoint";
}

double relative_gradient_error(const Eigen::VectorXd& a,
                               const Eigen::VectorXd& b, long* worst_index) {
  const double scale =
      std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), 1e-12});
  double worst = 0.0;
  long idx = -1;
  for (long i = 0; i < a.size(); ++i) {
    const double e = std::abs(a[i] - b[i]) / scale;
    if (e > worst) {
      worst = e;
      idx = i;
    }
  }
  if (worst_index) *worst_index = idx;
  return worst;
}

GradCheckReport grad_check(Dynamics& dyn, const Trajectory& window,
                           const SolverConfig& solver, const LossSpec& loss,
                           double step, GradEngine engine,
                           int adjoint_substeps) {
  const Eigen::VectorXd theta0 = dyn.params();
  const Eigen::VectorXd analytic =
      (engine == GradEngine::Bptt)
          ? bptt_gradient(dyn, window, solver, loss)
          : adjoint_gradient(dyn, window, solver, loss, adjoint_substeps);

  Eigen::VectorXd fd(theta0.size());
  Eigen::VectorXd theta = theta0;
  for (long i = 0; i < theta0.size(); ++i) {
    const double h = step * std::max(1.0, std::abs(theta0[i]));
    theta[i] = theta0[i] + h;
    dyn.set_params(theta);
    const double fp = objective(dyn, window, solver, loss).loss;
    theta[i] = theta0[i] - h;
    dyn.set_params(theta);
    const double fm = objective(dyn, window, solver, loss).loss;
    theta[i] = theta0[i];
    fd[i] = (fp - fm) / (2.0 * h);
  }
  dyn.set_params(theta0);

  GradCheckReport rep;
  rep.engine = to_string(engine);
  rep.step = step;
  rep.worst_rel_err = relative_gradient_error(analytic, fd, &rep.index);
  return rep;
}

std::string GradCheckReport::to_json() const {
  std::ostringstream os;
  os.precision(17);
  os << "{\"engine\":\"" << engine << "\",\"worst_rel_err\":" << worst_rel_err
     << ",\"index\":" << index << ",\"step\":" << step << "}";
  return os.str();
}

}  // namespace neupde
