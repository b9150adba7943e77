#include "neupde/train.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "neupde/errors.hpp"
#include "neupde/parallel.hpp"

namespace neupde {

namespace {

Trajectory slice_window(const Trajectory& traj, int start, int k) {
  Trajectory w;
  w.timestamps = traj.timestamps.segment(start, k + 1);
  w.states.assign(traj.states.begin() + start,
                  traj.states.begin() + start + k + 1);
  return w;
}

}  // namespace

std::vector<Window> sample_minibatch(std::mt19937_64& rng,
                                     const std::vector<Trajectory>& data,
                                     int k, int batch_size, bool overlap) {
  if (k < 1 || batch_size < 1)
    throw ConfigError("sample_minibatch: k and batch_size must be >= 1");
  if (data.empty()) throw TooShort("sample_minibatch: no trajectories");
  for (const auto& tr : data)
    if (tr.n_stamps() < k + 1)
      throw TooShort("sample_minibatch: trajectory shorter than k+1 stamps");

  std::uniform_int_distribution<int> pick_traj(0,
                                               static_cast<int>(data.size()) - 1);
  std::vector<Window> out;
  out.reserve(static_cast<size_t>(batch_size));
  // taken[ti] holds accepted starts for the disjointness check
  std::vector<std::vector<int>> taken(data.size());

  const int max_attempts = 200 * batch_size;
  int attempts = 0;
  while (static_cast<int>(out.size()) < batch_size &&
         attempts++ < max_attempts) {
    const int ti = pick_traj(rng);
    const int n_starts = data[static_cast<size_t>(ti)].n_stamps() - k;
    std::uniform_int_distribution<int> pick_start(0, n_starts - 1);
    const int s = pick_start(rng);
    if (!overlap) {
      bool clash = false;
      for (int t0 : taken[static_cast<size_t>(ti)])
        if (std::abs(t0 - s) <= k) {
          clash = true;
          break;
        }
      if (clash) continue;
      taken[static_cast<size_t>(ti)].push_back(s);
    }
    out.push_back({ti, s, slice_window(data[static_cast<size_t>(ti)], s, k)});
  }
  if (out.empty()) throw TooShort("sample_minibatch: no valid window");
  return out;
}

void adam_step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad,
               AdamState& state, double lr, double b1, double b2, double eps) {
  if (grad.size() != theta.size() || state.m.size() != theta.size())
    throw ShapeMismatch("adam_step: size mismatch");
  state.step += 1;
  state.m = b1 * state.m + (1.0 - b1) * grad;
  state.v = b2 * state.v + (1.0 - b2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const Eigen::VectorXd mhat = state.m / c1;
  const Eigen::VectorXd vhat = state.v / c2;
  theta.array() -= lr * mhat.array() / (vhat.array().sqrt() + eps);
}

double full_data_loss(const Dynamics& dyn,
                      const std::vector<Trajectory>& data, int k,
                      const SolverConfig& solver) {
  double sse = 0.0;
  long count = 0;
  for (const auto& tr : data) {
    const int n = tr.n_stamps();
    for (int start = 0; start + 1 < n; start += k) {
      const int len = std::min(k, n - 1 - start);
      const Trajectory w = slice_window(tr, start, len);
      const Trajectory pred =
          integrate(dyn, w.states[0], w.timestamps, solver);
      for (int i = 1; i <= len; ++i) {
        sse += (pred.states[static_cast<size_t>(i)] -
                w.states[static_cast<size_t>(i)])
                   .squaredNorm();
        count += w.dim();
      }
    }
  }
  return count > 0 ? sse / static_cast<double>(count) : 0.0;
}

TrainResult train_ode(Dynamics& dyn, const std::vector<Trajectory>& data,
                      const TrainConfig& config) {
  if (config.learning_rate <= 0.0)
    throw ConfigError("train_ode: learning_rate must be > 0");
  if (data.empty()) throw TooShort("train_ode: no trajectories");

  std::mt19937_64 rng(config.seed);
  Eigen::VectorXd theta = dyn.params();
  AdamState adam(theta.size());
  double lr = config.learning_rate;
  const int threads = resolve_threads(config.threads);

  // Per-window loss spec: the l1 term is added once per step, not per window.
  LossSpec window_loss;
  window_loss.beta1 = 0.0;
  window_loss.beta2_smooth = config.beta2_smooth;
  window_loss.beta2_cont = config.beta2_smooth;  // adjoint engine analog

  TrainResult result;
  result.loss_history.reserve(static_cast<size_t>(config.iterations));
  std::deque<bool> skip_window_log;

  for (int it = 0; it < config.iterations; ++it) {
    const auto windows = sample_minibatch(rng, data, config.window,
                                          config.batch_size, config.overlap);
    const int nw = static_cast<int>(windows.size());
    std::vector<Eigen::VectorXd> grads(static_cast<size_t>(nw));
    std::vector<double> misfits(static_cast<size_t>(nw), 0.0);
    std::vector<char> failed(static_cast<size_t>(nw), 0);

    parallel_for(nw, threads, [&](int i) {
      try {
        const auto& w = windows[static_cast<size_t>(i)].data;
        grads[static_cast<size_t>(i)] =
            (config.engine == GradEngine::Bptt)
                ? bptt_gradient(dyn, w, config.solver, window_loss)
                : adjoint_gradient(dyn, w, config.solver, window_loss,
                                   config.adjoint_substeps);
        misfits[static_cast<size_t>(i)] =
            objective(dyn, w, config.solver, window_loss).misfit;
      } catch (const NonFiniteState&) {
        failed[static_cast<size_t>(i)] = 1;
      }
    });

    const bool any_failed =
        std::any_of(failed.begin(), failed.end(), [](char f) { return f != 0; });

    double batch_loss = std::numeric_limits<double>::quiet_NaN();
    if (!any_failed) {
      // deterministic reduction: sum in window-index order
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta.size());
      for (int i = 0; i < nw; ++i) grad += grads[static_cast<size_t>(i)];
      for (long j = 0; j < theta.size(); ++j)
        grad[j] += config.beta1 *
                   (theta[j] > 0.0 ? 1.0 : (theta[j] < 0.0 ? -1.0 : 0.0));
      adam_step(theta, grad, adam, lr, config.adam_beta1, config.adam_beta2,
                config.adam_eps);
      dyn.set_params(theta);
      const double samples =
          static_cast<double>(nw) * config.window * dyn.state_dim();
      batch_loss =
          std::accumulate(misfits.begin(), misfits.end(), 0.0) / samples;
    } else {
      result.skipped_steps += 1;
      lr *= 0.5;
    }

    skip_window_log.push_back(any_failed);
    if (skip_window_log.size() > 100) skip_window_log.pop_front();
    if (skip_window_log.size() == 100) {
      const long n_skipped =
          std::count(skip_window_log.begin(), skip_window_log.end(), true);
      if (n_skipped > 50) result.diverged = true;
    }

    result.loss_history.push_back(
        config.record_full_loss
            ? full_data_loss(dyn, data, config.window, config.solver)
            : batch_loss);
  }

  result.theta = theta;
  result.final_learning_rate = lr;
  return result;
}

}  // namespace neupde
