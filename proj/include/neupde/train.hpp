#pragma once

#include <random>
#include <vector>

#include "neupde/gradient.hpp"
#include "neupde/odeint.hpp"

namespace neupde {

struct TrainConfig {
  double beta1 = 1e-4;          // l1 weight
  double beta2_smooth = 1e-5;   // discrete smoothness weight
  double learning_rate = 1e-2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int window = 5;               // k: intervals per minibatch window (k+1 stamps)
  int batch_size = 8;
  int iterations = 2000;
  std::uint64_t seed = 0;
  GradEngine engine = GradEngine::Bptt;
  int adjoint_substeps = 50;
  SolverConfig solver;
  bool overlap = true;
  bool record_full_loss = false;  // full-data loss per iteration vs minibatch
  int threads = 1;                // 0 = NEUPDE_THREADS / auto
};

/// A window is k+1 consecutive stamps of one source trajectory; its first
/// state is the window's initial condition.
struct Window {
  int traj_index = 0;
  int start = 0;
  Trajectory data;
};

/// Windows drawn uniformly over trajectories and valid start indices. With
/// overlap=false the drawn index ranges are pairwise disjoint (per
/// trajectory); fewer than batch_size windows may be returned when the data
/// cannot host that many disjoint ranges.
std::vector<Window> sample_minibatch(std::mt19937_64& rng,
                                     const std::vector<Trajectory>& data,
                                     int k, int batch_size, bool overlap);

struct AdamState {
  Eigen::VectorXd m, v;
  long step = 0;
  explicit AdamState(long n)
      : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}
};

/// Standard bias-corrected Adam update, in place.
void adam_step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad,
               AdamState& state, double lr, double b1 = 0.9,
               double b2 = 0.999, double eps = 1e-8);

struct TrainResult {
  Eigen::VectorXd theta;
  std::vector<double> loss_history;  // mean-squared loss per iteration
  int skipped_steps = 0;
  bool diverged = false;
  double final_learning_rate = 0.0;
};

/// Adam optimization with temporal minibatching; each window's first state
/// is its initial condition. A NonFiniteState in any window skips the step
/// and halves the learning rate once per event. Reports divergence when more
/// than half the steps in a trailing 100-step span were skipped.
TrainResult train_ode(Dynamics& dyn, const std::vector<Trajectory>& data,
                      const TrainConfig& config);

/// Teacher-forced full-data misfit: tiles each trajectory with windows of k
/// intervals, integrates each from its first data stamp, and returns the
/// mean squared error per predicted sample and component.
double full_data_loss(const Dynamics& dyn,
                      const std::vector<Trajectory>& data, int k,
                      const SolverConfig& solver);

}  // namespace neupde
