#pragma once

#include <cstdint>
#include <string>

#include "neupde/odeint.hpp"

namespace neupde {

/// Classic Lorenz right-hand side (sigma=10, rho=28, beta=8/3).
Eigen::Vector3d lorenz_rhs(double x, double y, double z);

/// Non-autonomous cubic spiral: (2 y^3, -2 x^3, 1/4 + sin(pi t)/2).
Eigen::Vector3d spiral_rhs(double t, double x, double y, double z);

struct GeneratorConfig {
  std::string system = "lorenz";  // lorenz | spiral
  Eigen::VectorXd x0;
  double t0 = 0.0;
  double tN = 1.0;
  int n_stamps = 100;         // N+1 samples including t0
  int fine_substeps = 100;    // RK4 substeps per stamp interval
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

struct GeneratedData {
  Trajectory clean;
  Trajectory noisy;  // equals clean when noise_sigma == 0
};

/// RK4 ground-truth run plus i.i.d. Gaussian noise on every component of
/// every non-initial state (the initial state stays clean).
GeneratedData generate(const GeneratorConfig& config);

/// Paper-scale defaults: Lorenz x0=(-8,7,27), t in [0,2.5], 250 intervals;
/// spiral x0=(1,0,0), t in [0,6], 300 intervals, noise 0.05.
GeneratorConfig default_lorenz_config();
GeneratorConfig default_spiral_config();

}  // namespace neupde
