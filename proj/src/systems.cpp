#include "neupde/systems.hpp"

#include <cmath>
#include <random>

#include "neupde/errors.hpp"

namespace neupde {

Eigen::Vector3d lorenz_rhs(double x, double y, double z) {
  return {10.0 * (y - x), x * (28.0 - z) - y, x * y - 8.0 * z / 3.0};
}

Eigen::Vector3d spiral_rhs(double t, double x, double y, double /*z*/) {
  return {2.0 * y * y * y, -2.0 * x * x * x,
          0.25 + 0.5 * std::sin(M_PI * t)};
}

GeneratedData generate(const GeneratorConfig& config) {
  if (!(config.tN > config.t0) || config.n_stamps < 2 ||
      config.fine_substeps < 1 || config.noise_sigma < 0.0)
    throw ConfigError("generate: invalid generator config");

  Rhs rhs;
  if (config.system == "lorenz") {
    rhs = [](double, const Eigen::VectorXd& s) -> Eigen::VectorXd {
      return lorenz_rhs(s[0], s[1], s[2]);
    };
  } else if (config.system == "spiral") {
    rhs = [](double t, const Eigen::VectorXd& s) -> Eigen::VectorXd {
      return spiral_rhs(t, s[0], s[1], s[2]);
    };
  } else {
    throw ConfigError("generate: unknown system " + config.system);
  }
  if (config.x0.size() != 3)
    throw ShapeMismatch("generate: x0 must have 3 components");

  Eigen::VectorXd stamps(config.n_stamps);
  for (int i = 0; i < config.n_stamps; ++i)
    stamps[i] = config.t0 + (config.tN - config.t0) * i / (config.n_stamps - 1);

  SolverConfig solver;
  solver.scheme = Scheme::Rk4;
  solver.substeps = config.fine_substeps;

  GeneratedData out;
  out.clean = integrate(rhs, config.x0, stamps, solver);
  out.noisy = out.clean;
  if (config.noise_sigma > 0.0) {
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> noise(0.0, config.noise_sigma);
    for (size_t i = 1; i < out.noisy.states.size(); ++i)
      for (int c = 0; c < out.noisy.states[i].size(); ++c)
        out.noisy.states[i][c] += noise(rng);
  }
  return out;
}

GeneratorConfig default_lorenz_config() {
  GeneratorConfig c;
  c.system = "lorenz";
  c.x0 = Eigen::Vector3d(-8.0, 7.0, 27.0);
  c.t0 = 0.0;
  c.tN = 2.5;
  c.n_stamps = 251;
  c.fine_substeps = 100;
  c.noise_sigma = 0.0;
  return c;
}

GeneratorConfig default_spiral_config() {
  GeneratorConfig c;
  c.system = "spiral";
  c.x0 = Eigen::Vector3d(1.0, 0.0, 0.0);
  c.t0 = 0.0;
  c.tN = 6.0;
  c.n_stamps = 301;
  c.fine_substeps = 100;
  c.noise_sigma = 0.05;
  return c;
}

}  // namespace neupde
