#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "neupde/pde.hpp"
#include "neupde/systems.hpp"
#include "neupde/train.hpp"

namespace neupde {

/// Header `t,x1,...,xd`, one row per stamp, 17 significant digits.
void save_trajectory_csv(const std::string& path, const Trajectory& traj);
Trajectory load_trajectory_csv(const std::string& path);

/// ASCII header `NEUPDE-FIELD v1 nt nx ny hx hy t0 dt_store` followed by
/// nt*nx*ny little-endian doubles in (t, x, y) row-major order. Stamps must
/// be uniformly spaced.
void save_fieldseries(const std::string& path, const FieldSeries& fs);
FieldSeries load_fieldseries(const std::string& path);

/// Per-stamp plot export: nx*ny rows of `x,y,u`.
void save_field_csv(const std::string& path, const Field2D& u,
                    const Grid2D& grid);

void save_json(const std::string& path, const nlohmann::json& j);
nlohmann::json load_json(const std::string& path);

/// Throws ConfigError when `j` holds a key outside `allowed` (typo guard for
/// configs and checkpoints).
void require_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                  const std::string& where);

nlohmann::json to_json(const SolverConfig& s);
SolverConfig solver_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const GeneratorConfig& c);
GeneratorConfig generator_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const DictionarySpec& spec);
DictionarySpec dictionary_from_json(const nlohmann::json& j);

nlohmann::json model_to_json(const VectorField& model);
VectorField vector_field_from_json(const nlohmann::json& j);

nlohmann::json model_to_json(const PdeDynamics& model);
PdeDynamics pde_model_from_json(const nlohmann::json& j);

/// One JSON document: kind ("ode" | "pde"), the model, the solver it was
/// trained with, the training config echo, and the loss history.
struct Checkpoint {
  std::string kind = "ode";
  VectorField ode;
  PdeDynamics pde;
  SolverConfig solver;
  nlohmann::json train;  // raw config echo; may be null
  std::vector<double> loss_history;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace neupde
