#include "neupde/io.hpp"

#include <bit>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "neupde/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "field files are little-endian; big-endian hosts unsupported");

namespace neupde {

namespace {

void write_double(std::ostream& os, double v) {
  os << std::setprecision(17) << v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos])))
      ++pos;
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError(where + ": bad number '" + s + "'");
  }
}

}  // namespace

void save_trajectory_csv(const std::string& path, const Trajectory& traj) {
  traj.validate();
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "t";
  for (int i = 1; i <= traj.dim(); ++i) os << ",x" << i;
  os << "\n";
  os << std::setprecision(17);
  for (int s = 0; s < traj.n_stamps(); ++s) {
    os << traj.timestamps[s];
    const auto& x = traj.states[static_cast<size_t>(s)];
    for (int i = 0; i < x.size(); ++i) os << "," << x[i];
    os << "\n";
  }
  if (!os) throw IoError("write failed: " + path);
}

Trajectory load_trajectory_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(is, line)) throw IoError("empty file: " + path);
  const auto header = split_csv(line);
  if (header.size() < 2 || header[0] != "t")
    throw IoError("bad trajectory header in " + path);
  const int d = static_cast<int>(header.size()) - 1;
  for (int i = 0; i < d; ++i)
    if (header[static_cast<size_t>(i) + 1] != "x" + std::to_string(i + 1))
      throw IoError("bad trajectory header in " + path);

  Trajectory traj;
  std::vector<double> ts;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (static_cast<int>(cells.size()) != d + 1)
      throw IoError("row width mismatch in " + path);
    ts.push_back(parse_double(cells[0], path));
    Eigen::VectorXd x(d);
    for (int i = 0; i < d; ++i)
      x[i] = parse_double(cells[static_cast<size_t>(i) + 1], path);
    traj.states.push_back(std::move(x));
  }
  traj.timestamps =
      Eigen::Map<Eigen::VectorXd>(ts.data(), static_cast<long>(ts.size()));
  traj.validate();
  return traj;
}

void save_fieldseries(const std::string& path, const FieldSeries& fs) {
  fs.validate();
  const int nt = fs.n_stamps();
  if (nt < 1) throw IoError("save_fieldseries: empty series");
  const double t0 = fs.timestamps[0];
  double dt = nt > 1 ? fs.timestamps[1] - t0 : 0.0;
  for (int i = 1; i + 1 < nt; ++i)
    if (std::abs(fs.timestamps[i + 1] - fs.timestamps[i] - dt) >
        1e-9 * std::max(std::abs(dt), 1.0))
      throw IoError("save_fieldseries: non-uniform timestamps");

  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "NEUPDE-FIELD v1 " << nt << " " << fs.grid.nx << " " << fs.grid.ny
     << " ";
  write_double(os, fs.grid.hx);
  os << " ";
  write_double(os, fs.grid.hy);
  os << " ";
  write_double(os, t0);
  os << " ";
  write_double(os, dt);
  os << "\n";
  for (const auto& f : fs.fields)
    for (int i = 0; i < f.rows(); ++i)
      for (int j = 0; j < f.cols(); ++j) {
        const double v = f(i, j);
        os.write(reinterpret_cast<const char*>(&v), sizeof(double));
      }
  if (!os) throw IoError("write failed: " + path);
}

FieldSeries load_fieldseries(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  std::string header;
  if (!std::getline(is, header)) throw IoError("truncated header: " + path);
  std::istringstream hs(header);
  std::string magic, version;
  FieldSeries fs;
  int nt = 0;
  double t0 = 0.0, dt = 0.0;
  hs >> magic >> version >> nt >> fs.grid.nx >> fs.grid.ny >> fs.grid.hx >>
      fs.grid.hy >> t0 >> dt;
  if (!hs || magic != "NEUPDE-FIELD" || version != "v1")
    throw IoError("bad field header in " + path);
  if (nt < 1 || fs.grid.nx < 3 || fs.grid.ny < 3)
    throw IoError("bad field dimensions in " + path);
  fs.timestamps.resize(nt);
  for (int s = 0; s < nt; ++s) fs.timestamps[s] = t0 + s * dt;
  fs.fields.reserve(static_cast<size_t>(nt));
  for (int s = 0; s < nt; ++s) {
    Field2D f(fs.grid.nx, fs.grid.ny);
    for (int i = 0; i < fs.grid.nx; ++i)
      for (int j = 0; j < fs.grid.ny; ++j) {
        double v = 0.0;
        is.read(reinterpret_cast<char*>(&v), sizeof(double));
        f(i, j) = v;
      }
    fs.fields.push_back(std::move(f));
  }
  if (!is) throw IoError("truncated field data in " + path);
  return fs;
}

void save_field_csv(const std::string& path, const Field2D& u,
                    const Grid2D& grid) {
  if (u.rows() != grid.nx || u.cols() != grid.ny)
    throw ShapeMismatch("save_field_csv: shape mismatch");
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "x,y,u\n" << std::setprecision(17);
  for (int i = 0; i < grid.nx; ++i)
    for (int j = 0; j < grid.ny; ++j)
      os << i * grid.hx << "," << j * grid.hy << "," << u(i, j) << "\n";
  if (!os) throw IoError("write failed: " + path);
}

void save_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << j.dump(2) << "\n";
  if (!os) throw IoError("write failed: " + path);
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
}

void require_keys(const nlohmann::json& j,
                  const std::vector<std::string>& allowed,
                  const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                           static_cast<long>(v.size()));
}

nlohmann::json bounds_to_json(const NormalizationBounds& b) {
  return {{"m", b.m}, {"M", b.M}};
}

NormalizationBounds bounds_from_json(const nlohmann::json& j) {
  require_keys(j, {"m", "M"}, "bounds");
  return NormalizationBounds{j.at("m").get<double>(), j.at("M").get<double>()};
}

nlohmann::json time_range_to_json(const TimeRange& r) {
  return {{"t0", r.t0}, {"t1", r.t1}};
}

TimeRange time_range_from_json(const nlohmann::json& j) {
  require_keys(j, {"t0", "t1"}, "time_range");
  return TimeRange{j.at("t0").get<double>(), j.at("t1").get<double>()};
}

nlohmann::json mlp_to_json(const MlpParams& p) {
  return {{"n_in", p.n_in()},
          {"hidden", p.hidden()},
          {"n_out", p.n_out()},
          {"activation", to_string(p.activation)},
          {"theta", to_std(p.pack())}};
}

MlpParams mlp_from_json(const nlohmann::json& j) {
  require_keys(j, {"n_in", "hidden", "n_out", "activation", "theta"}, "mlp");
  MlpParams p;
  const int n = j.at("n_in").get<int>();
  const int h = j.at("hidden").get<int>();
  const int o = j.at("n_out").get<int>();
  p.activation = activation_from_string(j.at("activation").get<std::string>());
  p.A1.resize(h, n);
  p.b1.resize(h);
  p.A2.resize(o, h);
  p.b2.resize(o);
  p.unpack(to_eigen(j.at("theta").get<std::vector<double>>()));
  return p;
}

}  // namespace

nlohmann::json to_json(const SolverConfig& s) {
  return {{"scheme", to_string(s.scheme)},
          {"substeps", s.substeps},
          {"rk45_tol", s.rk45_tol}};
}

SolverConfig solver_from_json(const nlohmann::json& j) {
  require_keys(j, {"scheme", "substeps", "rk45_tol"}, "solver");
  SolverConfig s;
  s.scheme = scheme_from_string(j.value("scheme", std::string("rk4")));
  s.substeps = j.value("substeps", s.substeps);
  s.rk45_tol = j.value("rk45_tol", s.rk45_tol);
  if (s.substeps < 1) throw ConfigError("solver: substeps must be >= 1");
  return s;
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"beta1", c.beta1},
          {"beta2_smooth", c.beta2_smooth},
          {"learning_rate", c.learning_rate},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps},
          {"window", c.window},
          {"batch_size", c.batch_size},
          {"iterations", c.iterations},
          {"seed", c.seed},
          {"engine", to_string(c.engine)},
          {"adjoint_substeps", c.adjoint_substeps},
          {"solver", to_json(c.solver)},
          {"overlap", c.overlap},
          {"record_full_loss", c.record_full_loss},
          {"threads", c.threads}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  require_keys(j,
               {"beta1", "beta2_smooth", "learning_rate", "adam_beta1",
                "adam_beta2", "adam_eps", "window", "batch_size", "iterations",
                "seed", "engine", "adjoint_substeps", "solver", "overlap",
                "record_full_loss", "threads"},
               "train");
  TrainConfig c;
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2_smooth = j.value("beta2_smooth", c.beta2_smooth);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.window = j.value("window", c.window);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.iterations = j.value("iterations", c.iterations);
  c.seed = j.value("seed", c.seed);
  if (j.contains("engine"))
    c.engine = engine_from_string(j.at("engine").get<std::string>());
  c.adjoint_substeps = j.value("adjoint_substeps", c.adjoint_substeps);
  if (j.contains("solver")) c.solver = solver_from_json(j.at("solver"));
  c.overlap = j.value("overlap", c.overlap);
  c.record_full_loss = j.value("record_full_loss", c.record_full_loss);
  c.threads = j.value("threads", c.threads);
  return c;
}

nlohmann::json to_json(const GeneratorConfig& c) {
  return {{"system", c.system},
          {"x0", to_std(c.x0)},
          {"t0", c.t0},
          {"tN", c.tN},
          {"n_stamps", c.n_stamps},
          {"fine_substeps", c.fine_substeps},
          {"noise_sigma", c.noise_sigma},
          {"seed", c.seed}};
}

GeneratorConfig generator_config_from_json(const nlohmann::json& j) {
  require_keys(j,
               {"system", "x0", "t0", "tN", "n_stamps", "fine_substeps",
                "noise_sigma", "seed"},
               "generator");
  GeneratorConfig c;
  c.system = j.value("system", c.system);
  if (j.contains("x0")) c.x0 = to_eigen(j.at("x0").get<std::vector<double>>());
  c.t0 = j.value("t0", c.t0);
  c.tN = j.value("tN", c.tN);
  c.n_stamps = j.value("n_stamps", c.n_stamps);
  c.fine_substeps = j.value("fine_substeps", c.fine_substeps);
  c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
  c.seed = j.value("seed", c.seed);
  return c;
}

nlohmann::json to_json(const DictionarySpec& spec) {
  return {{"dim", spec.dim},
          {"degree", spec.degree},
          {"include_time", spec.include_time},
          {"terms", spec.terms}};
}

DictionarySpec dictionary_from_json(const nlohmann::json& j) {
  require_keys(j, {"dim", "degree", "include_time", "terms"}, "dictionary");
  DictionarySpec spec =
      DictionarySpec::make(j.at("dim").get<int>(), j.at("degree").get<int>(),
                           j.at("include_time").get<bool>());
  if (j.contains("terms")) {
    const auto stored = j.at("terms").get<std::vector<std::vector<int>>>();
    if (stored != spec.terms)
      throw ConfigError("dictionary: stored term list does not match the "
                        "canonical ordering");
  }
  return spec;
}

nlohmann::json model_to_json(const VectorField& model) {
  nlohmann::json j = {{"dictionary", to_json(model.spec)},
                      {"bounds", bounds_to_json(model.bounds)},
                      {"time_range", time_range_to_json(model.time_range)},
                      {"mlp", mlp_to_json(model.mlp)},
                      {"use_mlp", model.use_mlp}};
  if (model.has_linear()) {
    std::vector<double> a0;
    a0.reserve(static_cast<size_t>(model.linear_part.size()));
    for (int i = 0; i < model.linear_part.rows(); ++i)
      for (int k = 0; k < model.linear_part.cols(); ++k)
        a0.push_back(model.linear_part(i, k));
    j["linear_part"] = a0;
  }
  return j;
}

VectorField vector_field_from_json(const nlohmann::json& j) {
  require_keys(
      j, {"dictionary", "bounds", "time_range", "mlp", "use_mlp", "linear_part"},
      "model");
  VectorField vf;
  vf.spec = dictionary_from_json(j.at("dictionary"));
  vf.bounds = bounds_from_json(j.at("bounds"));
  vf.time_range = time_range_from_json(j.at("time_range"));
  vf.mlp = mlp_from_json(j.at("mlp"));
  vf.use_mlp = j.value("use_mlp", true);
  if (j.contains("linear_part")) {
    const auto a0 = j.at("linear_part").get<std::vector<double>>();
    const int r = vf.spec.dim;
    if (static_cast<long>(a0.size()) != static_cast<long>(r) * r)
      throw ConfigError("model: linear_part size mismatch");
    vf.linear_part.resize(r, r);
    size_t k = 0;
    for (int i = 0; i < r; ++i)
      for (int c = 0; c < r; ++c) vf.linear_part(i, c) = a0[k++];
  }
  return vf;
}

nlohmann::json model_to_json(const PdeDynamics& model) {
  nlohmann::json channels = nlohmann::json::array();
  for (const auto c : model.channels) channels.push_back(to_string(c));
  nlohmann::json cb = nlohmann::json::array();
  for (const auto& b : model.channel_bounds) cb.push_back(bounds_to_json(b));
  return {{"grid",
           {{"nx", model.grid.nx},
            {"ny", model.grid.ny},
            {"hx", model.grid.hx},
            {"hy", model.grid.hy}}},
          {"channels", channels},
          {"dictionary", to_json(model.spec)},
          {"channel_bounds", cb},
          {"time_range", time_range_to_json(model.time_range)},
          {"mlp", mlp_to_json(model.mlp)}};
}

PdeDynamics pde_model_from_json(const nlohmann::json& j) {
  require_keys(j,
               {"grid", "channels", "dictionary", "channel_bounds",
                "time_range", "mlp"},
               "pde_model");
  PdeDynamics m;
  const auto& g = j.at("grid");
  require_keys(g, {"nx", "ny", "hx", "hy"}, "grid");
  m.grid.nx = g.at("nx").get<int>();
  m.grid.ny = g.at("ny").get<int>();
  m.grid.hx = g.at("hx").get<double>();
  m.grid.hy = g.at("hy").get<double>();
  for (const auto& name : j.at("channels"))
    m.channels.push_back(channel_from_string(name.get<std::string>()));
  m.spec = dictionary_from_json(j.at("dictionary"));
  for (const auto& b : j.at("channel_bounds"))
    m.channel_bounds.push_back(bounds_from_json(b));
  m.time_range = time_range_from_json(j.at("time_range"));
  m.mlp = mlp_from_json(j.at("mlp"));
  if (m.spec.dim != static_cast<int>(m.channels.size()))
    throw ConfigError("pde_model: dictionary dim != channel count");
  return m;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  nlohmann::json j = {{"kind", ck.kind},
                      {"solver", to_json(ck.solver)},
                      {"loss_history", ck.loss_history}};
  if (ck.kind == "ode")
    j["model"] = model_to_json(ck.ode);
  else if (ck.kind == "pde")
    j["model"] = model_to_json(ck.pde);
  else
    throw ConfigError("checkpoint: unknown kind '" + ck.kind + "'");
  if (!ck.train.is_null()) j["train"] = ck.train;
  save_json(path, j);
}

Checkpoint load_checkpoint(const std::string& path) {
  const nlohmann::json j = load_json(path);
  require_keys(j, {"kind", "model", "solver", "train", "loss_history"},
               "checkpoint");
  Checkpoint ck;
  ck.kind = j.at("kind").get<std::string>();
  if (ck.kind == "ode")
    ck.ode = vector_field_from_json(j.at("model"));
  else if (ck.kind == "pde")
    ck.pde = pde_model_from_json(j.at("model"));
  else
    throw ConfigError("checkpoint: unknown kind '" + ck.kind + "'");
  ck.solver = solver_from_json(j.at("solver"));
  if (j.contains("train")) ck.train = j.at("train");
  if (j.contains("loss_history"))
    ck.loss_history = j.at("loss_history").get<std::vector<double>>();
  return ck;
}

}  // namespace neupde
