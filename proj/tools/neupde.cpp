// Batch front door: data generation, training, forecasting, evaluation,
// baselines, gradient checks, and plot-data export.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "neupde/baselines.hpp"
#include "neupde/errors.hpp"
#include "neupde/io.hpp"
#include "neupde/rom.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace neupde;

namespace {

struct Common {
  std::string config;
  std::string out = ".";
  std::string engine;
  long long seed = -1;  // -1 = keep config value
};

void add_common(CLI::App* cmd, Common& c, bool config_required = true) {
  auto* opt = cmd->add_option("--config", c.config, "experiment config JSON");
  if (config_required) opt->required();
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--seed", c.seed, "override every seed in the config");
  cmd->add_option("--engine", c.engine, "gradient engine: bptt | adjoint");
}

std::string out_path(const Common& c, const std::string& name) {
  fs::create_directories(c.out);
  return (fs::path(c.out) / name).string();
}

bool has_ext(const std::string& path, const std::string& ext) {
  return fs::path(path).extension() == ext;
}

// ---------------------------------------------------------------- datasets

std::vector<Trajectory> load_ode_data(const json& cfg, const Common& c) {
  std::vector<Trajectory> data;
  if (cfg.contains("data")) {
    for (const auto& p : cfg.at("data"))
      data.push_back(load_trajectory_csv(p.get<std::string>()));
  } else if (cfg.contains("generator")) {
    GeneratorConfig g = generator_config_from_json(cfg.at("generator"));
    if (c.seed >= 0) g.seed = static_cast<std::uint64_t>(c.seed);
    data.push_back(generate(g).noisy);
  } else {
    throw ConfigError("config needs 'data' or 'generator'");
  }
  return data;
}

BurgersDataset load_burgers_data(const json& cfg, const Common& c) {
  if (cfg.contains("data")) {
    BurgersDataset ds;
    const auto files = cfg.at("data").get<std::vector<std::string>>();
    if (files.size() < 2) throw ConfigError("need >= 1 train + 1 test file");
    for (size_t i = 0; i + 1 < files.size(); ++i)
      ds.train.push_back(load_fieldseries(files[i]));
    ds.test = load_fieldseries(files.back());
    return ds;
  }
  const json b = cfg.value("burgers", json::object());
  require_keys(b, {"seed", "amplitude", "noise_sigma"}, "burgers");
  std::uint64_t seed = b.value("seed", std::uint64_t{0});
  if (c.seed >= 0) seed = static_cast<std::uint64_t>(c.seed);
  return make_burgers_dataset(seed, b.value("amplitude", 1.5),
                              b.value("noise_sigma", 0.1));
}

// ------------------------------------------------------------------ models

TimeRange data_time_range(const std::vector<Trajectory>& data) {
  TimeRange r{data.front().timestamps[0],
              data.front().timestamps[data.front().timestamps.size() - 1]};
  for (const auto& tr : data) {
    r.t0 = std::min(r.t0, tr.timestamps[0]);
    r.t1 = std::max(r.t1, tr.timestamps[tr.timestamps.size() - 1]);
  }
  return r;
}

VectorField make_ode_model(const json& cfg, const std::vector<Trajectory>& data,
                           std::uint64_t seed) {
  const json d = cfg.value("dictionary", json::object());
  require_keys(d, {"degree", "include_time"}, "dictionary");
  VectorField vf;
  vf.spec = DictionarySpec::make(data.front().dim(), d.value("degree", 2),
                                 d.value("include_time", false));
  vf.bounds = fit_bounds(data);
  vf.time_range = data_time_range(data);
  vf.mlp = init_params(
      vf.spec.n_terms(), cfg.value("hidden", 20), data.front().dim(),
      activation_from_string(cfg.value("activation", std::string("tanh"))),
      seed);
  return vf;
}

PdeDynamics make_pde_model(const json& cfg, const BurgersDataset& ds,
                           std::uint64_t seed) {
  PdeDynamics m;
  m.grid = ds.train.front().grid;
  if (cfg.contains("channels")) {
    for (const auto& name : cfg.at("channels"))
      m.channels.push_back(channel_from_string(name.get<std::string>()));
  } else {
    m.channels = default_burgers_channels();
  }
  const json d = cfg.value("dictionary", json::object());
  require_keys(d, {"degree", "include_time"}, "dictionary");
  m.spec = DictionarySpec::make(static_cast<int>(m.channels.size()),
                                d.value("degree", 2), false);
  m.time_range =
      TimeRange{ds.train.front().timestamps[0],
                ds.train.front().timestamps[ds.train.front().n_stamps() - 1]};
  m.fit_channel_bounds(ds.train, cfg.value("per_channel_bounds", false));
  m.mlp = init_params(
      m.spec.n_terms(), cfg.value("hidden", 50), 1,
      activation_from_string(cfg.value("activation", std::string("tanh"))),
      seed);
  return m;
}

TrainConfig read_train_config(const json& cfg, const Common& c) {
  TrainConfig tc = train_config_from_json(cfg.value("train", json::object()));
  if (c.seed >= 0) tc.seed = static_cast<std::uint64_t>(c.seed);
  if (!c.engine.empty()) tc.engine = engine_from_string(c.engine);
  return tc;
}

void write_losses_csv(const std::string& path, const std::vector<double>& losses) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "iteration,loss\n" << std::setprecision(17);
  for (size_t i = 0; i < losses.size(); ++i) os << i + 1 << "," << losses[i] << "\n";
}

// ---------------------------------------------------------------- commands

int cmd_generate(const Common& c) {
  const json cfg = load_json(c.config);
  require_keys(cfg, {"kind", "name", "generator", "burgers"}, "config");
  const std::string name = cfg.value("name", std::string("dataset"));
  const std::string kind = cfg.value("kind", std::string("ode"));
  json meta = {{"config", cfg}};
  if (c.seed >= 0) meta["seed_override"] = c.seed;

  if (kind == "ode") {
    GeneratorConfig g = generator_config_from_json(cfg.at("generator"));
    if (c.seed >= 0) g.seed = static_cast<std::uint64_t>(c.seed);
    const GeneratedData data = generate(g);
    save_trajectory_csv(out_path(c, name + "_clean.csv"), data.clean);
    save_trajectory_csv(out_path(c, name + "_noisy.csv"), data.noisy);
    meta["config"]["generator"] = to_json(g);
  } else if (kind == "burgers") {
    const BurgersDataset ds = load_burgers_data(cfg, c);
    for (size_t i = 0; i < ds.train.size(); ++i)
      save_fieldseries(out_path(c, name + "_train" + std::to_string(i) + ".field"),
                       ds.train[i]);
    save_fieldseries(out_path(c, name + "_test.field"), ds.test);
  } else {
    throw ConfigError("generate: unknown kind '" + kind + "'");
  }
  save_json(out_path(c, name + ".meta.json"), meta);
  return 0;
}

int cmd_train(const Common& c) {
  const json cfg = load_json(c.config);
  require_keys(cfg,
               {"kind", "name", "data", "generator", "burgers", "dictionary",
                "hidden", "activation", "channels", "per_channel_bounds",
                "train", "eval_window"},
               "config");
  const std::string name = cfg.value("name", std::string("model"));
  const std::string kind = cfg.value("kind", std::string("ode"));
  const TrainConfig tc = read_train_config(cfg, c);

  Checkpoint ck;
  ck.kind = kind;
  ck.solver = tc.solver;
  TrainResult result;
  double full_loss = 0.0;

  if (kind == "ode") {
    const std::vector<Trajectory> data = load_ode_data(cfg, c);
    VectorField vf = make_ode_model(cfg, data, tc.seed);
    result = train_ode(vf, data, tc);
    vf.set_params(result.theta);
    full_loss = full_data_loss(vf, data, cfg.value("eval_window", tc.window),
                               tc.solver);
    ck.ode = vf;
    ck.train = {{"config", to_json(tc)}, {"n_params", vf.n_params()}};
  } else if (kind == "pde") {
    const BurgersDataset ds = load_burgers_data(cfg, c);
    PdeDynamics m = make_pde_model(cfg, ds, tc.seed);
    std::vector<Trajectory> data;
    for (const auto& fsr : ds.train) data.push_back(fieldseries_to_trajectory(fsr));
    result = train_ode(m, data, tc);
    m.set_params(result.theta);
    full_loss = windowed_field_mse(m, ds.train,
                                   cfg.value("eval_window", tc.window), tc.solver);
    ck.pde = m;
    ck.train = {{"config", to_json(tc)}, {"n_params", m.n_params()}};
  } else {
    throw ConfigError("train: unknown kind '" + kind + "'");
  }

  ck.train["final_full_loss"] = full_loss;
  ck.loss_history = result.loss_history;
  save_checkpoint(out_path(c, name + ".ckpt.json"), ck);
  write_losses_csv(out_path(c, name + "_losses.csv"), result.loss_history);
  std::cout << "parameters: " << ck.train.at("n_params").get<long>() << "\n"
            << "final loss: " << std::setprecision(17)
            << (result.loss_history.empty() ? 0.0 : result.loss_history.back())
            << "\n"
            << "full-data loss: " << full_loss << "\n";
  if (result.diverged) {
    std::cerr << "training diverged (skipped " << result.skipped_steps
              << " steps)\n";
    return 2;
  }
  return 0;
}

int cmd_forecast(const Common& c) {
  const json cfg = load_json(c.config);
  require_keys(cfg,
               {"checkpoint", "name", "x0", "t0", "t1", "n_stamps",
                "times_from", "ic_from", "ic_stamp"},
               "config");
  const std::string name = cfg.value("name", std::string("forecast"));
  const Checkpoint ck = load_checkpoint(cfg.at("checkpoint").get<std::string>());

  Eigen::VectorXd timestamps;
  if (cfg.contains("times_from")) {
    const std::string src = cfg.at("times_from").get<std::string>();
    timestamps = has_ext(src, ".field")
                     ? load_fieldseries(src).timestamps
                     : load_trajectory_csv(src).timestamps;
  } else {
    const int n = cfg.at("n_stamps").get<int>();
    const double t0 = cfg.at("t0").get<double>(), t1 = cfg.at("t1").get<double>();
    if (n < 2 || !(t1 > t0)) throw ConfigError("forecast: bad time grid");
    timestamps = Eigen::VectorXd::LinSpaced(n, t0, t1);
  }

  Eigen::VectorXd x0;
  if (cfg.contains("x0")) {
    const auto v = cfg.at("x0").get<std::vector<double>>();
    x0 = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<long>(v.size()));
  } else if (cfg.contains("ic_from")) {
    const std::string src = cfg.at("ic_from").get<std::string>();
    const int stamp = cfg.value("ic_stamp", 0);
    if (has_ext(src, ".field")) {
      x0 = flatten(load_fieldseries(src).fields.at(static_cast<size_t>(stamp)));
    } else {
      x0 = load_trajectory_csv(src).states.at(static_cast<size_t>(stamp));
    }
  } else {
    throw ConfigError("forecast: config needs 'x0' or 'ic_from'");
  }

  const Dynamics& dyn =
      ck.kind == "pde" ? static_cast<const Dynamics&>(ck.pde)
                       : static_cast<const Dynamics&>(ck.ode);
  try {
    const Trajectory pred = integrate(dyn, x0, timestamps, ck.solver);
    if (ck.kind == "pde")
      save_fieldseries(out_path(c, name + ".field"),
                       trajectory_to_fieldseries(pred, ck.pde.grid));
    else
      save_trajectory_csv(out_path(c, name + ".csv"), pred);
  } catch (const NonFiniteState& e) {
    std::cerr << "forecast diverged: " << e.what() << " (last valid stamp "
              << e.interval << ")\n";
    return 2;
  }
  return 0;
}

double mse_metric(const std::vector<Eigen::VectorXd>& a,
                  const std::vector<Eigen::VectorXd>& b) {
  if (a.size() != b.size()) throw ShapeMismatch("eval: stamp count mismatch");
  double sum = 0.0;
  long count = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) throw ShapeMismatch("eval: dim mismatch");
    sum += (a[i] - b[i]).squaredNorm();
    count += a[i].size();
  }
  if (count == 0) throw ShapeMismatch("eval: empty inputs");
  return sum / static_cast<double>(count);
}

int cmd_eval(const Common& c, const std::string& pred_path,
             const std::string& truth_path, const std::string& metric) {
  auto load = [](const std::string& p) {
    return has_ext(p, ".field") ? fieldseries_to_trajectory(load_fieldseries(p))
                                : load_trajectory_csv(p);
  };
  const Trajectory pred = load(pred_path), truth = load(truth_path);
  double value = 0.0;
  if (metric == "mse") {
    value = mse_metric(pred.states, truth.states);
  } else if (metric == "rel_l2_terminal") {
    if (pred.n_stamps() == 0 || truth.n_stamps() == 0)
      throw ShapeMismatch("eval: empty inputs");
    const auto& p = pred.states.back();
    const auto& t = truth.states.back();
    if (p.size() != t.size()) throw ShapeMismatch("eval: dim mismatch");
    value = (p - t).norm() / t.norm();
  } else {
    throw ConfigError("eval: unknown metric '" + metric + "'");
  }
  std::cout << std::setprecision(17) << value << "\n";
  return 0;
}

int cmd_baseline(const Common& c) {
  const json cfg = load_json(c.config);
  require_keys(cfg,
               {"name", "data", "generator", "dictionary", "constant_column",
                "method", "threshold", "lambda", "max_iters"},
               "config");
  const std::string name = cfg.value("name", std::string("baseline"));
  const std::vector<Trajectory> data = load_ode_data(cfg, c);
  const json d = cfg.value("dictionary", json::object());
  require_keys(d, {"degree", "include_time"}, "dictionary");
  const DictionarySpec spec = DictionarySpec::make(
      data.front().dim(), d.value("degree", 2), d.value("include_time", false));
  const RegressionProblem problem =
      build_problem(data, spec, cfg.value("constant_column", false));

  const std::string method = cfg.value("method", std::string("stlsq"));
  Eigen::MatrixXd Xi;
  if (method == "stlsq") {
    Xi = stlsq(problem, cfg.value("threshold", 0.5), cfg.value("max_iters", 10)).Xi;
  } else if (method == "lasso") {
    Xi = lasso_debias(problem, cfg.value("lambda", 0.1),
                      cfg.value("max_iters", 5000)).Xi;
  } else {
    throw ConfigError("baseline: unknown method '" + method + "'");
  }
  save_coefficients_csv(out_path(c, name + "_coeffs.csv"), problem, Xi);
  return 0;
}

int cmd_gradcheck(const Common& c) {
  const json cfg = load_json(c.config);
  require_keys(cfg,
               {"name", "data", "generator", "dictionary", "hidden",
                "activation", "train", "step", "window_start"},
               "config");
  const std::string name = cfg.value("name", std::string("gradcheck"));
  const std::vector<Trajectory> data = load_ode_data(cfg, c);
  const TrainConfig tc = read_train_config(cfg, c);
  VectorField vf = make_ode_model(cfg, data, tc.seed);

  const int start = cfg.value("window_start", 0);
  const int k = tc.window;
  const Trajectory& src = data.front();
  if (start < 0 || start + k >= src.n_stamps())
    throw ConfigError("gradcheck: window outside the data");
  Trajectory window;
  window.timestamps = src.timestamps.segment(start, k + 1);
  window.states.assign(src.states.begin() + start,
                       src.states.begin() + start + k + 1);

  const LossSpec loss{tc.beta1, tc.beta2_smooth, tc.beta2_smooth};
  const GradCheckReport report =
      grad_check(vf, window, tc.solver, loss, cfg.value("step", 1e-6),
                 tc.engine, tc.adjoint_substeps);
  const std::string text = report.to_json();
  std::cout << text << "\n";
  std::ofstream os(out_path(c, name + ".json"));
  if (!os) throw IoError("cannot write gradcheck report");
  os << text << "\n";
  return 0;
}

int cmd_export(const Common& c, const std::string& input, int stamp) {
  const FieldSeries fsr = load_fieldseries(input);
  if (stamp < 0 || stamp >= fsr.n_stamps())
    throw ConfigError("export: stamp out of range");
  const std::string name =
      fs::path(input).stem().string() + "_" + std::to_string(stamp) + ".csv";
  save_field_csv(out_path(c, name), fsr.fields[static_cast<size_t>(stamp)],
                 fsr.grid);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dictionary-network dynamics learning toolkit"};
  app.require_subcommand(1);

  Common c_gen, c_train, c_fore, c_eval, c_base, c_grad, c_exp;
  std::string pred, truth, metric = "mse", input;
  int stamp = 0;

  add_common(app.add_subcommand("generate", "write a dataset"), c_gen);
  add_common(app.add_subcommand("train", "train a model"), c_train);
  add_common(app.add_subcommand("forecast", "integrate a checkpoint"), c_fore);

  auto* ev = app.add_subcommand("eval", "score a prediction against truth");
  add_common(ev, c_eval, false);
  ev->add_option("--pred", pred, "prediction file")->required();
  ev->add_option("--truth", truth, "reference file")->required();
  ev->add_option("--metric", metric, "mse | rel_l2_terminal");

  add_common(app.add_subcommand("baseline", "sparse-regression baselines"),
             c_base);
  add_common(app.add_subcommand("gradcheck", "finite-difference gradient audit"),
             c_grad);

  auto* ex = app.add_subcommand("export", "field stamp to plot-ready CSV");
  add_common(ex, c_exp, false);
  ex->add_option("--input", input, "field series file")->required();
  ex->add_option("--stamp", stamp, "stamp index");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("generate")) return cmd_generate(c_gen);
    if (app.got_subcommand("train")) return cmd_train(c_train);
    if (app.got_subcommand("forecast")) return cmd_forecast(c_fore);
    if (app.got_subcommand("eval")) return cmd_eval(c_eval, pred, truth, metric);
    if (app.got_subcommand("baseline")) return cmd_baseline(c_base);
    if (app.got_subcommand("gradcheck")) return cmd_gradcheck(c_grad);
    if (app.got_subcommand("export")) return cmd_export(c_exp, input, stamp);
  } catch (const NonFiniteState& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const UnstableStep& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
