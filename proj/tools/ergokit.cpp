// ergokit command line driver.
//
//   ergokit run <config.json> [overrides]
//   ergokit replay <artifact> [--out path]
//   ergokit <experiment> [--config base.json] [overrides]
//
// Exit status: 0 success, 2 numerical check failure, 1 error.

#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "ergokit/experiments.hpp"

namespace {

using ergokit::Json;

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ergokit::Error("cannot read '" + path + "'");
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ergokit::ConfigError("output.path", "cannot open '" + path + "' for writing");
  os << content;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(item);
  return parts;
}

Json scalar_value(const std::string& s, const std::string& key) {
  try {
    Json v = Json::parse(s);
    if (v.is_number() || v.is_array() || v.is_boolean()) return v;
  } catch (const Json::parse_error&) {
  }
  if (key == "mc.seed" || key == "mc.n" || key == "mc.reps")
    throw ergokit::ConfigError(key, "expected an integer, got '" + s + "'");
  return s;
}

/// Numbers, comma lists of numbers, or raw JSON.
Json list_value(const std::string& s, const std::string& key) {
  if (!s.empty() && s.front() == '[') return scalar_value(s, key);
  const auto parts = split(s, ',');
  if (parts.size() == 1) return scalar_value(s, key);
  Json a = Json::array();
  for (const auto& p : parts) a.push_back(scalar_value(p, key));
  return a;
}

/// Points separated by ';', coordinates by ','. Without ';' every
/// comma-separated value is a 1-D point.
Json points_value(const std::string& s, const std::string& key) {
  if (!s.empty() && s.front() == '[') return scalar_value(s, key);
  Json a = Json::array();
  if (s.find(';') == std::string::npos) {
    for (const auto& p : split(s, ',')) a.push_back(scalar_value(p, key));
  } else {
    for (const auto& p : split(s, ';')) a.push_back(list_value(p, key));
  }
  return a;
}

struct Overrides {
  std::map<std::string, std::string> values;  // flag name -> raw text

  void bind(CLI::App& app) {
    static const std::vector<std::pair<std::string, std::string>> flags = {
        {"--seed", "master seed (mc.seed)"},
        {"--out", "output path (output.path)"},
        {"--format", "csv or json (output.format)"},
        {"--model", "model name: ar1, tanh1, rotcon2"},
        {"--rho", "model contraction rho"},
        {"--sigma", "model noise scale"},
        {"--theta", "rotation angle (rotcon2)"},
        {"--grid", "grid as lo:hi:M"},
        {"--weight", "weight exponent V as an expression"},
        {"--eta", "weight eta; for drift a comma list of etas"},
        {"--n", "Monte Carlo sample size (mc.n)"},
        {"--reps", "replications (mc.reps)"},
        {"--f", "test function: x, x2, tanh, z2, sin or an expression"},
        {"--x", "evaluation point, comma separated"},
        {"--t", "horizon of the gradient check"},
        {"--fd-step", "relative finite-difference step"},
        {"--cost", "cost: x, x2, tanh or an expression"},
        {"--alpha", "discount factor"},
        {"--mode", "auto, series or linear"},
        {"--tmax", "series horizon"},
        {"--tol", "series tolerance"},
        {"--top", "number of eigenvalues"},
        {"--export-matrix", "write the kernel matrix as CSV"},
        {"--V", "drift function V"},
        {"--W", "drift function W"},
        {"--delta", "drift rate delta"},
        {"--b", "drift constant b"},
        {"--c-radius", "radius of the small set C"},
        {"--x0", "initial points: ';' between points, ',' between coordinates"},
        {"--horizon", "simulation horizon T"},
        {"--p", "moment order of the mean exponent"},
        {"--t0", "contraction horizon"},
        {"--rho-exp", "contraction exponent"},
        {"--norm", "matrix norm: spectral, frobenius, infinity"},
        {"--m", "Bernstein degree"},
        {"--lo", "Bernstein box lower corner"},
        {"--hi", "Bernstein box upper corner"},
        {"--probes", "number of probe points"},
        {"--levels", "truncation levels, comma separated"},
    };
    for (const auto& [flag, help] : flags) app.add_option(flag, values[flag], help);
  }

  void apply(Json& cfg) const {
    const std::string experiment = cfg.value("experiment", std::string());
    auto given = [&](const std::string& flag) {
      auto it = values.find(flag);
      return it != values.end() && !it->second.empty();
    };
    auto get = [&](const std::string& flag) { return values.at(flag); };
    static const std::map<std::string, std::string> simple = {
        {"--seed", "mc.seed"},      {"--n", "mc.n"},          {"--reps", "mc.reps"},
        {"--out", "output.path"},   {"--format", "output.format"}, {"--model", "model.name"},
        {"--rho", "model.rho"},     {"--sigma", "model.sigma"}, {"--theta", "model.theta"},
        {"--weight", "weight.V"},   {"--f", "params.f"},       {"--t", "params.t"},
        {"--fd-step", "params.fd_step"}, {"--cost", "params.cost"}, {"--alpha", "params.alpha"},
        {"--mode", "params.mode"},  {"--tmax", "params.tmax"}, {"--tol", "params.tol"},
        {"--top", "params.top"},    {"--export-matrix", "params.export_matrix"},
        {"--V", "params.V"},        {"--W", "params.W"},       {"--delta", "params.delta"},
        {"--b", "params.b"},        {"--c-radius", "params.c_radius"}, {"--horizon", "params.horizon"},
        {"--p", "params.p"},        {"--t0", "params.t0"},     {"--rho-exp", "params.rho_exp"},
        {"--norm", "params.norm"},  {"--m", "params.m"},       {"--probes", "params.probes"},
    };
    static const std::set<std::string> textual = {"output.path", "output.format", "model.name", "weight.V",
                                                  "params.f", "params.cost", "params.mode", "params.export_matrix",
                                                  "params.V", "params.W", "params.norm"};
    for (const auto& [flag, key] : simple) {
      if (!given(flag)) continue;
      ergokit::set_path(cfg, key, textual.count(key) ? Json(get(flag)) : scalar_value(get(flag), key));
    }
    if (given("--x")) ergokit::set_path(cfg, "params.x", list_value(get("--x"), "params.x"));
    if (given("--lo")) ergokit::set_path(cfg, "params.lo", list_value(get("--lo"), "params.lo"));
    if (given("--hi")) ergokit::set_path(cfg, "params.hi", list_value(get("--hi"), "params.hi"));
    if (given("--levels")) ergokit::set_path(cfg, "params.levels", list_value(get("--levels"), "params.levels"));
    if (given("--x0")) ergokit::set_path(cfg, "params.x0", points_value(get("--x0"), "params.x0"));
    if (given("--eta")) {
      if (experiment == "drift") ergokit::set_path(cfg, "params.eta", list_value(get("--eta"), "params.eta"));
      else ergokit::set_path(cfg, "weight.eta", scalar_value(get("--eta"), "weight.eta"));
    }
    if (given("--grid")) {
      const auto parts = split(get("--grid"), ':');
      if (parts.size() != 3) throw ergokit::ConfigError("grid", "expected lo:hi:M, got '" + get("--grid") + "'");
      ergokit::set_path(cfg, "grid.lo", scalar_value(parts[0], "grid.lo"));
      ergokit::set_path(cfg, "grid.hi", scalar_value(parts[1], "grid.hi"));
      ergokit::set_path(cfg, "grid.points", scalar_value(parts[2], "grid.points"));
    }
  }
};

int execute(const Json& raw) {
  const Json cfg = ergokit::resolve_config(raw);
  const ergokit::ExperimentOutput out = ergokit::run_experiment(cfg);
  for (const auto& w : out.warnings) std::cerr << "warning: " << w << "\n";
  if (cfg["output"].contains("path")) {
    write_file(cfg["output"]["path"].get<std::string>(), out.text);
  } else {
    std::cout << out.text;
  }
  std::cerr << out.summary << "\n";
  return out.check_pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ergokit: numerical checks of geometric ergodicity for Markov chains"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides run_over;
  CLI::App* run = app.add_subcommand("run", "run an experiment config");
  run->add_option("config", config_path, "experiment config (JSON)")->required();
  run_over.bind(*run);

  std::string artifact_path, replay_out;
  CLI::App* replay = app.add_subcommand("replay", "rerun the config embedded in an artifact and compare");
  replay->add_option("artifact", artifact_path, "CSV or JSON artifact")->required();
  replay->add_option("--out", replay_out, "write the regenerated artifact here");

  std::map<std::string, std::pair<Overrides, std::string>> direct;
  std::map<std::string, CLI::App*> direct_apps;
  for (const auto& name : ergokit::experiment_names()) {
    auto& [over, base] = direct[name];
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", base, "base config overridden by the flags");
    over.bind(*sub);
    direct_apps[name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) {
      Json cfg = Json::parse(read_file(config_path));
      run_over.apply(cfg);
      return execute(cfg);
    }
    if (replay->parsed()) {
      const std::string original = read_file(artifact_path);
      const Json cfg = ergokit::resolve_config(ergokit::config_from_artifact(original));
      const ergokit::ExperimentOutput out = ergokit::run_experiment(cfg);
      if (!replay_out.empty()) write_file(replay_out, out.text);
      if (out.text != original) {
        std::cerr << "replay: regenerated artifact differs from " << artifact_path << "\n";
        return 2;
      }
      std::cerr << "replay: identical\n";
      return 0;
    }
    for (auto& [name, sub] : direct_apps) {
      if (!sub->parsed()) continue;
      auto& [over, base] = direct[name];
      Json cfg = base.empty() ? Json::object() : Json::parse(read_file(base));
      cfg["experiment"] = name;
      over.apply(cfg);
      return execute(cfg);
    }
  } catch (const ergokit::ConfigError& e) {
    std::cerr << "error: config key " << e.what() << "\n";
    return 1;
  } catch (const Json::exception& e) {
    std::cerr << "error: invalid JSON: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
