#pragma once

// Config-driven experiment runner behind the `ergokit` command line tool.
// Needs nlohmann/json on the include path (vendored under vendor/).

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ergokit/bernstein.hpp"
#include "ergokit/drift.hpp"
#include "ergokit/expr.hpp"
#include "ergokit/kernelgrid.hpp"
#include "ergokit/semigroup.hpp"
#include "ergokit/simulate.hpp"
#include "ergokit/valuefn.hpp"

namespace ergokit {

using Json = nlohmann::ordered_json;

/// Schema violation in an experiment config; `path()` names the offending key
/// in dotted form, e.g. "mc.seed".
class ConfigError : public Error {
public:
  ConfigError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

private:
  std::string path_;
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"gradcheck", "poisson",  "discounted", "decay",
                                                 "spectrum",  "drift",    "lyapunov",   "contraction",
                                                 "bernstein", "truncation"};
  return names;
}

/// Text of a finished experiment plus its check status.
struct ExperimentOutput {
  std::string text;
  bool check_pass = true;
  std::string summary;
  std::vector<std::string> warnings;
};

namespace config_detail {

inline std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string join_point(const Vec& x) {
  std::string s;
  for (Eigen::Index i = 0; i < x.size(); ++i) s += (i ? ";" : "") + fmt(x(i));
  return s;
}

inline void check_keys(const Json& obj, const std::string& path, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError(path.empty() ? key : path + "." + key, "unknown key");
  }
}

inline const Json& at(const Json& cfg, const std::string& path) {
  const Json* node = &cfg;
  std::size_t start = 0;
  while (start <= path.size()) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key)) throw ConfigError(path, "missing required key");
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return *node;
}

inline bool has(const Json& cfg, const std::string& path) {
  try {
    at(cfg, path);
    return true;
  } catch (const ConfigError&) {
    return false;
  }
}

inline double number(const Json& cfg, const std::string& path) {
  const Json& v = at(cfg, path);
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  return v.get<double>();
}

inline long integer(const Json& cfg, const std::string& path) {
  const Json& v = at(cfg, path);
  if (v.is_number_integer()) return v.get<long>();
  if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>())
    return static_cast<long>(v.get<double>());
  throw ConfigError(path, "expected an integer");
}

inline std::uint64_t seed_value(const Json& cfg, const std::string& path) {
  const Json& v = at(cfg, path);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
  throw ConfigError(path, "expected a nonnegative integer");
}

inline std::string text(const Json& cfg, const std::string& path) {
  const Json& v = at(cfg, path);
  if (!v.is_string()) throw ConfigError(path, "expected a string");
  return v.get<std::string>();
}

/// A point given either as a number (1-D) or as an array of numbers.
inline Vec point(const Json& v, const std::string& path) {
  if (v.is_number()) return Vec::Constant(1, v.get<double>());
  if (!v.is_array() || v.empty()) throw ConfigError(path, "expected a number or an array of numbers");
  Vec x(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ConfigError(path, "expected a number or an array of numbers");
    x(i) = v[i].get<double>();
  }
  return x;
}

inline std::vector<Vec> point_list(const Json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw ConfigError(path, "expected a non-empty array of points");
  std::vector<Vec> out;
  for (const Json& p : v) out.push_back(point(p, path));
  return out;
}

inline std::vector<double> number_list(const Json& v, const std::string& path) {
  if (v.is_number()) return {v.get<double>()};
  if (!v.is_array() || v.empty()) throw ConfigError(path, "expected a number or a non-empty array");
  std::vector<double> out;
  for (const Json& e : v) {
    if (!e.is_number()) throw ConfigError(path, "expected numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

inline void set_default(Json& obj, const std::string& key, Json value) {
  if (!obj.contains(key)) obj[key] = std::move(value);
}

inline Expression expression(const Json& cfg, const std::string& path, int dim) {
  const std::string src = text(cfg, path);
  try {
    Expression e = Expression::parse(src);
    e.check_dim(dim);
    return e;
  } catch (const ContractViolation& err) {
    throw ConfigError(path, err.what());
  }
}

inline std::string default_weight(int dim) { return dim == 1 ? "0.1*x^2" : "0.1*(x1^2+x2^2)"; }

struct ExperimentSchema {
  std::set<std::string> params;
  bool needs_model = true;
  bool needs_grid = false;
  bool needs_seed = false;
  bool stochastic = false;
  std::string format = "json";
};

inline const ExperimentSchema& schema(const std::string& name) {
  static const std::map<std::string, ExperimentSchema> table = {
      {"gradcheck", {{"f", "x", "t", "fd_step"}, true, false, true, true, "json"}},
      {"poisson", {{"cost", "mode", "tmax", "tol"}, true, true, false, false, "csv"}},
      {"discounted", {{"cost", "alpha", "mode", "tmax", "tol"}, true, true, false, false, "csv"}},
      {"decay", {{"cost", "tmax"}, true, true, false, false, "csv"}},
      {"spectrum", {{"top", "export_matrix"}, true, true, false, false, "json"}},
      {"drift", {{"V", "W", "delta", "eta", "b", "c_radius"}, true, true, false, false, "json"}},
      {"lyapunov", {{"x0", "horizon", "p", "norm"}, true, false, true, true, "csv"}},
      {"contraction", {{"x0", "t0", "rho_exp", "norm"}, true, false, true, true, "csv"}},
      {"bernstein", {{"f", "m", "lo", "hi", "probes"}, false, false, false, false, "json"}},
      {"truncation", {{"levels", "cutoff_probes"}, true, true, false, false, "csv"}},
  };
  auto it = table.find(name);
  if (it == table.end()) throw ConfigError("experiment", "unknown experiment '" + name + "'");
  return it->second;
}

}  // namespace config_detail

/// Validates a config and fills every default in, so the returned object
/// describes the run completely. Throws ConfigError naming the bad key.
inline Json resolve_config(const Json& raw) {
  using namespace config_detail;
  check_keys(raw, "", {"experiment", "model", "weight", "grid", "mc", "params", "tolerances", "output"});
  Json cfg = raw;
  const std::string name = text(cfg, "experiment");
  const ExperimentSchema& sch = schema(name);

  int dim = 1;
  if (sch.needs_model) {
    if (!cfg.contains("model")) throw ConfigError("model", "missing required key");
    Json& m = cfg["model"];
    check_keys(m, "model", {"name", "rho", "sigma", "theta", "noise"});
    const std::string model_name = text(cfg, "model.name");
    if (model_name == "ar1" || model_name == "tanh1") {
      if (m.contains("theta")) throw ConfigError("model.theta", "only rotcon2 takes theta");
      set_default(m, "rho", 0.5);
      set_default(m, "sigma", 1.0);
    } else if (model_name == "rotcon2") {
      set_default(m, "rho", 0.5);
      set_default(m, "theta", 0.7);
      set_default(m, "sigma", 1.0);
      dim = 2;
    } else {
      throw ConfigError("model.name", "unknown model '" + model_name + "' (ar1, tanh1, rotcon2)");
    }
    for (const char* key : {"rho", "sigma", "theta"})
      if (m.contains(key)) number(cfg, std::string("model.") + key);
    if (std::abs(number(cfg, "model.rho")) >= 1.0) throw ConfigError("model.rho", "|rho| must be < 1");
    if (number(cfg, "model.sigma") < 0.0) throw ConfigError("model.sigma", "sigma must be nonnegative");
    if (m.contains("noise")) {
      Json& nz = m["noise"];
      check_keys(nz, "model.noise", {"kind", "lo", "hi", "values", "probs"});
      const std::string kind = text(cfg, "model.noise.kind");
      if (kind == "gaussian") {
        check_keys(nz, "model.noise", {"kind"});
      } else if (kind == "uniform") {
        check_keys(nz, "model.noise", {"kind", "lo", "hi"});
        if (number(cfg, "model.noise.lo") >= number(cfg, "model.noise.hi"))
          throw ConfigError("model.noise.hi", "must exceed lo");
      } else if (kind == "tabulated") {
        check_keys(nz, "model.noise", {"kind", "values", "probs"});
        const auto vals = number_list(at(cfg, "model.noise.values"), "model.noise.values");
        const auto probs = number_list(at(cfg, "model.noise.probs"), "model.noise.probs");
        if (vals.size() != probs.size()) throw ConfigError("model.noise.probs", "length differs from values");
      } else {
        throw ConfigError("model.noise.kind", "expected gaussian, uniform or tabulated");
      }
    }
  } else if (cfg.contains("model")) {
    throw ConfigError("model", "experiment '" + name + "' takes no model");
  }

  Json& w = cfg["weight"];
  if (w.is_null()) w = Json::object();
  check_keys(w, "weight", {"V", "eta"});
  set_default(w, "V", default_weight(dim));
  set_default(w, "eta", 1.0);
  expression(cfg, "weight.V", dim);
  const double eta = number(cfg, "weight.eta");
  if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("weight.eta", "must lie in (0, 1]");

  if (sch.needs_grid) {
    Json& g = cfg["grid"];
    if (g.is_null()) g = Json::object();
    check_keys(g, "grid", {"lo", "hi", "points"});
    set_default(g, "lo", -8.0);
    set_default(g, "hi", 8.0);
    set_default(g, "points", dim == 1 ? 401 : 61);
    if (number(cfg, "grid.lo") >= number(cfg, "grid.hi")) throw ConfigError("grid.hi", "must exceed grid.lo");
    if (integer(cfg, "grid.points") < 3) throw ConfigError("grid.points", "need at least 3 points");
  } else if (cfg.contains("grid")) {
    throw ConfigError("grid", "experiment '" + name + "' takes no grid");
  }

  if (sch.stochastic) {
    Json& mc = cfg["mc"];
    if (mc.is_null()) mc = Json::object();
    check_keys(mc, "mc", {"n", "reps", "seed"});
    if (sch.needs_seed && !mc.contains("seed")) throw ConfigError("mc.seed", "missing required key");
    seed_value(cfg, "mc.seed");
    if (name == "gradcheck") {
      if (mc.contains("reps")) throw ConfigError("mc.reps", "gradcheck uses mc.n");
      set_default(mc, "n", 100000);
      if (integer(cfg, "mc.n") < 2) throw ConfigError("mc.n", "need at least 2 samples");
    } else {
      if (mc.contains("n")) throw ConfigError("mc.n", name + " uses mc.reps");
      set_default(mc, "reps", name == "lyapunov" ? 100 : 2000);
      if (integer(cfg, "mc.reps") < 1) throw ConfigError("mc.reps", "need at least 1 replication");
    }
  } else if (cfg.contains("mc")) {
    throw ConfigError("mc", "experiment '" + name + "' is deterministic and takes no mc section");
  }

  for (const char* key : {"params", "tolerances"})
    if (!cfg.contains(key) || cfg[key].is_null()) cfg[key] = Json::object();
  Json& p = cfg["params"];
  Json& tol = cfg["tolerances"];
  check_keys(p, "params", sch.params);

  const std::string x_default = dim == 1 ? "x" : "x1";
  if (name == "gradcheck") {
    set_default(p, "f", "x2");
    set_default(p, "x", dim == 1 ? Json(1.0) : Json::array({1.0, -0.5}));
    set_default(p, "t", 1);
    set_default(p, "fd_step", 1e-4);
    if (point(at(cfg, "params.x"), "params.x").size() != dim)
      throw ConfigError("params.x", "dimension differs from the model state");
    if (integer(cfg, "params.t") < 0) throw ConfigError("params.t", "must be nonnegative");
    if (number(cfg, "params.fd_step") < 1e-8) throw ConfigError("params.fd_step", "must be >= 1e-8");
    check_keys(tol, "tolerances", {});
  } else if (name == "poisson" || name == "discounted") {
    set_default(p, "cost", x_default);
    set_default(p, "mode", "auto");
    set_default(p, "tmax", 0);
    set_default(p, "tol", 1e-10);
    if (name == "discounted") {
      set_default(p, "alpha", 0.9);
      const double a = number(cfg, "params.alpha");
      if (!(a >= 0.0 && a < 1.0)) throw ConfigError("params.alpha", "must lie in [0, 1)");
    }
    const std::string mode = text(cfg, "params.mode");
    if (mode != "auto" && mode != "series" && mode != "linear")
      throw ConfigError("params.mode", "expected auto, series or linear");
    if (integer(cfg, "params.tmax") < 0) throw ConfigError("params.tmax", "must be nonnegative");
    if (number(cfg, "params.tol") <= 0.0) throw ConfigError("params.tol", "must be positive");
    check_keys(tol, "tolerances", {"residual"});
    set_default(tol, "residual", 1e-6);
    number(cfg, "tolerances.residual");
  } else if (name == "decay") {
    set_default(p, "cost", x_default);
    set_default(p, "tmax", 30);
    if (integer(cfg, "params.tmax") < 2) throw ConfigError("params.tmax", "need at least 2 steps for a fit");
    check_keys(tol, "tolerances", {});
  } else if (name == "spectrum") {
    set_default(p, "top", 6);
    if (integer(cfg, "params.top") < 1) throw ConfigError("params.top", "must be >= 1");
    if (p.contains("export_matrix")) text(cfg, "params.export_matrix");
    check_keys(tol, "tolerances", {"agreement"});
    set_default(tol, "agreement", 0.02);
    number(cfg, "tolerances.agreement");
  } else if (name == "drift") {
    set_default(p, "V", default_weight(dim));
    set_default(p, "W", dim == 1 ? "1+x^2" : "1+x1^2+x2^2");
    set_default(p, "delta", 0.05);
    set_default(p, "eta", Json::array({1.0}));
    if (!at(cfg, "params.eta").is_array()) p["eta"] = Json::array({p["eta"]});
    expression(cfg, "params.V", dim);
    expression(cfg, "params.W", dim);
    if (number(cfg, "params.delta") <= 0.0) throw ConfigError("params.delta", "must be positive");
    for (double e : number_list(at(cfg, "params.eta"), "params.eta"))
      if (!(e > 0.0 && e <= 1.0)) throw ConfigError("params.eta", "every eta must lie in (0, 1]");
    if (p.contains("b") && number(cfg, "params.b") < 0.0) throw ConfigError("params.b", "must be nonnegative");
    if (p.contains("c_radius") && number(cfg, "params.c_radius") < 0.0)
      throw ConfigError("params.c_radius", "must be nonnegative");
    check_keys(tol, "tolerances", {});
  } else if (name == "lyapunov" || name == "contraction") {
    if (!p.contains("x0")) {
      Json pts = Json::array();
      if (name == "contraction") {
        for (int i = -3; i <= 3; ++i) pts.push_back(dim == 1 ? Json(double(i)) : Json::array({double(i), 0.0}));
      } else {
        pts.push_back(dim == 1 ? Json(1.0) : Json::array({1.0, 0.0}));
      }
      p["x0"] = pts;
    }
    for (const Vec& x : point_list(at(cfg, "params.x0"), "params.x0"))
      if (x.size() != dim) throw ConfigError("params.x0", "dimension differs from the model state");
    set_default(p, "norm", "spectral");
    const std::string norm = text(cfg, "params.norm");
    if (norm != "spectral" && norm != "frobenius" && norm != "infinity")
      throw ConfigError("params.norm", "expected spectral, frobenius or infinity");
    if (name == "lyapunov") {
      set_default(p, "horizon", 200);
      if (integer(cfg, "params.horizon") < 1) throw ConfigError("params.horizon", "must be >= 1");
      if (p.contains("p") && number(cfg, "params.p") <= 0.0) throw ConfigError("params.p", "must be positive");
    } else {
      set_default(p, "t0", 5);
      set_default(p, "rho_exp", 1.0);
      if (integer(cfg, "params.t0") < 0) throw ConfigError("params.t0", "must be nonnegative");
      const double r = number(cfg, "params.rho_exp");
      if (!(r > 0.0 && r <= 1.0)) throw ConfigError("params.rho_exp", "must lie in (0, 1]");
    }
    check_keys(tol, "tolerances", {});
  } else if (name == "bernstein") {
    set_default(p, "f", "z2");
    set_default(p, "m", 10);
    set_default(p, "lo", Json::array({0.0}));
    set_default(p, "hi", Json::array({1.0}));
    set_default(p, "probes", 10001);
    const Vec lo = point(at(cfg, "params.lo"), "params.lo"), hi = point(at(cfg, "params.hi"), "params.hi");
    if (lo.size() != hi.size()) throw ConfigError("params.hi", "dimension differs from params.lo");
    if (lo.size() > 4) throw ConfigError("params.lo", "at most 4 dimensions");
    if (((hi - lo).array() <= 0.0).any()) throw ConfigError("params.hi", "must exceed lo in every coordinate");
    if (integer(cfg, "params.m") < 1) throw ConfigError("params.m", "degree must be >= 1");
    if (integer(cfg, "params.probes") < 2) throw ConfigError("params.probes", "need at least 2 probes");
    check_keys(tol, "tolerances", {});
  } else if (name == "truncation") {
    set_default(p, "levels", Json::array({1, 2, 3, 4, 5, 6, 7}));
    set_default(p, "cutoff_probes", 10000);
    for (double n : number_list(at(cfg, "params.levels"), "params.levels"))
      if (n < 0 || std::floor(n) != n) throw ConfigError("params.levels", "levels must be nonnegative integers");
    if (integer(cfg, "params.cutoff_probes") < 1) throw ConfigError("params.cutoff_probes", "must be >= 1");
    check_keys(tol, "tolerances", {});
  }

  Json& out = cfg["output"];
  if (out.is_null()) out = Json::object();
  check_keys(out, "output", {"path", "format"});
  set_default(out, "format", sch.format);
  const std::string format = text(cfg, "output.format");
  if (format != "csv" && format != "json") throw ConfigError("output.format", "expected csv or json");
  if (out.contains("path")) text(cfg, "output.path");

  // canonical key order makes the embedded config independent of input order
  Json ordered;
  for (const char* key : {"experiment", "model", "weight", "grid", "mc", "params", "tolerances", "output"})
    if (cfg.contains(key)) ordered[key] = cfg[key];
  return ordered;
}

/// The part of a resolved config embedded in artifacts: everything except the
/// output path, so an artifact does not depend on where it was written.
inline Json embedded_config(const Json& resolved) {
  Json c = resolved;
  if (c.contains("output")) c["output"].erase("path");
  return c;
}

inline ModelSpec model_from_config(const Json& cfg) {
  using namespace config_detail;
  const std::string name = text(cfg, "model.name");
  const double rho = number(cfg, "model.rho"), sigma = number(cfg, "model.sigma");
  ModelSpec m = name == "ar1"     ? ar1(rho, sigma)
                : name == "tanh1" ? tanh1(rho, sigma)
                                  : rotcon2(rho, number(cfg, "model.theta"), sigma);
  if (has(cfg, "model.noise")) {
    const std::string kind = text(cfg, "model.noise.kind");
    if (kind == "uniform") {
      m = with_noise(m, NoiseLaw::uniform(number(cfg, "model.noise.lo"), number(cfg, "model.noise.hi")));
    } else if (kind == "tabulated") {
      try {
        m = with_noise(m, NoiseLaw::tabulated(number_list(at(cfg, "model.noise.values"), "model.noise.values"),
                                              number_list(at(cfg, "model.noise.probs"), "model.noise.probs")));
      } catch (const ContractViolation& e) {
        throw ConfigError("model.noise.probs", e.what());
      }
    }
  }
  return m;
}

inline WeightFunction weight_from_config(const Json& cfg, int dim) {
  const Expression e = config_detail::expression(cfg, "weight.V", dim);
  return {[e](const Vec& x) { return e(x); }, [e](const Vec& x) { return e.grad(x); },
          config_detail::number(cfg, "weight.eta"), e.text()};
}

/// Builtin test functions by name (x, x2, tanh), otherwise an expression
/// whose growth is treated as quadratic.
inline TestFunction test_function_from(const Json& cfg, const std::string& path, int dim) {
  const std::string name = config_detail::text(cfg, path);
  if (name == "x") return test_functions::linear();
  if (name == "x2") return test_functions::square();
  if (name == "tanh") return test_functions::tanh_sum();
  const Expression e = config_detail::expression(cfg, path, dim);
  return {[e](const Vec& x) { return e(x); }, [e](const Vec& x) { return e.grad(x); }, Growth::quadratic,
          e.text()};
}

namespace config_detail {

/// CSV artifact: the embedded config on the first line, a header, rows and
/// `# key=value` footer lines.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::pair<std::string, std::string>> footer;

  std::string render(const Json& config) const {
    std::ostringstream os;
    os << "# config: " << config.dump() << "\n";
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << "\n";
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
      os << "\n";
    }
    for (const auto& [k, v] : footer) os << "# " << k << "=" << v << "\n";
    return os.str();
  }
};

inline Json vec_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

/// Numbers that are not representable in JSON (inf, nan) become strings.
inline Json num(double x) {
  if (std::isfinite(x)) return x;
  return fmt(x);
}

inline MatrixNorm norm_from(const std::string& s) {
  if (s == "frobenius") return MatrixNorm::frobenius;
  if (s == "infinity") return MatrixNorm::infinity;
  return MatrixNorm::spectral;
}

inline GridSpec grid_spec(const Json& cfg) {
  return {number(cfg, "grid.lo"), number(cfg, "grid.hi"), static_cast<int>(integer(cfg, "grid.points")), 1};
}

inline Vec cost_on(const Json& cfg, const Grid& g) {
  const TestFunction c = test_function_from(cfg, "params.cost", g.dim());
  Vec out(g.size());
  for (int k = 0; k < g.size(); ++k) out(k) = c(g.node(k));
  return out;
}

inline std::vector<std::string> node_header(int dim) {
  if (dim == 1) return {"x"};
  return {"x1", "x2"};
}

inline void push_node(std::vector<std::string>& row, const Vec& x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) row.push_back(fmt(x(i)));
}

inline SolveMode solve_mode(const Json& cfg) {
  const std::string mode = text(cfg, "params.mode");
  const double tol = number(cfg, "params.tol");
  if (mode == "series") return SolveMode::series(integer(cfg, "params.tmax"), tol);
  if (mode == "linear") return SolveMode::linear();
  return {SolveMode::Kind::automatic, integer(cfg, "params.tmax"), tol};
}

inline std::string render(const Json& cfg, const Json& result, const CsvTable& table) {
  if (text(cfg, "output.format") == "csv") return table.render(embedded_config(cfg));
  Json doc;
  doc["config"] = embedded_config(cfg);
  doc["result"] = result;
  return doc.dump(2) + "\n";
}

inline ExperimentOutput run_gradcheck(const Json& cfg) {
  const ModelSpec model = model_from_config(cfg);
  const TestFunction f = test_function_from(cfg, "params.f", model.dim_state);
  const Vec x = point(at(cfg, "params.x"), "params.x");
  const GradientCheckReport r =
      gradient_identity_check(model, f, x, integer(cfg, "params.t"), integer(cfg, "mc.n"),
                              number(cfg, "params.fd_step"), seed_value(cfg, "mc.seed"));
  ExperimentOutput out;
  if (text(cfg, "weight.V").find('x') == std::string::npos && f.growth != Growth::bounded)
    out.warnings.push_back("test function '" + f.name + "' has " + to_string(f.growth) +
                           " growth but the weight is constant; the identity is not claimed here");
  Json res;
  res["estimate_pathwise"] = vec_json(r.pathwise.value);
  res["pathwise_se"] = vec_json(r.pathwise.std_error);
  res["estimate_fd"] = vec_json(r.fd.value);
  res["fd_se"] = vec_json(r.fd.std_error);
  res["pooled_se"] = vec_json(r.pooled_se);
  res["fd_allowance"] = vec_json(r.fd_allowance);
  res["discrepancy"] = vec_json(r.discrepancy);
  res["tolerance"] = vec_json(r.tolerance);
  res["pass"] = r.pass;
  CsvTable t;
  t.header = {"component", "pathwise", "pathwise_se", "fd", "fd_se", "pooled_se", "fd_allowance", "tolerance"};
  for (Eigen::Index i = 0; i < x.size(); ++i)
    t.rows.push_back({std::to_string(i), fmt(r.pathwise.value(i)), fmt(r.pathwise.std_error(i)), fmt(r.fd.value(i)),
                      fmt(r.fd.std_error(i)), fmt(r.pooled_se(i)), fmt(r.fd_allowance(i)), fmt(r.tolerance(i))});
  t.footer = {{"pass", r.pass ? "true" : "false"}};
  out.text = render(cfg, res, t);
  out.check_pass = r.pass;
  out.summary = std::string("gradcheck ") + (r.pass ? "passed" : "FAILED") + ": max discrepancy " +
                fmt(r.discrepancy.cwiseAbs().maxCoeff()) + " vs tolerance " + fmt(r.tolerance.minCoeff());
  return out;
}

inline ExperimentOutput run_value(const Json& cfg, bool discounted) {
  const ModelSpec model = model_from_config(cfg);
  const GridKernel k = discretize(model, grid_spec(cfg));
  const Grid& g = *k.grid;
  const WeightFunction v = weight_from_config(cfg, g.dim());
  const Vec c = cost_on(cfg, g);
  const SolveMode mode = solve_mode(cfg);
  const double alpha = discounted ? number(cfg, "params.alpha") : 0.0;
  const ValueSolution sol = discounted ? discounted_solve(k, c, alpha, v, mode) : poisson_solve(k, c, v, mode);
  const Vec resid = discounted ? Vec(c + alpha * (k.matrix * sol.h) - sol.h)
                               : Vec(sol.h - k.matrix * sol.h - (c.array() - sol.mean_c).matrix());
  const double tol = number(cfg, "tolerances.residual");

  CsvTable t;
  t.header = node_header(g.dim());
  t.header.push_back("h");
  t.header.push_back("residual");
  Json res;
  Json nodes = Json::array(), hs = Json::array(), rs = Json::array();
  for (int i = 0; i < g.size(); ++i) {
    std::vector<std::string> row;
    push_node(row, g.node(i));
    row.push_back(fmt(sol.h(i)));
    row.push_back(fmt(resid(i)));
    t.rows.push_back(std::move(row));
    nodes.push_back(g.dim() == 1 ? Json(g.node(i)(0)) : vec_json(g.node(i)));
    hs.push_back(sol.h(i));
    rs.push_back(resid(i));
  }
  t.footer.push_back({"mean_c", fmt(sol.mean_c)});
  t.footer.push_back({"residual_vnorm", fmt(sol.residual_vnorm)});
  t.footer.push_back({"pi_h", fmt(sol.pi_h)});
  t.footer.push_back({"truncation_t", sol.truncation_t ? std::to_string(*sol.truncation_t) : "none"});
  t.footer.push_back({"stationary_leak", fmt(k.stationary_leak)});
  res["mean_c"] = sol.mean_c;
  res["residual_vnorm"] = sol.residual_vnorm;
  res["pi_h"] = sol.pi_h;
  res["truncation_t"] = sol.truncation_t ? Json(*sol.truncation_t) : Json(nullptr);
  res["stationary_leak"] = k.stationary_leak;
  ExperimentOutput out;
  if (!discounted) {
    const CltVariance cv = clt_variance(k, sol);
    if (cv.clipped) out.warnings.push_back("CLT variance estimate was negative (" + fmt(cv.raw) + ") and clipped to 0");
    t.footer.push_back({"clt_variance", fmt(cv.sigma2)});
    res["clt_variance"] = cv.sigma2;
  }
  res["nodes"] = nodes;
  res["h"] = hs;
  res["residual"] = rs;
  out.check_pass = sol.residual_vnorm <= tol;
  t.footer.push_back({"pass", out.check_pass ? "true" : "false"});
  res["pass"] = out.check_pass;
  out.text = render(cfg, res, t);
  out.summary = std::string(discounted ? "discounted" : "poisson") + " solve: residual v-norm " +
                fmt(sol.residual_vnorm) + (out.check_pass ? " (ok)" : " exceeds tolerance " + fmt(tol));
  return out;
}

inline ExperimentOutput run_decay(const Json& cfg) {
  const ModelSpec model = model_from_config(cfg);
  const GridKernel k = discretize(model, grid_spec(cfg));
  const Grid& g = *k.grid;
  const Vec vw = weight_on(g, weight_from_config(cfg, g.dim()));
  const GridKernel centered = center_kernel(k);
  const long tmax = integer(cfg, "params.tmax");
  Vec term = cost_on(cfg, g);
  std::vector<std::pair<double, double>> s_v, s_v1;
  CsvTable t;
  t.header = {"t", "vnorm", "v1norm"};
  Json rows = Json::array();
  for (long step = 0; step <= tmax; ++step) {
    std::vector<Vec> d;
    for (int a = 0; a < g.dim(); ++a) d.push_back(grid_derivative(g, term, a));
    const double nv = v_norm(term, vw), nv1 = sobolev_norm_v1(term, d, vw);
    if (step > 0) {
      // step 0 carries the uncentered cost, so fits start at t = 1
      if (nv > 0.0) s_v.emplace_back(step, nv);
      if (nv1 > 0.0) s_v1.emplace_back(step, nv1);
    }
    t.rows.push_back({std::to_string(step), fmt(nv), fmt(nv1)});
    rows.push_back({{"t", step}, {"vnorm", nv}, {"v1norm", nv1}});
    term = centered.matrix * term;
  }
  const DecayFit fv = decay_rate_fit(s_v), fv1 = decay_rate_fit(s_v1);
  t.footer = {{"b0", fmt(fv.b0)},       {"rho0", fmt(fv.rho0)},       {"r_squared", fmt(fv.r_squared)},
              {"b0_v1", fmt(fv1.b0)}, {"rho0_v1", fmt(fv1.rho0)}, {"r_squared_v1", fmt(fv1.r_squared)}};
  Json res;
  res["series"] = rows;
  res["fit_v"] = {{"b0", fv.b0}, {"rho0", fv.rho0}, {"r_squared", fv.r_squared}};
  res["fit_v1"] = {{"b0", fv1.b0}, {"rho0", fv1.rho0}, {"r_squared", fv1.r_squared}};
  ExperimentOutput out;
  out.check_pass = fv.rho0 < 1.0 && fv1.rho0 < 1.0;
  out.text = render(cfg, res, t);
  out.summary = "decay fit: rho0 = " + fmt(fv.rho0) + " (R^2 " + fmt(fv.r_squared) + "), (v,1) rho0 = " + fmt(fv1.rho0);
  return out;
}

inline Json complex_json(std::complex<double> z) { return Json::array({z.real(), z.imag()}); }

inline ExperimentOutput run_spectrum(const Json& cfg) {
  const ModelSpec model = model_from_config(cfg);
  const GridKernel k = discretize(model, grid_spec(cfg));
  const Grid& g = *k.grid;
  const Vec vw = weight_on(g, weight_from_config(cfg, g.dim()));
  const int top = static_cast<int>(integer(cfg, "params.top"));
  auto ev = eigenvalues_by_modulus(k.matrix);
  ev.resize(std::min<std::size_t>(ev.size(), top));
  const SpectrumReport centered = spectrum_and_radius(center_kernel(k).matrix, vw, top);
  if (has(cfg, "params.export_matrix")) {
    std::ofstream os(text(cfg, "params.export_matrix"));
    if (!os) throw ConfigError("params.export_matrix", "cannot open file for writing");
    for (int i = 0; i < k.size(); ++i) {
      for (int j = 0; j < k.size(); ++j) os << (j ? "," : "") << fmt(k.matrix(i, j));
      os << "\n";
    }
  }
  Json res;
  Json e = Json::array(), ce = Json::array(), xp = Json::object();
  for (auto z : ev) e.push_back(complex_json(z));
  for (auto z : centered.eigenvalues) ce.push_back(complex_json(z));
  for (auto [n, x] : centered.xi_power) xp[std::to_string(n)] = x;
  res["eigenvalues"] = e;
  res["centered_eigenvalues"] = ce;
  res["xi_eigen"] = centered.xi_eigen;
  res["xi_power"] = xp;
  res["agreement"] = centered.agreement;
  CsvTable t;
  t.header = {"kernel", "index", "re", "im", "modulus"};
  for (std::size_t i = 0; i < ev.size(); ++i)
    t.rows.push_back({"P", std::to_string(i), fmt(ev[i].real()), fmt(ev[i].imag()), fmt(std::abs(ev[i]))});
  for (std::size_t i = 0; i < centered.eigenvalues.size(); ++i) {
    const auto z = centered.eigenvalues[i];
    t.rows.push_back({"centered", std::to_string(i), fmt(z.real()), fmt(z.imag()), fmt(std::abs(z))});
  }
  t.footer.push_back({"xi_eigen", fmt(centered.xi_eigen)});
  for (auto [n, x] : centered.xi_power) t.footer.push_back({"xi_power_" + std::to_string(n), fmt(x)});
  t.footer.push_back({"agreement", fmt(centered.agreement)});
  ExperimentOutput out;
  out.check_pass = centered.agreement <= number(cfg, "tolerances.agreement");
  res["pass"] = out.check_pass;
  t.footer.push_back({"pass", out.check_pass ? "true" : "false"});
  out.text = render(cfg, res, t);
  out.summary = "spectral radius of the centered kernel " + fmt(centered.xi_eigen) + ", power estimate " +
                fmt(centered.xi_power.rbegin()->second);
  return out;
}

inline ExperimentOutput run_drift(const Json& cfg) {
  const ModelSpec model = model_from_config(cfg);
  GridSpec gs = grid_spec(cfg);
  gs.dim = model.dim_state;
  const GridPtr grid = Grid::make(gs);
  const Expression ve = expression(cfg, "params.V", model.dim_state);
  const Expression we = expression(cfg, "params.W", model.dim_state);
  DV3Spec spec{[ve](const Vec& x) { return ve(x); }, [we](const Vec& x) { return we(x); },
               number(cfg, "params.delta"), std::nullopt, std::nullopt};
  if (has(cfg, "params.b")) spec.b = number(cfg, "params.b");
  if (has(cfg, "params.c_radius")) spec.c_radius = number(cfg, "params.c_radius");
  const DV3Report rep = dv3_check(model, spec, grid, number_list(at(cfg, "params.eta"), "params.eta"));
  const DV3EtaResult& base = rep.per_eta.front();
  Json res;
  res["max_violation"] = base.max_violation;
  res["min_b"] = base.min_b;
  res["min_C_radius"] = base.min_c_radius;
  res["b_used"] = rep.b_used;
  res["C_radius_used"] = rep.c_radius_used;
  res["pass"] = rep.pass;
  Json per = Json::array();
  CsvTable t;
  t.header = {"eta", "max_violation", "min_b", "min_C_radius", "feasible", "pass"};
  for (const auto& r : rep.per_eta) {
    per.push_back({{"eta", r.eta},
                   {"max_violation", r.max_violation},
                   {"min_b", r.min_b},
                   {"min_C_radius", r.min_c_radius},
                   {"feasible", r.feasible},
                   {"pass", r.pass}});
    t.rows.push_back({fmt(r.eta), fmt(r.max_violation), fmt(r.min_b), fmt(r.min_c_radius),
                      r.feasible ? "true" : "false", r.pass ? "true" : "false"});
  }
  res["per_eta"] = per;
  t.footer = {{"b_used", fmt(rep.b_used)}, {"C_radius_used", fmt(rep.c_radius_used)}, {"pass", rep.pass ? "true" : "false"}};
  ExperimentOutput out;
  out.check_pass = rep.pass;
  out.text = render(cfg, res, t);
  out.summary = std::string("drift condition ") + (rep.pass ? "holds" : "FAILS") + ": min C radius " +
                fmt(base.min_c_radius) + ", min b " + fmt(base.min_b);
  return out;
}

inline ExperimentOutput run_lyapunov(const Json& cfg) {
  const ModelSpec model = model_from_config(cfg);
  const auto pts = point_list(at(cfg, "params.x0"), "params.x0");
  const long horizon = integer(cfg, "params.horizon"), reps = integer(cfg, "mc.reps");
  const std::uint64_t seed = seed_value(cfg, "mc.seed");
  const MatrixNorm norm = norm_from(text(cfg, "params.norm"));
  CsvTable t;
  t.header = {"x0", "estimate", "std_error", "T", "reps", "seed", "exponent"};
  Json rows = Json::array();
  auto add = [&](const Vec& x0, const ExponentEstimate& e, const std::string& kind) {
    t.rows.push_back({join_point(x0), fmt(e.value), fmt(e.std_error), std::to_string(e.horizon),
                      std::to_string(e.replications), std::to_string(seed), kind});
    rows.push_back({{"x0", vec_json(x0)}, {"exponent", kind}, {"estimate", num(e.value)},
                    {"std_error", num(e.std_error)}});
  };
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const std::uint64_t ps = point_seed(seed, i);
    add(pts[i], lyapunov_exponent(model, pts[i], horizon, reps, ps, norm), "top");
    if (has(cfg, "params.p")) {
      const double p = number(cfg, "params.p");
      add(pts[i], mean_exponent(model, pts[i], horizon, p, reps, ps, norm), "mean_p=" + fmt(p));
    }
  }
  t.footer = {{"norm", to_string(norm)}};
  Json res;
  res["rows"] = rows;
  res["norm"] = to_string(norm);
  ExperimentOutput out;
  out.text = render(cfg, res, t);
  out.summary = "lyapunov exponent at x0=" + join_point(pts.front()) + ": " + t.rows.front()[1];
  return out;
}

inline ExperimentOutput run_contraction(const Json& cfg) {
  const ModelSpec model = model_from_config(cfg);
  const auto pts = point_list(at(cfg, "params.x0"), "params.x0");
  const std::uint64_t seed = seed_value(cfg, "mc.seed");
  const MatrixNorm norm = norm_from(text(cfg, "params.norm"));
  const ContractionReport rep =
      contraction_diagnostic(model, pts, integer(cfg, "params.t0"), integer(cfg, "mc.reps"),
                             weight_from_config(cfg, model.dim_state), number(cfg, "params.rho_exp"), seed, norm);
  CsvTable t;
  t.header = {"x0", "estimate", "std_error", "T", "reps", "seed"};
  Json rows = Json::array();
  for (const auto& r : rep.rows) {
    t.rows.push_back({join_point(r.x0), fmt(r.ratio), fmt(r.ratio_se), std::to_string(rep.t0),
                      std::to_string(rep.reps), std::to_string(seed)});
    rows.push_back({{"x0", vec_json(r.x0)}, {"lhs", num(r.lhs)}, {"lhs_se", num(r.lhs_se)},
                    {"ratio", num(r.ratio)}, {"ratio_se", num(r.ratio_se)}});
  }
  t.footer = {{"k", fmt(rep.k)}, {"k_se", fmt(rep.k_se)}, {"norm", to_string(norm)}};
  Json res;
  res["rows"] = rows;
  res["k"] = num(rep.k);
  res["k_se"] = num(rep.k_se);
  ExperimentOutput out;
  out.check_pass = std::isfinite(rep.k);
  out.text = render(cfg, res, t);
  out.summary = "contraction constant k = " + fmt(rep.k) + " +/- " + fmt(rep.k_se);
  return out;
}

inline ExperimentOutput run_bernstein(const Json& cfg) {
  const Vec lo = point(at(cfg, "params.lo"), "params.lo"), hi = point(at(cfg, "params.hi"), "params.hi");
  const int n = static_cast<int>(lo.size());
  const std::string name = text(cfg, "params.f");
  std::function<double(const Vec&)> phi;
  std::function<Vec(const Vec&)> grad;
  if (name == "z2") {
    phi = [](const Vec& z) { return z.squaredNorm(); };
    grad = [](const Vec& z) -> Vec { return 2.0 * z; };
  } else if (name == "sin") {
    phi = [](const Vec& z) {
      double p = 1.0;
      for (Eigen::Index i = 0; i < z.size(); ++i) p *= std::sin(std::numbers::pi * z(i));
      return p;
    };
    grad = [](const Vec& z) -> Vec {
      Vec g(z.size());
      for (Eigen::Index i = 0; i < z.size(); ++i) {
        double p = std::numbers::pi * std::cos(std::numbers::pi * z(i));
        for (Eigen::Index j = 0; j < z.size(); ++j)
          if (j != i) p *= std::sin(std::numbers::pi * z(j));
        g(i) = p;
      }
      return g;
    };
  } else {
    const Expression e = expression(cfg, "params.f", n);
    phi = [e](const Vec& z) { return e(z); };
    grad = [e](const Vec& z) { return e.grad(z); };
  }
  const BernsteinErrors err =
      uniform_errors(phi, grad, lo, hi, static_cast<int>(integer(cfg, "params.m")), integer(cfg, "params.probes"));
  Json res;
  res["sup_val_err"] = err.sup_val_err;
  res["sup_grad_err"] = err.sup_grad_err;
  res["probes"] = err.probes;
  CsvTable t;
  t.header = {"m", "sup_val_err", "sup_grad_err", "probes"};
  t.rows.push_back({std::to_string(integer(cfg, "params.m")), fmt(err.sup_val_err), fmt(err.sup_grad_err),
                    std::to_string(err.probes)});
  ExperimentOutput out;
  out.text = render(cfg, res, t);
  out.summary = "bernstein m=" + std::to_string(integer(cfg, "params.m")) + ": sup value error " +
                fmt(err.sup_val_err) + ", sup gradient error " + fmt(err.sup_grad_err);
  return out;
}

inline ExperimentOutput run_truncation(const Json& cfg) {
  const ModelSpec model = model_from_config(cfg);
  const GridKernel k = discretize(model, grid_spec(cfg));
  const WeightFunction v = weight_from_config(cfg, k.grid->dim());
  CsvTable t;
  t.header = {"n", "err_v", "err_v1"};
  Json rows = Json::array();
  double prev = std::numeric_limits<double>::infinity(), max_slope = 0.0;
  bool decreasing = true;
  const long probes = integer(cfg, "params.cutoff_probes");
  for (double level : number_list(at(cfg, "params.levels"), "params.levels")) {
    const int n = static_cast<int>(level);
    const TruncationError e = truncation_error(k, n, n, v);
    decreasing = decreasing && e.err_v1 < prev;
    prev = e.err_v1;
    t.rows.push_back({std::to_string(n), fmt(e.err_v), fmt(e.err_v1)});
    rows.push_back({{"n", n}, {"err_v", e.err_v}, {"err_v1", e.err_v1}});
    const CutoffFunction chi(n);
    for (long j = 0; j < probes; ++j) {
      const double r = (n + 1.5) * (2.0 * j / std::max(1L, probes - 1) - 1.0);
      max_slope = std::max(max_slope, std::abs(chi.profile_derivative(r)));
    }
  }
  t.footer = {{"strictly_decreasing", decreasing ? "true" : "false"}, {"max_cutoff_derivative", fmt(max_slope)}};
  Json res;
  res["rows"] = rows;
  res["strictly_decreasing"] = decreasing;
  res["max_cutoff_derivative"] = max_slope;
  ExperimentOutput out;
  out.check_pass = max_slope <= 2.0;
  out.text = render(cfg, res, t);
  out.summary = "truncation: last err_v1 " + fmt(prev) + ", max cutoff derivative " + fmt(max_slope);
  return out;
}

}  // namespace config_detail

/// Runs a resolved config and returns the artifact text.
inline ExperimentOutput run_experiment(const Json& resolved) {
  using namespace config_detail;
  const std::string name = text(resolved, "experiment");
  if (name == "gradcheck") return run_gradcheck(resolved);
  if (name == "poisson") return run_value(resolved, false);
  if (name == "discounted") return run_value(resolved, true);
  if (name == "decay") return run_decay(resolved);
  if (name == "spectrum") return run_spectrum(resolved);
  if (name == "drift") return run_drift(resolved);
  if (name == "lyapunov") return run_lyapunov(resolved);
  if (name == "contraction") return run_contraction(resolved);
  if (name == "bernstein") return run_bernstein(resolved);
  if (name == "truncation") return run_truncation(resolved);
  throw ConfigError("experiment", "unknown experiment '" + name + "'");
}

/// Recovers the embedded config of an artifact (CSV or JSON).
inline Json config_from_artifact(const std::string& content) {
  const std::string prefix = "# config: ";
  if (content.rfind(prefix, 0) == 0) {
    const std::size_t eol = content.find('\n');
    return Json::parse(content.substr(prefix.size(), eol - prefix.size()));
  }
  const Json doc = Json::parse(content);
  if (!doc.contains("config")) throw ConfigError("config", "artifact carries no embedded config");
  return doc["config"];
}

/// Sets a dotted key, creating intermediate objects.
inline void set_path(Json& cfg, const std::string& path, Json value) {
  Json* node = &cfg;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    Json& next = (*node)[key];
    if (!next.is_object()) next = Json::object();
    node = &next;
    start = dot + 1;
  }
}

}  // namespace ergokit
