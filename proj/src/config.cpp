#include "graphood/config.hpp"

#include <fstream>

#include <json.hpp>

#include "graphood/errors.hpp"

namespace graphood {

Method method_from_name(const std::string& name) {
  if (name == "msp") return Method::Msp;
  if (name == "energy") return Method::Energy;
  if (name == "energy-ft") return Method::EnergyFt;
  if (name == "gnnsafe") return Method::Gnnsafe;
  if (name == "gnnsafe-pp") return Method::GnnsafePp;
  if (name == "nodesafe") return Method::Nodesafe;
  if (name == "nodesafe-pp") return Method::NodesafePp;
  if (name == "logitnorm") return Method::Logitnorm;
  throw ConfigError("unknown method '" + name +
                    "' (expected msp|energy|energy-ft|gnnsafe|gnnsafe-pp|nodesafe|nodesafe-pp|"
                    "logitnorm)");
}

std::string method_name(Method m) {
  switch (m) {
    case Method::Msp: return "msp";
    case Method::Energy: return "energy";
    case Method::EnergyFt: return "energy-ft";
    case Method::Gnnsafe: return "gnnsafe";
    case Method::GnnsafePp: return "gnnsafe-pp";
    case Method::Nodesafe: return "nodesafe";
    case Method::NodesafePp: return "nodesafe-pp";
    case Method::Logitnorm: return "logitnorm";
  }
  return "?";
}

bool method_uses_exposure(Method m) {
  return m == Method::EnergyFt || m == Method::GnnsafePp || m == Method::NodesafePp;
}

bool method_uses_ub(Method m) { return m == Method::Nodesafe || m == Method::NodesafePp; }

bool method_uses_logitnorm(Method m) { return m == Method::Logitnorm; }

bool method_score_propagated(Method m) {
  switch (m) {
    case Method::Msp:
    case Method::Energy:
    case Method::EnergyFt:
      return false;
    default:
      return true;
  }
}

void RunConfig::validate() const {
  parsed_method();
  if (eta < 0.0 || eta > 1.0) throw ConfigError("eta must lie in [0,1]");
  if (hops < 0) throw ConfigError("hops must be nonnegative");
  if (lambda1 < 0.0 || lambda1 > 1.0) throw ConfigError("lambda1 must lie in [0,1]");
  if (lambda2 < 0.0) throw ConfigError("lambda2 must be nonnegative");
  if (alpha < 0.0) throw ConfigError("alpha must be nonnegative");
  if (tau <= 0.0) throw ConfigError("tau must be positive");
  if (lr <= 0.0) throw ConfigError("lr must be positive");
  if (epochs <= 0) throw ConfigError("epochs must be positive");
  if (hidden <= 0) throw ConfigError("hidden must be positive");
  if (ub_start_epoch < 0) throw ConfigError("ub_start_epoch must be nonnegative");
  if (method_uses_exposure(parsed_method()) && !exposure) {
    throw ConfigError("method '" + method + "' requires exposure=true");
  }
}

namespace {

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["method"] = c.method;
  j["eta"] = c.eta;
  j["hops"] = c.hops;
  j["lambda1"] = c.lambda1;
  j["lambda2"] = c.lambda2;
  j["alpha"] = c.alpha;
  j["m_in"] = c.m_in;
  j["m_out"] = c.m_out;
  j["tau"] = c.tau;
  j["lr"] = c.lr;
  j["epochs"] = c.epochs;
  j["hidden"] = c.hidden;
  j["seed"] = c.seed;
  j["ub_start_epoch"] = c.ub_start_epoch;
  j["ub_over_all_nodes"] = c.ub_over_all_nodes;
  j["reg_on_propagated"] = c.reg_on_propagated;
  j["exposure"] = c.exposure;
  return j;
}

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& field) {
  if (!j.contains(key)) return;
  try {
    field = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

RunConfig from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  static const char* known[] = {"method", "eta", "hops", "lambda1", "lambda2", "alpha",
                                "m_in", "m_out", "tau", "lr", "epochs", "hidden", "seed",
                                "ub_start_epoch", "ub_over_all_nodes", "reg_on_propagated",
                                "exposure"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) {
      if (it.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) throw ConfigError("unknown config key '" + it.key() + "'");
  }
  RunConfig c;
  read_key(j, "method", c.method);
  read_key(j, "eta", c.eta);
  read_key(j, "hops", c.hops);
  read_key(j, "lambda1", c.lambda1);
  read_key(j, "lambda2", c.lambda2);
  read_key(j, "alpha", c.alpha);
  read_key(j, "m_in", c.m_in);
  read_key(j, "m_out", c.m_out);
  read_key(j, "tau", c.tau);
  read_key(j, "lr", c.lr);
  read_key(j, "epochs", c.epochs);
  read_key(j, "hidden", c.hidden);
  read_key(j, "seed", c.seed);
  read_key(j, "ub_start_epoch", c.ub_start_epoch);
  read_key(j, "ub_over_all_nodes", c.ub_over_all_nodes);
  read_key(j, "reg_on_propagated", c.reg_on_propagated);
  read_key(j, "exposure", c.exposure);
  return c;
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return from_json(j);
}

std::string run_config_to_json(const RunConfig& cfg) { return to_json(cfg).dump(2); }

RunConfig run_config_from_json(const std::string& json_text) {
  try {
    return from_json(nlohmann::json::parse(json_text));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config JSON: ") + e.what());
  }
}

}  // namespace graphood
