#pragma once

#include <cstdint>
#include <string>

namespace graphood {

// Detector / objective variants selectable from the CLI. Each method fixes
// the loss composition and the score used at evaluation time:
//   msp         nll loss,   msp score
//   energy      nll loss,   raw negative energy
//   energy-ft   nll + hinge (needs exposure), raw negative energy
//   gnnsafe     nll loss,   propagated negative energy
//   gnnsafe-pp  nll + hinge (needs exposure), propagated
//   nodesafe    nll + lambda2 * (lambda1 * uniform + (1 - lambda1) * bound), propagated
//   nodesafe-pp nll + hinge + the variance terms (needs exposure), propagated
//   logitnorm   normalized-logit cross-entropy, propagated
enum class Method {
  Msp,
  Energy,
  EnergyFt,
  Gnnsafe,
  GnnsafePp,
  Nodesafe,
  NodesafePp,
  Logitnorm,
};

Method method_from_name(const std::string& name);  // throws ConfigError on unknown names
std::string method_name(Method m);

bool method_uses_exposure(Method m);   // hinge regularization on exposed OOD nodes
bool method_uses_ub(Method m);         // bound + uniform variance terms
bool method_uses_logitnorm(Method m);
bool method_score_propagated(Method m);

struct RunConfig {
  std::string method = "gnnsafe";
  double eta = 0.5;
  int hops = 2;
  double lambda1 = 0.001;
  double lambda2 = 1.0;
  double alpha = 0.01;
  double m_in = -5.0;
  double m_out = -1.0;
  double tau = 1.0;
  double lr = 0.01;
  int epochs = 200;
  int hidden = 64;
  std::uint64_t seed = 0;
  int ub_start_epoch = 50;
  bool ub_over_all_nodes = false;
  bool reg_on_propagated = true;
  bool exposure = false;

  Method parsed_method() const { return method_from_name(method); }
  void validate() const;  // throws ConfigError on out-of-range values
};

RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const std::string& json_text);

}  // namespace graphood
