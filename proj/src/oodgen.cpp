#include "graphood/oodgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include <json.hpp>

#include "graphood/errors.hpp"

namespace graphood {

void SbmConfig::validate() const {
  if (num_blocks <= 0 || nodes_per_block <= 0 || feature_dim <= 0) {
    throw ConfigError("sbm: counts must be positive");
  }
  if (!(0.0 <= p_out && p_out <= p_in && p_in <= 1.0)) {
    throw ConfigError("sbm: need 0 <= p_out <= p_in <= 1");
  }
  if (feature_noise < 0.0 || class_mean_scale < 0.0) {
    throw ConfigError("sbm: scales must be nonnegative");
  }
}

void OodSpec::validate() const {
  if (kind != "structure" && kind != "feature" && kind != "label-leave-out") {
    throw ConfigError("ood spec: kind must be structure|feature|label-leave-out");
  }
  if (kind != "label-leave-out" && (frac_ood <= 0.0 || frac_ood >= 1.0)) {
    throw ConfigError("ood spec: frac_ood must lie in (0,1)");
  }
  if (kind == "structure" && avg_degree < 0.0) {
    throw ConfigError("ood spec: avg_degree must be nonnegative");
  }
  if (kind == "feature" && (lambda_interp < 0.0 || lambda_interp > 1.0)) {
    throw ConfigError("ood spec: lambda_interp must lie in [0,1]");
  }
  if (kind == "label-leave-out" && held_out_classes.empty()) {
    throw ConfigError("ood spec: held_out_classes must be nonempty");
  }
  if (expose_frac < 0.0 || expose_frac > 1.0) {
    throw ConfigError("ood spec: expose_frac must lie in [0,1]");
  }
}

namespace {

// Splits the new OOD node list into test_ood / expose_ood roles.
void assign_ood_roles(GraphDataset& g, std::vector<int> ood_nodes, double expose_frac,
                      std::mt19937_64& rng) {
  std::shuffle(ood_nodes.begin(), ood_nodes.end(), rng);
  const long n_expose = std::lround(expose_frac * static_cast<double>(ood_nodes.size()));
  for (size_t i = 0; i < ood_nodes.size(); ++i) {
    const int v = ood_nodes[i];
    g.train_mask[v] = g.val_mask[v] = g.test_id_mask[v] = 0;
    if (static_cast<long>(i) < n_expose) {
      g.expose_ood_mask[v] = 1;
      g.test_ood_mask[v] = 0;
    } else {
      g.test_ood_mask[v] = 1;
      g.expose_ood_mask[v] = 0;
    }
  }
}

}  // namespace

GraphDataset generate_sbm(const SbmConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const int n = cfg.num_blocks * cfg.nodes_per_block;
  GraphDataset g;
  g.num_nodes = n;
  g.num_features = cfg.feature_dim;
  g.num_classes = cfg.num_blocks;
  g.labels.resize(n);
  for (int i = 0; i < n; ++i) g.labels[i] = i / cfg.nodes_per_block;

  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double p = (g.labels[i] == g.labels[j]) ? cfg.p_in : cfg.p_out;
      if (coin(rng) < p) edges.emplace_back(i, j);
    }
  }
  g.adjacency = adjacency_from_edges(n, edges);

  // class means: random unit vectors scaled by class_mean_scale
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix means(cfg.num_blocks, cfg.feature_dim);
  for (int c = 0; c < cfg.num_blocks; ++c) {
    double norm2 = 0.0;
    for (int j = 0; j < cfg.feature_dim; ++j) {
      means(c, j) = gauss(rng);
      norm2 += means(c, j) * means(c, j);
    }
    const double f = cfg.class_mean_scale / std::sqrt(norm2);
    for (int j = 0; j < cfg.feature_dim; ++j) means(c, j) *= f;
  }
  g.features = Matrix(n, cfg.feature_dim);
  for (int i = 0; i < n; ++i) {
    const int c = g.labels[i];
    for (int j = 0; j < cfg.feature_dim; ++j) {
      g.features(i, j) = means(c, j) + cfg.feature_noise * gauss(rng);
    }
  }

  // per-class 1:1:8 train/val/test_id split
  for (Mask* m : {&g.train_mask, &g.val_mask, &g.test_id_mask, &g.test_ood_mask,
                  &g.expose_ood_mask}) {
    m->assign(n, 0);
  }
  for (int c = 0; c < cfg.num_blocks; ++c) {
    std::vector<int> members;
    for (int i = 0; i < n; ++i) {
      if (g.labels[i] == c) members.push_back(i);
    }
    std::shuffle(members.begin(), members.end(), rng);
    const size_t k = members.size();
    const size_t n_train = std::max<size_t>(1, k / 10);
    const size_t n_val = std::max<size_t>(1, k / 10);
    for (size_t i = 0; i < k; ++i) {
      if (i < n_train) {
        g.train_mask[members[i]] = 1;
      } else if (i < n_train + n_val) {
        g.val_mask[members[i]] = 1;
      } else {
        g.test_id_mask[members[i]] = 1;
      }
    }
  }
  g.validate();
  return g;
}

GraphDataset structure_manipulation(const GraphDataset& g, double frac_ood, double avg_degree,
                                    double expose_frac, std::uint64_t seed) {
  if (frac_ood <= 0.0 || frac_ood >= 1.0) throw ConfigError("frac_ood must lie in (0,1)");
  if (avg_degree < 0.0) throw ConfigError("avg_degree must be nonnegative");
  std::mt19937_64 rng(seed);
  const int n_old = g.num_nodes;
  const int n_new = static_cast<int>(std::ceil(frac_ood * static_cast<double>(n_old)));
  const int n = n_old + n_new;

  GraphDataset out;
  out.num_nodes = n;
  out.num_features = g.num_features;
  out.num_classes = g.num_classes;
  out.labels = g.labels;
  out.labels.resize(n, -1);
  out.features = Matrix(n, g.num_features);
  for (int i = 0; i < n_old; ++i) {
    std::copy(g.features.row(i), g.features.row(i) + g.num_features, out.features.row(i));
  }
  std::uniform_int_distribution<int> pick(0, n_old - 1);
  for (int i = n_old; i < n; ++i) {
    const int src = pick(rng);
    std::copy(g.features.row(src), g.features.row(src) + g.num_features, out.features.row(i));
  }

  // keep the original edges, wire each new node by an ER process over all
  // other nodes with expected degree avg_degree
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n_old; ++i) {
    for (int k = g.adjacency.row_offsets[i]; k < g.adjacency.row_offsets[i + 1]; ++k) {
      const int j = g.adjacency.col_indices[k];
      if (i < j) edges.emplace_back(i, j);
    }
  }
  const double p = n > 1 ? std::min(1.0, avg_degree / static_cast<double>(n - 1)) : 0.0;
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (int i = n_old; i < n; ++i) {
    for (int j = 0; j < i; ++j) {
      if (coin(rng) < p) edges.emplace_back(j, i);
    }
  }
  out.adjacency = adjacency_from_edges(n, edges);

  out.train_mask = g.train_mask;
  out.val_mask = g.val_mask;
  out.test_id_mask = g.test_id_mask;
  out.test_ood_mask = g.test_ood_mask;
  out.expose_ood_mask = g.expose_ood_mask;
  for (Mask* m : {&out.train_mask, &out.val_mask, &out.test_id_mask, &out.test_ood_mask,
                  &out.expose_ood_mask}) {
    m->resize(n, 0);
  }
  std::vector<int> new_nodes(n_new);
  std::iota(new_nodes.begin(), new_nodes.end(), n_old);
  assign_ood_roles(out, new_nodes, expose_frac, rng);
  out.validate();
  return out;
}

GraphDataset feature_interpolation(const GraphDataset& g, double frac_ood, double lambda_interp,
                                   bool random_lambda, double expose_frac, std::uint64_t seed) {
  if (frac_ood <= 0.0 || frac_ood >= 1.0) throw ConfigError("frac_ood must lie in (0,1)");
  if (lambda_interp < 0.0 || lambda_interp > 1.0) {
    throw ConfigError("lambda_interp must lie in [0,1]");
  }
  std::mt19937_64 rng(seed);
  const int n = g.num_nodes;
  const int n_ood = static_cast<int>(std::ceil(frac_ood * static_cast<double>(n)));
  std::vector<int> test_nodes = mask_to_indices(g.test_id_mask);
  if (n_ood > static_cast<int>(test_nodes.size())) {
    throw DataError("feature_interpolation: not enough test nodes (" +
                    std::to_string(test_nodes.size()) + ") for frac_ood=" +
                    std::to_string(frac_ood));
  }
  std::shuffle(test_nodes.begin(), test_nodes.end(), rng);
  test_nodes.resize(n_ood);

  GraphDataset out = g;
  std::uniform_int_distribution<int> pick(0, n - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int v : test_nodes) {
    const int u = pick(rng);
    const int w = pick(rng);
    const double lam = random_lambda ? unit(rng) : lambda_interp;
    for (int j = 0; j < g.num_features; ++j) {
      out.features(v, j) = lam * g.features(u, j) + (1.0 - lam) * g.features(w, j);
    }
    out.labels[v] = -1;
  }
  assign_ood_roles(out, test_nodes, expose_frac, rng);
  out.validate();
  return out;
}

GraphDataset label_leave_out(const GraphDataset& g, const std::vector<int>& held_out_classes,
                             double expose_frac, std::uint64_t seed) {
  if (held_out_classes.empty()) throw ConfigError("held_out_classes must be nonempty");
  std::set<int> held(held_out_classes.begin(), held_out_classes.end());
  for (int c : held) {
    if (c < 0 || c >= g.num_classes) {
      throw ConfigError("held-out class " + std::to_string(c) + " outside [0," +
                        std::to_string(g.num_classes) + ")");
    }
  }
  if (static_cast<int>(held.size()) >= g.num_classes) {
    throw ConfigError("cannot hold out every class");
  }
  std::mt19937_64 rng(seed);

  // dense relabeling of the surviving classes, order preserved
  std::vector<int> relabel(g.num_classes, -1);
  int next = 0;
  for (int c = 0; c < g.num_classes; ++c) {
    if (!held.count(c)) relabel[c] = next++;
  }

  GraphDataset out = g;
  out.num_classes = next;
  std::vector<int> ood_nodes;
  for (int i = 0; i < g.num_nodes; ++i) {
    if (g.labels[i] >= 0 && held.count(g.labels[i])) {
      out.labels[i] = -1;
      ood_nodes.push_back(i);
    } else if (g.labels[i] >= 0) {
      out.labels[i] = relabel[g.labels[i]];
    }
  }
  assign_ood_roles(out, ood_nodes, expose_frac, rng);
  out.validate();
  return out;
}

GraphDataset apply_ood_spec(const GraphDataset& g, const OodSpec& spec) {
  spec.validate();
  if (spec.kind == "structure") {
    return structure_manipulation(g, spec.frac_ood, spec.avg_degree, spec.expose_frac, spec.seed);
  }
  if (spec.kind == "feature") {
    return feature_interpolation(g, spec.frac_ood, spec.lambda_interp, spec.random_lambda,
                                 spec.expose_frac, spec.seed);
  }
  return label_leave_out(g, spec.held_out_classes, spec.expose_frac, spec.seed);
}

namespace {

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& field) {
  if (!j.contains(key)) return;
  try {
    field = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

}  // namespace

SbmConfig sbm_config_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad sbm config JSON: ") + e.what());
  }
  SbmConfig c;
  read_key(j, "num_blocks", c.num_blocks);
  read_key(j, "nodes_per_block", c.nodes_per_block);
  read_key(j, "p_in", c.p_in);
  read_key(j, "p_out", c.p_out);
  read_key(j, "feature_dim", c.feature_dim);
  read_key(j, "class_mean_scale", c.class_mean_scale);
  read_key(j, "feature_noise", c.feature_noise);
  read_key(j, "seed", c.seed);
  c.validate();
  return c;
}

std::string sbm_config_to_json(const SbmConfig& c) {
  nlohmann::json j;
  j["num_blocks"] = c.num_blocks;
  j["nodes_per_block"] = c.nodes_per_block;
  j["p_in"] = c.p_in;
  j["p_out"] = c.p_out;
  j["feature_dim"] = c.feature_dim;
  j["class_mean_scale"] = c.class_mean_scale;
  j["feature_noise"] = c.feature_noise;
  j["seed"] = c.seed;
  return j.dump(2);
}

SbmConfig load_sbm_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return sbm_config_from_json(text);
}

OodSpec ood_spec_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad ood spec JSON: ") + e.what());
  }
  OodSpec s;
  read_key(j, "kind", s.kind);
  read_key(j, "frac_ood", s.frac_ood);
  read_key(j, "avg_degree", s.avg_degree);
  read_key(j, "lambda_interp", s.lambda_interp);
  read_key(j, "random_lambda", s.random_lambda);
  read_key(j, "held_out_classes", s.held_out_classes);
  read_key(j, "expose_frac", s.expose_frac);
  read_key(j, "seed", s.seed);
  s.validate();
  return s;
}

std::string ood_spec_to_json(const OodSpec& s) {
  nlohmann::json j;
  j["kind"] = s.kind;
  j["frac_ood"] = s.frac_ood;
  j["avg_degree"] = s.avg_degree;
  j["lambda_interp"] = s.lambda_interp;
  j["random_lambda"] = s.random_lambda;
  j["held_out_classes"] = s.held_out_classes;
  j["expose_frac"] = s.expose_frac;
  j["seed"] = s.seed;
  return j.dump(2);
}

OodSpec load_ood_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open ood spec file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return ood_spec_from_json(text);
}

}  // namespace graphood
