#include "graphood/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "graphood/errors.hpp"
#include "graphood/losses.hpp"
#include "graphood/oodgen.hpp"

namespace graphood {

const char* kVersion = "v0.1.0";

namespace fs = std::filesystem;

namespace {

std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, p);
}

double parse_double_str(const std::string& s, const std::string& context) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw DataError(context + ": expected number, got '" + s + "'");
  }
  return v;
}

long parse_long_str(const std::string& s, const std::string& context) {
  long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw DataError(context + ": expected integer, got '" + s + "'");
  }
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) {
    throw DataError("checkpoint: " + what + " must be a 2-D array");
  }
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j[0].size());
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (static_cast<int>(j[i].size()) != cols) {
      throw DataError("checkpoint: ragged rows in " + what);
    }
    for (int c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

std::string role_of(const GraphDataset& g, int v) {
  if (g.train_mask[v]) return "train";
  if (g.val_mask[v]) return "val";
  if (g.test_id_mask[v]) return "test_id";
  if (g.test_ood_mask[v]) return "test_ood";
  if (g.expose_ood_mask[v]) return "expose_ood";
  return "none";
}

nlohmann::json config_to_json_obj(const RunConfig& cfg) {
  return nlohmann::json::parse(run_config_to_json(cfg));
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  nlohmann::json j;
  j["version"] = kVersion;
  j["config"] = config_to_json_obj(ckpt.config);
  j["in_dim"] = ckpt.params.in_dim;
  j["hidden_dim"] = ckpt.params.hidden_dim;
  j["num_classes"] = ckpt.params.num_classes;
  j["best_epoch"] = ckpt.best_epoch;
  j["best_val_nll"] = ckpt.best_val_nll;
  j["w0"] = matrix_to_json(ckpt.params.w0);
  j["b0"] = matrix_to_json(ckpt.params.b0);
  j["w1"] = matrix_to_json(ckpt.params.w1);
  j["b1"] = matrix_to_json(ckpt.params.b1);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out << j.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing or unreadable checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  Checkpoint ckpt;
  ckpt.config = run_config_from_json(j.at("config").dump());
  ckpt.best_epoch = j.at("best_epoch").get<int>();
  ckpt.best_val_nll = j.at("best_val_nll").get<double>();
  ckpt.params.in_dim = j.at("in_dim").get<int>();
  ckpt.params.hidden_dim = j.at("hidden_dim").get<int>();
  ckpt.params.num_classes = j.at("num_classes").get<int>();
  ckpt.params.w0 = matrix_from_json(j.at("w0"), "w0");
  ckpt.params.b0 = matrix_from_json(j.at("b0"), "b0");
  ckpt.params.w1 = matrix_from_json(j.at("w1"), "w1");
  ckpt.params.b1 = matrix_from_json(j.at("b1"), "b1");
  return ckpt;
}

std::string metrics_to_json(const MetricsRecord& rec) {
  nlohmann::json j;
  j["method"] = rec.method;
  j["seed"] = rec.seed;
  j["config"] = config_to_json_obj(rec.config);
  j["auroc"] = rec.result.auroc;
  j["aupr"] = rec.result.aupr;
  j["fpr95"] = rec.result.fpr95;
  j["id_accuracy"] = rec.result.id_accuracy;
  j["n_id"] = rec.result.n_id;
  j["n_ood"] = rec.result.n_ood;
  j["gamma"] = rec.result.gamma;
  j["provenance"] = rec.provenance;
  j["hops"] = rec.hops;
  j["version"] = rec.version;
  return j.dump(2) + "\n";
}

MetricsRecord load_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing or unreadable metrics file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  MetricsRecord rec;
  rec.method = j.at("method").get<std::string>();
  rec.seed = j.at("seed").get<std::uint64_t>();
  rec.config = run_config_from_json(j.at("config").dump());
  rec.result.auroc = j.at("auroc").get<double>();
  rec.result.aupr = j.at("aupr").get<double>();
  rec.result.fpr95 = j.at("fpr95").get<double>();
  rec.result.id_accuracy = j.at("id_accuracy").get<double>();
  rec.result.n_id = j.at("n_id").get<int>();
  rec.result.n_ood = j.at("n_ood").get<int>();
  rec.result.gamma = j.at("gamma").get<double>();
  rec.provenance = j.at("provenance").get<std::string>();
  rec.hops = j.at("hops").get<int>();
  rec.version = j.at("version").get<std::string>();
  return rec;
}

void save_scores_csv(const std::vector<ScoreRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write scores: " + path);
  out << "node,role,label,score\n";
  for (const auto& r : rows) {
    out << r.node << "," << r.role << "," << r.label << "," << format_double(r.score) << "\n";
  }
}

std::vector<ScoreRow> load_scores_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing or unreadable scores file: " + path);
  std::string line;
  if (!std::getline(in, line) || split(line, ',') != std::vector<std::string>{"node", "role",
                                                                              "label", "score"}) {
    throw DataError(path + ": bad header");
  }
  std::vector<ScoreRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto parts = split(line, ',');
    if (parts.size() != 4) throw DataError(path + ":" + std::to_string(lineno) + ": bad row");
    ScoreRow r;
    r.node = static_cast<int>(parse_long_str(parts[0], path));
    r.role = parts[1];
    r.label = static_cast<int>(parse_long_str(parts[2], path));
    r.score = parse_double_str(parts[3], path);
    rows.push_back(r);
  }
  return rows;
}

std::vector<HistogramRow> make_histogram(const std::vector<double>& id_scores,
                                         const std::vector<double>& ood_scores, int bins) {
  if (bins <= 0) throw ConfigError("histogram bins must be positive");
  if (id_scores.empty() && ood_scores.empty()) {
    throw DataError("histogram: no scores to bin");
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto* v : {&id_scores, &ood_scores}) {
    for (double s : *v) {
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
  }
  const double span = hi - lo;
  const double eps = span > 0.0 ? span * 1e-6 : 0.5;
  lo -= eps;
  hi += eps;
  const double width = (hi - lo) / bins;
  std::vector<HistogramRow> rows(bins);
  for (int b = 0; b < bins; ++b) {
    rows[b].bin_left = lo + b * width;
    rows[b].bin_right = lo + (b + 1) * width;
  }
  auto bin_of = [&](double s) {
    int b = static_cast<int>((s - lo) / width);
    return std::clamp(b, 0, bins - 1);
  };
  for (double s : id_scores) rows[bin_of(s)].count_id++;
  for (double s : ood_scores) rows[bin_of(s)].count_ood++;
  return rows;
}

void save_histogram_csv(const std::vector<HistogramRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write histogram: " + path);
  out << "bin_left,bin_right,count_id,count_ood\n";
  for (const auto& r : rows) {
    out << format_double(r.bin_left) << "," << format_double(r.bin_right) << "," << r.count_id
        << "," << r.count_ood << "\n";
  }
}

std::vector<HistogramRow> load_histogram_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing or unreadable histogram file: " + path);
  std::string line;
  if (!std::getline(in, line) ||
      split(line, ',') != std::vector<std::string>{"bin_left", "bin_right", "count_id",
                                                   "count_ood"}) {
    throw DataError(path + ": bad header");
  }
  std::vector<HistogramRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto parts = split(line, ',');
    if (parts.size() != 4) throw DataError(path + ": bad row");
    HistogramRow r;
    r.bin_left = parse_double_str(parts[0], path);
    r.bin_right = parse_double_str(parts[1], path);
    r.count_id = parse_long_str(parts[2], path);
    r.count_ood = parse_long_str(parts[3], path);
    rows.push_back(r);
  }
  return rows;
}

void save_train_log_csv(const std::vector<EpochRecord>& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write train log: " + path);
  out << "epoch,total,nll,reg,bound,uniform,ub,val_nll\n";
  for (const auto& e : log) {
    out << e.epoch << "," << format_double(e.losses.total) << "," << format_double(e.losses.nll)
        << "," << format_double(e.losses.reg) << "," << format_double(e.losses.bound) << ","
        << format_double(e.losses.uniform) << "," << format_double(e.losses.ub) << ","
        << format_double(e.val_nll) << "\n";
  }
}

std::vector<EpochRecord> load_train_log_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing or unreadable train log: " + path);
  std::string line;
  if (!std::getline(in, line) ||
      split(line, ',') != std::vector<std::string>{"epoch", "total", "nll", "reg", "bound",
                                                   "uniform", "ub", "val_nll"}) {
    throw DataError(path + ": bad header");
  }
  std::vector<EpochRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto parts = split(line, ',');
    if (parts.size() != 8) throw DataError(path + ": bad row");
    EpochRecord e;
    e.epoch = static_cast<int>(parse_long_str(parts[0], path));
    e.losses.total = parse_double_str(parts[1], path);
    e.losses.nll = parse_double_str(parts[2], path);
    e.losses.reg = parse_double_str(parts[3], path);
    e.losses.bound = parse_double_str(parts[4], path);
    e.losses.uniform = parse_double_str(parts[5], path);
    e.losses.ub = parse_double_str(parts[6], path);
    e.val_nll = parse_double_str(parts[7], path);
    out.push_back(e);
  }
  return out;
}

void save_compare_csv(const std::vector<CompareRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write comparison: " + path);
  out << "method,seeds,auroc_mean,auroc_std,aupr_mean,aupr_std,fpr95_mean,fpr95_std,"
         "id_accuracy_mean,id_accuracy_std\n";
  for (const auto& r : rows) {
    out << r.method << "," << r.seeds << "," << format_double(r.auroc_mean) << ","
        << format_double(r.auroc_std) << "," << format_double(r.aupr_mean) << ","
        << format_double(r.aupr_std) << "," << format_double(r.fpr95_mean) << ","
        << format_double(r.fpr95_std) << "," << format_double(r.id_accuracy_mean) << ","
        << format_double(r.id_accuracy_std) << "\n";
  }
}

std::vector<CompareRow> load_compare_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing or unreadable comparison file: " + path);
  std::string line;
  if (!std::getline(in, line) ||
      split(line, ',') != std::vector<std::string>{"method", "seeds", "auroc_mean", "auroc_std",
                                                   "aupr_mean", "aupr_std", "fpr95_mean",
                                                   "fpr95_std", "id_accuracy_mean",
                                                   "id_accuracy_std"}) {
    throw DataError(path + ": bad header");
  }
  std::vector<CompareRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto parts = split(line, ',');
    if (parts.size() != 10) throw DataError(path + ": bad row");
    CompareRow r;
    r.method = parts[0];
    r.seeds = static_cast<int>(parse_long_str(parts[1], path));
    r.auroc_mean = parse_double_str(parts[2], path);
    r.auroc_std = parse_double_str(parts[3], path);
    r.aupr_mean = parse_double_str(parts[4], path);
    r.aupr_std = parse_double_str(parts[5], path);
    r.fpr95_mean = parse_double_str(parts[6], path);
    r.fpr95_std = parse_double_str(parts[7], path);
    r.id_accuracy_mean = parse_double_str(parts[8], path);
    r.id_accuracy_std = parse_double_str(parts[9], path);
    rows.push_back(r);
  }
  return rows;
}

ScoreVector compute_scores(const ModelParams& params, const GraphDataset& g,
                           const RunConfig& cfg) {
  const Method method = cfg.parsed_method();
  const Matrix logits = forward_logits(params, g.features, sym_normalize(g));
  if (method == Method::Msp) return msp_score(logits);
  ScoreVector s = negative_energy(logits);
  if (method_score_propagated(method)) s = propagate(s, g, cfg.eta, cfg.hops);
  return s;
}

MetricsRecord evaluate_run(const ModelParams& params, const GraphDataset& g,
                           const RunConfig& cfg) {
  const std::vector<int> id_idx = mask_to_indices(g.test_id_mask);
  const std::vector<int> ood_idx = mask_to_indices(g.test_ood_mask);
  if (id_idx.empty()) throw DataError("evaluate: dataset has no test_id nodes");
  if (ood_idx.empty()) throw DataError("evaluate: dataset has no test_ood nodes");

  const Matrix logits = forward_logits(params, g.features, sym_normalize(g));
  const ScoreVector scores = compute_scores(params, g, cfg);
  std::vector<double> id_scores, ood_scores;
  id_scores.reserve(id_idx.size());
  ood_scores.reserve(ood_idx.size());
  for (int v : id_idx) id_scores.push_back(scores.values[v]);
  for (int v : ood_idx) ood_scores.push_back(scores.values[v]);

  MetricsRecord rec;
  rec.method = cfg.method;
  rec.seed = cfg.seed;
  rec.config = cfg;
  rec.result = evaluate_detection(id_scores, ood_scores, logits, g.labels, g.test_id_mask);
  rec.provenance = provenance_name(scores.provenance);
  rec.hops = scores.hops;
  rec.version = kVersion;
  return rec;
}

std::vector<CompareRow> run_compare(const GraphDataset& g, const RunConfig& base,
                                    const std::vector<std::string>& methods,
                                    const std::vector<std::uint64_t>& seeds) {
  if (methods.empty() || seeds.empty()) {
    throw ConfigError("compare needs at least one method and one seed");
  }
  std::vector<CompareRow> rows;
  for (const std::string& method : methods) {
    std::vector<double> aurocs, auprs, fprs, accs;
    for (std::uint64_t seed : seeds) {
      RunConfig cfg = base;
      cfg.method = method;
      cfg.seed = seed;
      cfg.exposure = method_uses_exposure(method_from_name(method));
      cfg.validate();
      TrainState state = train_model(g, cfg);
      MetricsRecord rec = evaluate_run(state.best_params, g, cfg);
      aurocs.push_back(rec.result.auroc);
      auprs.push_back(rec.result.aupr);
      fprs.push_back(rec.result.fpr95);
      accs.push_back(rec.result.id_accuracy);
    }
    auto mean_of = [](const std::vector<double>& v) {
      double acc = 0.0;
      for (double x : v) acc += x;
      return acc / static_cast<double>(v.size());
    };
    auto std_of = [&](const std::vector<double>& v, double mean) {
      if (v.size() < 2) return 0.0;
      double acc = 0.0;
      for (double x : v) acc += (x - mean) * (x - mean);
      return std::sqrt(acc / static_cast<double>(v.size() - 1));
    };
    CompareRow row;
    row.method = method;
    row.seeds = static_cast<int>(seeds.size());
    row.auroc_mean = mean_of(aurocs);
    row.auroc_std = std_of(aurocs, row.auroc_mean);
    row.aupr_mean = mean_of(auprs);
    row.aupr_std = std_of(auprs, row.aupr_mean);
    row.fpr95_mean = mean_of(fprs);
    row.fpr95_std = std_of(fprs, row.fpr95_mean);
    row.id_accuracy_mean = mean_of(accs);
    row.id_accuracy_std = std_of(accs, row.id_accuracy_mean);
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// command implementations
// ---------------------------------------------------------------------------

namespace {

struct ConfigFlags {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;  // key -> raw value
};

void add_config_options(CLI::App* cmd, ConfigFlags& flags) {
  cmd->add_option("--config", flags.config_path, "run config JSON file");
  static const char* keys[] = {"method", "eta", "hops", "lambda1", "lambda2", "alpha",
                               "m_in", "m_out", "tau", "lr", "epochs", "hidden", "seed",
                               "ub_start_epoch", "ub_over_all_nodes", "reg_on_propagated",
                               "exposure"};
  for (const char* key : keys) {
    std::string flag = "--" + std::string(key);
    std::replace(flag.begin(), flag.end(), '_', '-');
    auto* opt = cmd->add_option_function<std::string>(
        flag,
        [&flags, key](const std::string& value) { flags.overrides.emplace_back(key, value); },
        std::string("override config key ") + key);
    opt->type_name("VALUE");
  }
}

RunConfig resolve_config(const ConfigFlags& flags, const RunConfig& base = RunConfig{}) {
  RunConfig cfg = flags.config_path.empty() ? base : load_run_config(flags.config_path);
  if (!flags.overrides.empty()) {
    // apply overrides through the JSON path so types are checked uniformly
    nlohmann::json j = nlohmann::json::parse(run_config_to_json(cfg));
    for (const auto& [key, raw] : flags.overrides) {
      if (key == std::string("method")) {
        j[key] = raw;
      } else {
        try {
          j[key] = nlohmann::json::parse(raw);
        } catch (const nlohmann::json::exception&) {
          throw ConfigError("override --" + key + ": cannot parse '" + raw + "'");
        }
      }
    }
    cfg = run_config_from_json(j.dump());
  }
  cfg.validate();
  return cfg;
}

int cmd_generate(const std::string& config_path, const std::string& out_dir) {
  SbmConfig cfg = load_sbm_config(config_path);
  GraphDataset g = generate_sbm(cfg);
  save_dataset(g, out_dir);
  std::cout << "wrote " << g.num_nodes << " nodes, " << g.adjacency.nnz() / 2 << " edges to "
            << out_dir << "\n";
  return 0;
}

int cmd_make_ood(const std::string& dataset_dir, const std::string& spec_path,
                 const std::string& out_dir) {
  GraphDataset g = load_dataset(dataset_dir);
  OodSpec spec = load_ood_spec(spec_path);
  GraphDataset out = apply_ood_spec(g, spec);
  save_dataset(out, out_dir);
  std::cout << "wrote " << out.num_nodes << " nodes (" << mask_to_indices(out.test_ood_mask).size()
            << " test OOD, " << mask_to_indices(out.expose_ood_mask).size() << " exposed OOD) to "
            << out_dir << "\n";
  return 0;
}

int cmd_train(const std::string& dataset_dir, const ConfigFlags& flags,
              const std::string& out_path, const std::string& log_path) {
  RunConfig cfg = resolve_config(flags);
  GraphDataset g = load_dataset(dataset_dir);
  TrainState state = train_model(g, cfg);
  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.params = state.best_params;
  ckpt.best_epoch = state.best_epoch;
  ckpt.best_val_nll = state.best_val_nll;
  save_checkpoint(ckpt, out_path);
  if (!log_path.empty()) save_train_log_csv(state.log, log_path);
  std::cout << "trained " << cfg.method << " for " << cfg.epochs << " epochs; best epoch "
            << state.best_epoch << " (val nll " << state.best_val_nll << ") -> " << out_path
            << "\n";
  return 0;
}

int cmd_evaluate(const std::string& dataset_dir, const std::string& ckpt_path,
                 const ConfigFlags& flags, const std::string& out_dir, int bins) {
  GraphDataset g = load_dataset(dataset_dir);
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  RunConfig cfg = resolve_config(flags, ckpt.config);
  MetricsRecord rec = evaluate_run(ckpt.params, g, cfg);

  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "metrics.json");
    if (!out) throw DataError("cannot write metrics.json under " + out_dir);
    out << metrics_to_json(rec);
  }
  const ScoreVector scores = compute_scores(ckpt.params, g, cfg);
  std::vector<ScoreRow> rows;
  rows.reserve(g.num_nodes);
  for (int v = 0; v < g.num_nodes; ++v) {
    rows.push_back(ScoreRow{v, role_of(g, v), g.labels[v], scores.values[v]});
  }
  save_scores_csv(rows, (fs::path(out_dir) / "scores.csv").string());

  std::vector<double> id_scores, ood_scores;
  for (int v : mask_to_indices(g.test_id_mask)) id_scores.push_back(scores.values[v]);
  for (int v : mask_to_indices(g.test_ood_mask)) ood_scores.push_back(scores.values[v]);
  save_histogram_csv(make_histogram(id_scores, ood_scores, bins),
                     (fs::path(out_dir) / "histogram.csv").string());

  std::cout << "method " << rec.method << " (" << rec.provenance << "): auroc "
            << rec.result.auroc << ", aupr " << rec.result.aupr << ", fpr95 " << rec.result.fpr95
            << ", id_acc " << rec.result.id_accuracy << "\n";
  return 0;
}

int cmd_compare(const std::string& dataset_dir, const ConfigFlags& flags,
                const std::string& methods_arg, const std::string& seeds_arg,
                const std::string& out_dir) {
  RunConfig base = resolve_config(flags);
  GraphDataset g = load_dataset(dataset_dir);
  std::vector<std::string> methods;
  for (const std::string& m : split(methods_arg, ',')) {
    if (!m.empty()) methods.push_back(m);
  }
  std::vector<std::uint64_t> seeds;
  for (const std::string& s : split(seeds_arg, ',')) {
    if (!s.empty()) seeds.push_back(static_cast<std::uint64_t>(parse_long_str(s, "--seeds")));
  }
  for (const std::string& m : methods) method_from_name(m);  // fail fast on typos

  std::vector<CompareRow> rows = run_compare(g, base, methods, seeds);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    save_compare_csv(rows, (fs::path(out_dir) / "compare.csv").string());
  }
  std::cout << "method            auroc           aupr            fpr95           id_acc\n";
  for (const auto& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-16s %6.3f +-%5.3f  %6.3f +-%5.3f  %6.3f +-%5.3f  %6.3f +-%5.3f",
                  r.method.c_str(), r.auroc_mean, r.auroc_std, r.aupr_mean, r.aupr_std,
                  r.fpr95_mean, r.fpr95_std, r.id_accuracy_mean, r.id_accuracy_std);
    std::cout << buf << "\n";
  }
  return 0;
}

int cmd_selfcheck();

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"graph OOD detection toolkit"};
  app.require_subcommand(1);

  std::string dataset_dir, out_dir, out_path, config_path, spec_path, ckpt_path, log_path;
  std::string methods_arg, seeds_arg;
  int bins = 50;
  ConfigFlags train_flags, eval_flags, compare_flags;

  auto* gen = app.add_subcommand("generate", "generate a synthetic SBM dataset");
  gen->add_option("--config", config_path, "SBM config JSON")->required();
  gen->add_option("--out", out_dir, "output dataset directory")->required();

  auto* mko = app.add_subcommand("make-ood", "derive an OOD benchmark from a dataset");
  mko->add_option("--dataset", dataset_dir, "input dataset directory")->required();
  mko->add_option("--spec", spec_path, "OOD spec JSON")->required();
  mko->add_option("--out", out_dir, "output dataset directory")->required();

  auto* tr = app.add_subcommand("train", "train a model");
  tr->add_option("--dataset", dataset_dir, "dataset directory")->required();
  tr->add_option("--out", out_path, "checkpoint output path")->required();
  tr->add_option("--log", log_path, "training log CSV path");
  add_config_options(tr, train_flags);

  auto* ev = app.add_subcommand("evaluate", "evaluate a checkpoint");
  ev->add_option("--dataset", dataset_dir, "dataset directory")->required();
  ev->add_option("--checkpoint", ckpt_path, "checkpoint path")->required();
  ev->add_option("--out-dir", out_dir, "output directory")->required();
  ev->add_option("--bins", bins, "histogram bin count");
  add_config_options(ev, eval_flags);

  auto* cp = app.add_subcommand("compare", "train and evaluate several methods");
  cp->add_option("--dataset", dataset_dir, "dataset directory")->required();
  cp->add_option("--methods", methods_arg, "comma-separated method list")->required();
  cp->add_option("--seeds", seeds_arg, "comma-separated seed list")->required();
  cp->add_option("--out-dir", out_dir, "output directory for compare.csv");
  add_config_options(cp, compare_flags);

  auto* sc = app.add_subcommand("selfcheck", "run gradient and identity checks");
  (void)sc;

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      std::cout << app.help();
      return 0;
    }
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_generate(config_path, out_dir);
    if (mko->parsed()) return cmd_make_ood(dataset_dir, spec_path, out_dir);
    if (tr->parsed()) return cmd_train(dataset_dir, train_flags, out_path, log_path);
    if (ev->parsed()) return cmd_evaluate(dataset_dir, ckpt_path, eval_flags, out_dir, bins);
    if (cp->parsed()) return cmd_compare(dataset_dir, compare_flags, methods_arg, seeds_arg, out_dir);
    if (sc->parsed()) return cmd_selfcheck();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 2;
}

// ---------------------------------------------------------------------------
// selfcheck
// ---------------------------------------------------------------------------

namespace {

bool report(const char* name, bool ok, const std::string& detail) {
  std::cout << (ok ? "[PASS] " : "[FAIL] ") << name;
  if (!detail.empty()) std::cout << " (" << detail << ")";
  std::cout << "\n";
  return ok;
}

int cmd_selfcheck() {
  bool all_ok = true;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> gauss(0.0, 1.0);

  {  // autodiff vs central finite differences through a small composed graph
    double max_rel = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 4, c = 3;
      Matrix z(n, c);
      for (long i = 0; i < z.size(); ++i) z.data()[i] = gauss(rng);
      std::vector<int> labels(n);
      for (int i = 0; i < n; ++i) labels[i] = static_cast<int>(rng() % c);
      Mask mask(n, 1);
      auto loss_at = [&](const Matrix& m) {
        Tape tape;
        DiffTensor zt = tape.leaf(m);
        DiffTensor lse = tape.row_logsumexp(zt);
        DiffTensor ce = tape.softmax_cross_entropy(zt, labels, mask);
        DiffTensor mm = tape.masked_mean(lse, mask);
        return tape.add(ce, mm).value()(0, 0);
      };
      Tape tape;
      DiffTensor zt = tape.leaf(z);
      DiffTensor lse = tape.row_logsumexp(zt);
      DiffTensor ce = tape.softmax_cross_entropy(zt, labels, mask);
      DiffTensor total = tape.add(ce, tape.masked_mean(lse, mask));
      tape.backward(total);
      const Matrix& grad = zt.adjoint();
      const double h = 1e-6;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < c; ++j) {
          Matrix zp = z, zm = z;
          zp(i, j) += h;
          zm(i, j) -= h;
          const double fd = (loss_at(zp) - loss_at(zm)) / (2 * h);
          const double denom = std::max({1.0, std::abs(fd), std::abs(grad(i, j))});
          max_rel = std::max(max_rel, std::abs(fd - grad(i, j)) / denom);
        }
      }
    }
    all_ok &= report("gradient check (autodiff vs finite differences)", max_rel < 1e-5,
                     "max rel err " + std::to_string(max_rel));
  }

  {  // analytic loss gradients vs autodiff
    double max_rel = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 8, c = 4;
      Matrix z(n, c);
      for (long i = 0; i < z.size(); ++i) z.data()[i] = gauss(rng);
      Mask set(n, 1);
      Tape tape;
      DiffTensor zt = tape.leaf(z);
      tape.backward(bound_loss(tape, zt, set));
      Matrix analytic = bound_loss_grad(z, set);
      for (long i = 0; i < z.size(); ++i) {
        const double a = analytic.data()[i], b = zt.adjoint().data()[i];
        max_rel = std::max(max_rel, std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}));
      }
    }
    all_ok &= report("analytic bound-loss gradient vs autodiff", max_rel < 1e-10,
                     "max rel err " + std::to_string(max_rel));
  }

  {  // shift identities of softmax and negative energy
    double max_softmax = 0.0, max_energy = 0.0;
    for (int trial = 0; trial < 2000; ++trial) {
      const int c = 2 + static_cast<int>(rng() % 9);
      Matrix z(1, c);
      for (int j = 0; j < c; ++j) z(0, j) = gauss(rng) * 3.0;
      for (double s : {-100.0, -1.0, 0.0, 1.0, 100.0}) {
        Matrix zs = z;
        for (int j = 0; j < c; ++j) zs(0, j) += s;
        Matrix p0 = row_softmax(z), p1 = row_softmax(zs);
        for (int j = 0; j < c; ++j) max_softmax = std::max(max_softmax, std::abs(p1(0, j) - p0(0, j)));
        const double d = negative_energy(zs).values[0] - negative_energy(z).values[0];
        max_energy = std::max(max_energy, std::abs(d - s));
      }
    }
    all_ok &= report("softmax shift invariance", max_softmax < 1e-12,
                     "max delta " + std::to_string(max_softmax));
    all_ok &= report("energy shift identity", max_energy < 1e-12,
                     "max delta " + std::to_string(max_energy));
  }

  {  // score bounds for norm-constrained rows
    bool inside = true;
    for (int trial = 0; trial < 10000 && inside; ++trial) {
      const int c = 2 + static_cast<int>(rng() % 9);
      const double m = 0.1 + 0.7 * std::sqrt(static_cast<double>(c)) *
                                 std::uniform_real_distribution<double>(0, 1)(rng);
      Matrix z(1, c);
      double norm2 = 0.0;
      for (int j = 0; j < c; ++j) {
        z(0, j) = gauss(rng);
        norm2 += z(0, j) * z(0, j);
      }
      const double f = m / std::sqrt(norm2);
      for (int j = 0; j < c; ++j) z(0, j) *= f;
      const double s = negative_energy(z).values[0];
      const double center = std::log(static_cast<double>(c));
      const double radius = m / std::sqrt(static_cast<double>(c));
      inside = s >= center - radius - 1e-10 && s <= center + radius + 1e-10;
    }
    all_ok &= report("norm-constrained score bounds", inside, "");
  }

  {  // propagation: convex combination + monotone move toward neighbor mean
    bool ok = true;
    for (int trial = 0; trial < 100 && ok; ++trial) {
      const int n = 5 + static_cast<int>(rng() % 20);
      std::vector<std::pair<int, int>> edges;
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
          if (std::uniform_real_distribution<double>(0, 1)(rng) < 0.3) edges.emplace_back(i, j);
        }
      }
      GraphDataset g;
      g.num_nodes = n;
      g.num_features = 1;
      g.num_classes = 2;
      g.features = Matrix(n, 1);
      g.labels.assign(n, 0);
      for (Mask* msk : {&g.train_mask, &g.val_mask, &g.test_id_mask, &g.test_ood_mask,
                        &g.expose_ood_mask}) {
        msk->assign(n, 0);
      }
      g.adjacency = adjacency_from_edges(n, edges);
      ScoreVector s;
      s.values.resize(n);
      for (int i = 0; i < n; ++i) s.values[i] = gauss(rng);
      const double eta = 0.25;
      ScoreVector s1 = propagate(s, g, eta, 1);
      const double lo = *std::min_element(s.values.begin(), s.values.end());
      const double hi = *std::max_element(s.values.begin(), s.values.end());
      const std::vector<int> deg = node_degrees(g.adjacency);
      for (int i = 0; i < n && ok; ++i) {
        ok = s1.values[i] >= lo - 1e-12 && s1.values[i] <= hi + 1e-12;
        if (deg[i] == 0) continue;
        double mean = 0.0;
        for (int k = g.adjacency.row_offsets[i]; k < g.adjacency.row_offsets[i + 1]; ++k) {
          mean += s.values[g.adjacency.col_indices[k]];
        }
        mean /= deg[i];
        if (mean > s.values[i]) ok = ok && s1.values[i] > s.values[i];
        if (mean < s.values[i]) ok = ok && s1.values[i] < s.values[i];
      }
    }
    all_ok &= report("score propagation properties", ok, "");
  }

  std::cout << (all_ok ? "selfcheck: all checks passed\n" : "selfcheck: FAILURES\n");
  return all_ok ? 0 : 4;
}

}  // namespace

}  // namespace graphood
