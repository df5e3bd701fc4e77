#pragma once

#include <string>
#include <vector>

#include "graphood/config.hpp"
#include "graphood/energy.hpp"
#include "graphood/graph.hpp"
#include "graphood/metrics.hpp"
#include "graphood/model.hpp"

namespace graphood {

extern const char* kVersion;

// Exit codes: 0 success, 2 config error, 3 data error, 4 numerical error.
int run_cli(const std::vector<std::string>& args);

// ---- checkpoint ----

struct Checkpoint {
  RunConfig config;
  ModelParams params;  // best-validation snapshot
  int best_epoch = -1;
  double best_val_nll = 0.0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// ---- evaluation artifacts ----

struct MetricsRecord {
  std::string method;
  std::uint64_t seed = 0;
  RunConfig config;
  DetectionResult result;
  std::string provenance;
  int hops = 0;
  std::string version;
};

struct ScoreRow {
  int node = 0;
  std::string role;  // train|val|test_id|test_ood|expose_ood|none
  int label = -1;
  double score = 0.0;
};

struct HistogramRow {
  double bin_left = 0.0;
  double bin_right = 0.0;
  long count_id = 0;
  long count_ood = 0;
};

std::string metrics_to_json(const MetricsRecord& rec);
MetricsRecord load_metrics(const std::string& path);

void save_scores_csv(const std::vector<ScoreRow>& rows, const std::string& path);
std::vector<ScoreRow> load_scores_csv(const std::string& path);

// Histogram over [min - eps, max + eps] of the combined test scores.
std::vector<HistogramRow> make_histogram(const std::vector<double>& id_scores,
                                         const std::vector<double>& ood_scores, int bins);
void save_histogram_csv(const std::vector<HistogramRow>& rows, const std::string& path);
std::vector<HistogramRow> load_histogram_csv(const std::string& path);

void save_train_log_csv(const std::vector<EpochRecord>& log, const std::string& path);
std::vector<EpochRecord> load_train_log_csv(const std::string& path);

struct CompareRow {
  std::string method;
  int seeds = 0;
  double auroc_mean = 0, auroc_std = 0;
  double aupr_mean = 0, aupr_std = 0;
  double fpr95_mean = 0, fpr95_std = 0;
  double id_accuracy_mean = 0, id_accuracy_std = 0;
};

void save_compare_csv(const std::vector<CompareRow>& rows, const std::string& path);
std::vector<CompareRow> load_compare_csv(const std::string& path);

// ---- in-process pipeline pieces shared by the commands and the tests ----

ScoreVector compute_scores(const ModelParams& params, const GraphDataset& g,
                           const RunConfig& cfg);
MetricsRecord evaluate_run(const ModelParams& params, const GraphDataset& g,
                           const RunConfig& cfg);
std::vector<CompareRow> run_compare(const GraphDataset& g, const RunConfig& base,
                                    const std::vector<std::string>& methods,
                                    const std::vector<std::uint64_t>& seeds);

}  // namespace graphood
