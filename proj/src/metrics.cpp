#include "graphood/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "graphood/energy.hpp"
#include "graphood/errors.hpp"

namespace graphood {

namespace {

void check_nonempty(const std::vector<double>& id_scores, const std::vector<double>& ood_scores,
                    const char* what) {
  if (id_scores.empty() || ood_scores.empty()) {
    throw NumericError(std::string(what) + ": both score sets must be nonempty");
  }
}

}  // namespace

double auroc(const std::vector<double>& id_scores, const std::vector<double>& ood_scores) {
  check_nonempty(id_scores, ood_scores, "auroc");
  // Mann-Whitney U via midranks over the pooled sample.
  struct Entry {
    double score;
    bool is_id;
  };
  std::vector<Entry> pool;
  pool.reserve(id_scores.size() + ood_scores.size());
  for (double s : id_scores) pool.push_back({s, true});
  for (double s : ood_scores) pool.push_back({s, false});
  std::sort(pool.begin(), pool.end(),
            [](const Entry& a, const Entry& b) { return a.score < b.score; });
  double rank_sum_id = 0.0;
  size_t i = 0;
  while (i < pool.size()) {
    size_t j = i;
    while (j < pool.size() && pool[j].score == pool[i].score) ++j;
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (size_t k = i; k < j; ++k) {
      if (pool[k].is_id) rank_sum_id += midrank;
    }
    i = j;
  }
  const double n_id = static_cast<double>(id_scores.size());
  const double n_ood = static_cast<double>(ood_scores.size());
  const double u = rank_sum_id - n_id * (n_id + 1.0) / 2.0;
  return u / (n_id * n_ood);
}

double aupr(const std::vector<double>& id_scores, const std::vector<double>& ood_scores) {
  check_nonempty(id_scores, ood_scores, "aupr");
  struct Entry {
    double score;
    bool is_id;
  };
  std::vector<Entry> pool;
  pool.reserve(id_scores.size() + ood_scores.size());
  for (double s : id_scores) pool.push_back({s, true});
  for (double s : ood_scores) pool.push_back({s, false});
  std::sort(pool.begin(), pool.end(),
            [](const Entry& a, const Entry& b) { return a.score > b.score; });
  const double total_pos = static_cast<double>(id_scores.size());
  double tp = 0.0, fp = 0.0;
  double prev_recall = 0.0;
  double area = 0.0;
  size_t i = 0;
  while (i < pool.size()) {
    size_t j = i;
    while (j < pool.size() && pool[j].score == pool[i].score) ++j;
    for (size_t k = i; k < j; ++k) {
      if (pool[k].is_id) {
        tp += 1.0;
      } else {
        fp += 1.0;
      }
    }
    const double recall = tp / total_pos;
    const double precision = tp / (tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return area;
}

double fpr_at_tpr(const std::vector<double>& id_scores, const std::vector<double>& ood_scores,
                  double tpr) {
  check_nonempty(id_scores, ood_scores, "fpr_at_tpr");
  const double gamma = threshold_at_tpr(id_scores, tpr);
  long over = 0;
  for (double s : ood_scores) {
    if (s >= gamma) ++over;
  }
  return static_cast<double>(over) / static_cast<double>(ood_scores.size());
}

double id_accuracy(const Matrix& logits, const std::vector<int>& labels, const Mask& mask) {
  long correct = 0, count = 0;
  for (int i = 0; i < logits.rows(); ++i) {
    if (!mask[i]) continue;
    const double* row = logits.row(i);
    int best = 0;
    for (int j = 1; j < logits.cols(); ++j) {
      if (row[j] > row[best]) best = j;
    }
    if (best == labels[i]) ++correct;
    ++count;
  }
  if (count == 0) throw NumericError("id_accuracy: empty mask");
  return static_cast<double>(correct) / static_cast<double>(count);
}

DetectionResult evaluate_detection(const std::vector<double>& id_scores,
                                   const std::vector<double>& ood_scores, const Matrix& logits,
                                   const std::vector<int>& labels, const Mask& test_id_mask) {
  DetectionResult r;
  r.n_id = static_cast<int>(id_scores.size());
  r.n_ood = static_cast<int>(ood_scores.size());
  r.auroc = auroc(id_scores, ood_scores);
  r.aupr = aupr(id_scores, ood_scores);
  r.gamma = threshold_at_tpr(id_scores, 0.95);
  r.fpr95 = fpr_at_tpr(id_scores, ood_scores, 0.95);
  r.id_accuracy = id_accuracy(logits, labels, test_id_mask);
  return r;
}

}  // namespace graphood
