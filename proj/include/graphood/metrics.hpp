#pragma once

#include <vector>

#include "graphood/graph.hpp"
#include "graphood/matrix.hpp"

namespace graphood {

struct DetectionResult {
  double auroc = 0.0;
  double aupr = 0.0;
  double fpr95 = 0.0;
  double id_accuracy = 0.0;
  int n_id = 0;
  int n_ood = 0;
  double gamma = 0.0;  // threshold used for fpr95
};

// P(random ID score > random OOD score), ties counted 1/2. Rank-based,
// O(n log n).
double auroc(const std::vector<double>& id_scores, const std::vector<double>& ood_scores);

// Area under the precision-recall curve with ID as the positive class;
// step-wise interpolation over descending score thresholds, tied scores
// processed as one threshold.
double aupr(const std::vector<double>& id_scores, const std::vector<double>& ood_scores);

// Fraction of OOD scores at or above the threshold that keeps `tpr` of the
// ID scores.
double fpr_at_tpr(const std::vector<double>& id_scores, const std::vector<double>& ood_scores,
                  double tpr = 0.95);

// Fraction of masked nodes whose argmax logit equals the label; argmax ties
// break toward the lowest class index.
double id_accuracy(const Matrix& logits, const std::vector<int>& labels, const Mask& mask);

DetectionResult evaluate_detection(const std::vector<double>& id_scores,
                                   const std::vector<double>& ood_scores, const Matrix& logits,
                                   const std::vector<int>& labels, const Mask& test_id_mask);

}  // namespace graphood
