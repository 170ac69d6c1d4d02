#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cmta/clip.hpp"

namespace cmta {

struct ScoredPrediction {
  std::string clip_id;
  double score = 0;  // predicted p_fake
  Label label = Label::kReal;
};

// Mann–Whitney AUC: (#{s_pos > s_neg} + ½·#ties) / (P·N).
// Throws UndefinedMetric unless both classes are present.
double auc(std::span<const ScoredPrediction> preds);

// Average precision over distinct-score thresholds (equal scores form one
// threshold): Σ (R_n − R_{n−1})·P_n. Throws UndefinedMetric without positives.
double average_precision(std::span<const ScoredPrediction> preds);

// Fraction with (score ≥ threshold) == (label is fake). Empty input throws.
double accuracy(std::span<const ScoredPrediction> preds, double threshold = 0.5);

struct SubsetPrediction {
  std::string subset;
  ScoredPrediction prediction;
};

struct SubsetMetrics {
  std::string subset;
  std::optional<double> ap, auc, acc;
};

struct SubsetReport {
  std::vector<SubsetMetrics> rows;  // first-appearance order of subsets
  SubsetMetrics mean;               // unweighted over defined cells
  std::vector<std::string> warnings;
};

SubsetReport per_subset_report(std::span<const SubsetPrediction> preds);
// `subset,ap,auc,acc` header, one row per subset, final `mean` row; undefined
// cells are left blank.
std::string render_report_csv(const SubsetReport& report);

}  // namespace cmta
