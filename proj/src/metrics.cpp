#include "cmta/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "cmta/errors.hpp"

namespace cmta {

namespace {

void require_finite(std::span<const ScoredPrediction> preds) {
  for (const auto& p : preds) {
    if (!std::isfinite(p.score)) throw UndefinedMetric("score for " + p.clip_id + " is not finite");
  }
}

std::vector<std::size_t> order_by_score_desc(std::span<const ScoredPrediction> preds) {
  std::vector<std::size_t> idx(preds.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });
  return idx;
}

}  // namespace

double auc(std::span<const ScoredPrediction> preds) {
  require_finite(preds);
  const auto idx = order_by_score_desc(preds);
  // Walk tie groups from the highest score down; each positive beats every
  // negative in lower groups and ties half of those in its own group.
  double pos = 0, neg = 0, wins = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    double group_pos = 0, group_neg = 0;
    while (j < idx.size() && preds[idx[j]].score == preds[idx[i]].score) {
      (preds[idx[j]].label == Label::kFake ? group_pos : group_neg) += 1;
      ++j;
    }
    // Negatives in this group lose to all positives seen in higher groups.
    wins += group_neg * pos + 0.5 * group_pos * group_neg;
    pos += group_pos;
    neg += group_neg;
    i = j;
  }
  if (pos == 0 || neg == 0) throw UndefinedMetric("AUC needs both classes present");
  return wins / (pos * neg);
}

double average_precision(std::span<const ScoredPrediction> preds) {
  require_finite(preds);
  const auto idx = order_by_score_desc(preds);
  double total_pos = 0;
  for (const auto& p : preds) total_pos += p.label == Label::kFake ? 1 : 0;
  if (total_pos == 0) throw UndefinedMetric("average precision needs at least one positive");
  double tp = 0, fp = 0, prev_recall = 0, ap = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && preds[idx[j]].score == preds[idx[i]].score) {
      (preds[idx[j]].label == Label::kFake ? tp : fp) += 1;
      ++j;
    }
    const double recall = tp / total_pos;
    const double precision = tp / (tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

double accuracy(std::span<const ScoredPrediction> preds, double threshold) {
  if (preds.empty()) throw UndefinedMetric("accuracy of an empty prediction set");
  require_finite(preds);
  std::size_t correct = 0;
  for (const auto& p : preds) correct += (p.score >= threshold) == (p.label == Label::kFake) ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

SubsetReport per_subset_report(std::span<const SubsetPrediction> preds) {
  SubsetReport report;
  std::vector<std::string> order;
  std::map<std::string, std::vector<ScoredPrediction>> groups;
  for (const auto& p : preds) {
    auto [it, inserted] = groups.try_emplace(p.subset);
    if (inserted) order.push_back(p.subset);
    it->second.push_back(p.prediction);
  }
  auto guarded = [&](const std::string& subset, const char* metric, auto&& fn) -> std::optional<double> {
    try {
      return fn();
    } catch (const UndefinedMetric& e) {
      report.warnings.push_back(subset + ": " + metric + " undefined (" + e.what() + ")");
      return std::nullopt;
    }
  };
  for (const auto& name : order) {
    const auto& g = groups[name];
    SubsetMetrics row{name, {}, {}, {}};
    row.ap = guarded(name, "ap", [&] { return average_precision(g); });
    row.auc = guarded(name, "auc", [&] { return auc(g); });
    row.acc = guarded(name, "acc", [&] { return accuracy(g); });
    report.rows.push_back(std::move(row));
  }
  auto mean_of = [&](std::optional<double> SubsetMetrics::*field) -> std::optional<double> {
    double total = 0;
    std::size_t n = 0;
    for (const auto& r : report.rows) {
      if (r.*field) {
        total += *(r.*field);
        ++n;
      }
    }
    if (n == 0) return std::nullopt;
    return total / static_cast<double>(n);
  };
  report.mean = {"mean", mean_of(&SubsetMetrics::ap), mean_of(&SubsetMetrics::auc), mean_of(&SubsetMetrics::acc)};
  return report;
}

std::string render_report_csv(const SubsetReport& report) {
  auto cell = [](const std::optional<double>& v) -> std::string {
    if (!v) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return buf;
  };
  std::string out = "subset,ap,auc,acc\n";
  auto line = [&](const SubsetMetrics& m) {
    out += m.subset + "," + cell(m.ap) + "," + cell(m.auc) + "," + cell(m.acc) + "\n";
  };
  for (const auto& r : report.rows) line(r);
  line(report.mean);
  return out;
}

}  // namespace cmta
