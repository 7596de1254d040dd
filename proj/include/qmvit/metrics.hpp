#pragma once

#include <string>
#include <vector>

namespace qmvit {

// rows = true class, columns = predicted class
struct ConfusionMatrix {
  int n_classes = 0;
  std::vector<long long> counts;  // row-major C x C

  explicit ConfusionMatrix(int c = 0)
      : n_classes(c), counts(static_cast<std::size_t>(c) * static_cast<std::size_t>(c), 0) {}
  long long at(int t, int p) const {
    return counts[static_cast<std::size_t>(t * n_classes + p)];
  }
  long long& at(int t, int p) { return counts[static_cast<std::size_t>(t * n_classes + p)]; }
  long long total() const;
};

struct ScoredPrediction {
  std::vector<double> probs;  // nonnegative, sums to 1 within 1e-6
  int true_label = 0;
};

struct MetricReport {
  double accuracy = 0.0;
  double precision_macro = 0.0, precision_weighted = 0.0;
  double recall_macro = 0.0, recall_weighted = 0.0;
  double f1_macro = 0.0, f1_weighted = 0.0;
  double specificity_macro = 0.0, specificity_weighted = 0.0;
  double balanced_accuracy_macro = 0.0, balanced_accuracy_weighted = 0.0;
  double mcc = 0.0;
  double roc_auc_macro = 0.0, pr_auc_macro = 0.0;
  bool has_auc = false;                 // AUCs need scored predictions
  bool zero_support_classes = false;    // classes with no true samples were
                                        // excluded from the macro averages
  bool zero_denominator_rates = false;  // some rate had an empty denominator
                                        // and contributed 0
};

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& labels,
                          int n_classes);

// Per-class one-vs-rest rates averaged two ways: macro skips classes without
// true samples; weighted multiplies by class support.
MetricReport basic_metrics(const ConfusionMatrix& cm);

// Covariance-form multi-class MCC; an empty denominator yields 0.
double mcc(const ConfusionMatrix& cm);

// One-vs-rest trapezoidal sweeps; samples with equal scores move as one tie
// group. A class with no positives or no negatives has no defined curve: the
// per-class calls throw and the macro aggregates skip such classes.
double roc_auc(const std::vector<ScoredPrediction>& scored, int cls);
double pr_auc(const std::vector<ScoredPrediction>& scored, int cls);
double roc_auc_macro(const std::vector<ScoredPrediction>& scored, int n_classes);
double pr_auc_macro(const std::vector<ScoredPrediction>& scored, int n_classes);

// basic_metrics plus the AUC aggregates.
MetricReport full_metrics(const ConfusionMatrix& cm,
                          const std::vector<ScoredPrediction>& scored);

struct EdibilityReport {
  MetricReport binary;               // over {toxic = 0, edible = 1}
  ConfusionMatrix cm{2};
  long long toxic_predicted_edible = 0;  // the dangerous failure mode
  double edibility_accuracy = 0.0;
  double species_accuracy = 0.0;
};

// Projects species predictions/labels through the per-species edibility map
// and evaluates the induced binary problem.
EdibilityReport edibility_collapse(const std::vector<int>& preds, const std::vector<int>& labels,
                                   const std::vector<bool>& edible_map);

// CSV: header row of predicted-class names, one row per true class.
std::string confusion_to_csv(const ConfusionMatrix& cm,
                             const std::vector<std::string>& class_names);

// Flat JSON object with a fixed key order.
std::string metric_report_to_json(const MetricReport& report);

}  // namespace qmvit
