#include "qmvit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace qmvit {

long long ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), 0LL);
}

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& labels,
                          int n_classes) {
  if (preds.size() != labels.size()) {
    throw std::invalid_argument("confusion: prediction/label count mismatch");
  }
  ConfusionMatrix cm(n_classes);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int p = preds[i], t = labels[i];
    if (p < 0 || p >= n_classes || t < 0 || t >= n_classes) {
      throw std::invalid_argument("confusion: class id out of range");
    }
    ++cm.at(t, p);
  }
  return cm;
}

namespace {

struct ClassRates {
  double precision = 0.0, recall = 0.0, f1 = 0.0, specificity = 0.0, balanced = 0.0;
  long long support = 0;
  bool zero_denominator = false;
};

ClassRates class_rates(const ConfusionMatrix& cm, int c, long long n) {
  long long tp = cm.at(c, c), fp = 0, fn = 0;
  for (int k = 0; k < cm.n_classes; ++k) {
    if (k == c) continue;
    fp += cm.at(k, c);
    fn += cm.at(c, k);
  }
  const long long tn = n - tp - fp - fn;
  ClassRates r;
  r.support = tp + fn;
  auto rate = [&r](long long num, long long den) {
    if (den == 0) {
      r.zero_denominator = true;
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  r.precision = rate(tp, tp + fp);
  r.recall = rate(tp, tp + fn);
  r.specificity = rate(tn, tn + fp);
  if (r.precision + r.recall == 0.0) {
    r.f1 = 0.0;
    r.zero_denominator = true;
  } else {
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  }
  r.balanced = 0.5 * (r.recall + r.specificity);
  return r;
}

}  // namespace

MetricReport basic_metrics(const ConfusionMatrix& cm) {
  const long long n = cm.total();
  if (cm.n_classes < 2 || n == 0) {
    throw std::invalid_argument("basic_metrics: need >= 2 classes and >= 1 sample");
  }
  MetricReport rep;
  long long diag = 0;
  for (int c = 0; c < cm.n_classes; ++c) diag += cm.at(c, c);
  rep.accuracy = static_cast<double>(diag) / static_cast<double>(n);
  rep.mcc = mcc(cm);

  int included = 0;
  long long support_sum = 0;
  for (int c = 0; c < cm.n_classes; ++c) {
    const ClassRates r = class_rates(cm, c, n);
    if (r.support == 0) {
      rep.zero_support_classes = true;  // no true samples: skip in both means
      continue;
    }
    rep.zero_denominator_rates = rep.zero_denominator_rates || r.zero_denominator;
    ++included;
    support_sum += r.support;
    rep.precision_macro += r.precision;
    rep.recall_macro += r.recall;
    rep.f1_macro += r.f1;
    rep.specificity_macro += r.specificity;
    rep.balanced_accuracy_macro += r.balanced;
    const double w = static_cast<double>(r.support);
    rep.precision_weighted += w * r.precision;
    rep.recall_weighted += w * r.recall;
    rep.f1_weighted += w * r.f1;
    rep.specificity_weighted += w * r.specificity;
    rep.balanced_accuracy_weighted += w * r.balanced;
  }
  rep.precision_macro /= included;
  rep.recall_macro /= included;
  rep.f1_macro /= included;
  rep.specificity_macro /= included;
  rep.balanced_accuracy_macro /= included;
  rep.precision_weighted /= static_cast<double>(support_sum);
  rep.recall_weighted /= static_cast<double>(support_sum);
  rep.f1_weighted /= static_cast<double>(support_sum);
  rep.specificity_weighted /= static_cast<double>(support_sum);
  rep.balanced_accuracy_weighted /= static_cast<double>(support_sum);
  return rep;
}

double mcc(const ConfusionMatrix& cm) {
  const int c = cm.n_classes;
  const double n = static_cast<double>(cm.total());
  double trace = 0.0;
  std::vector<double> true_sum(static_cast<std::size_t>(c), 0.0);
  std::vector<double> pred_sum(static_cast<std::size_t>(c), 0.0);
  for (int t = 0; t < c; ++t) {
    trace += static_cast<double>(cm.at(t, t));
    for (int p = 0; p < c; ++p) {
      true_sum[static_cast<std::size_t>(t)] += static_cast<double>(cm.at(t, p));
      pred_sum[static_cast<std::size_t>(p)] += static_cast<double>(cm.at(t, p));
    }
  }
  double dot = 0.0, t2 = 0.0, p2 = 0.0;
  for (int k = 0; k < c; ++k) {
    dot += true_sum[static_cast<std::size_t>(k)] * pred_sum[static_cast<std::size_t>(k)];
    t2 += true_sum[static_cast<std::size_t>(k)] * true_sum[static_cast<std::size_t>(k)];
    p2 += pred_sum[static_cast<std::size_t>(k)] * pred_sum[static_cast<std::size_t>(k)];
  }
  const double num = n * trace - dot;
  const double den = std::sqrt((n * n - p2) * (n * n - t2));
  return den == 0.0 ? 0.0 : num / den;  // degenerate marginals carry no signal
}

namespace {

struct Sweep {
  // cumulative positives/negatives after each tie group, highest scores first
  std::vector<double> tp, fp;
  double pos = 0.0, neg = 0.0;
};

Sweep score_sweep(const std::vector<ScoredPrediction>& scored, int cls) {
  std::vector<std::pair<double, bool>> pts;
  pts.reserve(scored.size());
  for (const ScoredPrediction& s : scored) {
    if (cls < 0 || cls >= static_cast<int>(s.probs.size())) {
      throw std::invalid_argument("auc: class id out of range");
    }
    pts.emplace_back(s.probs[static_cast<std::size_t>(cls)], s.true_label == cls);
  }
  std::sort(pts.begin(), pts.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  Sweep sw;
  double tp = 0.0, fp = 0.0;
  std::size_t i = 0;
  while (i < pts.size()) {
    std::size_t j = i;
    while (j < pts.size() && pts[j].first == pts[i].first) {
      if (pts[j].second) {
        tp += 1.0;
      } else {
        fp += 1.0;
      }
      ++j;
    }
    sw.tp.push_back(tp);
    sw.fp.push_back(fp);
    i = j;
  }
  sw.pos = tp;
  sw.neg = fp;
  return sw;
}

}  // namespace

double roc_auc(const std::vector<ScoredPrediction>& scored, int cls) {
  const Sweep sw = score_sweep(scored, cls);
  if (sw.pos == 0.0 || sw.neg == 0.0) {
    throw std::invalid_argument("roc_auc: class needs positives and negatives");
  }
  double area = 0.0, prev_tp = 0.0, prev_fp = 0.0;
  for (std::size_t k = 0; k < sw.tp.size(); ++k) {
    area += (sw.fp[k] - prev_fp) * (sw.tp[k] + prev_tp) * 0.5;
    prev_tp = sw.tp[k];
    prev_fp = sw.fp[k];
  }
  return area / (sw.pos * sw.neg);
}

double pr_auc(const std::vector<ScoredPrediction>& scored, int cls) {
  const Sweep sw = score_sweep(scored, cls);
  if (sw.pos == 0.0) throw std::invalid_argument("pr_auc: class needs positive samples");
  // anchored at recall 0 with the first group's precision
  double area = 0.0;
  double prev_recall = 0.0;
  double prev_precision = sw.tp[0] / (sw.tp[0] + sw.fp[0]);
  for (std::size_t k = 0; k < sw.tp.size(); ++k) {
    const double recall = sw.tp[k] / sw.pos;
    const double precision = sw.tp[k] / (sw.tp[k] + sw.fp[k]);
    area += (recall - prev_recall) * (precision + prev_precision) * 0.5;
    prev_recall = recall;
    prev_precision = precision;
  }
  return area;
}

namespace {

double auc_macro(const std::vector<ScoredPrediction>& scored, int n_classes, bool roc) {
  if (scored.empty()) throw std::invalid_argument("auc: no scored predictions");
  double sum = 0.0;
  int used = 0;
  for (int c = 0; c < n_classes; ++c) {
    long long pos = 0;
    for (const ScoredPrediction& s : scored) pos += s.true_label == c ? 1 : 0;
    const long long neg = static_cast<long long>(scored.size()) - pos;
    if (pos == 0 || (roc && neg == 0)) continue;  // curve undefined: skip
    sum += roc ? roc_auc(scored, c) : pr_auc(scored, c);
    ++used;
  }
  if (used == 0) throw std::invalid_argument("auc: no class has a defined curve");
  return sum / used;
}

}  // namespace

double roc_auc_macro(const std::vector<ScoredPrediction>& scored, int n_classes) {
  return auc_macro(scored, n_classes, true);
}

double pr_auc_macro(const std::vector<ScoredPrediction>& scored, int n_classes) {
  return auc_macro(scored, n_classes, false);
}

MetricReport full_metrics(const ConfusionMatrix& cm,
                          const std::vector<ScoredPrediction>& scored) {
  MetricReport rep = basic_metrics(cm);
  rep.roc_auc_macro = roc_auc_macro(scored, cm.n_classes);
  rep.pr_auc_macro = pr_auc_macro(scored, cm.n_classes);
  rep.has_auc = true;
  return rep;
}

EdibilityReport edibility_collapse(const std::vector<int>& preds, const std::vector<int>& labels,
                                   const std::vector<bool>& edible_map) {
  if (preds.size() != labels.size() || preds.empty()) {
    throw std::invalid_argument("edibility_collapse: bad prediction/label lists");
  }
  EdibilityReport rep;
  long long species_hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int p = preds[i], t = labels[i];
    if (p < 0 || t < 0 || p >= static_cast<int>(edible_map.size()) ||
        t >= static_cast<int>(edible_map.size())) {
      throw std::invalid_argument("edibility_collapse: species id outside the map");
    }
    species_hits += p == t ? 1 : 0;
    ++rep.cm.at(edible_map[static_cast<std::size_t>(t)] ? 1 : 0,
                edible_map[static_cast<std::size_t>(p)] ? 1 : 0);
  }
  rep.binary = basic_metrics(rep.cm);
  rep.toxic_predicted_edible = rep.cm.at(0, 1);
  rep.edibility_accuracy = rep.binary.accuracy;
  rep.species_accuracy = static_cast<double>(species_hits) / static_cast<double>(preds.size());
  return rep;
}

std::string confusion_to_csv(const ConfusionMatrix& cm,
                             const std::vector<std::string>& class_names) {
  if (static_cast<int>(class_names.size()) != cm.n_classes) {
    throw std::invalid_argument("confusion_to_csv: class name count mismatch");
  }
  std::ostringstream out;
  out << "true\\pred";
  for (const std::string& name : class_names) out << "," << name;
  out << "\n";
  for (int t = 0; t < cm.n_classes; ++t) {
    out << class_names[static_cast<std::size_t>(t)];
    for (int p = 0; p < cm.n_classes; ++p) out << "," << cm.at(t, p);
    out << "\n";
  }
  return out.str();
}

std::string metric_report_to_json(const MetricReport& report) {
  nlohmann::ordered_json j;
  j["accuracy"] = report.accuracy;
  j["precision_macro"] = report.precision_macro;
  j["precision_weighted"] = report.precision_weighted;
  j["recall_macro"] = report.recall_macro;
  j["recall_weighted"] = report.recall_weighted;
  j["f1_macro"] = report.f1_macro;
  j["f1_weighted"] = report.f1_weighted;
  j["specificity_macro"] = report.specificity_macro;
  j["specificity_weighted"] = report.specificity_weighted;
  j["balanced_accuracy_macro"] = report.balanced_accuracy_macro;
  j["balanced_accuracy_weighted"] = report.balanced_accuracy_weighted;
  j["mcc"] = report.mcc;
  if (report.has_auc) {
    j["roc_auc_macro"] = report.roc_auc_macro;
    j["pr_auc_macro"] = report.pr_auc_macro;
  }
  j["zero_support_classes"] = report.zero_support_classes;
  j["zero_denominator_rates"] = report.zero_denominator_rates;
  return j.dump(2);
}

}  // namespace qmvit
