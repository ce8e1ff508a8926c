#include "clfp/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "clfp/errors.hpp"
#include "clfp/model.hpp"

namespace clfp {

namespace {

template <std::floating_point T>
void check_pairs(std::span<const BasicTensor<T>> probs, std::span<const BasicTensor<T>> targets) {
  if (probs.size() != targets.size()) {
    throw DataError("metrics: " + std::to_string(probs.size()) + " predictions but " +
                    std::to_string(targets.size()) + " targets");
  }
  for (std::size_t n = 0; n < probs.size(); ++n) {
    require_same_shape(probs[n].shape(), targets[n].shape(), "metrics");
  }
}

double ratio(std::uint64_t num, std::uint64_t den, bool& undefined) {
  undefined = den == 0;
  return undefined ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

template <std::floating_point T>
ConfusionCounts confusion_counts(std::span<const BasicTensor<T>> probs,
                                 std::span<const BasicTensor<T>> targets, double threshold) {
  check_pairs(probs, targets);
  ConfusionCounts c;
  for (std::size_t n = 0; n < probs.size(); ++n) {
    for (std::size_t k = 0; k < probs[n].size(); ++k) {
      const bool predicted = static_cast<double>(probs[n][k]) >= threshold;
      const bool actual = targets[n][k] > T{0.5};
      if (predicted && actual) ++c.tp;
      else if (predicted) ++c.fp;
      else if (actual) ++c.fn;
      else ++c.tn;
    }
  }
  return c;
}

ClassificationMetrics classification_metrics(const ConfusionCounts& c) {
  ClassificationMetrics m;
  bool unused = false;
  m.accuracy = ratio(c.tp + c.tn, c.total(), unused);
  m.precision = ratio(c.tp, c.tp + c.fp, m.precision_undefined);
  m.recall = ratio(c.tp, c.tp + c.fn, m.recall_undefined);
  return m;
}

double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw DataError("roc_auc: " + std::to_string(scores.size()) + " scores but " +
                    std::to_string(labels.size()) + " labels");
  }
  const auto positives =
      static_cast<std::uint64_t>(std::count_if(labels.begin(), labels.end(), [](auto l) { return l != 0; }));
  const std::uint64_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw DataError("roc_auc: undefined AUC, pool has " + std::to_string(positives) +
                    " positives and " + std::to_string(negatives) + " negatives");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  // Walk thresholds from high to low; each block of tied scores is one step.
  // Twice the trapezoid area stays an exact integer.
  std::uint64_t tp = 0, fp = 0;
  unsigned __int128 twice_area = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t dtp = 0, dfp = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] != 0 ? dtp : dfp) += 1;
      ++j;
    }
    twice_area += static_cast<unsigned __int128>(dfp) * (2 * tp + dtp);
    tp += dtp;
    fp += dfp;
    i = j;
  }
  return static_cast<double>(twice_area) /
         (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

template <std::floating_point T>
double roc_auc(std::span<const BasicTensor<T>> probs, std::span<const BasicTensor<T>> targets) {
  check_pairs(probs, targets);
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  for (std::size_t n = 0; n < probs.size(); ++n) {
    for (std::size_t k = 0; k < probs[n].size(); ++k) {
      scores.push_back(static_cast<double>(probs[n][k]));
      labels.push_back(targets[n][k] > T{0.5} ? 1 : 0);
    }
  }
  return roc_auc(std::span<const double>(scores), std::span<const std::uint8_t>(labels));
}

template <std::floating_point T>
double categorical_accuracy(std::span<const BasicTensor<T>> probs,
                            std::span<const BasicTensor<T>> targets) {
  check_pairs(probs, targets);
  if (probs.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t n = 0; n < probs.size(); ++n) {
    if (argmax(probs[n]) == argmax(targets[n])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(probs.size());
}

template <std::floating_point T>
MetricReport evaluate_predictions(std::span<const BasicTensor<T>> probs,
                                  std::span<const BasicTensor<T>> targets) {
  const auto cm = classification_metrics(confusion_counts(probs, targets));
  MetricReport r;
  r.accuracy = cm.accuracy;
  r.precision = cm.precision;
  r.recall = cm.recall;
  r.auc = roc_auc(probs, targets);
  r.categorical_accuracy = categorical_accuracy(probs, targets);
  return r;
}

#define CLFP_INSTANTIATE_METRICS(T)                                                              \
  template ConfusionCounts confusion_counts(std::span<const BasicTensor<T>>,                     \
                                            std::span<const BasicTensor<T>>, double);            \
  template double roc_auc(std::span<const BasicTensor<T>>, std::span<const BasicTensor<T>>);     \
  template double categorical_accuracy(std::span<const BasicTensor<T>>,                          \
                                       std::span<const BasicTensor<T>>);                         \
  template MetricReport evaluate_predictions(std::span<const BasicTensor<T>>,                    \
                                             std::span<const BasicTensor<T>>);

CLFP_INSTANTIATE_METRICS(float)
CLFP_INSTANTIATE_METRICS(double)

}  // namespace clfp
