#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "clfp/tensor.hpp"

namespace clfp {

// Micro-averaged tallies over every (sample, class) pair.
struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

struct ClassificationMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  // Set when the denominator was zero and the metric was reported as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
};

struct MetricReport {
  double accuracy = 0.0;              // (TP+TN)/(TP+TN+FP+FN)
  double precision = 0.0;
  double recall = 0.0;
  double auc = 0.0;
  double categorical_accuracy = 0.0;  // arg-max match rate
};

// Class k of sample n counts as predicted positive iff probs[n][k] >= threshold.
template <std::floating_point T>
ConfusionCounts confusion_counts(std::span<const BasicTensor<T>> probs,
                                 std::span<const BasicTensor<T>> targets, double threshold = 0.5);

// Accuracy, precision and recall. A zero precision/recall denominator
// yields 0 and sets the matching *_undefined flag.
ClassificationMetrics classification_metrics(const ConfusionCounts& c);

// Exact ROC area for binary labels: scores sorted descending, tied scores
// handled as a single threshold step, trapezoidal integration. Equals the
// Mann-Whitney U statistic over P*N with ties counted as 1/2.
// Throws DataError when all labels are equal.
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Micro-averaged AUC: all (sample, class) scores pooled against one-hot labels.
template <std::floating_point T>
double roc_auc(std::span<const BasicTensor<T>> probs, std::span<const BasicTensor<T>> targets);

// Fraction of samples whose arg-max class matches the one-hot target.
template <std::floating_point T>
double categorical_accuracy(std::span<const BasicTensor<T>> probs,
                            std::span<const BasicTensor<T>> targets);

// All of the above in one report (threshold 0.5).
template <std::floating_point T>
MetricReport evaluate_predictions(std::span<const BasicTensor<T>> probs,
                                  std::span<const BasicTensor<T>> targets);

}  // namespace clfp
