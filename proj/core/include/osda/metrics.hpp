#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "osda/embstore.hpp"
#include "osda/matrix.hpp"

namespace osda {

/// Maximum raw logit per row.
Vector mls_score(const Matrix& logits);

struct ClosedAccuracy {
  double acc = 0.0;
  /// NaN for closed-set classes with no sample in the truth.
  Vector per_class_recall;
};

/// Class-average recall over the closed-set samples of `truth`. Classes
/// absent from the truth do not enter the average.
ClosedAccuracy closed_acc(std::span<const std::uint32_t> pred, const LabelSet& truth);

/// P(closed > open) + P(tie)/2 over all closed/open pairs, i.e. the
/// Mann-Whitney statistic with midranks. Counting is done in integers so the
/// result is exact up to the final division.
double roc_auc(std::span<const double> scores_closed, std::span<const double> scores_open);

struct EvalReport {
  double acc = 0.0;
  double auc = 0.0;
  Vector per_class_recall;
  std::size_t n_closed = 0;
  std::size_t n_open = 0;
};

/// ACC from the argmax over closed-set samples, AUC of the MLS with closed-set
/// samples as the positive class.
EvalReport evaluate(const Matrix& logits, const LabelSet& truth);

/// Aligned "key : value" block for people.
std::string format_report(const EvalReport& r);
/// One metric=value per line.
std::string format_metric_lines(const EvalReport& r);

}  // namespace osda
