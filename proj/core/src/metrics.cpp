#include "osda/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include "osda/errors.hpp"
#include "osda/protolab.hpp"

namespace osda {

Vector mls_score(const Matrix& logits) {
  Vector out(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) out[i] = logits.row(i).maxCoeff();
  return out;
}

ClosedAccuracy closed_acc(std::span<const std::uint32_t> pred, const LabelSet& truth) {
  if (pred.size() != truth.labels.size()) {
    throw Error(Errc::CountMismatch, "predictions n=" + std::to_string(pred.size()) + ", labels n=" +
                                         std::to_string(truth.labels.size()));
  }
  const std::size_t c = truth.num_closed;
  std::vector<std::size_t> hits(c, 0), totals(c, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth.is_open(i)) continue;
    const auto y = truth.labels[i];
    ++totals[y];
    if (pred[i] == y) ++hits[y];
  }

  ClosedAccuracy out;
  out.per_class_recall = Vector::Constant(static_cast<Eigen::Index>(c), std::numeric_limits<double>::quiet_NaN());
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t j = 0; j < c; ++j) {
    if (totals[j] == 0) continue;
    out.per_class_recall[static_cast<Eigen::Index>(j)] =
        static_cast<double>(hits[j]) / static_cast<double>(totals[j]);
    sum += out.per_class_recall[static_cast<Eigen::Index>(j)];
    ++present;
  }
  if (present == 0) throw Error(Errc::NoClosedSamples, "truth contains no closed-set samples");
  out.acc = sum / static_cast<double>(present);
  return out;
}

double roc_auc(std::span<const double> scores_closed, std::span<const double> scores_open) {
  if (scores_closed.empty() || scores_open.empty()) {
    throw Error(Errc::EmptySide, "roc_auc needs closed (" + std::to_string(scores_closed.size()) + ") and open (" +
                                     std::to_string(scores_open.size()) + ") scores");
  }
  struct Item {
    double score;
    bool closed;
  };
  std::vector<Item> items;
  items.reserve(scores_closed.size() + scores_open.size());
  for (double s : scores_closed) items.push_back({s, true});
  for (double s : scores_open) items.push_back({s, false});
  for (const auto& it : items) {
    if (std::isnan(it.score)) throw Error(Errc::BadValue, "NaN score");
  }
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score < b.score; });

  // twice_wins = sum over closed of 2 * #(open strictly below) + #(open tied).
  std::uint64_t twice_wins = 0;
  std::uint64_t open_below = 0;
  for (std::size_t lo = 0; lo < items.size();) {
    std::size_t hi = lo;
    std::uint64_t closed_here = 0, open_here = 0;
    while (hi < items.size() && items[hi].score == items[lo].score) {
      (items[hi].closed ? closed_here : open_here) += 1;
      ++hi;
    }
    twice_wins += closed_here * (2 * open_below + open_here);
    open_below += open_here;
    lo = hi;
  }
  const double pairs = static_cast<double>(scores_closed.size()) * static_cast<double>(scores_open.size());
  return static_cast<double>(twice_wins) / (2.0 * pairs);
}

EvalReport evaluate(const Matrix& logits, const LabelSet& truth) {
  if (logits.rows() != truth.n()) {
    throw Error(Errc::CountMismatch, "logits n=" + std::to_string(logits.rows()) + ", labels n=" +
                                         std::to_string(truth.n()));
  }
  const auto pred = argmax_rows(logits);
  const auto acc = closed_acc(pred, truth);
  const Vector mls = mls_score(logits);

  std::vector<double> closed, open;
  for (std::size_t i = 0; i < truth.labels.size(); ++i) {
    (truth.is_open(i) ? open : closed).push_back(mls[static_cast<Eigen::Index>(i)]);
  }

  EvalReport r;
  r.acc = acc.acc;
  r.per_class_recall = acc.per_class_recall;
  r.n_closed = closed.size();
  r.n_open = open.size();
  r.auc = roc_auc(closed, open);
  return r;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string format_report(const EvalReport& r) {
  std::vector<std::pair<std::string, std::string>> rows = {
      {"acc", fmt(r.acc)},
      {"auc", fmt(r.auc)},
      {"n_closed", std::to_string(r.n_closed)},
      {"n_open", std::to_string(r.n_open)},
  };
  for (Eigen::Index j = 0; j < r.per_class_recall.size(); ++j) {
    rows.emplace_back("recall[" + std::to_string(j) + "]", fmt(r.per_class_recall[j]));
  }
  std::size_t width = 0;
  for (const auto& [k, _] : rows) width = std::max(width, k.size());
  std::string out;
  for (const auto& [k, v] : rows) out += k + std::string(width - k.size(), ' ') + " : " + v + "\n";
  return out;
}

std::string format_metric_lines(const EvalReport& r) {
  std::string out;
  out += "acc=" + fmt(r.acc) + "\n";
  out += "auc=" + fmt(r.auc) + "\n";
  out += "n_closed=" + std::to_string(r.n_closed) + "\n";
  out += "n_open=" + std::to_string(r.n_open) + "\n";
  for (Eigen::Index j = 0; j < r.per_class_recall.size(); ++j) {
    out += "recall_" + std::to_string(j) + "=" + fmt(r.per_class_recall[j]) + "\n";
  }
  return out;
}

}  // namespace osda
