#ifndef MDM_EVALUATION_HPP
#define MDM_EVALUATION_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdm/types.hpp"

namespace mdm {

/// A metric whose value is undefined on the given input (no support, one class).
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct MaeResult {
  double absolute = 0.0;
  double signed_mean = 0.0;
  std::size_t support = 0;
};

/// Relative error over true edges: mean of |W - What| / W and of (W - What) / W.
inline MaeResult mae_influence(const InfluenceTensor& truth, const InfluenceTensor& estimate) {
  if (!truth.same_shape(estimate))
    throw DataError("influence shapes differ: truth (" + std::to_string(truth.n_nodes()) + "," +
                    std::to_string(truth.n_layers()) + ") vs estimate (" + std::to_string(estimate.n_nodes()) +
                    "," + std::to_string(estimate.n_layers()) + ")");
  MaeResult r;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double w = truth.raw()[i];
    if (!(w > 0.0)) continue;
    const double rel = (w - estimate.raw()[i]) / w;
    r.absolute += std::abs(rel);
    r.signed_mean += rel;
    ++r.support;
  }
  if (r.support == 0) throw UndefinedMetric("mae_influence: truth has no edges");
  r.absolute /= static_cast<double>(r.support);
  r.signed_mean /= static_cast<double>(r.support);
  return r;
}

/// Estimated influence placed on entries that are not true edges.
inline double false_edge_mass(const InfluenceTensor& truth, const InfluenceTensor& estimate) {
  if (!truth.same_shape(estimate)) throw DataError("influence shapes differ");
  double mass = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (!(truth.raw()[i] > 0.0)) mass += estimate.raw()[i];
  return mass;
}

/// Total absolute error: sum of |a_i - b_i|.
inline double tae(std::span<const double> truth, std::span<const double> estimate) {
  if (truth.size() != estimate.size())
    throw DataError("tae: length " + std::to_string(truth.size()) + " vs " + std::to_string(estimate.size()));
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) sum += std::abs(truth[i] - estimate[i]);
  return sum;
}

inline double tae(const NodeLayerTable& truth, const NodeLayerTable& estimate) {
  if (truth.n_nodes() != estimate.n_nodes() || truth.n_layers() != estimate.n_layers())
    throw DataError("tae: table shapes differ");
  return tae(truth.raw(), estimate.raw());
}

namespace detail {

inline void check_lengths(const ParentAssignment& a, const ParentAssignment& b) {
  if (a.size() != b.size())
    throw DataError("assignment lengths differ: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
}

}  // namespace detail

/// Fraction of events with the correct parent; spontaneous counts as its own
/// parent regardless of layer.
inline double parent_accuracy(const ParentAssignment& truth, const ParentAssignment& inferred) {
  detail::check_lengths(truth, inferred);
  if (truth.empty()) return 1.0;
  std::size_t hits = 0;
  for (std::size_t m = 0; m < truth.size(); ++m) hits += truth[m].parent == inferred[m].parent;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

/// Fraction of events with the correct parent and layer.
inline double parent_channel_accuracy(const ParentAssignment& truth, const ParentAssignment& inferred) {
  detail::check_lengths(truth, inferred);
  if (truth.empty()) return 1.0;
  std::size_t hits = 0;
  for (std::size_t m = 0; m < truth.size(); ++m) hits += truth[m] == inferred[m];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

/// Area under the ROC curve of `scores` against binary `labels`, by the
/// Mann-Whitney statistic with midranks for ties.
inline double auc(std::span<const double> scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw DataError("auc: score and label counts differ");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]]) {
        positive_rank_sum += midrank;
        ++positives;
      }
    i = j;
  }
  const std::size_t negatives = scores.size() - positives;
  if (positives == 0 || negatives == 0) throw UndefinedMetric("auc: truth contains a single class");
  const double p = static_cast<double>(positives), n = static_cast<double>(negatives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

/// AUC over all off-diagonal (u, v, k) entries.
inline double edge_auc(const MultiplexAdjacency& truth, const Tensor3<double>& edge_probability) {
  if (truth.n_nodes() != edge_probability.n_nodes() || truth.n_layers() != edge_probability.n_layers())
    throw DataError("edge_auc: shapes differ");
  std::vector<double> scores;
  std::vector<bool> labels;
  for (std::size_t u = 0; u < truth.n_nodes(); ++u)
    for (std::size_t v = 0; v < truth.n_nodes(); ++v) {
      if (u == v) continue;
      for (std::size_t k = 0; k < truth.n_layers(); ++k) {
        scores.push_back(edge_probability(u, v, k));
        labels.push_back(truth(u, v, k) != 0);
      }
    }
  return auc(scores, labels);
}

/// Parent-and-layer accuracy of each stored assignment.
inline std::vector<double> convergence_trace(const std::vector<ParentAssignment>& trace,
                                             const ParentAssignment& truth) {
  std::vector<double> series;
  series.reserve(trace.size());
  for (const auto& a : trace) series.push_back(parent_channel_accuracy(truth, a));
  return series;
}

struct EvalReport {
  std::optional<MaeResult> mae;
  double false_edge_mass = 0.0;
  double tae_influence = 0.0;
  double tae_background = 0.0;
  double tae_authoritative = 0.0;
  double tae_susceptible = 0.0;
  std::optional<double> parent_accuracy;
  std::optional<double> parent_channel_accuracy;
  std::optional<double> edge_auc;
};

}  // namespace mdm

#endif  // MDM_EVALUATION_HPP
