#ifndef MDM_TYPES_HPP
#define MDM_TYPES_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdm {

// Error taxonomy. Contract violations by the caller use std::invalid_argument;
// malformed or inconsistent data is a DataError; degenerate numerical
// situations (zero-support draws, runaway simulations) are NumericalError.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kSimplexTolerance = 1e-9;
inline constexpr double kDensityFloor = 1e-300;

inline double floored_log(double x) { return std::log(x < kDensityFloor ? kDensityFloor : x); }

inline bool is_simplex(const std::vector<double>& v, double tol = kSimplexTolerance) {
  if (v.empty()) return false;
  double sum = 0.0;
  for (double x : v) {
    if (!(x >= 0.0) || !std::isfinite(x)) return false;
    sum += x;
  }
  return std::abs(sum - 1.0) <= tol;
}

/// Dense (source, target, layer) tensor, row-major over (u, v, k).
template <typename T>
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t n_nodes, std::size_t n_layers, T fill = T{})
      : n_(n_nodes), k_(n_layers), data_(n_nodes * n_nodes * n_layers, fill) {}

  std::size_t n_nodes() const { return n_; }
  std::size_t n_layers() const { return k_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t u, std::size_t v, std::size_t k) { return data_[(u * n_ + v) * k_ + k]; }
  const T& operator()(std::size_t u, std::size_t v, std::size_t k) const {
    return data_[(u * n_ + v) * k_ + k];
  }

  std::vector<T>& raw() { return data_; }
  const std::vector<T>& raw() const { return data_; }

  bool same_shape(const Tensor3& other) const { return n_ == other.n_ && k_ == other.k_; }
  bool operator==(const Tensor3&) const = default;

 private:
  std::size_t n_ = 0;
  std::size_t k_ = 0;
  std::vector<T> data_;
};

/// Per-(node, layer) table of reals.
class NodeLayerTable {
 public:
  NodeLayerTable() = default;
  NodeLayerTable(std::size_t n_nodes, std::size_t n_layers, double fill = 0.0)
      : n_(n_nodes), k_(n_layers), data_(n_nodes * n_layers, fill) {}

  std::size_t n_nodes() const { return n_; }
  std::size_t n_layers() const { return k_; }

  double& operator()(std::size_t u, std::size_t k) { return data_[u * k_ + k]; }
  double operator()(std::size_t u, std::size_t k) const { return data_[u * k_ + k]; }

  std::vector<double> row(std::size_t u) const {
    return {data_.begin() + static_cast<std::ptrdiff_t>(u * k_),
            data_.begin() + static_cast<std::ptrdiff_t>((u + 1) * k_)};
  }
  void set_row(std::size_t u, const std::vector<double>& values) {
    for (std::size_t k = 0; k < k_; ++k) data_[u * k_ + k] = values[k];
  }

  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  bool same_shape(const NodeLayerTable& other) const { return n_ == other.n_ && k_ == other.k_; }
  bool operator==(const NodeLayerTable&) const = default;

 private:
  std::size_t n_ = 0;
  std::size_t k_ = 0;
  std::vector<double> data_;
};

struct ObservationWindow {
  double length = 1.0;
};

/// One marked point: a post or repost on `node` at `time` carrying a topic simplex.
struct Event {
  double time = 0.0;
  std::size_t node = 0;
  std::vector<double> topic;

  bool operator==(const Event&) const = default;
};

/// Latent attribution of an event: spontaneous on a layer, or triggered by an
/// earlier event through a layer.
struct ParentLabel {
  static constexpr std::size_t kSpontaneous = std::numeric_limits<std::size_t>::max();

  std::size_t parent = kSpontaneous;
  std::size_t layer = 0;

  static ParentLabel spontaneous(std::size_t layer) { return {kSpontaneous, layer}; }
  static ParentLabel triggered(std::size_t parent, std::size_t layer) { return {parent, layer}; }

  bool is_spontaneous() const { return parent == kSpontaneous; }
  bool operator==(const ParentLabel&) const = default;
};

using ParentAssignment = std::vector<ParentLabel>;

struct EventLog {
  std::size_t n_nodes = 0;
  std::size_t n_layers = 0;
  ObservationWindow window;
  std::vector<Event> events;
  std::optional<ParentAssignment> ground_truth;

  std::size_t size() const { return events.size(); }
  bool empty() const { return events.empty(); }
};

using MultiplexAdjacency = Tensor3<std::uint8_t>;
using InfluenceTensor = Tensor3<double>;

struct NodeParams {
  NodeLayerTable background;     // lambda(u, k), events per second
  NodeLayerTable authoritative;  // A_u, one simplex per row
  NodeLayerTable susceptible;    // S_u, one simplex per row
  NodeLayerTable topic_prior;    // Dirichlet concentration of spontaneous topics

  bool operator==(const NodeParams&) const = default;
};

struct LayerActivity {
  std::vector<double> pi;

  bool operator==(const LayerActivity&) const = default;
};

struct MultiplexParams {
  std::size_t n_nodes = 0;
  std::size_t n_layers = 0;
  MultiplexAdjacency adjacency;
  InfluenceTensor influence;
  NodeParams nodes;
  LayerActivity layer_activity;

  static MultiplexParams zeros(std::size_t n_nodes, std::size_t n_layers) {
    MultiplexParams p;
    p.n_nodes = n_nodes;
    p.n_layers = n_layers;
    p.adjacency = MultiplexAdjacency(n_nodes, n_layers, 0);
    p.influence = InfluenceTensor(n_nodes, n_layers, 0.0);
    p.nodes.background = NodeLayerTable(n_nodes, n_layers, 0.0);
    p.nodes.authoritative = NodeLayerTable(n_nodes, n_layers, 1.0 / static_cast<double>(n_layers));
    p.nodes.susceptible = NodeLayerTable(n_nodes, n_layers, 1.0 / static_cast<double>(n_layers));
    p.nodes.topic_prior = NodeLayerTable(n_nodes, n_layers, 1.0);
    p.layer_activity.pi.assign(n_layers, 1.0 / static_cast<double>(n_layers));
    return p;
  }

  bool operator==(const MultiplexParams&) const = default;
};

struct Hyperparameters {
  double influence_shape = 2.0;  // kappa
  double influence_rate = 2.0;   // v
  NodeLayerTable background_shape;
  NodeLayerTable background_rate;
  std::vector<double> layer_prior;          // gamma, Dirichlet prior of pi
  std::vector<double> authoritative_prior;  // Dirichlet prior of A_u
  std::vector<double> susceptible_prior;    // Dirichlet prior of S_u
  double mh_concentration = 100.0;

  /// Uniform-in-(u, k) hyperparameters.
  static Hyperparameters uniform(std::size_t n_nodes, std::size_t n_layers, double background_shape = 2.0,
                                 double background_rate = 400.0) {
    Hyperparameters h;
    h.background_shape = NodeLayerTable(n_nodes, n_layers, background_shape);
    h.background_rate = NodeLayerTable(n_nodes, n_layers, background_rate);
    h.layer_prior.assign(n_layers, 1.0);
    h.authoritative_prior.assign(n_layers, 1.0);
    h.susceptible_prior.assign(n_layers, 1.0);
    return h;
  }
};

// ---------------------------------------------------------------------------
// Validation

inline void validate(const Hyperparameters& h, std::size_t n_nodes, std::size_t n_layers) {
  auto positive_vec = [&](const std::vector<double>& v, const char* name) {
    if (v.size() != n_layers) throw std::invalid_argument(std::string(name) + ": expected one entry per layer");
    for (double x : v)
      if (!(x > 0.0)) throw std::invalid_argument(std::string(name) + ": entries must be positive");
  };
  auto positive_table = [&](const NodeLayerTable& t, const char* name) {
    if (t.n_nodes() != n_nodes || t.n_layers() != n_layers)
      throw std::invalid_argument(std::string(name) + ": shape mismatch");
    for (double x : t.raw())
      if (!(x > 0.0)) throw std::invalid_argument(std::string(name) + ": entries must be positive");
  };
  if (!(h.influence_shape > 0.0) || !(h.influence_rate > 0.0))
    throw std::invalid_argument("influence prior shape and rate must be positive");
  if (!(h.mh_concentration > 0.0)) throw std::invalid_argument("mh_concentration must be positive");
  positive_table(h.background_shape, "background_shape");
  positive_table(h.background_rate, "background_rate");
  positive_vec(h.layer_prior, "layer_prior");
  positive_vec(h.authoritative_prior, "authoritative_prior");
  positive_vec(h.susceptible_prior, "susceptible_prior");
}

inline void validate(const MultiplexParams& p) {
  const auto n = p.n_nodes, k = p.n_layers;
  if (n == 0 || k == 0) throw DataError("parameters must have at least one node and one layer");
  if (p.adjacency.n_nodes() != n || p.adjacency.n_layers() != k || p.influence.n_nodes() != n ||
      p.influence.n_layers() != k)
    throw DataError("adjacency/influence shape does not match (n_nodes, n_layers)");
  for (const auto* t : {&p.nodes.background, &p.nodes.authoritative, &p.nodes.susceptible, &p.nodes.topic_prior})
    if (t->n_nodes() != n || t->n_layers() != k) throw DataError("node table shape does not match (n_nodes, n_layers)");
  if (p.layer_activity.pi.size() != k) throw DataError("layer activity must have one entry per layer");
  if (!is_simplex(p.layer_activity.pi)) throw DataError("layer activity is not a simplex");
  for (std::size_t u = 0; u < n; ++u) {
    if (!is_simplex(p.nodes.authoritative.row(u)))
      throw DataError("authoritative vector of node " + std::to_string(u) + " is not a simplex");
    if (!is_simplex(p.nodes.susceptible.row(u)))
      throw DataError("susceptible vector of node " + std::to_string(u) + " is not a simplex");
    for (std::size_t l = 0; l < k; ++l) {
      if (!(p.nodes.background(u, l) >= 0.0)) throw DataError("background rates must be nonnegative");
      if (!(p.nodes.topic_prior(u, l) > 0.0)) throw DataError("topic prior must be positive");
      if (p.adjacency(u, u, l) != 0) throw DataError("self edges are not allowed");
    }
  }
  for (std::size_t i = 0; i < p.adjacency.size(); ++i) {
    if (p.adjacency.raw()[i] > 1) throw DataError("adjacency entries must be 0 or 1");
    if (!(p.influence.raw()[i] >= 0.0)) throw DataError("influence entries must be nonnegative");
  }
}

inline void validate(const EventLog& log) {
  if (!(log.window.length > 0.0)) throw DataError("observation window must be positive");
  double last = 0.0;
  for (std::size_t m = 0; m < log.events.size(); ++m) {
    const auto& e = log.events[m];
    const std::string where = "event " + std::to_string(m) + ": ";
    if (!(e.time >= 0.0)) throw DataError(where + "negative time");
    if (e.time > log.window.length) throw DataError(where + "time exceeds the observation window");
    if (e.time < last) throw DataError(where + "times are not non-decreasing");
    if (e.node >= log.n_nodes) throw DataError(where + "node index out of range");
    if (e.topic.size() != log.n_layers) throw DataError(where + "topic has wrong length");
    if (!is_simplex(e.topic)) throw DataError(where + "topic is not a simplex");
    last = e.time;
  }
}

/// Checks that every triggered label points at a strictly earlier event and
/// every layer index is in range.
inline void validate(const ParentAssignment& a, const EventLog& log) {
  if (a.size() != log.events.size()) throw DataError("assignment size does not match the event log");
  for (std::size_t m = 0; m < a.size(); ++m) {
    if (a[m].layer >= log.n_layers) throw DataError("event " + std::to_string(m) + ": layer out of range");
    if (a[m].is_spontaneous()) continue;
    const auto p = a[m].parent;
    if (p >= log.events.size() || !(log.events[p].time < log.events[m].time))
      throw DataError("event " + std::to_string(m) + ": parent is not strictly earlier");
  }
}

}  // namespace mdm

#endif  // MDM_TYPES_HPP
