#ifndef MDM_GENERATIVE_HPP
#define MDM_GENERATIVE_HPP

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mdm/kernel.hpp"
#include "mdm/model.hpp"
#include "mdm/random.hpp"
#include "mdm/types.hpp"

namespace mdm {

struct SimulationConfig {
  std::size_t n_nodes = 9;
  std::size_t n_layers = 3;
  ObservationWindow window{5000.0};
  Hyperparameters hyper;
  DelayKernel kernel;
  std::uint64_t seed = 1;
  std::size_t max_events = 100000;
  // Spontaneous topics of node u are Dir(topic_floor + topic_concentration * A_u).
  double topic_concentration = 3.0;
  double topic_floor = 0.2;

  static SimulationConfig defaults(std::size_t n_nodes = 9, std::size_t n_layers = 3) {
    SimulationConfig c;
    c.n_nodes = n_nodes;
    c.n_layers = n_layers;
    c.hyper = Hyperparameters::uniform(n_nodes, n_layers);
    return c;
  }
};

inline void validate(const SimulationConfig& c) {
  if (c.n_nodes < 2) throw std::invalid_argument("simulation needs at least two nodes");
  if (c.n_layers < 1) throw std::invalid_argument("simulation needs at least one layer");
  if (c.max_events == 0) throw std::invalid_argument("max_events must be positive");
  if (!(c.window.length > 0.0)) throw std::invalid_argument("window length must be positive");
  if (!(c.topic_concentration >= 0.0) || !(c.topic_floor > 0.0))
    throw std::invalid_argument("topic prior needs nonnegative concentration and positive floor");
  validate(c.hyper, c.n_nodes, c.n_layers);
  validate(c.kernel);
}

/// Draws pi, A_u, S_u, the background rates and the per-node topic prior.
template <typename Rng>
std::pair<LayerActivity, NodeParams> sample_memberships(const SimulationConfig& config, Rng& rng) {
  const auto n = config.n_nodes, K = config.n_layers;
  const auto& h = config.hyper;
  LayerActivity activity{sample_dirichlet(h.layer_prior, rng)};
  NodeParams nodes;
  nodes.authoritative = NodeLayerTable(n, K);
  nodes.susceptible = NodeLayerTable(n, K);
  nodes.background = NodeLayerTable(n, K);
  nodes.topic_prior = NodeLayerTable(n, K);
  for (std::size_t u = 0; u < n; ++u) {
    nodes.authoritative.set_row(u, sample_dirichlet(h.authoritative_prior, rng));
    nodes.susceptible.set_row(u, sample_dirichlet(h.susceptible_prior, rng));
    for (std::size_t k = 0; k < K; ++k) {
      nodes.background(u, k) = sample_gamma(h.background_shape(u, k), h.background_rate(u, k), rng);
      nodes.topic_prior(u, k) = config.topic_floor + config.topic_concentration * nodes.authoritative(u, k);
    }
  }
  return {std::move(activity), std::move(nodes)};
}

template <typename Rng>
MultiplexAdjacency sample_adjacency(const LayerActivity& activity, const NodeParams& nodes, Rng& rng) {
  const auto n = nodes.authoritative.n_nodes(), K = nodes.authoritative.n_layers();
  MultiplexAdjacency g(n, K, 0);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = 0; v < n; ++v) {
      if (u == v) continue;
      for (std::size_t k = 0; k < K; ++k) {
        const double rho = edge_probability(activity.pi[k], nodes.authoritative(u, k), nodes.susceptible(v, k));
        g(u, v, k) = uniform01(rng) < rho ? 1 : 0;
      }
    }
  return g;
}

template <typename Rng>
InfluenceTensor sample_influence(const MultiplexAdjacency& adjacency, const Hyperparameters& hyper, Rng& rng) {
  InfluenceTensor w(adjacency.n_nodes(), adjacency.n_layers(), 0.0);
  for (std::size_t i = 0; i < adjacency.size(); ++i)
    if (adjacency.raw()[i]) w.raw()[i] = sample_gamma(hyper.influence_shape, hyper.influence_rate, rng);
  return w;
}

/// Full network draw from the prior, deterministic in `config.seed`.
inline MultiplexParams sample_network(const SimulationConfig& config) {
  validate(config);
  std::mt19937_64 rng(stream_key(config.seed, 0x6e6574));
  MultiplexParams p;
  p.n_nodes = config.n_nodes;
  p.n_layers = config.n_layers;
  auto [activity, nodes] = sample_memberships(config, rng);
  p.layer_activity = std::move(activity);
  p.nodes = std::move(nodes);
  p.adjacency = sample_adjacency(p.layer_activity, p.nodes, rng);
  p.influence = sample_influence(p.adjacency, config.hyper, rng);
  return p;
}

/// Events of `log` in [0, length], with the window shortened to `length`.
/// Parents precede their children, so the prefix keeps every retained
/// event's parent and is distributed as a simulation over the shorter window.
inline EventLog truncate_window(const EventLog& log, double length) {
  if (!(length > 0.0) || length > log.window.length)
    throw std::invalid_argument("truncated window must lie in (0, current length]");
  EventLog out;
  out.n_nodes = log.n_nodes;
  out.n_layers = log.n_layers;
  out.window.length = length;
  std::size_t keep = 0;
  while (keep < log.events.size() && log.events[keep].time <= length) ++keep;
  out.events.assign(log.events.begin(), log.events.begin() + static_cast<std::ptrdiff_t>(keep));
  if (log.ground_truth)
    out.ground_truth.emplace(log.ground_truth->begin(), log.ground_truth->begin() + static_cast<std::ptrdiff_t>(keep));
  return out;
}

/// Spectral radius of B(u, v) = max_k G_uvk * W_uvk * S_vk. Every cascade
/// has a fixed topic, and its expected offspring matrix is dominated by B
/// entrywise, so a value below 1 means every cascade is subcritical.
inline double max_branching_ratio(const MultiplexParams& params) {
  const auto n = params.n_nodes;
  std::vector<double> b(n * n, 0.0);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = 0; v < n; ++v)
      for (std::size_t k = 0; k < params.n_layers; ++k)
        if (params.adjacency(u, v, k))
          b[u * n + v] = std::max(b[u * n + v], params.influence(u, v, k) * params.nodes.susceptible(v, k));
  // Mean log growth of power iteration over a window; robust to periodic matrices.
  std::vector<double> x(n, 1.0 / static_cast<double>(n)), y(n);
  constexpr int kWarmup = 200, kWindow = 200;
  double log_growth = 0.0;
  for (int it = 0; it < kWarmup + kWindow; ++it) {
    std::fill(y.begin(), y.end(), 0.0);
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = 0; v < n; ++v) y[v] += x[u] * b[u * n + v];
    const double norm = std::accumulate(y.begin(), y.end(), 0.0);
    if (!(norm > 0.0)) return 0.0;
    for (std::size_t v = 0; v < n; ++v) x[v] = y[v] / norm;
    if (it >= kWarmup) log_growth += std::log(norm);
  }
  return std::exp(log_growth / kWindow);
}

/// Branching simulation of marked cascades over [0, T]. Each node draws one
/// spontaneous layer from A_u and a Poisson(lambda * T) batch of uniformly
/// placed seeds with topics from its topic prior. Every event then offers
/// itself to each out-neighbour: at most one channel is chosen among layers
/// carrying an edge with weights topic_k * S_vk, and Poisson(W) children
/// follow after lognormal delays, copying the parent's topic. Children past
/// T are dropped. The returned log is time-sorted and carries the true
/// parent labels.
inline EventLog simulate_cascades(const MultiplexParams& params, const SimulationConfig& config) {
  validate(config);
  validate(params);
  if (params.n_nodes != config.n_nodes || params.n_layers != config.n_layers)
    throw DataError("simulation config shape does not match the network");

  const auto n = params.n_nodes, K = params.n_layers;
  const double horizon = config.window.length;
  std::mt19937_64 rng(stream_key(config.seed, 0x636173));
  std::lognormal_distribution<double> delay(config.kernel.log_mean, config.kernel.log_sdev);

  std::vector<Event> events;
  ParentAssignment labels;
  auto push = [&](Event e, ParentLabel label) {
    if (events.size() >= config.max_events)
      throw NumericalError("supercritical simulation: event cap of " + std::to_string(config.max_events) +
                           " exceeded");
    events.push_back(std::move(e));
    labels.push_back(label);
  };

  for (std::size_t u = 0; u < n; ++u) {
    const auto a_u = params.nodes.authoritative.row(u);
    const std::size_t k = sample_discrete<std::mt19937_64>(a_u, rng);
    if (k >= K) continue;
    const auto count = sample_poisson(params.nodes.background(u, k) * horizon, rng);
    const auto alpha = params.nodes.topic_prior.row(u);
    for (std::uint64_t i = 0; i < count; ++i) {
      Event e{std::uniform_real_distribution<double>(0.0, horizon)(rng), u, sample_dirichlet(alpha, rng)};
      push(std::move(e), ParentLabel::spontaneous(k));
    }
  }

  std::vector<bool> edge_layers(K);
  std::vector<double> weights(K);
  for (std::size_t next = 0; next < events.size(); ++next) {
    const std::size_t u = events[next].node;
    for (std::size_t v = 0; v < n; ++v) {
      if (v == u) continue;
      bool any = false;
      for (std::size_t k = 0; k < K; ++k) any |= (edge_layers[k] = params.adjacency(u, v, k) != 0);
      if (!any) continue;
      const auto s_v = params.nodes.susceptible.row(v);
      weights = channel_vector(events[next].topic, s_v, edge_layers);
      const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
      const std::size_t channel = sample_discrete<std::mt19937_64>(weights, rng, std::max(0.0, 1.0 - total));
      if (channel >= K) continue;
      const auto children = sample_poisson(params.influence(u, v, channel), rng);
      for (std::uint64_t c = 0; c < children; ++c) {
        const double t = events[next].time + delay(rng);
        if (!(t <= horizon) || !(t > events[next].time)) continue;
        push(Event{t, v, events[next].topic}, ParentLabel::triggered(next, channel));
      }
    }
  }

  std::vector<std::size_t> order(events.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return events[a].time < events[b].time; });
  std::vector<std::size_t> rank(events.size());
  for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = i;

  EventLog log;
  log.n_nodes = n;
  log.n_layers = K;
  log.window = config.window;
  log.events.reserve(events.size());
  ParentAssignment truth(events.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    log.events.push_back(std::move(events[order[i]]));
    auto label = labels[order[i]];
    if (!label.is_spontaneous()) label.parent = rank[label.parent];
    truth[i] = label;
  }
  log.ground_truth = std::move(truth);
  return log;
}

}  // namespace mdm

#endif  // MDM_GENERATIVE_HPP
