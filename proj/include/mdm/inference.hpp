#ifndef MDM_INFERENCE_HPP
#define MDM_INFERENCE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mdm/generative.hpp"
#include "mdm/kernel.hpp"
#include "mdm/model.hpp"
#include "mdm/parallel.hpp"
#include "mdm/random.hpp"
#include "mdm/types.hpp"

namespace mdm {

// ---------------------------------------------------------------------------
// Chain types

struct ChainState {
  MultiplexParams params;
  ParentAssignment assignment;
  std::size_t iteration = 0;
};

/// Per-(node, layer) table of counts.
class CountTable {
 public:
  CountTable() = default;
  CountTable(std::size_t n_nodes, std::size_t n_layers) : k_(n_layers), data_(n_nodes * n_layers, 0) {}
  std::size_t& operator()(std::size_t u, std::size_t k) { return data_[u * k_ + k]; }
  std::size_t operator()(std::size_t u, std::size_t k) const { return data_[u * k_ + k]; }
  bool operator==(const CountTable&) const = default;

 private:
  std::size_t k_ = 0;
  std::vector<std::size_t> data_;
};

/// Counts implied by a parent assignment.
struct SufficientStatistics {
  Tensor3<std::size_t> triggered;         // (source n, target n', k): children on n' caused by events on n
  std::vector<std::size_t> node_counts;   // events per node
  CountTable spontaneous;                 // (n, k): spontaneous events of n on layer k
  CountTable receipts;                    // (v, k): triggered events received by v through layer k

  bool operator==(const SufficientStatistics&) const = default;
};

enum class AdjacencyInit { kFull, kPrior };
enum class MembershipInit { kTopics, kPrior };
enum class RateInit { kConditional, kPrior };

struct ChainConfig {
  std::size_t iterations = 1000;
  std::size_t burn_in = 200;
  std::size_t thin = 20;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  bool keep_trace = false;
  bool allow_empty_log = false;
  TriggerCompensator compensator = TriggerCompensator::kChannel;
  AdjacencyInit init_adjacency = AdjacencyInit::kFull;
  MembershipInit init_memberships = MembershipInit::kTopics;
  RateInit init_rates = RateInit::kConditional;
  bool edge_moves = true;
};

inline void validate(const ChainConfig& c) {
  if (c.iterations == 0) throw std::invalid_argument("chain needs at least one iteration");
  if (c.burn_in >= c.iterations) throw std::invalid_argument("burn_in must be smaller than iterations");
  if (c.thin == 0) throw std::invalid_argument("thin must be at least 1");
}

/// Posterior frequency of one parent label of an event.
struct LabelFrequency {
  ParentLabel label;
  double frequency = 0.0;
};

struct PosteriorSummary {
  std::size_t n_nodes = 0;
  std::size_t n_layers = 0;
  std::size_t samples = 0;
  InfluenceTensor mean_influence;
  Tensor3<double> edge_probability;
  NodeLayerTable mean_background;
  NodeLayerTable mean_authoritative;
  NodeLayerTable mean_susceptible;
  std::vector<double> mean_layer_activity;
  std::vector<std::vector<LabelFrequency>> parent_frequencies;  // per event, sorted by label
  ParentAssignment modal_assignment;
  double pi_acceptance = 0.0;
  double authoritative_acceptance = 0.0;
  double susceptible_acceptance = 0.0;
};

/// Raw chain output kept for diagnostics: every iteration's parent labels and
/// the parameters at each retained iteration.
struct ChainTrace {
  std::vector<ParentAssignment> assignments;  // assignments[i] after iteration i + 1
  std::vector<std::size_t> retained_iterations;
  std::vector<MultiplexParams> retained_params;
};

struct ChainResult {
  PosteriorSummary summary;
  std::optional<ChainTrace> trace;
  ChainState final_state;
};

// ---------------------------------------------------------------------------
// Sufficient statistics and exposures

inline SufficientStatistics compute_sufficient_stats(const EventLog& log, const ParentAssignment& assignment) {
  validate(assignment, log);
  const auto n = log.n_nodes, K = log.n_layers;
  SufficientStatistics s{Tensor3<std::size_t>(n, K, 0), std::vector<std::size_t>(n, 0), CountTable(n, K),
                         CountTable(n, K)};
  for (std::size_t m = 0; m < log.events.size(); ++m) {
    const auto node = log.events[m].node;
    const auto& label = assignment[m];
    ++s.node_counts[node];
    if (label.is_spontaneous()) {
      ++s.spontaneous(node, label.layer);
    } else {
      ++s.triggered(log.events[label.parent].node, node, label.layer);
      ++s.receipts(node, label.layer);
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Parent labels

/// Earlier events that can be parents of each event together with the delay
/// density at their lag. Depends only on the event times, so it is built once
/// per chain.
class ParentCandidates {
 public:
  ParentCandidates(const EventLog& log, const DelayKernel& kernel) : n_layers_(log.n_layers) {
    const auto M = log.events.size();
    offsets_.reserve(M + 1);
    offsets_.push_back(0);
    nodes_.reserve(M);
    topics_.reserve(M * n_layers_);
    for (std::size_t m = 0; m < M; ++m) {
      const auto& e = log.events[m];
      nodes_.push_back(e.node);
      topics_.insert(topics_.end(), e.topic.begin(), e.topic.end());
      for (std::size_t p = 0; p < m; ++p) {
        const double h = delay_density(e.time - log.events[p].time, kernel);
        if (h > 0.0) {
          parents_.push_back(p);
          density_.push_back(h);
        }
      }
      offsets_.push_back(parents_.size());
    }
  }

  std::size_t size() const { return nodes_.size(); }
  std::size_t n_layers() const { return n_layers_; }
  std::size_t node(std::size_t m) const { return nodes_[m]; }
  std::span<const double> topic(std::size_t m) const { return {topics_.data() + m * n_layers_, n_layers_}; }
  std::span<const std::size_t> parents(std::size_t m) const {
    return {parents_.data() + offsets_[m], offsets_[m + 1] - offsets_[m]};
  }
  std::span<const double> densities(std::size_t m) const {
    return {density_.data() + offsets_[m], offsets_[m + 1] - offsets_[m]};
  }

 private:
  std::size_t n_layers_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> parents_;
  std::vector<double> density_;
  std::vector<std::size_t> nodes_;
  std::vector<double> topics_;
};

/// Draws every event's label from its normalized conditional: spontaneous on
/// layer k with weight A_uk * lambda_uk * Dir(topic | alpha_u), or triggered by
/// an earlier event m' through layer k with weight
/// G * W * topic_{m',k} * S_vk * delay(s_m - s_m'). Event m uses the stream
/// stream_key(key, m).
inline ParentAssignment sample_parents(const EventLog& log, const ParentCandidates& candidates,
                                       const MultiplexParams& params, std::uint64_t key, std::size_t workers = 1) {
  const auto N = params.n_nodes, K = params.n_layers;
  // coef(u, v, k) = G * W * S_vk
  std::vector<double> coef(N * N * K, 0.0);
  for (std::size_t u = 0; u < N; ++u)
    for (std::size_t v = 0; v < N; ++v)
      for (std::size_t k = 0; k < K; ++k)
        if (params.adjacency(u, v, k))
          coef[(u * N + v) * K + k] = params.influence(u, v, k) * params.nodes.susceptible(v, k);

  ParentAssignment result(log.events.size());
  parallel_for(log.events.size(), workers, [&](std::size_t m) {
    const std::size_t v = candidates.node(m);
    const auto topic = candidates.topic(m);
    const auto parents = candidates.parents(m);
    const auto density = candidates.densities(m);

    const double log_mark = log_dirichlet_density(topic, params.nodes.topic_prior.row(v));
    std::vector<double> spont(K);
    double spont_max = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) {
      const double base = params.nodes.authoritative(v, k) * params.nodes.background(v, k);
      spont[k] = base > 0.0 ? std::log(base) + log_mark : -std::numeric_limits<double>::infinity();
      spont_max = std::max(spont_max, spont[k]);
    }

    std::vector<double> trig(parents.size() * K);
    double trig_max = 0.0;
    for (std::size_t j = 0; j < parents.size(); ++j) {
      const auto p = parents[j];
      const double* c = coef.data() + (candidates.node(p) * N + v) * K;
      const auto ptopic = candidates.topic(p);
      for (std::size_t k = 0; k < K; ++k) {
        double w = c[k] * ptopic[k] * density[j];
        if (w < kDensityFloor) w = 0.0;
        trig[j * K + k] = w;
        trig_max = std::max(trig_max, w);
      }
    }

    const double shift = std::max(spont_max, trig_max > 0.0 ? std::log(trig_max) : -std::numeric_limits<double>::infinity());
    if (!std::isfinite(shift))
      throw NumericalError("degenerate parent support: every label of event " + std::to_string(m) +
                           " has zero weight");
    double total = 0.0;
    for (auto& s : spont) total += (s = std::isfinite(s) ? std::exp(s - shift) : 0.0);
    if (trig_max > 0.0) {
      const double scale = std::exp(-shift);
      for (auto& w : trig) total += (w *= scale);
    }

    auto label_of = [&](std::size_t i) {
      return i < K ? ParentLabel::spontaneous(i) : ParentLabel::triggered(parents[(i - K) / K], (i - K) % K);
    };
    auto weight_of = [&](std::size_t i) { return i < K ? spont[i] : trig[i - K]; };

    StreamRng rng(stream_key(key, m));
    double r = uniform01(rng) * total;
    const std::size_t n_labels = K + trig.size();
    std::size_t chosen = n_labels, last_positive = 0;
    for (std::size_t i = 0; i < n_labels; ++i) {
      const double w = weight_of(i);
      if (w > 0.0) last_positive = i;
      if (r < w) {
        chosen = i;
        break;
      }
      r -= w;
    }
    result[m] = label_of(chosen < n_labels ? chosen : last_positive);
  });
  return result;
}

inline ParentAssignment sample_parents(const EventLog& log, const MultiplexParams& params, const DelayKernel& kernel,
                                       std::uint64_t key, std::size_t workers = 1) {
  return sample_parents(log, ParentCandidates(log, kernel), params, key, workers);
}

// ---------------------------------------------------------------------------
// Conjugate updates

/// W(u, v, k) ~ Gamma(M(u, v, k) + kappa, exposure(u, v, k) + v) on edges,
/// zero elsewhere. `psi` comes from source_exposure with the same mode.
inline InfluenceTensor sample_influences(const SufficientStatistics& stats, const MultiplexParams& params,
                                         const Hyperparameters& hyper, const NodeLayerTable& psi,
                                         TriggerCompensator mode, std::uint64_t key) {
  const auto N = params.n_nodes, K = params.n_layers;
  InfluenceTensor w(N, K, 0.0);
  for (std::size_t u = 0; u < N; ++u) {
    StreamRng rng(stream_key(key, u));
    for (std::size_t v = 0; v < N; ++v)
      for (std::size_t k = 0; k < K; ++k)
        if (params.adjacency(u, v, k))
          w(u, v, k) = sample_gamma(static_cast<double>(stats.triggered(u, v, k)) + hyper.influence_shape,
                                    edge_exposure(psi, params.nodes.susceptible, u, v, k, mode) + hyper.influence_rate,
                                    rng);
  }
  return w;
}

/// lambda(n, k) ~ Gamma(M(n, k) + shape, T + rate).
inline NodeLayerTable sample_background_rates(const SufficientStatistics& stats, const Hyperparameters& hyper,
                                              const ObservationWindow& window, std::uint64_t key) {
  const auto N = hyper.background_shape.n_nodes(), K = hyper.background_shape.n_layers();
  NodeLayerTable rates(N, K);
  for (std::size_t u = 0; u < N; ++u) {
    StreamRng rng(stream_key(key, u));
    for (std::size_t k = 0; k < K; ++k)
      rates(u, k) = sample_gamma(static_cast<double>(stats.spontaneous(u, k)) + hyper.background_shape(u, k),
                                 window.length + hyper.background_rate(u, k), rng);
  }
  return rates;
}

/// Edge update with the influence integrated out. An attributed child forces
/// the edge; otherwise G ~ Bernoulli with odds rho * B1 : (1 - rho), where
/// B1 = (v / (v + exposure))^kappa is the Gamma-Poisson probability of no
/// attributed children. Columns v are independent and use stream_key(key, v).
inline MultiplexAdjacency sample_adjacency_posterior(const MultiplexParams& params,
                                                     const SufficientStatistics& stats, const Hyperparameters& hyper,
                                                     const NodeLayerTable& psi, TriggerCompensator mode,
                                                     std::uint64_t key, std::size_t workers = 1) {
  const auto N = params.n_nodes, K = params.n_layers;
  MultiplexAdjacency g(N, K, 0);
  parallel_for(N, workers, [&](std::size_t v) {
    StreamRng rng(stream_key(key, v));
    for (std::size_t u = 0; u < N; ++u) {
      if (u == v) continue;
      for (std::size_t k = 0; k < K; ++k) {
        if (stats.triggered(u, v, k) > 0) {
          g(u, v, k) = 1;
          continue;
        }
        const double rho = edge_probability(params.layer_activity.pi[k], params.nodes.authoritative(u, k),
                                            params.nodes.susceptible(v, k));
        const double phi = edge_exposure(psi, params.nodes.susceptible, u, v, k, mode);
        const double b1 = std::pow(hyper.influence_rate / (hyper.influence_rate + phi), hyper.influence_shape);
        const double on = rho * b1;
        const double off = 1.0 - rho;
        const double p_on = on + off > 0.0 ? on / (on + off) : 0.0;
        g(u, v, k) = uniform01(rng) < p_on ? 1 : 0;
      }
    }
  });
  return g;
}

// ---------------------------------------------------------------------------
// Metropolis updates for pi, A and S

/// Unnormalized log conditional of the layer activity.
inline double log_target_layer_activity(std::span<const double> pi, const MultiplexParams& params,
                                        std::span<const double> prior) {
  const auto N = params.n_nodes, K = params.n_layers;
  double result = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    std::size_t edges = 0;
    double nonedge = 0.0;
    for (std::size_t u = 0; u < N; ++u)
      for (std::size_t v = 0; v < N; ++v) {
        if (u == v) continue;
        if (params.adjacency(u, v, k)) ++edges;
        else nonedge += floored_log(1.0 - pi[k] * params.nodes.authoritative(u, k) * params.nodes.susceptible(v, k));
      }
    result += (static_cast<double>(edges) + prior[k] - 1.0) * floored_log(pi[k]) + nonedge;
  }
  return result;
}

/// Unnormalized log conditional of A_u: spontaneous counts and out-edges in
/// the exponent, one (1 - pi A S) factor per missing out-edge.
inline double log_target_authoritative(std::size_t u, std::span<const double> a_u, const MultiplexParams& params,
                                       const SufficientStatistics& stats, std::span<const double> prior) {
  const auto N = params.n_nodes, K = params.n_layers;
  double result = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    std::size_t edges = 0;
    double nonedge = 0.0;
    for (std::size_t v = 0; v < N; ++v) {
      if (v == u) continue;
      if (params.adjacency(u, v, k)) ++edges;
      else nonedge += floored_log(1.0 - params.layer_activity.pi[k] * a_u[k] * params.nodes.susceptible(v, k));
    }
    result += (static_cast<double>(stats.spontaneous(u, k) + edges) + prior[k] - 1.0) * floored_log(a_u[k]) + nonedge;
  }
  return result;
}

/// Unnormalized log conditional of S_v: received triggered events and
/// in-edges in the exponent, one (1 - pi A S) factor per missing in-edge,
/// and under the channel compensator the trigger compensators of in-edges.
inline double log_target_susceptible(std::size_t v, std::span<const double> s_v, const MultiplexParams& params,
                                     const SufficientStatistics& stats, std::span<const double> prior,
                                     const NodeLayerTable& psi, TriggerCompensator mode) {
  const auto N = params.n_nodes, K = params.n_layers;
  double result = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    std::size_t edges = 0;
    double nonedge = 0.0;
    for (std::size_t u = 0; u < N; ++u) {
      if (u == v) continue;
      if (params.adjacency(u, v, k)) {
        ++edges;
        if (mode == TriggerCompensator::kChannel) result -= params.influence(u, v, k) * psi(u, k) * s_v[k];
      } else {
        nonedge += floored_log(1.0 - params.layer_activity.pi[k] * params.nodes.authoritative(u, k) * s_v[k]);
      }
    }
    result += (static_cast<double>(stats.receipts(v, k) + edges) + prior[k] - 1.0) * floored_log(s_v[k]) + nonedge;
  }
  return result;
}

struct MhStep {
  std::vector<double> value;
  bool accepted = false;
  double log_ratio = 0.0;
};

/// One random-walk Metropolis-Hastings step on the simplex with proposal
/// Dir(concentration * current). Proposals with a zero component are rejected.
template <typename Target, typename Rng>
MhStep dirichlet_mh_step(std::span<const double> current, double concentration, Target&& log_target, Rng& rng) {
  std::vector<double> alpha_fwd(current.size());
  for (std::size_t i = 0; i < current.size(); ++i) alpha_fwd[i] = concentration * current[i];
  auto proposal = sample_dirichlet(alpha_fwd, rng);
  for (double x : proposal)
    if (!(x > 0.0)) return {std::vector<double>(current.begin(), current.end()), false,
                            -std::numeric_limits<double>::infinity()};
  std::vector<double> alpha_rev(current.size());
  for (std::size_t i = 0; i < current.size(); ++i) alpha_rev[i] = concentration * proposal[i];
  const double log_ratio = log_target(std::span<const double>(proposal)) - log_target(current) +
                           log_dirichlet_density(current, alpha_rev) - log_dirichlet_density(proposal, alpha_fwd);
  if (std::log(uniform01(rng)) < log_ratio) return {std::move(proposal), true, log_ratio};
  return {std::vector<double>(current.begin(), current.end()), false, log_ratio};
}

inline MhStep mh_update_pi(const MultiplexParams& params, const Hyperparameters& hyper, std::uint64_t key) {
  StreamRng rng(stream_key(key, 0));
  return dirichlet_mh_step(
      params.layer_activity.pi, hyper.mh_concentration,
      [&](std::span<const double> pi) { return log_target_layer_activity(pi, params, hyper.layer_prior); }, rng);
}

struct MhTableUpdate {
  NodeLayerTable value;
  std::size_t accepted = 0;
};

/// Per-node MH on A_u; node u uses stream_key(key, u).
inline MhTableUpdate mh_update_authoritative(const MultiplexParams& params, const SufficientStatistics& stats,
                                             const Hyperparameters& hyper, std::uint64_t key,
                                             std::size_t workers = 1) {
  MhTableUpdate out{params.nodes.authoritative, 0};
  std::vector<char> accepted(params.n_nodes, 0);
  parallel_for(params.n_nodes, workers, [&](std::size_t u) {
    StreamRng rng(stream_key(key, u));
    auto step = dirichlet_mh_step(
        params.nodes.authoritative.row(u), hyper.mh_concentration,
        [&](std::span<const double> a) {
          return log_target_authoritative(u, a, params, stats, hyper.authoritative_prior);
        },
        rng);
    out.value.set_row(u, step.value);
    accepted[u] = step.accepted;
  });
  for (char a : accepted) out.accepted += a;
  return out;
}

/// Per-node MH on S_v; node v uses stream_key(key, v).
inline MhTableUpdate mh_update_susceptible(const MultiplexParams& params, const SufficientStatistics& stats,
                                           const Hyperparameters& hyper, const NodeLayerTable& psi,
                                           TriggerCompensator mode, std::uint64_t key, std::size_t workers = 1) {
  MhTableUpdate out{params.nodes.susceptible, 0};
  std::vector<char> accepted(params.n_nodes, 0);
  parallel_for(params.n_nodes, workers, [&](std::size_t v) {
    StreamRng rng(stream_key(key, v));
    auto step = dirichlet_mh_step(
        params.nodes.susceptible.row(v), hyper.mh_concentration,
        [&](std::span<const double> s) {
          return log_target_susceptible(v, s, params, stats, hyper.susceptible_prior, psi, mode);
        },
        rng);
    out.value.set_row(v, step.value);
    accepted[v] = step.accepted;
  });
  for (char a : accepted) out.accepted += a;
  return out;
}

// ---------------------------------------------------------------------------
// Chain driver

namespace detail {

inline std::vector<double> normalized(std::vector<double> x) {
  double sum = 0.0;
  for (double v : x) sum += v;
  for (double& v : x) v /= sum;
  return x;
}

}  // namespace detail

/// Starting point of the sampler. The node topic prior is taken as known and
/// copied from `topic_prior`; everything else is drawn or derived per `config`.
/// Every event starts spontaneous on the layer maximizing A_uk * topic_k.
inline ChainState initialize_chain(const EventLog& log, const NodeLayerTable& topic_prior,
                                   const Hyperparameters& hyper, const DelayKernel& kernel,
                                   const ChainConfig& config) {
  const auto N = log.n_nodes, K = log.n_layers;
  std::mt19937_64 rng(stream_key(config.seed, 0x696e6974));
  ChainState state;
  auto& p = state.params;
  p = MultiplexParams::zeros(N, K);
  p.nodes.topic_prior = topic_prior;
  p.layer_activity.pi = sample_dirichlet(hyper.layer_prior, rng);

  std::vector<std::vector<double>> s_acc(N, hyper.susceptible_prior);
  for (const auto& e : log.events)
    for (std::size_t k = 0; k < K; ++k) s_acc[e.node][k] += e.topic[k];
  for (std::size_t u = 0; u < N; ++u) {
    if (config.init_memberships == MembershipInit::kTopics) {
      const auto alpha = topic_prior.row(u);
      p.nodes.authoritative.set_row(u, detail::normalized({alpha.begin(), alpha.end()}));
      p.nodes.susceptible.set_row(u, detail::normalized(s_acc[u]));
    } else {
      p.nodes.authoritative.set_row(u, sample_dirichlet(hyper.authoritative_prior, rng));
      p.nodes.susceptible.set_row(u, sample_dirichlet(hyper.susceptible_prior, rng));
    }
  }

  for (std::size_t u = 0; u < N; ++u)
    for (std::size_t v = 0; v < N; ++v) {
      if (u == v) continue;
      for (std::size_t k = 0; k < K; ++k) {
        const double rho = edge_probability(p.layer_activity.pi[k], p.nodes.authoritative(u, k),
                                            p.nodes.susceptible(v, k));
        p.adjacency(u, v, k) = config.init_adjacency == AdjacencyInit::kFull ? 1 : (uniform01(rng) < rho ? 1 : 0);
      }
    }

  state.assignment.resize(log.events.size());
  for (std::size_t m = 0; m < log.events.size(); ++m) {
    const auto& e = log.events[m];
    std::size_t best = 0;
    for (std::size_t k = 1; k < K; ++k)
      if (p.nodes.authoritative(e.node, k) * e.topic[k] > p.nodes.authoritative(e.node, best) * e.topic[best]) best = k;
    state.assignment[m] = ParentLabel::spontaneous(best);
  }

  if (config.init_rates == RateInit::kConditional) {
    const auto stats = compute_sufficient_stats(log, state.assignment);
    const auto psi = source_exposure(log, kernel, config.compensator);
    const auto key = stream_key(config.seed, 0x696e6974, 1);
    p.nodes.background = sample_background_rates(stats, hyper, log.window, stream_key(key, 0));
    p.influence = sample_influences(stats, p, hyper, psi, config.compensator, stream_key(key, 1));
  } else {
    for (std::size_t u = 0; u < N; ++u)
      for (std::size_t k = 0; k < K; ++k)
        p.nodes.background(u, k) = sample_gamma(hyper.background_shape(u, k), hyper.background_rate(u, k), rng);
    p.influence = sample_influence(p.adjacency, hyper, rng);
  }
  return state;
}

// ---------------------------------------------------------------------------
// Edge moves with the parent labels summed out

/// For each event m and source node u, the sums over candidate parents of m
/// on u of topic_k * delay, for every layer k. With these, the total label
/// weight of m is spont_m + sum_{u,k} G_uvk W_uvk S_vk c(m, u, k).
class SourceKernelSums {
 public:
  SourceKernelSums(const ParentCandidates& candidates, std::size_t n_nodes)
      : n_(n_nodes), k_(candidates.n_layers()), sums_(candidates.size() * n_nodes * candidates.n_layers(), 0.0),
        by_node_(n_nodes) {
    for (std::size_t m = 0; m < candidates.size(); ++m) {
      by_node_[candidates.node(m)].push_back(m);
      const auto parents = candidates.parents(m);
      const auto density = candidates.densities(m);
      for (std::size_t j = 0; j < parents.size(); ++j) {
        const auto topic = candidates.topic(parents[j]);
        double* row = sums_.data() + (m * n_ + candidates.node(parents[j])) * k_;
        for (std::size_t k = 0; k < k_; ++k) row[k] += topic[k] * density[j];
      }
    }
  }

  double operator()(std::size_t m, std::size_t u, std::size_t k) const { return sums_[(m * n_ + u) * k_ + k]; }
  const std::vector<std::size_t>& events_on(std::size_t v) const { return by_node_[v]; }

 private:
  std::size_t n_, k_;
  std::vector<double> sums_;
  std::vector<std::vector<std::size_t>> by_node_;
};

struct EdgeMoveCounts {
  std::size_t toggles_accepted = 0;
  std::size_t toggles_proposed = 0;
  std::size_t scale_accepted = 0;
  std::size_t scale_proposed = 0;
};

/// Metropolis moves on (G, W) targeting their conditional with every parent
/// label summed out. Per entry (u, v, k): a birth/death toggle that draws a
/// new W from its Gamma prior, then for present edges a log-scale random walk
/// on W. Columns v are independent and use stream_key(key, v). Parent labels
/// must be redrawn afterwards.
inline EdgeMoveCounts marginal_edge_moves(MultiplexParams& p, const EventLog& log, const SourceKernelSums& sums,
                                          const NodeLayerTable& psi, TriggerCompensator mode,
                                          const Hyperparameters& hyper, std::uint64_t key, std::size_t workers = 1) {
  constexpr double kScaleStep = 0.5;
  const auto N = p.n_nodes, K = p.n_layers;
  std::vector<EdgeMoveCounts> counts(N);
  parallel_for(N, workers, [&](std::size_t v) {
    StreamRng rng(stream_key(key, v));
    std::normal_distribution<double> step(0.0, kScaleStep);
    const auto& events = sums.events_on(v);
    std::vector<double> total(events.size(), 0.0);
    for (std::size_t i = 0; i < events.size(); ++i) {
      const auto& e = log.events[events[i]];
      const double mark = std::exp(log_dirichlet_density(e.topic, p.nodes.topic_prior.row(v)));
      for (std::size_t k = 0; k < K; ++k) total[i] += p.nodes.authoritative(v, k) * p.nodes.background(v, k) * mark;
      for (std::size_t u = 0; u < N; ++u)
        for (std::size_t k = 0; k < K; ++k)
          if (p.adjacency(u, v, k)) total[i] += p.influence(u, v, k) * p.nodes.susceptible(v, k) * sums(events[i], u, k);
    }
    // Change in the summed-label log-likelihood when W_uvk moves by delta.
    auto delta_loglik = [&](std::size_t u, std::size_t k, double delta, double phi) {
      const double s = p.nodes.susceptible(v, k);
      double d = -delta * phi;
      for (std::size_t i = 0; i < events.size(); ++i) {
        const double c = sums(events[i], u, k);
        if (c == 0.0) continue;
        d += floored_log(std::max(0.0, total[i] + delta * s * c)) - floored_log(total[i]);
      }
      return d;
    };
    auto apply = [&](std::size_t u, std::size_t k, double delta) {
      const double s = p.nodes.susceptible(v, k);
      for (std::size_t i = 0; i < events.size(); ++i) total[i] = std::max(0.0, total[i] + delta * s * sums(events[i], u, k));
    };

    auto& c = counts[v];
    for (std::size_t u = 0; u < N; ++u) {
      if (u == v) continue;
      for (std::size_t k = 0; k < K; ++k) {
        const double rho = edge_probability(p.layer_activity.pi[k], p.nodes.authoritative(u, k), p.nodes.susceptible(v, k));
        const double phi = edge_exposure(psi, p.nodes.susceptible, u, v, k, mode);
        const double log_odds = floored_log(rho) - floored_log(1.0 - rho);
        ++c.toggles_proposed;
        if (!p.adjacency(u, v, k)) {
          const double w = sample_gamma(hyper.influence_shape, hyper.influence_rate, rng);
          if (std::log(uniform01(rng)) < log_odds + delta_loglik(u, k, w, phi)) {
            apply(u, k, w);
            p.adjacency(u, v, k) = 1;
            p.influence(u, v, k) = w;
            ++c.toggles_accepted;
          }
        } else {
          const double w = p.influence(u, v, k);
          if (std::log(uniform01(rng)) < -log_odds + delta_loglik(u, k, -w, phi)) {
            apply(u, k, -w);
            p.adjacency(u, v, k) = 0;
            p.influence(u, v, k) = 0.0;
            ++c.toggles_accepted;
          }
        }
        if (!p.adjacency(u, v, k)) continue;
        const double w = p.influence(u, v, k);
        const double w_new = w * std::exp(step(rng));
        const double log_prior_ratio =
            hyper.influence_shape * std::log(w_new / w) - hyper.influence_rate * (w_new - w);
        ++c.scale_proposed;
        if (std::log(uniform01(rng)) < log_prior_ratio + delta_loglik(u, k, w_new - w, phi)) {
          apply(u, k, w_new - w);
          p.influence(u, v, k) = w_new;
          ++c.scale_accepted;
        }
      }
    }
  });
  EdgeMoveCounts out;
  for (const auto& c : counts) {
    out.toggles_accepted += c.toggles_accepted;
    out.toggles_proposed += c.toggles_proposed;
    out.scale_accepted += c.scale_accepted;
    out.scale_proposed += c.scale_proposed;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sweep

/// Sweep phases; each gets its own stream family per iteration.
enum class Phase : std::uint64_t {
  kParents = 1, kInfluence, kBackground, kAdjacency, kRefresh, kPi, kAuthoritative, kSusceptible, kEdgeMoves
};

struct SweepDiagnostics {
  bool pi_accepted = false;
  std::size_t authoritative_accepted = 0;
  std::size_t susceptible_accepted = 0;
  EdgeMoveCounts edge_moves;
};

/// Blocks of the sweep that may be held fixed.
struct SweepOptions {
  bool update_layer_activity = true;
  bool update_authoritative = true;
  bool update_susceptible = true;
};

/// One full sweep: optional summed-label edge moves, parents, counts, W,
/// lambda, G (with W drawn for edges the step switches on), pi, A, S.
inline SweepDiagnostics sweep(ChainState& state, const EventLog& log, const ParentCandidates& candidates,
                              const SourceKernelSums* sums, const NodeLayerTable& psi, TriggerCompensator mode,
                              const Hyperparameters& hyper, std::uint64_t seed, std::size_t workers = 1,
                              const SweepOptions& options = {}) {
  auto& p = state.params;
  const auto it = ++state.iteration;
  auto key = [&](Phase phase) { return stream_key(seed, it, static_cast<std::uint64_t>(phase)); };

  SweepDiagnostics d;
  if (sums) d.edge_moves = marginal_edge_moves(p, log, *sums, psi, mode, hyper, key(Phase::kEdgeMoves), workers);
  state.assignment = sample_parents(log, candidates, p, key(Phase::kParents), workers);
  const auto stats = compute_sufficient_stats(log, state.assignment);
  p.influence = sample_influences(stats, p, hyper, psi, mode, key(Phase::kInfluence));
  p.nodes.background = sample_background_rates(stats, hyper, log.window, key(Phase::kBackground));

  auto g = sample_adjacency_posterior(p, stats, hyper, psi, mode, key(Phase::kAdjacency), workers);
  {
    StreamRng rng(key(Phase::kRefresh));
    for (std::size_t u = 0; u < p.n_nodes; ++u)
      for (std::size_t v = 0; v < p.n_nodes; ++v)
        for (std::size_t k = 0; k < p.n_layers; ++k) {
          if (!g(u, v, k)) {
            p.influence(u, v, k) = 0.0;
          } else if (!p.adjacency(u, v, k)) {
            const double phi = edge_exposure(psi, p.nodes.susceptible, u, v, k, mode);
            p.influence(u, v, k) = sample_gamma(hyper.influence_shape, phi + hyper.influence_rate, rng);
          }
        }
  }
  p.adjacency = std::move(g);

  if (options.update_layer_activity) {
    auto pi = mh_update_pi(p, hyper, key(Phase::kPi));
    p.layer_activity.pi = std::move(pi.value);
    d.pi_accepted = pi.accepted;
  }
  if (options.update_authoritative) {
    auto a = mh_update_authoritative(p, stats, hyper, key(Phase::kAuthoritative), workers);
    p.nodes.authoritative = std::move(a.value);
    d.authoritative_accepted = a.accepted;
  }
  if (options.update_susceptible) {
    auto s = mh_update_susceptible(p, stats, hyper, psi, mode, key(Phase::kSusceptible), workers);
    p.nodes.susceptible = std::move(s.value);
    d.susceptible_accepted = s.accepted;
  }
  return d;
}

/// Metropolis-within-Gibbs chain; retains every `thin`-th iteration after
/// burn-in and summarizes the retained samples by their means.
inline ChainResult run_chain(const EventLog& log, const NodeLayerTable& topic_prior, const ChainConfig& config,
                             const Hyperparameters& hyper, const DelayKernel& kernel) {
  validate(config);
  validate(kernel);
  validate(log);
  validate(hyper, log.n_nodes, log.n_layers);
  if (log.empty() && !config.allow_empty_log) throw DataError("event log is empty");
  if (topic_prior.n_nodes() != log.n_nodes || topic_prior.n_layers() != log.n_layers)
    throw DataError("topic prior shape does not match the event log");

  const auto N = log.n_nodes, K = log.n_layers, M = log.events.size();
  const ParentCandidates candidates(log, kernel);
  const auto psi = source_exposure(log, kernel, config.compensator);
  std::optional<SourceKernelSums> sums;
  if (config.edge_moves) sums.emplace(candidates, N);

  ChainResult result;
  ChainState state = initialize_chain(log, topic_prior, hyper, kernel, config);
  auto& sum = result.summary;
  sum.n_nodes = N;
  sum.n_layers = K;
  sum.mean_influence = InfluenceTensor(N, K, 0.0);
  sum.edge_probability = Tensor3<double>(N, K, 0.0);
  sum.mean_background = NodeLayerTable(N, K);
  sum.mean_authoritative = NodeLayerTable(N, K);
  sum.mean_susceptible = NodeLayerTable(N, K);
  sum.mean_layer_activity.assign(K, 0.0);
  std::vector<std::map<std::pair<std::size_t, std::size_t>, std::size_t>> label_counts(M);
  if (config.keep_trace) result.trace.emplace();

  std::size_t pi_acc = 0, a_acc = 0, s_acc = 0;
  for (std::size_t i = 1; i <= config.iterations; ++i) {
    const auto d = sweep(state, log, candidates, sums ? &*sums : nullptr, psi, config.compensator, hyper, config.seed,
                         config.workers);
    pi_acc += d.pi_accepted;
    a_acc += d.authoritative_accepted;
    s_acc += d.susceptible_accepted;
    if (result.trace) result.trace->assignments.push_back(state.assignment);
    if (i <= config.burn_in || (i - config.burn_in) % config.thin != 0) continue;

    const auto& p = state.params;
    ++sum.samples;
    for (std::size_t j = 0; j < p.influence.size(); ++j) {
      sum.mean_influence.raw()[j] += p.influence.raw()[j];
      sum.edge_probability.raw()[j] += p.adjacency.raw()[j];
    }
    for (std::size_t j = 0; j < N * K; ++j) {
      sum.mean_background.raw()[j] += p.nodes.background.raw()[j];
      sum.mean_authoritative.raw()[j] += p.nodes.authoritative.raw()[j];
      sum.mean_susceptible.raw()[j] += p.nodes.susceptible.raw()[j];
    }
    for (std::size_t k = 0; k < K; ++k) sum.mean_layer_activity[k] += p.layer_activity.pi[k];
    for (std::size_t m = 0; m < M; ++m) ++label_counts[m][{state.assignment[m].parent, state.assignment[m].layer}];
    if (result.trace) {
      result.trace->retained_iterations.push_back(i);
      result.trace->retained_params.push_back(p);
    }
  }

  const double n = static_cast<double>(sum.samples);
  for (auto* v : {&sum.mean_influence.raw(), &sum.edge_probability.raw(), &sum.mean_background.raw(),
                  &sum.mean_authoritative.raw(), &sum.mean_susceptible.raw(), &sum.mean_layer_activity})
    for (double& x : *v) x /= n;
  sum.parent_frequencies.resize(M);
  sum.modal_assignment.resize(M);
  for (std::size_t m = 0; m < M; ++m) {
    std::size_t best = 0;
    for (const auto& [label, count] : label_counts[m]) {
      const ParentLabel l{label.first, label.second};
      sum.parent_frequencies[m].push_back({l, static_cast<double>(count) / n});
      if (count > best) {
        best = count;
        sum.modal_assignment[m] = l;
      }
    }
  }
  const double iters = static_cast<double>(config.iterations);
  sum.pi_acceptance = static_cast<double>(pi_acc) / iters;
  sum.authoritative_acceptance = static_cast<double>(a_acc) / (iters * static_cast<double>(N));
  sum.susceptible_acceptance = static_cast<double>(s_acc) / (iters * static_cast<double>(N));
  result.final_state = std::move(state);
  return result;
}

}  // namespace mdm

#endif  // MDM_INFERENCE_HPP
