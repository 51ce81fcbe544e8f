#ifndef MDM_MODEL_HPP
#define MDM_MODEL_HPP

#include <cmath>
#include <span>
#include <vector>

#include "mdm/kernel.hpp"
#include "mdm/random.hpp"
#include "mdm/types.hpp"

namespace mdm {

/// Prior probability of a directed edge u -> v on layer k.
inline double edge_probability(double pi_k, double a_uk, double s_vk) { return pi_k * a_uk * s_vk; }

/// Channel-selection weights of an event with `topic` spreading to a node
/// with `susceptible` vector. Layers outside `candidate_layers` get zero; the
/// remaining mass 1 - sum is the probability of not spreading at all.
inline std::vector<double> channel_vector(std::span<const double> topic, std::span<const double> susceptible,
                                          const std::vector<bool>& candidate_layers) {
  std::vector<double> h(topic.size(), 0.0);
  for (std::size_t k = 0; k < topic.size(); ++k)
    if (candidate_layers[k]) h[k] = topic[k] * susceptible[k];
  return h;
}

inline std::vector<double> channel_vector(std::span<const double> topic, std::span<const double> susceptible) {
  std::vector<double> h(topic.size());
  for (std::size_t k = 0; k < topic.size(); ++k) h[k] = topic[k] * susceptible[k];
  return h;
}

/// Conditional intensity of `node` on `layer` at time t given the events of
/// `log` strictly before t.
inline double node_intensity(double t, std::size_t node, std::size_t layer, const EventLog& log,
                             const MultiplexParams& params, const DelayKernel& kernel) {
  double rate = params.nodes.background(node, layer);
  for (const auto& e : log.events) {
    if (!(e.time < t)) break;
    if (params.adjacency(e.node, node, layer) == 0) continue;
    rate += params.influence(e.node, node, layer) * delay_density(t - e.time, kernel);
  }
  return rate;
}

/// Superposition over layers; summed in layer order, so it is bitwise equal
/// to accumulating node_intensity for k = 0..K-1.
inline double total_intensity(double t, std::size_t node, const EventLog& log, const MultiplexParams& params,
                              const DelayKernel& kernel) {
  double rate = 0.0;
  for (std::size_t k = 0; k < params.n_layers; ++k) rate += node_intensity(t, node, k, log, params, kernel);
  return rate;
}

/// Log-probability of the adjacency tensor under the mixed-membership prior,
/// over off-diagonal entries.
inline double log_network_prior(const MultiplexParams& params) {
  const auto& pi = params.layer_activity.pi;
  double result = 0.0;
  for (std::size_t u = 0; u < params.n_nodes; ++u)
    for (std::size_t v = 0; v < params.n_nodes; ++v) {
      if (u == v) continue;
      for (std::size_t k = 0; k < params.n_layers; ++k) {
        const double rho = edge_probability(pi[k], params.nodes.authoritative(u, k), params.nodes.susceptible(v, k));
        result += params.adjacency(u, v, k) ? floored_log(rho) : floored_log(1.0 - rho);
      }
    }
  return result;
}

/// Form of the integrated trigger intensity of an event on u towards v on
/// layer k over the rest of the window.
enum class TriggerCompensator {
  kChannel,     // W * topic_k * S_vk * kernel mass left in the window
  kKernel,      // W * kernel mass left in the window
  kEventCount,  // W per event, ignoring truncation
};

/// Per-(source node, layer) exposure: the sum over the node's events of the
/// factor multiplying W in the compensator, without the S_vk term.
inline NodeLayerTable source_exposure(const EventLog& log, const DelayKernel& kernel,
                                      TriggerCompensator mode = TriggerCompensator::kChannel) {
  NodeLayerTable psi(log.n_nodes, log.n_layers);
  for (const auto& e : log.events) {
    const double mass = mode == TriggerCompensator::kEventCount ? 1.0 : delay_mass(0.0, log.window.length - e.time, kernel);
    for (std::size_t k = 0; k < log.n_layers; ++k)
      psi(e.node, k) += mode == TriggerCompensator::kChannel ? e.topic[k] * mass : mass;
  }
  return psi;
}

/// Exposure of edge (u, v, k): the coefficient of W_uvk in the compensator.
inline double edge_exposure(const NodeLayerTable& psi, const NodeLayerTable& susceptible, std::size_t u,
                            std::size_t v, std::size_t k, TriggerCompensator mode) {
  return mode == TriggerCompensator::kChannel ? psi(u, k) * susceptible(v, k) : psi(u, k);
}

/// Log of the joint density of cascades, parent labels and network given the
/// parameters: network prior, background compensators, A*lambda*Dir(topic)
/// per spontaneous event, truncated trigger compensators per existing edge,
/// and W*topic*S*delay per triggered event.
inline double log_joint(const EventLog& log, const ParentAssignment& assignment, const MultiplexParams& params,
                        const DelayKernel& kernel, TriggerCompensator mode = TriggerCompensator::kChannel) {
  validate(assignment, log);
  const double horizon = log.window.length;
  double result = log_network_prior(params);

  for (double rate : params.nodes.background.raw()) result -= rate * horizon;

  for (std::size_t m = 0; m < log.events.size(); ++m) {
    const auto& e = log.events[m];
    for (std::size_t v = 0; v < params.n_nodes; ++v) {
      if (v == e.node) continue;
      for (std::size_t k = 0; k < params.n_layers; ++k) {
        if (!params.adjacency(e.node, v, k)) continue;
        double exposure = mode == TriggerCompensator::kEventCount ? 1.0 : delay_mass(0.0, horizon - e.time, kernel);
        if (mode == TriggerCompensator::kChannel) exposure *= e.topic[k] * params.nodes.susceptible(v, k);
        result -= params.influence(e.node, v, k) * exposure;
      }
    }

    const auto& label = assignment[m];
    const auto k = label.layer;
    if (label.is_spontaneous()) {
      const auto alpha = params.nodes.topic_prior.row(e.node);
      result += floored_log(params.nodes.authoritative(e.node, k) * params.nodes.background(e.node, k));
      result += log_dirichlet_density(e.topic, alpha);
    } else {
      const auto& parent = log.events[label.parent];
      const double w = params.adjacency(parent.node, e.node, k) * params.influence(parent.node, e.node, k);
      result += floored_log(w * parent.topic[k] * params.nodes.susceptible(e.node, k) *
                            delay_density(e.time - parent.time, kernel));
    }
  }
  return result;
}

/// Log density of the parameters under their Gamma and Dirichlet priors.
inline double log_prior(const MultiplexParams& params, const Hyperparameters& hyper) {
  double result = log_dirichlet_density(params.layer_activity.pi, hyper.layer_prior);
  for (std::size_t u = 0; u < params.n_nodes; ++u) {
    result += log_dirichlet_density(params.nodes.authoritative.row(u), hyper.authoritative_prior);
    result += log_dirichlet_density(params.nodes.susceptible.row(u), hyper.susceptible_prior);
    for (std::size_t k = 0; k < params.n_layers; ++k)
      result += log_gamma_density(params.nodes.background(u, k), hyper.background_shape(u, k),
                                  hyper.background_rate(u, k));
  }
  for (std::size_t i = 0; i < params.adjacency.size(); ++i)
    if (params.adjacency.raw()[i])
      result += log_gamma_density(params.influence.raw()[i], hyper.influence_shape, hyper.influence_rate);
  return result;
}

}  // namespace mdm

#endif  // MDM_MODEL_HPP
