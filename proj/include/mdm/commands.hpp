#ifndef MDM_COMMANDS_HPP
#define MDM_COMMANDS_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "mdm/config.hpp"
#include "mdm/evaluation.hpp"
#include "mdm/generative.hpp"
#include "mdm/inference.hpp"
#include "mdm/io.hpp"
#include "mdm/parallel.hpp"

namespace mdm {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Seeds

inline std::uint64_t replication_seed(std::uint64_t seed, std::size_t replication) {
  return stream_key(seed, 0x726570, replication);
}
inline std::uint64_t cascade_seed(std::uint64_t rep_seed) { return stream_key(rep_seed, 0x636173); }
inline std::uint64_t chain_seed(std::uint64_t rep_seed) { return stream_key(rep_seed, 0x636861); }

inline std::string window_tag(double window) {
  const double r = std::round(window);
  return r == window ? std::to_string(static_cast<long long>(r)) : io::format_double(window);
}

// ---------------------------------------------------------------------------
// Library-level steps

/// Draws networks from the prior until one has max_branching_ratio at or
/// below `config.max_branching`.
inline MultiplexParams screened_network(const ExperimentConfig& config, std::uint64_t seed) {
  auto sim = config.simulation;
  for (std::size_t draw = 0; draw < config.max_network_draws; ++draw) {
    sim.seed = stream_key(seed, 0x6e6574, draw);
    auto params = sample_network(sim);
    if (max_branching_ratio(params) <= config.max_branching) return params;
  }
  throw NumericalError("no network with branching ratio <= " + io::format_double(config.max_branching) + " in " +
                       std::to_string(config.max_network_draws) + " draws");
}

/// Event logs for every window in `config.windows`. Nested sweeps simulate
/// the longest window once and take prefixes; otherwise each window gets an
/// independent realization.
inline std::vector<EventLog> simulate_windows(const MultiplexParams& params, const ExperimentConfig& config,
                                              std::uint64_t seed) {
  std::vector<EventLog> logs;
  auto sim = config.simulation;
  if (config.nested) {
    sim.window.length = *std::max_element(config.windows.begin(), config.windows.end());
    sim.seed = seed;
    const auto full = simulate_cascades(params, sim);
    for (double w : config.windows) logs.push_back(truncate_window(full, w));
  } else {
    for (std::size_t i = 0; i < config.windows.size(); ++i) {
      sim.window.length = config.windows[i];
      sim.seed = stream_key(seed, i);
      logs.push_back(simulate_cascades(params, sim));
    }
  }
  return logs;
}

/// Dirichlet concentration per node by moment matching of the topic rows of
/// its events; nodes with fewer than two events or no spread get all ones.
inline NodeLayerTable estimate_topic_prior(const EventLog& log) {
  const auto N = log.n_nodes, K = log.n_layers;
  NodeLayerTable alpha(N, K, 1.0);
  std::vector<std::vector<double>> sum(N, std::vector<double>(K, 0.0)), sq = sum;
  std::vector<std::size_t> count(N, 0);
  for (const auto& e : log.events) {
    ++count[e.node];
    for (std::size_t k = 0; k < K; ++k) {
      sum[e.node][k] += e.topic[k];
      sq[e.node][k] += e.topic[k] * e.topic[k];
    }
  }
  for (std::size_t u = 0; u < N; ++u) {
    if (count[u] < 2 || K < 2) continue;
    const double n = static_cast<double>(count[u]);
    double precision_sum = 0.0, weight = 0.0;
    std::vector<double> mean(K);
    for (std::size_t k = 0; k < K; ++k) {
      mean[k] = sum[u][k] / n;
      const double var = (sq[u][k] - n * mean[k] * mean[k]) / (n - 1.0);
      const double spread = mean[k] * (1.0 - mean[k]);
      if (var > 0.0 && spread > 0.0) {
        precision_sum += spread * (spread / var - 1.0);
        weight += spread;
      }
    }
    if (!(weight > 0.0)) continue;
    const double precision = std::clamp(precision_sum / weight, 0.1, 1e4);
    for (std::size_t k = 0; k < K; ++k) alpha(u, k) = std::max(1e-3, precision * mean[k]);
  }
  return alpha;
}

inline EvalReport evaluate(const MultiplexParams& truth, const PosteriorSummary& summary,
                           const ParentAssignment* truth_parents) {
  if (truth.n_nodes != summary.n_nodes || truth.n_layers != summary.n_layers)
    throw DataError("truth has shape (" + std::to_string(truth.n_nodes) + "," + std::to_string(truth.n_layers) +
                    ") but the summary has (" + std::to_string(summary.n_nodes) + "," +
                    std::to_string(summary.n_layers) + ")");
  EvalReport r;
  try {
    r.mae = mae_influence(truth.influence, summary.mean_influence);
  } catch (const UndefinedMetric&) {
  }
  r.false_edge_mass = false_edge_mass(truth.influence, summary.mean_influence);
  r.tae_influence = tae(truth.influence.raw(), summary.mean_influence.raw());
  r.tae_background = tae(truth.nodes.background, summary.mean_background);
  r.tae_authoritative = tae(truth.nodes.authoritative, summary.mean_authoritative);
  r.tae_susceptible = tae(truth.nodes.susceptible, summary.mean_susceptible);
  if (truth_parents) {
    r.parent_accuracy = parent_accuracy(*truth_parents, summary.modal_assignment);
    r.parent_channel_accuracy = parent_channel_accuracy(*truth_parents, summary.modal_assignment);
  }
  try {
    r.edge_auc = edge_auc(truth.adjacency, summary.edge_probability);
  } catch (const UndefinedMetric&) {
  }
  return r;
}

/// Mean absolute error per component over lambda, A and S together.
inline double node_parameter_mae(const MultiplexParams& truth, const PosteriorSummary& summary) {
  const double total = tae(truth.nodes.background, summary.mean_background) +
                       tae(truth.nodes.authoritative, summary.mean_authoritative) +
                       tae(truth.nodes.susceptible, summary.mean_susceptible);
  return total / static_cast<double>(3 * truth.n_nodes * truth.n_layers);
}

struct WindowOutcome {
  double window = 0.0;
  std::size_t events = 0;
  EvalReport report;
  double node_mae = 0.0;
  std::vector<double> convergence;  // parent+channel accuracy per iteration
};

struct ReplicationOutcome {
  std::size_t replication = 0;
  double branching_ratio = 0.0;
  std::vector<WindowOutcome> windows;
};

/// One replication of generate -> simulate -> infer -> evaluate over every
/// window. Files go to `dir` when given.
inline ReplicationOutcome run_replication(const ExperimentConfig& config, std::size_t replication,
                                          const std::optional<fs::path>& dir) {
  const auto rep_seed = replication_seed(config.seed, replication);
  ReplicationOutcome out;
  out.replication = replication;
  const auto params = screened_network(config, rep_seed);
  out.branching_ratio = max_branching_ratio(params);
  if (dir) io::write_network(*dir / "network", params);
  const auto logs = simulate_windows(params, config, cascade_seed(rep_seed));

  auto chain = config.chain;
  chain.seed = chain_seed(rep_seed);
  chain.keep_trace = true;
  for (const auto& log : logs) {
    WindowOutcome w;
    w.window = log.window.length;
    w.events = log.size();
    const auto result = run_chain(log, params.nodes.topic_prior, chain, config.simulation.hyper, config.simulation.kernel);
    w.report = evaluate(params, result.summary, &*log.ground_truth);
    w.node_mae = node_parameter_mae(params, result.summary);
    w.convergence = convergence_trace(result.trace->assignments, *log.ground_truth);
    if (dir) {
      const auto wdir = *dir / ("T" + window_tag(w.window));
      io::write_events(wdir / "events.csv", log);
      io::write_parents(wdir / "parents.csv", *log.ground_truth);
      io::write_summary(wdir, result.summary);
      if (config.chain.keep_trace) io::write_trace(wdir, *result.trace);
      io::write_report(wdir / "report.csv", w.report);
      io::write_series(wdir / "convergence.csv", w.convergence);
    }
    out.windows.push_back(std::move(w));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Commands

inline fs::path replication_dir(const fs::path& root, std::size_t r) { return root / ("rep_" + std::to_string(r)); }

inline void save_config(const ExperimentConfig& config, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream out(dir / "config_used.cfg");
  write_config(out, config);
  if (!out) throw DataError((dir / "config_used.cfg").string() + ": write failed");
}

/// Writes one screened ground-truth network per replication under
/// output_dir/rep_<r>/network.
inline std::vector<MultiplexParams> cmd_generate(const ExperimentConfig& config) {
  save_config(config, config.output_dir);
  std::vector<MultiplexParams> nets(config.replications);
  parallel_for(config.replications, config.workers, [&](std::size_t r) {
    nets[r] = screened_network(config, replication_seed(config.seed, r));
    io::write_network(replication_dir(config.output_dir, r) / "network", nets[r]);
  });
  return nets;
}

/// Simulates every configured window from the network in `network_dir` and
/// writes output_dir/T<window>/{events,parents}.csv.
inline std::vector<EventLog> cmd_simulate(const ExperimentConfig& config, const fs::path& network_dir) {
  const auto params = io::read_network(network_dir);
  if (params.n_nodes != config.simulation.n_nodes || params.n_layers != config.simulation.n_layers)
    throw DataError(network_dir.string() + ": network shape (" + std::to_string(params.n_nodes) + "," +
                    std::to_string(params.n_layers) + ") differs from the config (" +
                    std::to_string(config.simulation.n_nodes) + "," + std::to_string(config.simulation.n_layers) +
                    ")");
  auto logs = simulate_windows(params, config, cascade_seed(config.seed));
  for (const auto& log : logs) {
    const auto dir = config.output_dir / ("T" + window_tag(log.window.length));
    io::write_events(dir / "events.csv", log);
    io::write_parents(dir / "parents.csv", *log.ground_truth);
  }
  return logs;
}

struct InferOptions {
  fs::path events;
  std::optional<fs::path> network;        // supplies the topic prior (alpha column)
  std::optional<fs::path> kernel_parents; // parent annotations to fit the delay kernel
};

/// Runs the sampler on an event log and writes summaries (and traces when
/// chain.keep_trace is set) to output_dir.
inline ChainResult cmd_infer(const ExperimentConfig& config, const InferOptions& options) {
  const auto log = io::read_events(options.events);
  auto kernel = config.simulation.kernel;
  if (options.kernel_parents) {
    const auto parents = io::read_parents(*options.kernel_parents, log.n_layers);
    try {
      validate(parents, log);
    } catch (const DataError& e) {
      throw DataError(options.kernel_parents->string() + ": " + e.what());
    }
    const auto delays = io::parent_delays(log, parents);
    kernel = fit_delay_kernel(delays);
  }
  NodeLayerTable topic_prior;
  if (options.network) {
    const auto net = io::read_network(*options.network);
    if (net.n_nodes != log.n_nodes || net.n_layers != log.n_layers)
      throw DataError(options.network->string() + ": network shape (" + std::to_string(net.n_nodes) + "," +
                      std::to_string(net.n_layers) + ") differs from the event log (" +
                      std::to_string(log.n_nodes) + "," + std::to_string(log.n_layers) + ")");
    topic_prior = net.nodes.topic_prior;
  } else {
    topic_prior = estimate_topic_prior(log);
  }
  const auto hyper = config.hyper.build(log.n_nodes, log.n_layers);
  auto chain = config.chain;
  chain.seed = chain_seed(config.seed);
  auto result = run_chain(log, topic_prior, chain, hyper, kernel);
  io::write_summary(config.output_dir, result.summary);
  if (result.trace) io::write_trace(config.output_dir, *result.trace);
  std::ofstream k(config.output_dir / "kernel.csv");
  k << "log_mean,log_sdev\n" << io::format_double(kernel.log_mean) << ',' << io::format_double(kernel.log_sdev) << '\n';
  return result;
}

struct EvaluateOptions {
  fs::path network;
  fs::path summary;
  std::optional<fs::path> parents;       // ground-truth parent file
  std::optional<fs::path> parent_trace;  // trace_parents.csv for the convergence series
};

/// Compares a summary with the truth and writes output_dir/report.csv (and
/// convergence.csv when a parent trace and true parents are given).
inline EvalReport cmd_evaluate(const ExperimentConfig& config, const EvaluateOptions& options) {
  const auto truth = io::read_network(options.network);
  const auto summary = io::read_summary(options.summary);
  std::optional<ParentAssignment> parents;
  if (options.parents) {
    parents = io::read_parents(*options.parents, truth.n_layers);
    if (parents->size() != summary.modal_assignment.size())
      throw DataError(options.parents->string() + ": " + std::to_string(parents->size()) +
                      " parent rows but the summary covers " + std::to_string(summary.modal_assignment.size()) +
                      " events");
  }
  const auto report = evaluate(truth, summary, parents ? &*parents : nullptr);
  io::write_report(config.output_dir / "report.csv", report);
  if (options.parent_trace && parents) {
    const auto trace = io::read_parent_trace(*options.parent_trace, truth.n_layers);
    io::write_series(config.output_dir / "convergence.csv", convergence_trace(trace, *parents));
  }
  return report;
}

/// Every replication end to end, plus pipeline_summary.csv (one row per
/// replication and window) and pipeline_means.csv (means per window).
inline std::vector<ReplicationOutcome> cmd_pipeline(const ExperimentConfig& config) {
  save_config(config, config.output_dir);
  std::vector<ReplicationOutcome> outcomes(config.replications);
  parallel_for(config.replications, config.workers, [&](std::size_t r) {
    outcomes[r] = run_replication(config, r, replication_dir(config.output_dir, r));
  });

  const auto header_rows = io::report_rows(EvalReport{});
  {
    const auto path = config.output_dir / "pipeline_summary.csv";
    std::ofstream out(path);
    out << "replication,window,events,branching_ratio,node_mae";
    for (const auto& [name, _] : header_rows) out << ',' << name;
    out << '\n';
    for (const auto& o : outcomes)
      for (const auto& w : o.windows) {
        out << o.replication << ',' << window_tag(w.window) << ',' << w.events << ','
            << io::format_double(o.branching_ratio) << ',' << io::format_double(w.node_mae);
        for (const auto& [_, value] : io::report_rows(w.report)) out << ',' << value;
        out << '\n';
      }
    if (!out) throw DataError(path.string() + ": write failed");
  }
  {
    const auto path = config.output_dir / "pipeline_means.csv";
    std::ofstream out(path);
    out << "window,events,node_mae,tae_influence,parent_accuracy,parent_channel_accuracy,edge_auc\n";
    for (std::size_t i = 0; i < config.windows.size(); ++i) {
      double events = 0, mae = 0, tae_w = 0, pa = 0, pc = 0, auc_sum = 0;
      std::size_t auc_n = 0;
      for (const auto& o : outcomes) {
        const auto& w = o.windows[i];
        events += static_cast<double>(w.events);
        mae += w.node_mae;
        tae_w += w.report.tae_influence;
        pa += w.report.parent_accuracy.value_or(0.0);
        pc += w.report.parent_channel_accuracy.value_or(0.0);
        if (w.report.edge_auc) {
          auc_sum += *w.report.edge_auc;
          ++auc_n;
        }
      }
      const double n = static_cast<double>(outcomes.size());
      out << window_tag(config.windows[i]) << ',' << io::format_double(events / n) << ','
          << io::format_double(mae / n) << ',' << io::format_double(tae_w / n) << ',' << io::format_double(pa / n)
          << ',' << io::format_double(pc / n) << ','
          << (auc_n ? io::format_double(auc_sum / static_cast<double>(auc_n)) : "undefined") << '\n';
    }
    if (!out) throw DataError(path.string() + ": write failed");
  }
  return outcomes;
}

}  // namespace mdm

#endif  // MDM_COMMANDS_HPP
