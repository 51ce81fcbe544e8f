#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "mdm/mdm.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<std::size_t> iterations, burn_in, thin, layers, replications, workers;
  std::optional<double> window;
};

mdm::ExperimentConfig resolve(const Overrides& o) {
  mdm::ExperimentConfig c;
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw mdm::ConfigError(o.config + ": cannot open config");
    mdm::apply_config_text(c, in, o.config);
  }
  if (o.seed) c.seed = *o.seed;
  if (o.output_dir) c.output_dir = *o.output_dir;
  if (o.iterations) c.chain.iterations = *o.iterations;
  if (o.burn_in) c.chain.burn_in = *o.burn_in;
  if (o.thin) c.chain.thin = *o.thin;
  if (o.layers) c.simulation.n_layers = *o.layers;
  if (o.replications) c.replications = *o.replications;
  if (o.workers) c.workers = c.chain.workers = *o.workers;
  if (o.window) {
    c.simulation.window.length = *o.window;
    c.windows = {*o.window};
  }
  c.finalize();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiplex diffusion networks: simulate marked Hawkes cascades and infer the network by MCMC"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides o;
  app.add_option("--config", o.config, "Experiment config file (key = value)")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "Master seed (required by simulate, infer, pipeline)");
  app.add_option("--output-dir", o.output_dir, "Output directory");
  app.add_option("--iterations", o.iterations, "MCMC iterations");
  app.add_option("--burn-in", o.burn_in, "Discarded leading iterations");
  app.add_option("--thin", o.thin, "Stride between retained iterations");
  app.add_option("--layers", o.layers, "Number of layers");
  app.add_option("--window", o.window, "Observation window length, replacing the window sweep");
  app.add_option("--replications", o.replications, "Replications for generate and pipeline");
  app.add_option("--workers", o.workers, "Worker threads");

  auto* generate = app.add_subcommand("generate", "Draw ground-truth networks, one per replication");

  auto* simulate = app.add_subcommand("simulate", "Simulate cascades over each window from a network");
  std::string network_dir;
  simulate->add_option("--network", network_dir, "Network directory (edges.csv, nodes.csv, layers.csv)")
      ->required()
      ->check(CLI::ExistingDirectory);

  auto* infer = app.add_subcommand("infer", "Run the sampler on an event log");
  mdm::InferOptions infer_opts;
  std::string infer_events, infer_network, fit_kernel;
  infer->add_option("--events", infer_events, "Event log")->required()->check(CLI::ExistingFile);
  infer->add_option("--network", infer_network, "Network directory supplying the node topic prior")
      ->check(CLI::ExistingDirectory);
  infer->add_option("--fit-kernel", fit_kernel, "Parent file whose delays fit the lognormal kernel")
      ->check(CLI::ExistingFile);
  bool trace = false;
  infer->add_flag("--trace", trace, "Write trace files");

  auto* evaluate = app.add_subcommand("evaluate", "Score a posterior summary against the truth");
  std::string eval_network, eval_summary, eval_parents, eval_trace;
  evaluate->add_option("--network", eval_network, "Ground-truth network directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  evaluate->add_option("--summary", eval_summary, "Directory holding summary_*.csv")
      ->required()
      ->check(CLI::ExistingDirectory);
  evaluate->add_option("--parents", eval_parents, "Ground-truth parent file")->check(CLI::ExistingFile);
  evaluate->add_option("--trace", eval_trace, "trace_parents.csv for the convergence series")
      ->check(CLI::ExistingFile);

  auto* pipeline = app.add_subcommand("pipeline", "generate, simulate, infer and evaluate every replication");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  const bool needs_seed = simulate->parsed() || infer->parsed() || pipeline->parsed();
  if (needs_seed && !o.seed) {
    std::cerr << "error: --seed is required for this command\n";
    return kUsage;
  }

  try {
    auto config = resolve(o);
    if (generate->parsed()) {
      mdm::cmd_generate(config);
    } else if (simulate->parsed()) {
      const auto logs = mdm::cmd_simulate(config, network_dir);
      for (const auto& log : logs) std::cout << "T=" << log.window.length << " events=" << log.size() << '\n';
    } else if (infer->parsed()) {
      infer_opts.events = infer_events;
      if (!infer_network.empty()) infer_opts.network = infer_network;
      if (!fit_kernel.empty()) infer_opts.kernel_parents = fit_kernel;
      config.chain.keep_trace = config.chain.keep_trace || trace;
      const auto result = mdm::cmd_infer(config, infer_opts);
      std::cout << "samples=" << result.summary.samples << " pi_acceptance=" << result.summary.pi_acceptance
                << " A_acceptance=" << result.summary.authoritative_acceptance
                << " S_acceptance=" << result.summary.susceptible_acceptance << '\n';
    } else if (evaluate->parsed()) {
      mdm::EvaluateOptions eo{eval_network, eval_summary, std::nullopt, std::nullopt};
      if (!eval_parents.empty()) eo.parents = eval_parents;
      if (!eval_trace.empty()) eo.parent_trace = eval_trace;
      const auto report = mdm::cmd_evaluate(config, eo);
      for (const auto& [name, value] : mdm::io::report_rows(report)) std::cout << name << ' ' << value << '\n';
    } else if (pipeline->parsed()) {
      const auto outcomes = mdm::cmd_pipeline(config);
      for (const auto& rep : outcomes)
        for (const auto& w : rep.windows)
          std::cout << "rep=" << rep.replication << " T=" << w.window << " events=" << w.events
                    << " parent_channel_accuracy=" << w.report.parent_channel_accuracy.value_or(0.0)
                    << " tae_influence=" << w.report.tae_influence << '\n';
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const mdm::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const mdm::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}
