// Simulates one 9-node, 3-layer network, infers it back from a 5000 s log
// and prints the recovery metrics.
#include <cstdio>

#include "mdm/mdm.hpp"

int main(int argc, char** argv) {
  mdm::ExperimentConfig config;
  if (argc > 1) config = mdm::read_config(argv[1]);
  config.windows = {config.simulation.window.length};
  config.finalize();

  const auto outcome = mdm::run_replication(config, 0, std::nullopt);
  const auto& w = outcome.windows.front();
  std::printf("branching ratio      %.3f\n", outcome.branching_ratio);
  std::printf("events               %zu\n", w.events);
  std::printf("parent accuracy      %.3f\n", w.report.parent_accuracy.value_or(0.0));
  std::printf("parent+channel acc.  %.3f\n", w.report.parent_channel_accuracy.value_or(0.0));
  std::printf("influence TAE        %.3f\n", w.report.tae_influence);
  if (w.report.mae) std::printf("influence MAE        %.3f (signed %.3f)\n", w.report.mae->absolute, w.report.mae->signed_mean);
  std::printf("lambda/A/S mean err  %.3f\n", w.node_mae);
  if (w.report.edge_auc) std::printf("edge AUC             %.3f\n", *w.report.edge_auc);
  return 0;
}
