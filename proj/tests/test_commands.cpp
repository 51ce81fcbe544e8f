#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "mdm/commands.hpp"
#include "test_support.hpp"

namespace mdm {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CommandsTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("mdm_cmd_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  ExperimentConfig config(const std::string& sub = "out") const {
    ExperimentConfig c;
    c.simulation.n_nodes = 4;
    c.simulation.n_layers = 2;
    c.hyper.background_rate = 20.0;
    c.windows = {200.0, 400.0};
    c.chain.iterations = 40;
    c.chain.burn_in = 10;
    c.chain.thin = 5;
    c.replications = 2;
    c.output_dir = root_ / sub;
    c.finalize();
    return c;
  }

  fs::path root_;
};

// --- generate -----------------------------------------------------------------

TEST_F(CommandsTest, GenerateWritesReadableScreenedNetworks) {
  const auto c = config();
  const auto nets = cmd_generate(c);
  ASSERT_EQ(nets.size(), 2u);
  for (std::size_t r = 0; r < 2; ++r) {
    EXPECT_EQ(io::read_network(replication_dir(c.output_dir, r) / "network"), nets[r]);
    EXPECT_LE(max_branching_ratio(nets[r]), c.max_branching);
  }
  EXPECT_NE(nets[0], nets[1]);
  EXPECT_TRUE(fs::exists(c.output_dir / "config_used.cfg"));
  EXPECT_EQ(read_config(c.output_dir / "config_used.cfg").seed, c.seed);
}

TEST_F(CommandsTest, GenerateIsSeedDeterministic) {
  auto a = config("a"), b = config("b"), d = config("d");
  d.seed = 2;
  const auto na = cmd_generate(a), nb = cmd_generate(b), nd = cmd_generate(d);
  EXPECT_EQ(na, nb);
  EXPECT_NE(na, nd);
  for (const char* f : {"edges.csv", "nodes.csv", "layers.csv"})
    EXPECT_EQ(slurp(replication_dir(a.output_dir, 1) / "network" / f),
              slurp(replication_dir(b.output_dir, 1) / "network" / f));
}

TEST_F(CommandsTest, UnscreenedEdgeCountMatchesPrior) {
  // With symmetric Dirichlet priors E[pi_k A_uk S_vk] = 1 / K^3.
  auto c = config();
  c.max_branching = 1e300;
  std::vector<double> counts;
  for (std::size_t r = 0; r < 2000; ++r) {
    const auto p = screened_network(c, replication_seed(7, r));
    double e = 0.0;
    for (auto g : p.adjacency.raw()) e += g;
    counts.push_back(e);
  }
  const double expected = 4.0 * 3.0 * 2.0 / 8.0;
  const auto m = testing::moments(counts);
  EXPECT_NEAR(m.mean, expected, 4.0 * m.se);
}

TEST_F(CommandsTest, ScreeningGivesUpWithAMessage) {
  auto c = config();
  c.max_branching = 1e-12;
  c.max_network_draws = 3;
  c.simulation.n_layers = 1;
  c.finalize();
  try {
    screened_network(c, 1);
    ADD_FAILURE() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("in 3 draws"), std::string::npos);
  }
}

// --- simulate -----------------------------------------------------------------

TEST_F(CommandsTest, SimulateEmptyNetworkGivesHeaderOnlyLogs) {
  const auto c = config();
  auto p = MultiplexParams::zeros(4, 2);
  io::write_network(root_ / "empty", p);
  const auto logs = cmd_simulate(c, root_ / "empty");
  ASSERT_EQ(logs.size(), 2u);
  for (const auto& log : logs) EXPECT_TRUE(log.empty());
  const auto text = slurp(c.output_dir / "T200" / "events.csv");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
}

TEST_F(CommandsTest, SimulateWritesWindowsAndRespectsTheHorizon) {
  auto c = config();
  cmd_generate(c);
  const auto logs = cmd_simulate(c, replication_dir(c.output_dir, 0) / "network");
  for (const auto& log : logs) {
    const auto dir = c.output_dir / ("T" + window_tag(log.window.length));
    const auto back = io::read_events(dir / "events.csv");
    EXPECT_EQ(back.events, log.events);
    EXPECT_EQ(io::read_parents(dir / "parents.csv", 2), *log.ground_truth);
    for (const auto& e : back.events) EXPECT_LE(e.time, log.window.length);
  }
  // Nested windows are prefixes of the longest.
  ASSERT_LE(logs[0].size(), logs[1].size());
  for (std::size_t m = 0; m < logs[0].size(); ++m) EXPECT_EQ(logs[0].events[m], logs[1].events[m]);
  EXPECT_THROW(cmd_simulate(config(), root_ / "nowhere"), DataError);
}

TEST_F(CommandsTest, VolumeGrowsWithWindow) {
  auto c = config();
  c.nested = false;
  c.windows = {100.0, 400.0};
  std::vector<double> short_counts, long_counts;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto p = screened_network(c, replication_seed(s, 0));
    const auto logs = simulate_windows(p, c, s);
    short_counts.push_back(static_cast<double>(logs[0].size()));
    long_counts.push_back(static_cast<double>(logs[1].size()));
  }
  EXPECT_GT(testing::moments(long_counts).mean, 2.0 * testing::moments(short_counts).mean);
}

TEST_F(CommandsTest, SimulateRejectsShapeMismatch) {
  io::write_network(root_ / "net3", MultiplexParams::zeros(3, 2));
  EXPECT_THROW(cmd_simulate(config(), root_ / "net3"), DataError);
}

// --- infer --------------------------------------------------------------------

TEST_F(CommandsTest, InferIsDeterministicAndWritesSummaries) {
  auto c = config();
  cmd_generate(c);
  const auto net = replication_dir(c.output_dir, 0) / "network";
  cmd_simulate(c, net);
  const auto events = c.output_dir / "T400" / "events.csv";

  auto a = c;
  a.output_dir = root_ / "infer_a";
  auto b = c;
  b.output_dir = root_ / "infer_b";
  b.chain.keep_trace = true;
  const auto ra = cmd_infer(a, {events, net, std::nullopt});
  const auto rb = cmd_infer(b, {events, net, std::nullopt});
  for (const char* f : {"summary_edges.csv", "summary_nodes.csv", "summary_layers.csv", "summary_parents.csv"})
    EXPECT_EQ(slurp(a.output_dir / f), slurp(b.output_dir / f)) << f;
  EXPECT_FALSE(fs::exists(a.output_dir / "trace_parents.csv"));
  EXPECT_TRUE(fs::exists(b.output_dir / "trace_parents.csv"));

  const auto text = slurp(a.output_dir / "summary_edges.csv");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2 + 4 * 3 * 2);
  const auto nodes = slurp(a.output_dir / "summary_nodes.csv");
  EXPECT_EQ(std::count(nodes.begin(), nodes.end(), '\n'), 2 + 4 * 2);
  EXPECT_EQ(ra.summary.samples, 6u);
  EXPECT_EQ(ra.summary.modal_assignment.size(), io::read_events(events).size());

  auto kc = c;
  kc.output_dir = root_ / "infer_k";
  cmd_infer(kc, {events, std::nullopt, c.output_dir / "T400" / "parents.csv"});
  const auto kernel = slurp(kc.output_dir / "kernel.csv");
  EXPECT_EQ(kernel.substr(0, 17), "log_mean,log_sdev");
}

TEST_F(CommandsTest, DoubledVolumeRaisesBackgroundEstimates) {
  auto c = config();
  c.windows = {400.0};
  c.finalize();
  const auto p = screened_network(c, 11);
  auto first = simulate_windows(p, c, 1).front();
  const auto second = simulate_windows(p, c, 2).front();
  auto merged = first;
  merged.events.insert(merged.events.end(), second.events.begin(), second.events.end());
  std::stable_sort(merged.events.begin(), merged.events.end(),
                   [](const Event& x, const Event& y) { return x.time < y.time; });
  merged.ground_truth.reset();
  io::write_events(root_ / "single.csv", first);
  io::write_events(root_ / "double.csv", merged);
  io::write_network(root_ / "net", p);

  auto a = c;
  a.output_dir = root_ / "single";
  auto b = c;
  b.output_dir = root_ / "double";
  const auto rs = cmd_infer(a, {root_ / "single.csv", root_ / "net", std::nullopt});
  const auto rd = cmd_infer(b, {root_ / "double.csv", root_ / "net", std::nullopt});
  double ls = 0.0, ld = 0.0;
  for (double x : rs.summary.mean_background.raw()) ls += x;
  for (double x : rd.summary.mean_background.raw()) ld += x;
  EXPECT_GT(ld, 1.3 * ls);
}

TEST_F(CommandsTest, InferRejectsBadInputs) {
  auto c = config();
  io::write_events(root_ / "e.csv", testing::make_log(4, 2, 10.0, {testing::event(1.0, 0, {0.5, 0.5})}));
  io::write_network(root_ / "n3", MultiplexParams::zeros(3, 2));
  EXPECT_THROW(cmd_infer(c, {root_ / "e.csv", root_ / "n3", std::nullopt}), DataError);
  EXPECT_THROW(cmd_infer(c, {root_ / "missing.csv", std::nullopt, std::nullopt}), DataError);
  c.chain.burn_in = c.chain.iterations;
  EXPECT_THROW(cmd_infer(c, {root_ / "e.csv", std::nullopt, std::nullopt}), std::invalid_argument);
}

// --- evaluate -----------------------------------------------------------------

PosteriorSummary summary_of(const MultiplexParams& p, const ParentAssignment& parents) {
  PosteriorSummary s;
  s.n_nodes = p.n_nodes;
  s.n_layers = p.n_layers;
  s.samples = 1;
  s.mean_influence = p.influence;
  s.edge_probability = Tensor3<double>(p.n_nodes, p.n_layers, 0.0);
  for (std::size_t i = 0; i < p.adjacency.size(); ++i) s.edge_probability.raw()[i] = p.adjacency.raw()[i];
  s.mean_background = p.nodes.background;
  s.mean_authoritative = p.nodes.authoritative;
  s.mean_susceptible = p.nodes.susceptible;
  s.mean_layer_activity = p.layer_activity.pi;
  for (const auto& label : parents) s.parent_frequencies.push_back({{label, 1.0}});
  s.modal_assignment = parents;
  return s;
}

TEST_F(CommandsTest, TruthAgainstItself) {
  auto c = config();
  const auto nets = cmd_generate(c);
  const auto net = replication_dir(c.output_dir, 0) / "network";
  const auto logs = cmd_simulate(c, net);
  const auto& parents = *logs[1].ground_truth;
  io::write_summary(root_ / "self", summary_of(nets[0], parents));

  auto e = c;
  e.output_dir = root_ / "eval";
  const auto r = cmd_evaluate(e, {net, root_ / "self", c.output_dir / "T400" / "parents.csv", std::nullopt});
  EXPECT_EQ(r.tae_influence, 0.0);
  EXPECT_EQ(r.tae_background, 0.0);
  EXPECT_EQ(r.tae_authoritative, 0.0);
  EXPECT_EQ(r.tae_susceptible, 0.0);
  EXPECT_EQ(r.false_edge_mass, 0.0);
  EXPECT_EQ(r.parent_accuracy, 1.0);
  EXPECT_EQ(r.parent_channel_accuracy, 1.0);
  if (r.mae) {
    EXPECT_EQ(r.mae->absolute, 0.0);
  }
  if (r.edge_auc) {
    EXPECT_EQ(*r.edge_auc, 1.0);
  }

  const auto back = io::read_report(e.output_dir / "report.csv");
  EXPECT_EQ(back.parent_channel_accuracy, 1.0);
}

TEST_F(CommandsTest, ReportSchemaIsStableAndMatchesLibrary) {
  auto c = config();
  c.chain.keep_trace = true;
  const auto nets = cmd_generate(c);
  const auto net = replication_dir(c.output_dir, 0) / "network";
  cmd_simulate(c, net);
  auto ic = c;
  ic.output_dir = root_ / "fit";
  const auto fit = cmd_infer(ic, {c.output_dir / "T400" / "events.csv", net, std::nullopt});

  auto e = c;
  e.output_dir = root_ / "eval";
  const auto parents_path = c.output_dir / "T400" / "parents.csv";
  const auto r = cmd_evaluate(e, {net, ic.output_dir, parents_path, ic.output_dir / "trace_parents.csv"});

  std::ifstream in(e.output_dir / "report.csv");
  std::vector<std::string> names;
  for (std::string line; std::getline(in, line);) names.push_back(line.substr(0, line.find(',')));
  EXPECT_EQ(names, (std::vector<std::string>{"metric", "mae_influence", "mae_influence_signed", "false_edge_mass",
                                             "tae_influence", "tae_lambda", "tae_A", "tae_S", "parent_accuracy",
                                             "parent_channel_accuracy", "edge_auc"}));

  const auto summary = io::read_summary(ic.output_dir);
  const auto truth_parents = io::read_parents(parents_path, 2);
  EXPECT_EQ(r.tae_background, tae(nets[0].nodes.background, summary.mean_background));
  EXPECT_EQ(r.tae_susceptible, tae(nets[0].nodes.susceptible, fit.summary.mean_susceptible));
  EXPECT_EQ(r.parent_channel_accuracy, parent_channel_accuracy(truth_parents, fit.summary.modal_assignment));
  if (r.edge_auc) {
    EXPECT_EQ(*r.edge_auc, edge_auc(nets[0].adjacency, fit.summary.edge_probability));
  }

  const auto series = io::read_series(e.output_dir / "convergence.csv");
  ASSERT_EQ(series.size(), c.chain.iterations);
  const auto reference = convergence_trace(fit.trace->assignments, truth_parents);
  EXPECT_EQ(series, reference);
}

TEST_F(CommandsTest, EvaluateRejectsMismatchedInputs) {
  auto c = config();
  const auto nets = cmd_generate(c);
  const auto net = replication_dir(c.output_dir, 0) / "network";
  io::write_summary(root_ / "s", summary_of(nets[0], {ParentLabel::spontaneous(0)}));
  io::write_parents(root_ / "p.csv", {ParentLabel::spontaneous(0), ParentLabel::triggered(0, 1)});
  EXPECT_THROW(cmd_evaluate(c, {net, root_ / "s", root_ / "p.csv", std::nullopt}), DataError);
  io::write_network(root_ / "n3", MultiplexParams::zeros(3, 2));
  EXPECT_THROW(cmd_evaluate(c, {root_ / "n3", root_ / "s", std::nullopt, std::nullopt}), DataError);
}

// --- topic prior estimate and the pipeline -----------------------------------------

TEST_F(CommandsTest, TopicPriorEstimateRecoversConcentration) {
  std::mt19937_64 rng(4);
  const std::vector<double> alpha0{0.8, 2.0, 4.0}, alpha1{5.0, 5.0, 0.5};
  std::vector<Event> events;
  for (int i = 0; i < 20000; ++i) {
    events.push_back(testing::event(i * 0.001, 0, sample_dirichlet(alpha0, rng)));
    events.push_back(testing::event(i * 0.001, 1, sample_dirichlet(alpha1, rng)));
  }
  events.push_back(testing::event(30.0, 2, {0.2, 0.3, 0.5}));
  const auto alpha = estimate_topic_prior(testing::make_log(4, 3, 40.0, events));
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(alpha(0, k), alpha0[k], 0.05 * alpha0[k]);
    EXPECT_NEAR(alpha(1, k), alpha1[k], 0.05 * alpha1[k]);
    EXPECT_EQ(alpha(2, k), 1.0);
    EXPECT_EQ(alpha(3, k), 1.0);
  }
}

TEST_F(CommandsTest, PipelineIsWorkerIndependent) {
  auto a = config("w1");
  auto b = config("w2");
  b.workers = 2;
  const auto oa = cmd_pipeline(a);
  const auto ob = cmd_pipeline(b);
  EXPECT_EQ(slurp(a.output_dir / "pipeline_summary.csv"), slurp(b.output_dir / "pipeline_summary.csv"));
  EXPECT_EQ(slurp(a.output_dir / "pipeline_means.csv"), slurp(b.output_dir / "pipeline_means.csv"));
  ASSERT_EQ(oa.size(), 2u);
  for (const auto& o : oa) {
    ASSERT_EQ(o.windows.size(), 2u);
    for (const auto& w : o.windows) {
      ASSERT_EQ(w.convergence.size(), a.chain.iterations);
      for (double x : w.convergence) {
        EXPECT_GE(x, 0.0);
        EXPECT_LE(x, 1.0);
      }
      EXPECT_GE(*w.report.parent_accuracy, *w.report.parent_channel_accuracy);
      const auto dir = replication_dir(a.output_dir, o.replication) / ("T" + window_tag(w.window));
      EXPECT_EQ(io::read_events(dir / "events.csv").size(), w.events);
      EXPECT_TRUE(fs::exists(dir / "report.csv"));
      EXPECT_FALSE(fs::exists(dir / "trace_parents.csv"));
    }
  }
  const auto rerun = run_replication(a, 1, std::nullopt);
  EXPECT_EQ(rerun.windows[1].convergence, oa[1].windows[1].convergence);
}

TEST(WindowTag, Formatting) {
  EXPECT_EQ(window_tag(5000.0), "5000");
  EXPECT_EQ(window_tag(12.5), "12.5");
}

}  // namespace
}  // namespace mdm
