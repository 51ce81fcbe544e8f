// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only when
// every criterion passes.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "geweke_harness.hpp"
#include "mdm/mdm.hpp"
#include "test_support.hpp"

using namespace mdm;

namespace {

int failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("%s %d %s: %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double mean(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// --- 1, 2, 3, 5: the synthetic study ----------------------------------------------

struct Study {
  ExperimentConfig config;
  std::vector<ReplicationOutcome> outcomes;

  std::vector<double> per_window(std::size_t w, double (*get)(const WindowOutcome&)) const {
    std::vector<double> xs;
    for (const auto& o : outcomes) xs.push_back(get(o.windows[w]));
    return xs;
  }
};

Study run_study() {
  Study s;
  s.config.seed = 1;
  s.config.finalize();
  for (std::size_t r = 0; r < s.config.replications; ++r)
    s.outcomes.push_back(run_replication(s.config, r, std::nullopt));
  return s;
}

void window_trend(const Study& s) {
  const std::size_t first = 0, last = s.config.windows.size() - 1;
  auto pc = [](const WindowOutcome& w) { return w.report.parent_channel_accuracy.value_or(0.0); };
  auto tw = [](const WindowOutcome& w) { return w.report.tae_influence; };
  std::string detail = "parent+channel accuracy by window";
  for (std::size_t i = 0; i <= last; ++i)
    detail += " T" + window_tag(s.config.windows[i]) + "=" + fmt("%.4f", mean(s.per_window(i, pc)));
  detail += "; influence TAE";
  for (std::size_t i = 0; i <= last; ++i)
    detail += " T" + window_tag(s.config.windows[i]) + "=" + fmt("%.3f", mean(s.per_window(i, tw)));
  const bool pass = mean(s.per_window(last, pc)) > mean(s.per_window(first, pc)) &&
                    mean(s.per_window(last, tw)) < mean(s.per_window(first, tw));
  report(1, "window-length trend", pass, detail);
}

void parameter_recovery(const Study& s) {
  const auto mae = s.per_window(s.config.windows.size() - 1, [](const WindowOutcome& w) { return w.node_mae; });
  std::string detail = "mean per-component |error| over lambda, A, S at T=5000 = " + fmt("%.4f", mean(mae)) +
                       " (bound 0.25; replications";
  for (double x : mae) detail += fmt(" %.3f", x);
  report(2, "parameter recovery", mean(mae) <= 0.25, detail + ")");
}

void convergence_speed(const Study& s) {
  const std::size_t burn = s.config.chain.burn_in;
  bool pass = true;
  std::string detail = "|acc(50) - post-burn-in mean| at T=5000 per replication:";
  for (const auto& o : s.outcomes) {
    const auto& series = o.windows.back().convergence;
    const double final_value =
        mean(std::vector<double>(series.begin() + static_cast<std::ptrdiff_t>(burn), series.end()));
    const double gap = std::abs(series[49] - final_value);
    std::size_t reached = 0;
    while (reached < series.size() && std::abs(series[reached] - final_value) > 0.05) ++reached;
    pass = pass && gap <= 0.05;
    detail += fmt(" %.4f", gap) + " (first within 0.05 at " + std::to_string(reached + 1) + ")";
  }
  report(3, "convergence speed", pass, detail);
}

void edge_recovery(const Study& s) {
  std::vector<double> aucs;
  std::size_t undefined = 0;
  for (const auto& o : s.outcomes) {
    if (o.windows.back().report.edge_auc) aucs.push_back(*o.windows.back().report.edge_auc);
    else ++undefined;
  }
  std::string detail = "mean edge AUC at T=5000 = " + fmt("%.4f", aucs.empty() ? 0.0 : mean(aucs)) + " (replications";
  for (double a : aucs) detail += fmt(" %.3f", a);
  if (undefined) detail += "; " + std::to_string(undefined) + " undefined";
  report(5, "edge recovery", !aucs.empty() && undefined == 0 && mean(aucs) >= 0.80, detail + ")");
}

// --- 4: sampler correctness --------------------------------------------------------

bool within(double estimate, double truth, double se) { return std::abs(estimate - truth) <= 3.0 * se; }

void sampler_correctness() {
  std::string detail;
  bool pass = true;

  const auto g = geweke::run(2000, 30, 20260417);
  detail += "Geweke KS p:";
  for (const auto& m : g.marginals) {
    detail += std::string(" ") + m.name + "=" + fmt("%.3f", m.p_value);
    pass = pass && m.p_value > 0.01;
  }

  // Two-event label posterior against exact enumeration.
  {
    auto p = MultiplexParams::zeros(2, 2);
    p.nodes.authoritative.set_row(1, {0.3, 0.7});
    p.nodes.susceptible.set_row(1, {0.4, 0.6});
    p.nodes.background.set_row(0, {0.1, 0.1});
    p.nodes.background.set_row(1, {0.2, 0.1});
    p.nodes.topic_prior.set_row(1, {2.0, 1.0});
    p.adjacency(0, 1, 0) = p.adjacency(0, 1, 1) = 1;
    p.influence(0, 1, 0) = 0.8;
    p.influence(0, 1, 1) = 1.7;
    const auto log = testing::make_log(2, 2, 10, {testing::event(1.0, 0, {0.25, 0.75}),
                                                  testing::event(2.5, 1, {0.6, 0.4})});
    const double h = std::exp(-0.5 * std::log(1.5) * std::log(1.5)) / (1.5 * std::sqrt(2 * std::numbers::pi));
    const std::vector<double> w{0.3 * 0.2 * 1.2, 0.7 * 0.1 * 1.2, 0.8 * 0.25 * 0.4 * h, 1.7 * 0.75 * 0.6 * h};
    const double total = w[0] + w[1] + w[2] + w[3];
    const int draws = 50000;
    std::vector<double> freq(4, 0.0);
    for (int i = 0; i < draws; ++i) {
      const auto& l = sample_parents(log, p, DelayKernel{}, stream_key(11, i))[1];
      freq[l.is_spontaneous() ? l.layer : 2 + l.layer] += 1.0;
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      const double q = w[i] / total;
      worst = std::max(worst, std::abs(freq[i] / draws - q) / std::sqrt(q * (1 - q) / draws));
    }
    detail += "; enumeration max |z|=" + fmt("%.2f", worst);
    pass = pass && worst <= 3.0;
  }

  // Closed-form conjugate posteriors of W and lambda.
  {
    auto p = MultiplexParams::zeros(2, 2);
    p.adjacency(0, 1, 0) = p.adjacency(0, 1, 1) = 1;
    p.nodes.susceptible.set_row(1, {0.5, 0.5});
    auto h = Hyperparameters::uniform(2, 2, 1.0, 1.0);
    h.influence_shape = 1.0;
    h.influence_rate = 1.0;
    SufficientStatistics stats{Tensor3<std::size_t>(2, 2, 0), {0, 5}, CountTable(2, 2), CountTable(2, 2)};
    stats.triggered(0, 1, 0) = 5;
    stats.spontaneous(0, 1) = 4;
    NodeLayerTable psi(2, 2, 0.0);
    psi(0, 0) = 10.0;
    psi(0, 1) = 6.0;
    std::vector<double> wk, wc0, wc1, lam;
    for (int i = 0; i < 200000; ++i) {
      wk.push_back(sample_influences(stats, p, h, psi, TriggerCompensator::kKernel, stream_key(5, i))(0, 1, 0));
      const auto wc = sample_influences(stats, p, h, psi, TriggerCompensator::kChannel, stream_key(6, i));
      wc0.push_back(wc(0, 1, 0));
      wc1.push_back(wc(0, 1, 1));
      lam.push_back(sample_background_rates(stats, h, {99.0}, stream_key(7, i))(0, 1));
    }
    // Gamma(1 + 5, 1 + 10), Gamma(1 + 5, 1 + 5), Gamma(1, 1 + 3), Gamma(1 + 4, 1 + 99)
    const double truths[] = {6.0 / 11.0, 1.0, 0.25, 0.05};
    const std::vector<double>* series[] = {&wk, &wc0, &wc1, &lam};
    double worst = 0.0;
    for (int i = 0; i < 4; ++i) {
      const auto m = testing::moments(*series[i]);
      worst = std::max(worst, std::abs(m.mean - truths[i]) / m.se);
      pass = pass && within(m.mean, truths[i], m.se);
    }
    detail += "; conjugate means max |z|=" + fmt("%.2f", worst);
  }
  report(4, "sampler correctness", pass, detail);
}

// --- 6: invariant suite -------------------------------------------------------------

void invariant_suite() {
  std::vector<std::string> broken;
  auto check = [&](bool ok, const char* what) {
    if (!ok && (broken.empty() || broken.back() != what)) broken.push_back(what);
  };

  auto sim = SimulationConfig::defaults(5, 2);
  sim.hyper.background_rate = NodeLayerTable(5, 2, 40.0);
  sim.window.length = 300.0;
  const DelayKernel kernel{};
  std::size_t logs = 0;
  for (std::uint64_t seed = 1; logs < 20; ++seed) {
    sim.seed = seed;
    const auto p = sample_network(sim);
    for (std::size_t u = 0; u < 5; ++u)
      check(is_simplex(p.nodes.authoritative.row(u)) && is_simplex(p.nodes.susceptible.row(u)), "simplex closure");
    check(is_simplex(p.layer_activity.pi), "simplex closure");
    if (max_branching_ratio(p) > 0.9) continue;
    const auto log = simulate_cascades(p, sim);
    if (log.size() < 3) continue;
    ++logs;
    for (const auto& e : log.events) check(is_simplex(e.topic), "simplex closure");

    for (double t : {10.0, 150.0, 299.0})
      for (std::size_t v = 0; v < 5; ++v) {
        double naive = 0.0;
        for (std::size_t k = 0; k < 2; ++k) naive += p.nodes.background(v, k);
        for (const auto& e : log.events)
          if (e.time < t)
            for (std::size_t k = 0; k < 2; ++k)
              if (p.adjacency(e.node, v, k)) naive += p.influence(e.node, v, k) * delay_density(t - e.time, kernel);
        check(std::abs(total_intensity(t, v, log, p, kernel) - naive) <= 1e-12 * std::max(1.0, naive),
              "superposition identity");
      }

    for (std::uint64_t key = 0; key < 20; ++key) {
      const auto a = sample_parents(log, p, kernel, stream_key(seed, key));
      bool valid = true;
      try {
        validate(a, log);
      } catch (const DataError&) {
        valid = false;
      }
      check(valid, "assignment validity");
      const auto stats = compute_sufficient_stats(log, a);
      std::size_t total = 0;
      for (std::size_t v = 0; v < 5; ++v) {
        std::size_t node_total = 0;
        for (std::size_t k = 0; k < 2; ++k) {
          node_total += stats.spontaneous(v, k);
          for (std::size_t u = 0; u < 5; ++u) node_total += stats.triggered(u, v, k);
        }
        check(node_total == stats.node_counts[v], "count conservation");
        total += node_total;
      }
      check(total == log.size(), "count conservation");
    }

    const auto dir = std::filesystem::temp_directory_path() / "mdm_acceptance_roundtrip";
    io::write_events(dir / "events.csv", log);
    io::write_network(dir / "network", p);
    io::write_parents(dir / "parents.csv", *log.ground_truth);
    check(io::read_events(dir / "events.csv").events == log.events, "round-trip file formats");
    check(io::read_network(dir / "network") == p, "round-trip file formats");
    check(io::read_parents(dir / "parents.csv", 2) == *log.ground_truth, "round-trip file formats");
    std::filesystem::remove_all(dir);

    if (logs <= 3) {
      ChainConfig chain;
      chain.iterations = 60;
      chain.burn_in = 20;
      chain.thin = 4;
      chain.seed = seed;
      const auto a = run_chain(log, p.nodes.topic_prior, chain, sim.hyper, kernel);
      chain.workers = 3;
      const auto b = run_chain(log, p.nodes.topic_prior, chain, sim.hyper, kernel);
      check(a.final_state.params == b.final_state.params && a.final_state.assignment == b.final_state.assignment,
            "seed determinism");
      for (std::size_t u = 0; u < 5; ++u)
        check(is_simplex(a.summary.mean_authoritative.row(u), 1e-6) &&
                  is_simplex(a.summary.mean_susceptible.row(u), 1e-6),
              "simplex closure");
    }
    check(simulate_cascades(p, sim).events == log.events, "seed determinism");
  }

  std::string detail = std::to_string(logs) + " simulated logs checked";
  for (const auto& b : broken) detail += "; broken: " + b;
  report(6, "invariant suite", broken.empty(), detail);
}

}  // namespace

int main() {
  const auto study = run_study();
  window_trend(study);
  parameter_recovery(study);
  convergence_speed(study);
  sampler_correctness();
  edge_recovery(study);
  invariant_suite();
  return failures == 0 ? 0 : 1;
}
