#ifndef MDM_IO_HPP
#define MDM_IO_HPP

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "mdm/evaluation.hpp"
#include "mdm/inference.hpp"
#include "mdm/types.hpp"

namespace mdm::io {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Text primitives

/// Shortest decimal form that reads back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

/// Line-oriented reader that reports file and line on every error.
class LineReader {
 public:
  explicit LineReader(const fs::path& path) : path_(path), in_(path) {
    if (!in_) throw DataError(path.string() + ": cannot open for reading");
  }

  bool next(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }

  [[noreturn]] void fail(const std::string& reason) const {
    throw DataError(path_.string() + ":" + std::to_string(line_no_) + ": " + reason);
  }

  double to_double(std::string_view s, const char* what) const {
    s = trim(s);
    double x = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(x))
      fail(std::string("bad ") + what + " '" + std::string(s) + "'");
    return x;
  }

  std::size_t to_index(std::string_view s, const char* what, std::size_t bound) const {
    s = trim(s);
    std::size_t x = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) fail(std::string("bad ") + what + " '" + std::string(s) + "'");
    if (x >= bound) fail(std::string(what) + " " + std::to_string(x) + " out of range [0, " + std::to_string(bound) + ")");
    return x;
  }

  std::vector<std::string_view> fields(std::string_view line, std::size_t expected) const {
    auto f = split(line);
    if (f.size() != expected)
      fail("expected " + std::to_string(expected) + " fields, found " + std::to_string(f.size()));
    return f;
  }

  /// Parses a header `# <kind> key=value ...` into its key-value pairs.
  std::map<std::string, std::string> header(std::string_view kind) {
    std::string line;
    if (!next(line)) fail("missing header line");
    std::istringstream ss(line);
    std::string hash, k;
    ss >> hash >> k;
    if (hash != "#" || k != kind) fail("expected header '# " + std::string(kind) + " ...'");
    std::map<std::string, std::string> kv;
    for (std::string tok; ss >> tok;) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) fail("malformed header token '" + tok + "'");
      kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return kv;
  }

  void expect_columns(std::string_view expected) {
    std::string line;
    if (!next(line)) fail("missing column line");
    if (trim(line) != expected) fail("expected columns '" + std::string(expected) + "'");
  }

  std::size_t line_no() const { return line_no_; }

 private:
  fs::path path_;
  std::ifstream in_;
  std::size_t line_no_ = 0;
};

namespace detail {

inline std::ofstream open_for_write(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw DataError(path.parent_path().string() + ": cannot create directory: " + ec.message());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  return out;
}

inline void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw DataError(path.string() + ": write failed");
}

inline std::size_t header_count(const LineReader& r, const std::map<std::string, std::string>& kv, const char* key) {
  const auto it = kv.find(key);
  if (it == kv.end()) r.fail(std::string("header lacks ") + key);
  return r.to_index(it->second, key, std::numeric_limits<std::size_t>::max());
}

inline double header_real(const LineReader& r, const std::map<std::string, std::string>& kv, const char* key) {
  const auto it = kv.find(key);
  if (it == kv.end()) r.fail(std::string("header lacks ") + key);
  return r.to_double(it->second, key);
}

inline std::string topic_columns(std::size_t k) {
  std::string s;
  for (std::size_t i = 0; i < k; ++i) s += ",theta_" + std::to_string(i);
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Event logs

inline void write_events(const fs::path& path, const EventLog& log) {
  auto out = detail::open_for_write(path);
  out << "# events n_nodes=" << log.n_nodes << " n_layers=" << log.n_layers
      << " window=" << format_double(log.window.length) << "\n";
  out << "time,node" << detail::topic_columns(log.n_layers) << "\n";
  for (const auto& e : log.events) {
    out << format_double(e.time) << ',' << e.node;
    for (double x : e.topic) out << ',' << format_double(x);
    out << '\n';
  }
  detail::finish(out, path);
}

/// Reads an event log; rejects decreasing times, times outside the window,
/// unknown nodes, and topic rows off the simplex, naming the offending line.
inline EventLog read_events(const fs::path& path) {
  LineReader r(path);
  const auto kv = r.header("events");
  EventLog log;
  log.n_nodes = detail::header_count(r, kv, "n_nodes");
  log.n_layers = detail::header_count(r, kv, "n_layers");
  log.window.length = detail::header_real(r, kv, "window");
  if (log.n_nodes == 0 || log.n_layers == 0) r.fail("n_nodes and n_layers must be positive");
  if (!(log.window.length > 0.0)) r.fail("window must be positive");
  r.expect_columns("time,node" + detail::topic_columns(log.n_layers));
  std::string line;
  while (r.next(line)) {
    if (trim(line).empty()) continue;
    const auto f = r.fields(line, 2 + log.n_layers);
    Event e;
    e.time = r.to_double(f[0], "time");
    e.node = r.to_index(f[1], "node", log.n_nodes);
    e.topic.resize(log.n_layers);
    for (std::size_t k = 0; k < log.n_layers; ++k) e.topic[k] = r.to_double(f[2 + k], "topic component");
    if (e.time < 0.0 || e.time > log.window.length) r.fail("time outside [0, window]");
    if (!log.events.empty() && e.time < log.events.back().time) r.fail("event times are not non-decreasing");
    if (!is_simplex(e.topic)) r.fail("topic row is not on the simplex");
    log.events.push_back(std::move(e));
  }
  return log;
}

// ---------------------------------------------------------------------------
// Parent assignments

inline void write_parents(const fs::path& path, const ParentAssignment& a) {
  auto out = detail::open_for_write(path);
  out << "# parents n_events=" << a.size() << "\n";
  out << "event,parent,layer\n";
  for (std::size_t m = 0; m < a.size(); ++m) {
    out << m << ',';
    if (a[m].is_spontaneous()) out << "none";
    else out << a[m].parent;
    out << ',' << a[m].layer << '\n';
  }
  detail::finish(out, path);
}

/// Reads a parent assignment; `n_layers` bounds the layer column. Causality
/// against an event log is checked by validate(assignment, log).
inline ParentAssignment read_parents(const fs::path& path, std::size_t n_layers) {
  LineReader r(path);
  const auto kv = r.header("parents");
  const auto n = detail::header_count(r, kv, "n_events");
  r.expect_columns("event,parent,layer");
  ParentAssignment a;
  a.reserve(n);
  std::string line;
  while (r.next(line)) {
    if (trim(line).empty()) continue;
    const auto f = r.fields(line, 3);
    if (r.to_index(f[0], "event", n) != a.size()) r.fail("events must be listed in order");
    const auto layer = r.to_index(f[2], "layer", n_layers);
    if (trim(f[1]) == "none") {
      a.push_back(ParentLabel::spontaneous(layer));
    } else {
      a.push_back(ParentLabel::triggered(r.to_index(f[1], "parent", a.size()), layer));
    }
  }
  if (a.size() != n) r.fail("expected " + std::to_string(n) + " rows, found " + std::to_string(a.size()));
  return a;
}

// ---------------------------------------------------------------------------
// Networks: edges.csv (u,v,k,weight), nodes.csv (u,k,lambda,A,S,alpha), layers.csv (k,pi)

inline void write_network(const fs::path& dir, const MultiplexParams& p) {
  const auto N = p.n_nodes, K = p.n_layers;
  {
    const auto path = dir / "edges.csv";
    auto out = detail::open_for_write(path);
    out << "# edges n_nodes=" << N << " n_layers=" << K << "\nu,v,k,weight\n";
    for (std::size_t u = 0; u < N; ++u)
      for (std::size_t v = 0; v < N; ++v)
        for (std::size_t k = 0; k < K; ++k)
          if (p.adjacency(u, v, k))
            out << u << ',' << v << ',' << k << ',' << format_double(p.influence(u, v, k)) << '\n';
    detail::finish(out, path);
  }
  {
    const auto path = dir / "nodes.csv";
    auto out = detail::open_for_write(path);
    out << "# nodes n_nodes=" << N << " n_layers=" << K << "\nu,k,lambda,A,S,alpha\n";
    for (std::size_t u = 0; u < N; ++u)
      for (std::size_t k = 0; k < K; ++k)
        out << u << ',' << k << ',' << format_double(p.nodes.background(u, k)) << ','
            << format_double(p.nodes.authoritative(u, k)) << ',' << format_double(p.nodes.susceptible(u, k)) << ','
            << format_double(p.nodes.topic_prior(u, k)) << '\n';
    detail::finish(out, path);
  }
  {
    const auto path = dir / "layers.csv";
    auto out = detail::open_for_write(path);
    out << "# layers n_layers=" << K << "\nk,pi\n";
    for (std::size_t k = 0; k < K; ++k) out << k << ',' << format_double(p.layer_activity.pi[k]) << '\n';
    detail::finish(out, path);
  }
}

inline MultiplexParams read_network(const fs::path& dir) {
  std::size_t N = 0, K = 0;
  MultiplexParams p;
  {
    LineReader r(dir / "nodes.csv");
    const auto kv = r.header("nodes");
    N = detail::header_count(r, kv, "n_nodes");
    K = detail::header_count(r, kv, "n_layers");
    if (N == 0 || K == 0) r.fail("n_nodes and n_layers must be positive");
    p = MultiplexParams::zeros(N, K);
    r.expect_columns("u,k,lambda,A,S,alpha");
    std::vector<char> seen(N * K, 0);
    std::string line;
    while (r.next(line)) {
      if (trim(line).empty()) continue;
      const auto f = r.fields(line, 6);
      const auto u = r.to_index(f[0], "node", N), k = r.to_index(f[1], "layer", K);
      if (seen[u * K + k]) r.fail("duplicate row for node " + std::to_string(u) + " layer " + std::to_string(k));
      seen[u * K + k] = 1;
      p.nodes.background(u, k) = r.to_double(f[2], "lambda");
      p.nodes.authoritative(u, k) = r.to_double(f[3], "A");
      p.nodes.susceptible(u, k) = r.to_double(f[4], "S");
      p.nodes.topic_prior(u, k) = r.to_double(f[5], "alpha");
    }
    for (char s : seen)
      if (!s) r.fail("node table is missing rows; expected " + std::to_string(N * K));
  }
  {
    LineReader r(dir / "layers.csv");
    const auto kv = r.header("layers");
    if (detail::header_count(r, kv, "n_layers") != K) r.fail("n_layers disagrees with nodes.csv");
    r.expect_columns("k,pi");
    std::vector<char> seen(K, 0);
    std::string line;
    while (r.next(line)) {
      if (trim(line).empty()) continue;
      const auto f = r.fields(line, 2);
      const auto k = r.to_index(f[0], "layer", K);
      if (seen[k]) r.fail("duplicate layer " + std::to_string(k));
      seen[k] = 1;
      p.layer_activity.pi[k] = r.to_double(f[1], "pi");
    }
    for (char s : seen)
      if (!s) r.fail("layer table is missing rows");
  }
  {
    LineReader r(dir / "edges.csv");
    const auto kv = r.header("edges");
    if (detail::header_count(r, kv, "n_nodes") != N || detail::header_count(r, kv, "n_layers") != K)
      r.fail("shape disagrees with nodes.csv");
    r.expect_columns("u,v,k,weight");
    std::string line;
    while (r.next(line)) {
      if (trim(line).empty()) continue;
      const auto f = r.fields(line, 4);
      const auto u = r.to_index(f[0], "source node", N), v = r.to_index(f[1], "target node", N);
      const auto k = r.to_index(f[2], "layer", K);
      const double w = r.to_double(f[3], "weight");
      if (u == v) r.fail("self edge");
      if (!(w > 0.0)) r.fail("edge weight must be positive");
      if (p.adjacency(u, v, k)) r.fail("duplicate edge");
      p.adjacency(u, v, k) = 1;
      p.influence(u, v, k) = w;
    }
  }
  try {
    validate(p);
  } catch (const DataError& e) {
    throw DataError(dir.string() + ": " + e.what());
  }
  return p;
}

// ---------------------------------------------------------------------------
// Posterior summaries and traces

inline void write_summary(const fs::path& dir, const PosteriorSummary& s) {
  const auto N = s.n_nodes, K = s.n_layers;
  {
    const auto path = dir / "summary_edges.csv";
    auto out = detail::open_for_write(path);
    out << "# summary_edges n_nodes=" << N << " n_layers=" << K << " samples=" << s.samples
        << "\nu,v,k,edge_probability,mean_weight\n";
    for (std::size_t u = 0; u < N; ++u)
      for (std::size_t v = 0; v < N; ++v) {
        if (u == v) continue;
        for (std::size_t k = 0; k < K; ++k)
          out << u << ',' << v << ',' << k << ',' << format_double(s.edge_probability(u, v, k)) << ','
              << format_double(s.mean_influence(u, v, k)) << '\n';
      }
    detail::finish(out, path);
  }
  {
    const auto path = dir / "summary_nodes.csv";
    auto out = detail::open_for_write(path);
    out << "# summary_nodes n_nodes=" << N << " n_layers=" << K << "\nu,k,lambda,A,S\n";
    for (std::size_t u = 0; u < N; ++u)
      for (std::size_t k = 0; k < K; ++k)
        out << u << ',' << k << ',' << format_double(s.mean_background(u, k)) << ','
            << format_double(s.mean_authoritative(u, k)) << ',' << format_double(s.mean_susceptible(u, k)) << '\n';
    detail::finish(out, path);
  }
  {
    const auto path = dir / "summary_layers.csv";
    auto out = detail::open_for_write(path);
    out << "# summary_layers n_layers=" << K << "\nk,pi\n";
    for (std::size_t k = 0; k < K; ++k) out << k << ',' << format_double(s.mean_layer_activity[k]) << '\n';
    detail::finish(out, path);
  }
  {
    const auto path = dir / "summary_parents.csv";
    auto out = detail::open_for_write(path);
    out << "# summary_parents n_events=" << s.parent_frequencies.size() << "\nevent,parent,layer,frequency\n";
    for (std::size_t m = 0; m < s.parent_frequencies.size(); ++m)
      for (const auto& f : s.parent_frequencies[m]) {
        out << m << ',';
        if (f.label.is_spontaneous()) out << "none";
        else out << f.label.parent;
        out << ',' << f.label.layer << ',' << format_double(f.frequency) << '\n';
      }
    detail::finish(out, path);
  }
}

/// Reads what write_summary wrote. The modal assignment is rebuilt from the
/// parent frequencies (first label of highest frequency); acceptance rates
/// are not persisted.
inline PosteriorSummary read_summary(const fs::path& dir) {
  PosteriorSummary s;
  std::size_t N = 0, K = 0;
  {
    LineReader r(dir / "summary_nodes.csv");
    const auto kv = r.header("summary_nodes");
    N = detail::header_count(r, kv, "n_nodes");
    K = detail::header_count(r, kv, "n_layers");
    if (N == 0 || K == 0) r.fail("n_nodes and n_layers must be positive");
    s.n_nodes = N;
    s.n_layers = K;
    s.mean_background = NodeLayerTable(N, K);
    s.mean_authoritative = NodeLayerTable(N, K);
    s.mean_susceptible = NodeLayerTable(N, K);
    r.expect_columns("u,k,lambda,A,S");
    std::string line;
    std::size_t rows = 0;
    while (r.next(line)) {
      if (trim(line).empty()) continue;
      const auto f = r.fields(line, 5);
      const auto u = r.to_index(f[0], "node", N), k = r.to_index(f[1], "layer", K);
      s.mean_background(u, k) = r.to_double(f[2], "lambda");
      s.mean_authoritative(u, k) = r.to_double(f[3], "A");
      s.mean_susceptible(u, k) = r.to_double(f[4], "S");
      ++rows;
    }
    if (rows != N * K) r.fail("expected " + std::to_string(N * K) + " rows, found " + std::to_string(rows));
  }
  {
    LineReader r(dir / "summary_edges.csv");
    const auto kv = r.header("summary_edges");
    if (detail::header_count(r, kv, "n_nodes") != N || detail::header_count(r, kv, "n_layers") != K)
      r.fail("shape disagrees with summary_nodes.csv");
    s.samples = detail::header_count(r, kv, "samples");
    s.edge_probability = Tensor3<double>(N, K, 0.0);
    s.mean_influence = InfluenceTensor(N, K, 0.0);
    r.expect_columns("u,v,k,edge_probability,mean_weight");
    std::string line;
    while (r.next(line)) {
      if (trim(line).empty()) continue;
      const auto f = r.fields(line, 5);
      const auto u = r.to_index(f[0], "source node", N), v = r.to_index(f[1], "target node", N);
      const auto k = r.to_index(f[2], "layer", K);
      const double prob = r.to_double(f[3], "edge probability");
      if (prob < 0.0 || prob > 1.0) r.fail("edge probability outside [0, 1]");
      s.edge_probability(u, v, k) = prob;
      s.mean_influence(u, v, k) = r.to_double(f[4], "mean weight");
    }
  }
  {
    LineReader r(dir / "summary_layers.csv");
    const auto kv = r.header("summary_layers");
    if (detail::header_count(r, kv, "n_layers") != K) r.fail("n_layers disagrees with summary_nodes.csv");
    s.mean_layer_activity.assign(K, 0.0);
    r.expect_columns("k,pi");
    std::string line;
    while (r.next(line)) {
      if (trim(line).empty()) continue;
      const auto f = r.fields(line, 2);
      s.mean_layer_activity[r.to_index(f[0], "layer", K)] = r.to_double(f[1], "pi");
    }
  }
  {
    LineReader r(dir / "summary_parents.csv");
    const auto kv = r.header("summary_parents");
    const auto M = detail::header_count(r, kv, "n_events");
    s.parent_frequencies.assign(M, {});
    r.expect_columns("event,parent,layer,frequency");
    std::string line;
    while (r.next(line)) {
      if (trim(line).empty()) continue;
      const auto f = r.fields(line, 4);
      const auto m = r.to_index(f[0], "event", M);
      const auto layer = r.to_index(f[2], "layer", K);
      const auto label = trim(f[1]) == "none" ? ParentLabel::spontaneous(layer)
                                             : ParentLabel::triggered(r.to_index(f[1], "parent", m), layer);
      s.parent_frequencies[m].push_back({label, r.to_double(f[3], "frequency")});
    }
    s.modal_assignment.resize(M);
    for (std::size_t m = 0; m < M; ++m) {
      if (s.parent_frequencies[m].empty()) r.fail("event " + std::to_string(m) + " has no parent frequencies");
      const LabelFrequency* best = &s.parent_frequencies[m].front();
      for (const auto& f : s.parent_frequencies[m])
        if (f.frequency > best->frequency) best = &f;
      s.modal_assignment[m] = best->label;
    }
  }
  return s;
}

/// One file per parameter group, one row per retained iteration.
inline void write_trace(const fs::path& dir, const ChainTrace& trace) {
  if (trace.retained_params.empty()) return;
  const auto N = trace.retained_params.front().n_nodes, K = trace.retained_params.front().n_layers;
  auto table = [&](const std::string& name, auto&& columns, auto&& row) {
    const auto path = dir / name;
    auto out = detail::open_for_write(path);
    out << "iteration" << columns << '\n';
    for (std::size_t i = 0; i < trace.retained_params.size(); ++i) {
      out << trace.retained_iterations[i];
      for (double x : row(trace.retained_params[i])) out << ',' << format_double(x);
      out << '\n';
    }
    detail::finish(out, path);
  };
  auto node_cols = [&](const char* prefix) {
    std::string s;
    for (std::size_t u = 0; u < N; ++u)
      for (std::size_t k = 0; k < K; ++k) s += std::string(",") + prefix + "_" + std::to_string(u) + "_" + std::to_string(k);
    return s;
  };
  std::string edge_cols;
  for (std::size_t u = 0; u < N; ++u)
    for (std::size_t v = 0; v < N; ++v)
      for (std::size_t k = 0; k < K; ++k)
        edge_cols += ",w_" + std::to_string(u) + "_" + std::to_string(v) + "_" + std::to_string(k);
  std::string layer_cols;
  for (std::size_t k = 0; k < K; ++k) layer_cols += ",pi_" + std::to_string(k);

  table("trace_background.csv", node_cols("lambda"), [](const MultiplexParams& p) { return p.nodes.background.raw(); });
  table("trace_authoritative.csv", node_cols("A"), [](const MultiplexParams& p) { return p.nodes.authoritative.raw(); });
  table("trace_susceptible.csv", node_cols("S"), [](const MultiplexParams& p) { return p.nodes.susceptible.raw(); });
  table("trace_influence.csv", edge_cols, [](const MultiplexParams& p) { return p.influence.raw(); });
  table("trace_layers.csv", layer_cols, [](const MultiplexParams& p) { return p.layer_activity.pi; });

  const auto path = dir / "trace_parents.csv";
  auto out = detail::open_for_write(path);
  out << "# trace_parents iterations=" << trace.assignments.size()
      << " n_events=" << (trace.assignments.empty() ? 0 : trace.assignments.front().size())
      << "\niteration,event,parent,layer\n";
  for (std::size_t i = 0; i < trace.assignments.size(); ++i)
    for (std::size_t m = 0; m < trace.assignments[i].size(); ++m) {
      const auto& l = trace.assignments[i][m];
      out << i + 1 << ',' << m << ',';
      if (l.is_spontaneous()) out << "none";
      else out << l.parent;
      out << ',' << l.layer << '\n';
    }
  detail::finish(out, path);
}

/// Per-iteration parent assignments written by write_trace.
inline std::vector<ParentAssignment> read_parent_trace(const fs::path& path, std::size_t n_layers) {
  LineReader r(path);
  const auto kv = r.header("trace_parents");
  const auto iterations = detail::header_count(r, kv, "iterations");
  const auto M = detail::header_count(r, kv, "n_events");
  r.expect_columns("iteration,event,parent,layer");
  std::vector<ParentAssignment> trace(iterations, ParentAssignment(M));
  std::vector<std::size_t> filled(iterations, 0);
  std::string line;
  while (r.next(line)) {
    if (trim(line).empty()) continue;
    const auto f = r.fields(line, 4);
    const auto it = r.to_index(f[0], "iteration", iterations + 1);
    if (it == 0) r.fail("iterations start at 1");
    const auto m = r.to_index(f[1], "event", M);
    const auto layer = r.to_index(f[3], "layer", n_layers);
    trace[it - 1][m] = trim(f[2]) == "none" ? ParentLabel::spontaneous(layer)
                                            : ParentLabel::triggered(r.to_index(f[2], "parent", m), layer);
    ++filled[it - 1];
  }
  for (std::size_t i = 0; i < iterations; ++i)
    if (filled[i] != M) r.fail("iteration " + std::to_string(i + 1) + " is incomplete");
  return trace;
}

// ---------------------------------------------------------------------------
// Reports

inline std::vector<std::pair<std::string, std::string>> report_rows(const EvalReport& r) {
  auto opt = [](const std::optional<double>& x) { return x ? format_double(*x) : std::string("undefined"); };
  return {
      {"mae_influence", r.mae ? format_double(r.mae->absolute) : "undefined"},
      {"mae_influence_signed", r.mae ? format_double(r.mae->signed_mean) : "undefined"},
      {"false_edge_mass", format_double(r.false_edge_mass)},
      {"tae_influence", format_double(r.tae_influence)},
      {"tae_lambda", format_double(r.tae_background)},
      {"tae_A", format_double(r.tae_authoritative)},
      {"tae_S", format_double(r.tae_susceptible)},
      {"parent_accuracy", opt(r.parent_accuracy)},
      {"parent_channel_accuracy", opt(r.parent_channel_accuracy)},
      {"edge_auc", opt(r.edge_auc)},
  };
}

inline void write_report(const fs::path& path, const EvalReport& r) {
  auto out = detail::open_for_write(path);
  out << "metric,value\n";
  for (const auto& [name, value] : report_rows(r)) out << name << ',' << value << '\n';
  detail::finish(out, path);
}

inline EvalReport read_report(const fs::path& path) {
  LineReader r(path);
  r.expect_columns("metric,value");
  std::map<std::string, std::string> values;
  std::string line;
  while (r.next(line)) {
    if (trim(line).empty()) continue;
    const auto f = r.fields(line, 2);
    if (!values.emplace(std::string(trim(f[0])), std::string(trim(f[1]))).second) r.fail("duplicate metric");
  }
  auto get = [&](const char* name) -> std::optional<double> {
    const auto it = values.find(name);
    if (it == values.end()) r.fail(std::string("missing metric ") + name);
    if (it->second == "undefined") return std::nullopt;
    return r.to_double(it->second, name);
  };
  EvalReport rep;
  const auto mae = get("mae_influence"), mae_signed = get("mae_influence_signed");
  if (mae && mae_signed) rep.mae = MaeResult{*mae, *mae_signed, 0};
  rep.false_edge_mass = get("false_edge_mass").value_or(0.0);
  rep.tae_influence = get("tae_influence").value_or(0.0);
  rep.tae_background = get("tae_lambda").value_or(0.0);
  rep.tae_authoritative = get("tae_A").value_or(0.0);
  rep.tae_susceptible = get("tae_S").value_or(0.0);
  rep.parent_accuracy = get("parent_accuracy");
  rep.parent_channel_accuracy = get("parent_channel_accuracy");
  rep.edge_auc = get("edge_auc");
  return rep;
}

inline void write_series(const fs::path& path, const std::vector<double>& series) {
  auto out = detail::open_for_write(path);
  out << "iteration,parent_channel_accuracy\n";
  for (std::size_t i = 0; i < series.size(); ++i) out << i + 1 << ',' << format_double(series[i]) << '\n';
  detail::finish(out, path);
}

inline std::vector<double> read_series(const fs::path& path) {
  LineReader r(path);
  r.expect_columns("iteration,parent_channel_accuracy");
  std::vector<double> series;
  std::string line;
  while (r.next(line)) {
    if (trim(line).empty()) continue;
    const auto f = r.fields(line, 2);
    if (r.to_index(f[0], "iteration", std::numeric_limits<std::size_t>::max()) != series.size() + 1)
      r.fail("iterations must be consecutive from 1");
    series.push_back(r.to_double(f[1], "accuracy"));
  }
  return series;
}

// ---------------------------------------------------------------------------
// Delays for kernel fitting

/// Child-minus-parent lags of every triggered label.
inline std::vector<double> parent_delays(const EventLog& log, const ParentAssignment& a) {
  validate(a, log);
  std::vector<double> d;
  for (std::size_t m = 0; m < a.size(); ++m)
    if (!a[m].is_spontaneous()) d.push_back(log.events[m].time - log.events[a[m].parent].time);
  return d;
}

}  // namespace mdm::io

#endif  // MDM_IO_HPP
