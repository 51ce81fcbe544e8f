#ifndef MDM_CONFIG_HPP
#define MDM_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdm/generative.hpp"
#include "mdm/inference.hpp"
#include "mdm/io.hpp"

namespace mdm {

/// Bad configuration text or values; carries the offending location when known.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Scalar hyperparameter settings; list-valued priors may hold one value
/// (broadcast to every layer) or one value per layer.
struct HyperSettings {
  double influence_shape = 3.0;
  double influence_rate = 2.0;
  double background_shape = 2.0;
  double background_rate = 400.0;
  std::vector<double> layer_prior{1.0};
  std::vector<double> authoritative_prior{0.5};
  std::vector<double> susceptible_prior{1.0};
  double mh_concentration = 100.0;

  Hyperparameters build(std::size_t n_nodes, std::size_t n_layers) const {
    auto h = Hyperparameters::uniform(n_nodes, n_layers, background_shape, background_rate);
    h.influence_shape = influence_shape;
    h.influence_rate = influence_rate;
    h.mh_concentration = mh_concentration;
    auto broadcast = [&](const std::vector<double>& v, const char* name) {
      if (v.size() == 1) return std::vector<double>(n_layers, v.front());
      if (v.size() != n_layers)
        throw ConfigError(std::string("hyper.") + name + " needs 1 or " + std::to_string(n_layers) + " values");
      return v;
    };
    h.layer_prior = broadcast(layer_prior, "layer_prior");
    h.authoritative_prior = broadcast(authoritative_prior, "authoritative_prior");
    h.susceptible_prior = broadcast(susceptible_prior, "susceptible_prior");
    return h;
  }
};

struct ExperimentConfig {
  SimulationConfig simulation = SimulationConfig::defaults();
  HyperSettings hyper;
  ChainConfig chain;
  std::filesystem::path output_dir{"mdm_out"};
  std::size_t replications = 5;
  std::vector<double> windows{2000.0, 3000.0, 4000.0, 5000.0};
  // Networks whose max_branching_ratio exceeds this are redrawn.
  double max_branching = 0.9;
  std::size_t max_network_draws = 1000;
  // Shorter windows are prefixes of the longest realization.
  bool nested = true;
  std::size_t workers = 1;
  std::uint64_t seed = 1;

  /// Rebuilds the derived hyperparameters after shape or setting changes and
  /// validates everything.
  void finalize() {
    simulation.hyper = hyper.build(simulation.n_nodes, simulation.n_layers);
    if (replications == 0) throw ConfigError("experiment.replications must be at least 1");
    if (windows.empty()) throw ConfigError("simulation.windows must not be empty");
    for (double w : windows)
      if (!(w > 0.0)) throw ConfigError("simulation.windows must be positive");
    if (!(max_branching > 0.0)) throw ConfigError("simulation.max_branching must be positive");
    if (max_network_draws == 0) throw ConfigError("simulation.max_network_draws must be positive");
    if (workers == 0) throw ConfigError("experiment.workers must be positive");
    validate(simulation);
    validate(chain);
  }
};

namespace detail {

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

struct ConfigBinder {
  using Setter = std::function<void(const std::string&)>;
  std::map<std::string, Setter> setters;

  static double real(const std::string& s) {
    double x = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(x))
      throw ConfigError("expected a number, found '" + s + "'");
    return x;
  }
  static std::uint64_t count(const std::string& s) {
    std::uint64_t x = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
      throw ConfigError("expected a non-negative integer, found '" + s + "'");
    return x;
  }
  static bool boolean(const std::string& s) {
    const auto l = lower(s);
    if (l == "true" || l == "1" || l == "yes" || l == "on") return true;
    if (l == "false" || l == "0" || l == "no" || l == "off") return false;
    throw ConfigError("expected a boolean, found '" + s + "'");
  }
  static std::vector<double> list(const std::string& s) {
    std::vector<double> out;
    for (auto part : io::split(s)) out.push_back(real(std::string(io::trim(part))));
    return out;
  }

  void bind(std::string key, double& x) { setters[std::move(key)] = [&x](const std::string& s) { x = real(s); }; }
  void bind(std::string key, std::size_t& x) {
    setters[std::move(key)] = [&x](const std::string& s) { x = static_cast<std::size_t>(count(s)); };
  }
  void bind(std::string key, bool& x) { setters[std::move(key)] = [&x](const std::string& s) { x = boolean(s); }; }
  void bind(std::string key, std::vector<double>& x) {
    setters[std::move(key)] = [&x](const std::string& s) { x = list(s); };
  }
  template <typename Enum>
  void bind_enum(std::string key, Enum& x, std::vector<std::pair<std::string, Enum>> names) {
    setters[std::move(key)] = [&x, names = std::move(names)](const std::string& s) {
      const auto l = lower(s);
      std::string allowed;
      for (const auto& [name, value] : names) {
        if (name == l) {
          x = value;
          return;
        }
        allowed += (allowed.empty() ? "" : ", ") + name;
      }
      throw ConfigError("expected one of " + allowed + ", found '" + s + "'");
    };
  }
};

inline const std::vector<std::pair<std::string, TriggerCompensator>>& compensator_names() {
  static const std::vector<std::pair<std::string, TriggerCompensator>> names{
      {"channel", TriggerCompensator::kChannel},
      {"kernel", TriggerCompensator::kKernel},
      {"event_count", TriggerCompensator::kEventCount}};
  return names;
}

inline ConfigBinder make_binder(ExperimentConfig& c) {
  ConfigBinder b;
  b.bind("simulation.n_nodes", c.simulation.n_nodes);
  b.bind("simulation.n_layers", c.simulation.n_layers);
  b.bind("simulation.window", c.simulation.window.length);
  b.bind("simulation.windows", c.windows);
  b.bind("simulation.max_events", c.simulation.max_events);
  b.bind("simulation.topic_concentration", c.simulation.topic_concentration);
  b.bind("simulation.topic_floor", c.simulation.topic_floor);
  b.bind("simulation.max_branching", c.max_branching);
  b.bind("simulation.max_network_draws", c.max_network_draws);
  b.bind("simulation.nested", c.nested);
  b.bind("kernel.log_mean", c.simulation.kernel.log_mean);
  b.bind("kernel.log_sdev", c.simulation.kernel.log_sdev);
  b.bind("hyper.influence_shape", c.hyper.influence_shape);
  b.bind("hyper.influence_rate", c.hyper.influence_rate);
  b.bind("hyper.background_shape", c.hyper.background_shape);
  b.bind("hyper.background_rate", c.hyper.background_rate);
  b.bind("hyper.layer_prior", c.hyper.layer_prior);
  b.bind("hyper.authoritative_prior", c.hyper.authoritative_prior);
  b.bind("hyper.susceptible_prior", c.hyper.susceptible_prior);
  b.bind("hyper.mh_concentration", c.hyper.mh_concentration);
  b.bind("chain.iterations", c.chain.iterations);
  b.bind("chain.burn_in", c.chain.burn_in);
  b.bind("chain.thin", c.chain.thin);
  b.bind("chain.workers", c.chain.workers);
  b.bind("chain.keep_trace", c.chain.keep_trace);
  b.bind("chain.edge_moves", c.chain.edge_moves);
  b.bind_enum("chain.compensator", c.chain.compensator, compensator_names());
  b.bind_enum("chain.init_adjacency", c.chain.init_adjacency,
              {{"full", AdjacencyInit::kFull}, {"prior", AdjacencyInit::kPrior}});
  b.bind_enum("chain.init_memberships", c.chain.init_memberships,
              {{"topics", MembershipInit::kTopics}, {"prior", MembershipInit::kPrior}});
  b.bind_enum("chain.init_rates", c.chain.init_rates,
              {{"conditional", RateInit::kConditional}, {"prior", RateInit::kPrior}});
  b.setters["experiment.output_dir"] = [&c](const std::string& s) { c.output_dir = s; };
  b.bind("experiment.replications", c.replications);
  b.bind("experiment.workers", c.workers);
  b.setters["experiment.seed"] = [&c](const std::string& s) { c.seed = ConfigBinder::count(s); };
  return b;
}

}  // namespace detail

/// Applies `key = value` lines to `config`. `[section]` lines prefix the keys
/// that follow; `#` starts a comment. Errors name `source` and the line.
inline void apply_config_text(ExperimentConfig& config, std::istream& in, const std::string& source = "<config>") {
  auto binder = detail::make_binder(config);
  std::string line, section;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& reason) {
    throw ConfigError(source + ":" + std::to_string(line_no) + ": " + reason);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = io::trim(line);
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') fail("malformed section header");
      section = std::string(io::trim(body.substr(1, body.size() - 2)));
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) fail("expected 'key = value'");
    std::string key(io::trim(body.substr(0, eq)));
    const std::string value(io::trim(body.substr(eq + 1)));
    if (!section.empty() && key.find('.') == std::string::npos) key = section + "." + key;
    const auto it = binder.setters.find(key);
    if (it == binder.setters.end()) fail("unknown key '" + key + "'");
    if (value.empty()) fail("missing value for '" + key + "'");
    try {
      it->second(value);
    } catch (const ConfigError& e) {
      fail(key + ": " + e.what());
    }
  }
}

inline ExperimentConfig read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config");
  ExperimentConfig config;
  apply_config_text(config, in, path.string());
  config.finalize();
  return config;
}

/// Writes every key in a form apply_config_text reads back to the same values.
inline void write_config(std::ostream& out, const ExperimentConfig& c) {
  auto list = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + io::format_double(v[i]);
    return s;
  };
  auto name_of = [](auto value, const auto& names) {
    for (const auto& [name, v] : names)
      if (v == value) return name;
    return std::string("?");
  };
  const auto d = io::format_double;
  out << "[simulation]\n"
      << "n_nodes = " << c.simulation.n_nodes << "\n"
      << "n_layers = " << c.simulation.n_layers << "\n"
      << "window = " << d(c.simulation.window.length) << "\n"
      << "windows = " << list(c.windows) << "\n"
      << "max_events = " << c.simulation.max_events << "\n"
      << "topic_concentration = " << d(c.simulation.topic_concentration) << "\n"
      << "topic_floor = " << d(c.simulation.topic_floor) << "\n"
      << "max_branching = " << d(c.max_branching) << "\n"
      << "max_network_draws = " << c.max_network_draws << "\n"
      << "nested = " << (c.nested ? "true" : "false") << "\n\n"
      << "[kernel]\n"
      << "log_mean = " << d(c.simulation.kernel.log_mean) << "\n"
      << "log_sdev = " << d(c.simulation.kernel.log_sdev) << "\n\n"
      << "[hyper]\n"
      << "influence_shape = " << d(c.hyper.influence_shape) << "\n"
      << "influence_rate = " << d(c.hyper.influence_rate) << "\n"
      << "background_shape = " << d(c.hyper.background_shape) << "\n"
      << "background_rate = " << d(c.hyper.background_rate) << "\n"
      << "layer_prior = " << list(c.hyper.layer_prior) << "\n"
      << "authoritative_prior = " << list(c.hyper.authoritative_prior) << "\n"
      << "susceptible_prior = " << list(c.hyper.susceptible_prior) << "\n"
      << "mh_concentration = " << d(c.hyper.mh_concentration) << "\n\n"
      << "[chain]\n"
      << "iterations = " << c.chain.iterations << "\n"
      << "burn_in = " << c.chain.burn_in << "\n"
      << "thin = " << c.chain.thin << "\n"
      << "workers = " << c.chain.workers << "\n"
      << "keep_trace = " << (c.chain.keep_trace ? "true" : "false") << "\n"
      << "edge_moves = " << (c.chain.edge_moves ? "true" : "false") << "\n"
      << "compensator = " << name_of(c.chain.compensator, detail::compensator_names()) << "\n"
      << "init_adjacency = " << (c.chain.init_adjacency == AdjacencyInit::kFull ? "full" : "prior") << "\n"
      << "init_memberships = " << (c.chain.init_memberships == MembershipInit::kTopics ? "topics" : "prior") << "\n"
      << "init_rates = " << (c.chain.init_rates == RateInit::kConditional ? "conditional" : "prior") << "\n\n"
      << "[experiment]\n"
      << "output_dir = " << c.output_dir.string() << "\n"
      << "replications = " << c.replications << "\n"
      << "workers = " << c.workers << "\n"
      << "seed = " << c.seed << "\n";
}

}  // namespace mdm

#endif  // MDM_CONFIG_HPP
