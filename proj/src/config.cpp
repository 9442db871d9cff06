#include "fedsim/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace fedsim {

std::string to_string(StrategyKind s) {
  switch (s) {
    case StrategyKind::kFedSmart: return "fedsmart";
    case StrategyKind::kFedAvg: return "fedavg";
    case StrategyKind::kFedSgd: return "fedsgd";
    case StrategyKind::kLoAdaBoost: return "loadaboost";
    case StrategyKind::kLocal: return "local";
    case StrategyKind::kCentralized: return "centralized";
  }
  throw std::logic_error("unreachable strategy kind");
}

std::string to_string(Heterogeneity h) {
  return h == Heterogeneity::kIid ? "iid" : "paired_noniid";
}

std::string to_string(TransportKind t) {
  return t == TransportKind::kInProcess ? "inprocess" : "tcp";
}

StrategyKind strategy_from_string(const std::string& s) {
  if (s == "fedsmart") return StrategyKind::kFedSmart;
  if (s == "fedavg") return StrategyKind::kFedAvg;
  if (s == "fedsgd") return StrategyKind::kFedSgd;
  if (s == "loadaboost") return StrategyKind::kLoAdaBoost;
  if (s == "local") return StrategyKind::kLocal;
  if (s == "centralized") return StrategyKind::kCentralized;
  throw ConfigError("unknown strategy: '" + s + "'");
}

Heterogeneity heterogeneity_from_string(const std::string& s) {
  if (s == "iid") return Heterogeneity::kIid;
  if (s == "paired_noniid") return Heterogeneity::kPairedNonIid;
  throw ConfigError("unknown heterogeneity: '" + s + "'");
}

TransportKind transport_from_string(const std::string& s) {
  if (s == "inprocess") return TransportKind::kInProcess;
  if (s == "tcp") return TransportKind::kTcp;
  throw ConfigError("unknown transport: '" + s + "'");
}

void ExperimentConfig::validate() const {
  if (n_clients < 2) throw ConfigError("n_clients must be >= 2");
  if (n_clients % 2 != 0) throw ConfigError("n_clients must be even (clients form distribution pairs)");
  if (rounds < 1) throw ConfigError("rounds must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must be in (0, 1)");
  if (!(eta > 0.0)) throw ConfigError("eta must be > 0");
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (samples_per_client < 8) throw ConfigError("samples_per_client must be >= 8");
  if (upsample_factor < 1) throw ConfigError("upsample_factor must be >= 1");
}

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

long parse_long(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("invalid integer for " + key + ": '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("invalid real for " + key + ": '" + value + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return static_cast<std::uint64_t>(v);
  } catch (const std::exception&) {
    throw ConfigError("invalid seed for " + key + ": '" + value + "'");
  }
}

}  // namespace

void apply_override(ExperimentConfig& config, const std::string& key, const std::string& value) {
  if (key == "n_clients") config.n_clients = static_cast<int>(parse_long(key, value));
  else if (key == "rounds") config.rounds = static_cast<int>(parse_long(key, value));
  else if (key == "alpha") config.alpha = parse_double(key, value);
  else if (key == "eta") config.eta = parse_double(key, value);
  else if (key == "lr") config.lr = parse_double(key, value);
  else if (key == "epochs") config.epochs = static_cast<int>(parse_long(key, value));
  else if (key == "batch_size") config.batch_size = static_cast<int>(parse_long(key, value));
  else if (key == "samples_per_client") config.samples_per_client = parse_long(key, value);
  else if (key == "upsample_factor") config.upsample_factor = static_cast<int>(parse_long(key, value));
  else if (key == "strategy") config.strategy = strategy_from_string(value);
  else if (key == "master_seed") config.master_seed = parse_u64(key, value);
  else if (key == "heterogeneity") config.heterogeneity = heterogeneity_from_string(value);
  else if (key == "transport") config.transport = transport_from_string(value);
  else throw ConfigError("unknown config key: '" + key + "'");
}

std::pair<std::string, std::string> parse_override(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) throw ConfigError("override must be key=value, got '" + spec + "'");
  return {trim(spec.substr(0, eq)), trim(spec.substr(eq + 1))};
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  ExperimentConfig config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
    apply_override(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return config;
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  return nlohmann::json{
      {"n_clients", c.n_clients},
      {"rounds", c.rounds},
      {"alpha", c.alpha},
      {"eta", c.eta},
      {"lr", c.lr},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"samples_per_client", c.samples_per_client},
      {"upsample_factor", c.upsample_factor},
      {"strategy", to_string(c.strategy)},
      {"master_seed", c.master_seed},
      {"heterogeneity", to_string(c.heterogeneity)},
      {"transport", to_string(c.transport)},
  };
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  c.n_clients = j.at("n_clients").get<int>();
  c.rounds = j.at("rounds").get<int>();
  c.alpha = j.at("alpha").get<double>();
  c.eta = j.at("eta").get<double>();
  c.lr = j.at("lr").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.samples_per_client = j.at("samples_per_client").get<long>();
  c.upsample_factor = j.at("upsample_factor").get<int>();
  c.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  c.master_seed = j.at("master_seed").get<std::uint64_t>();
  c.heterogeneity = heterogeneity_from_string(j.at("heterogeneity").get<std::string>());
  c.transport = transport_from_string(j.at("transport").get<std::string>());
  return c;
}

}  // namespace fedsim
