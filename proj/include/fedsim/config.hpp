#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "fedsim/errors.hpp"

namespace fedsim {

enum class StrategyKind { kFedSmart, kFedAvg, kFedSgd, kLoAdaBoost, kLocal, kCentralized };
enum class Heterogeneity { kIid, kPairedNonIid };
enum class TransportKind { kInProcess, kTcp };

std::string to_string(StrategyKind s);
std::string to_string(Heterogeneity h);
std::string to_string(TransportKind t);
StrategyKind strategy_from_string(const std::string& s);
Heterogeneity heterogeneity_from_string(const std::string& s);
TransportKind transport_from_string(const std::string& s);

/// The feature dimension of the synthetic schema: gender, age, 8 drug
/// indicators. Fixed for experiments; the core library itself is generic.
inline constexpr int kFeatureDim = 10;

struct ExperimentConfig {
  int n_clients = 6;
  int rounds = 100;
  double alpha = 0.25;        // validation share
  double eta = 0.5;           // weight-update learning rate
  double lr = 0.1;            // SGD learning rate
  int epochs = 1;
  int batch_size = 32;
  long samples_per_client = 3500;
  int upsample_factor = 3;
  StrategyKind strategy = StrategyKind::kFedSmart;
  std::uint64_t master_seed = 1;
  Heterogeneity heterogeneity = Heterogeneity::kPairedNonIid;
  TransportKind transport = TransportKind::kInProcess;

  /// Throws ConfigError when any field is outside its domain.
  void validate() const;
};

/// Flat `key = value` text, one pair per line, `#` comments. Unknown keys are
/// rejected. Missing file throws ConfigError naming the path.
ExperimentConfig load_config_file(const std::string& path);

/// Applies one `key=value` override in place. Throws ConfigError on unknown
/// keys or unparseable values.
void apply_override(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Splits "key=value" at the first '='.
std::pair<std::string, std::string> parse_override(const std::string& spec);

nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& j);

}  // namespace fedsim
