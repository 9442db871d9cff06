#pragma once

#include "fedsim/config.hpp"
#include "fedsim/transport.hpp"
#include "fedsim/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fedsim {

/// Per-round measurements: every client's validation accuracy and loss under
/// its end-of-round model, plus the full peer-weight matrix (row i = client
/// i's weights; strategies without peer weights emit uniform rows).
struct RoundRecord {
  int round = 0;
  Vector val_accuracy;
  Vector val_loss;
  Matrix weight_matrix;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<RoundRecord> records;
};

/// Transport knobs that live outside the experiment definition. port 0 picks
/// an ephemeral port. With spawn_local_clients the engine runs the n TCP
/// clients on threads in this process (loopback mode); switch it off when the
/// clients are separate `client` processes.
struct TransportOptions {
  std::string host = "127.0.0.1";
  int port = 0;
  bool spawn_local_clients = true;
};

/// Runs one experiment to completion and returns exactly config.rounds
/// records. Fully deterministic given the config.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const TransportOptions& transport = {});

struct SweepRun {
  StrategyKind strategy = StrategyKind::kFedSmart;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  ExperimentResult result;
};

/// Cross-product of strategies x seeds over the base config. A failing run is
/// recorded with its identity and the rest proceed.
std::vector<SweepRun> run_sweep(const ExperimentConfig& base,
                                const std::vector<StrategyKind>& strategies,
                                const std::vector<std::uint64_t>& seeds);

}  // namespace fedsim
