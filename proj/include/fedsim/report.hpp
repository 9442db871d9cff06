#pragma once

#include "fedsim/config.hpp"
#include "fedsim/engine.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace fedsim {

struct RunSummary {
  int final_round = -1;
  Vector final_accuracy;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  // Pairing emergence: for how many clients the largest off-diagonal entry of
  // the final weight row points at the designated pair partner. Not
  // applicable outside fedsmart + paired_noniid (or with fewer than 2 clients).
  bool pairing_applicable = false;
  int pairing_correct_clients = 0;
};

struct ReportBundle {
  ExperimentConfig config;
  std::vector<RoundRecord> records;
  RunSummary summary;
};

/// The pair partner of `client_id` under the paired construction: i and
/// i + n/2 share a distribution.
int pairing_partner(int client_id, int n_clients);

RunSummary summarize(const ExperimentConfig& config, const std::vector<RoundRecord>& records);

ReportBundle make_bundle(const ExperimentResult& result);

/// CSV `round,client_id,val_accuracy,val_loss`, one row per (round, client),
/// sorted by round then client. Reals carry full round-trip precision.
void write_accuracy_csv(const ReportBundle& bundle, std::ostream& out);

/// CSV `round,owner_id,peer_id,weight`, n^2 rows per round, same ordering and
/// precision rules.
void write_weights_csv(const ReportBundle& bundle, std::ostream& out);

/// Single JSON document embedding the config snapshot, the final-round
/// summary and the pairing indicator.
void write_summary_json(const ReportBundle& bundle, std::ostream& out);

/// Directory `<outdir>/<strategy>_<seed>/` with accuracy.csv, weights.csv and
/// summary.json. Returns the directory written.
std::filesystem::path write_run_reports(const ReportBundle& bundle, const std::string& outdir);

/// Combined sweep table `strategy,seed,round,mean_val_accuracy,
/// min_val_accuracy,max_val_accuracy`; failed runs contribute no rows.
void write_sweep_csv(const std::vector<SweepRun>& runs, std::ostream& out);

/// Per-run status plus each strategy's mean final-round accuracy.
void write_sweep_summary_json(const std::vector<SweepRun>& runs, std::ostream& out);

// Parse-back helpers for the emitted CSVs (values reconstruct bitwise).
struct AccuracyRow {
  int round;
  int client_id;
  double val_accuracy;
  double val_loss;
};
struct WeightRow {
  int round;
  int owner_id;
  int peer_id;
  double weight;
};
std::vector<AccuracyRow> read_accuracy_csv(std::istream& in);
std::vector<WeightRow> read_weights_csv(std::istream& in);

}  // namespace fedsim
