#include "fedsim/report.hpp"

#include "fedsim/errors.hpp"
#include "fedsim/numfmt.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace fedsim {

int pairing_partner(int client_id, int n_clients) {
  return (client_id + n_clients / 2) % n_clients;
}

RunSummary summarize(const ExperimentConfig& config, const std::vector<RoundRecord>& records) {
  if (records.empty()) throw std::invalid_argument("summarize: no records");
  const RoundRecord& last = records.back();
  RunSummary summary;
  summary.final_round = last.round;
  summary.final_accuracy = last.val_accuracy;
  summary.mean = last.val_accuracy.sum() / static_cast<double>(last.val_accuracy.size());
  summary.min = last.val_accuracy.minCoeff();
  summary.max = last.val_accuracy.maxCoeff();

  const int n = static_cast<int>(last.val_accuracy.size());
  summary.pairing_applicable = config.strategy == StrategyKind::kFedSmart &&
                               config.heterogeneity == Heterogeneity::kPairedNonIid && n >= 2;
  if (summary.pairing_applicable) {
    for (int i = 0; i < n; ++i) {
      int best = -1;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        if (best < 0 || last.weight_matrix(i, j) > last.weight_matrix(i, best)) best = j;
      }
      if (best == pairing_partner(i, n)) ++summary.pairing_correct_clients;
    }
  }
  return summary;
}

ReportBundle make_bundle(const ExperimentResult& result) {
  return {result.config, result.records, summarize(result.config, result.records)};
}

void write_accuracy_csv(const ReportBundle& bundle, std::ostream& out) {
  if (bundle.records.empty()) throw std::invalid_argument("write_accuracy_csv: no records");
  out << "round,client_id,val_accuracy,val_loss\n";
  for (const RoundRecord& record : bundle.records) {
    for (Eigen::Index i = 0; i < record.val_accuracy.size(); ++i) {
      out << record.round << ',' << i << ',' << format_double(record.val_accuracy(i)) << ','
          << format_double(record.val_loss(i)) << '\n';
    }
  }
}

void write_weights_csv(const ReportBundle& bundle, std::ostream& out) {
  if (bundle.records.empty()) throw std::invalid_argument("write_weights_csv: no records");
  out << "round,owner_id,peer_id,weight\n";
  for (const RoundRecord& record : bundle.records) {
    for (Eigen::Index i = 0; i < record.weight_matrix.rows(); ++i)
      for (Eigen::Index j = 0; j < record.weight_matrix.cols(); ++j)
        out << record.round << ',' << i << ',' << j << ','
            << format_double(record.weight_matrix(i, j)) << '\n';
  }
}

void write_summary_json(const ReportBundle& bundle, std::ostream& out) {
  nlohmann::json j;
  j["config"] = config_to_json(bundle.config);

  nlohmann::json summary;
  summary["final_round"] = bundle.summary.final_round;
  auto accs = nlohmann::json::array();
  for (Eigen::Index i = 0; i < bundle.summary.final_accuracy.size(); ++i)
    accs.push_back(bundle.summary.final_accuracy(i));
  summary["per_client_val_accuracy"] = std::move(accs);
  summary["mean"] = bundle.summary.mean;
  summary["min"] = bundle.summary.min;
  summary["max"] = bundle.summary.max;
  j["summary"] = std::move(summary);

  nlohmann::json pairing;
  pairing["applicable"] = bundle.summary.pairing_applicable;
  if (bundle.summary.pairing_applicable) {
    pairing["correct_clients"] = bundle.summary.pairing_correct_clients;
    auto pairs = nlohmann::json::array();
    const int n = bundle.config.n_clients;
    for (int i = 0; i < n / 2; ++i) pairs.push_back({i, pairing_partner(i, n)});
    pairing["pairs"] = std::move(pairs);
  } else {
    pairing["correct_clients"] = nullptr;
  }
  j["pairing"] = std::move(pairing);

  out << j.dump(2) << '\n';
}

std::filesystem::path write_run_reports(const ReportBundle& bundle, const std::string& outdir) {
  const std::filesystem::path dir =
      std::filesystem::path(outdir) /
      (to_string(bundle.config.strategy) + "_" + std::to_string(bundle.config.master_seed));
  std::filesystem::create_directories(dir);

  const auto open = [](const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
  };
  {
    auto out = open(dir / "accuracy.csv");
    write_accuracy_csv(bundle, out);
  }
  {
    auto out = open(dir / "weights.csv");
    write_weights_csv(bundle, out);
  }
  {
    auto out = open(dir / "summary.json");
    write_summary_json(bundle, out);
  }
  return dir;
}

void write_sweep_csv(const std::vector<SweepRun>& runs, std::ostream& out) {
  out << "strategy,seed,round,mean_val_accuracy,min_val_accuracy,max_val_accuracy\n";
  for (const SweepRun& run : runs) {
    if (!run.ok) continue;
    for (const RoundRecord& record : run.result.records) {
      const double n = static_cast<double>(record.val_accuracy.size());
      out << to_string(run.strategy) << ',' << run.seed << ',' << record.round << ','
          << format_double(record.val_accuracy.sum() / n) << ','
          << format_double(record.val_accuracy.minCoeff()) << ','
          << format_double(record.val_accuracy.maxCoeff()) << '\n';
    }
  }
}

void write_sweep_summary_json(const std::vector<SweepRun>& runs, std::ostream& out) {
  nlohmann::json j;
  auto entries = nlohmann::json::array();
  std::map<std::string, std::pair<double, int>> by_strategy;
  for (const SweepRun& run : runs) {
    nlohmann::json entry;
    entry["strategy"] = to_string(run.strategy);
    entry["seed"] = run.seed;
    entry["ok"] = run.ok;
    if (run.ok) {
      const RunSummary summary = summarize(run.result.config, run.result.records);
      entry["mean_final_accuracy"] = summary.mean;
      auto& acc = by_strategy[to_string(run.strategy)];
      acc.first += summary.mean;
      acc.second += 1;
    } else {
      entry["error"] = run.error;
    }
    entries.push_back(std::move(entry));
  }
  j["runs"] = std::move(entries);

  nlohmann::json means;
  for (const auto& [name, acc] : by_strategy)
    means[name] = acc.first / static_cast<double>(acc.second);
  j["mean_final_accuracy_per_strategy"] = std::move(means);
  out << j.dump(2) << '\n';
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  return fields;
}

}  // namespace

std::vector<AccuracyRow> read_accuracy_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "round,client_id,val_accuracy,val_loss")
    throw std::runtime_error("read_accuracy_csv: bad or missing header");
  std::vector<AccuracyRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 4) throw std::runtime_error("read_accuracy_csv: bad row: " + line);
    rows.push_back({std::stoi(fields[0]), std::stoi(fields[1]), parse_double_exact(fields[2]),
                    parse_double_exact(fields[3])});
  }
  return rows;
}

std::vector<WeightRow> read_weights_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "round,owner_id,peer_id,weight")
    throw std::runtime_error("read_weights_csv: bad or missing header");
  std::vector<WeightRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 4) throw std::runtime_error("read_weights_csv: bad row: " + line);
    rows.push_back({std::stoi(fields[0]), std::stoi(fields[1]), std::stoi(fields[2]),
                    parse_double_exact(fields[3])});
  }
  return rows;
}

}  // namespace fedsim
