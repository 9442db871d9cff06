#include "fedsim/acceptance.hpp"
#include "fedsim/data.hpp"
#include "fedsim/engine.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/report.hpp"
#include "fedsim/transport.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitRuntimeError = 2;
constexpr int kExitAcceptanceFailure = 3;

fedsim::ExperimentConfig resolve_config(const std::string& config_path,
                                        const std::vector<std::string>& overrides) {
  fedsim::ExperimentConfig config;
  if (!config_path.empty()) config = fedsim::load_config_file(config_path);
  for (const std::string& spec : overrides) {
    const auto [key, value] = fedsim::parse_override(spec);
    fedsim::apply_override(config, key, value);
  }
  config.validate();
  return config;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
  std::vector<std::uint64_t> seeds;
  std::istringstream in(csv);
  std::string token;
  while (std::getline(in, token, ',')) {
    if (token.empty()) continue;
    seeds.push_back(std::stoull(token));
  }
  if (seeds.empty()) throw fedsim::ConfigError("--seeds must list at least one seed");
  return seeds;
}

std::vector<fedsim::StrategyKind> parse_strategy_list(const std::string& csv) {
  std::vector<fedsim::StrategyKind> strategies;
  std::istringstream in(csv);
  std::string token;
  while (std::getline(in, token, ',')) {
    if (token.empty()) continue;
    strategies.push_back(fedsim::strategy_from_string(token));
  }
  if (strategies.empty()) throw fedsim::ConfigError("--strategies must list at least one strategy");
  return strategies;
}

std::string config_keys_footer() {
  const fedsim::ExperimentConfig d;
  std::ostringstream out;
  out << "Config keys (file or --set), with defaults:\n"
      << "  n_clients=" << d.n_clients << "  rounds=" << d.rounds << "  alpha=" << d.alpha
      << "  eta=" << d.eta << "  lr=" << d.lr << "  epochs=" << d.epochs << "\n"
      << "  batch_size=" << d.batch_size << "  samples_per_client=" << d.samples_per_client
      << "  upsample_factor=" << d.upsample_factor << "  master_seed=" << d.master_seed << "\n"
      << "  strategy=" << fedsim::to_string(d.strategy)
      << " (fedsmart|fedavg|fedsgd|loadaboost|local|centralized)\n"
      << "  heterogeneity=" << fedsim::to_string(d.heterogeneity) << " (iid|paired_noniid)\n"
      << "  transport=" << fedsim::to_string(d.transport) << " (inprocess|tcp)";
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic federated-learning simulator with performance-weighted aggregation"};
  app.require_subcommand(1);
  app.footer(config_keys_footer());

  std::string config_path;
  std::vector<std::string> overrides;
  std::string outdir = "out";
  std::string host = "127.0.0.1";
  int port = 7787;
  std::string seeds_csv = "1";
  std::string strategies_csv = "fedsmart,fedavg,fedsgd,loadaboost,local,centralized";
  int client_id = -1;

  const auto add_common = [&](CLI::App* cmd, bool with_outdir) {
    cmd->add_option("--config", config_path, "Path to a key = value config file");
    cmd->add_option("--set", overrides, "Config override key=value (repeatable)");
    if (with_outdir)
      cmd->add_option("--outdir", outdir, "Output directory")->envname("FEDSIM_OUTDIR");
  };

  CLI::App* run = app.add_subcommand("run", "Run one experiment and write its report bundle");
  add_common(run, true);

  CLI::App* sweep = app.add_subcommand("sweep", "Run a strategies x seeds sweep");
  add_common(sweep, true);
  sweep->add_option("--seeds", seeds_csv, "Comma-separated master seeds");
  sweep->add_option("--strategies", strategies_csv, "Comma-separated strategy names");

  CLI::App* gen = app.add_subcommand("gen-data", "Dump the synthetic client partitions as CSV");
  add_common(gen, true);

  CLI::App* serve = app.add_subcommand("serve", "Run the TCP server side of a distributed experiment");
  add_common(serve, true);
  serve->add_option("--host", host, "Listen address");
  serve->add_option("--port", port, "Listen port");

  CLI::App* client = app.add_subcommand("client", "Run one TCP client process");
  add_common(client, false);
  client->add_option("--host", host, "Server address");
  client->add_option("--port", port, "Server port");
  client->add_option("--id", client_id, "This client's id in [0, n_clients)")->required();

  CLI::App* accept = app.add_subcommand("accept", "Run the acceptance suite");
  add_common(accept, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfigError;
  }

  try {
    if (run->parsed()) {
      const auto config = resolve_config(config_path, overrides);
      const auto result = fedsim::run_experiment(config);
      const auto bundle = fedsim::make_bundle(result);
      const auto dir = fedsim::write_run_reports(bundle, outdir);
      std::cout << "wrote " << dir.string() << " (mean final accuracy "
                << bundle.summary.mean << ")\n";
      return kExitOk;
    }

    if (sweep->parsed()) {
      const auto base = resolve_config(config_path, overrides);
      const auto runs = fedsim::run_sweep(base, parse_strategy_list(strategies_csv),
                                          parse_seed_list(seeds_csv));
      std::filesystem::create_directories(outdir);
      int failed = 0;
      for (const auto& r : runs) {
        if (r.ok) {
          fedsim::write_run_reports(fedsim::make_bundle(r.result), outdir);
        } else {
          ++failed;
          std::cerr << "run " << fedsim::to_string(r.strategy) << "_" << r.seed
                    << " failed: " << r.error << "\n";
        }
      }
      {
        std::ofstream out(std::filesystem::path(outdir) / "sweep.csv", std::ios::binary);
        fedsim::write_sweep_csv(runs, out);
      }
      {
        std::ofstream out(std::filesystem::path(outdir) / "sweep_summary.json", std::ios::binary);
        fedsim::write_sweep_summary_json(runs, out);
      }
      std::cout << "wrote " << runs.size() << " runs to " << outdir << "\n";
      return failed == 0 ? kExitOk : kExitRuntimeError;
    }

    if (gen->parsed()) {
      const auto config = resolve_config(config_path, overrides);
      std::filesystem::create_directories(outdir);
      for (const auto& partition : fedsim::build_paired_clients(config)) {
        const auto path = std::filesystem::path(outdir) /
                          ("client_" + std::to_string(partition.client_id) + ".csv");
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        fedsim::write_partition_csv(partition, out);
      }
      std::cout << "wrote " << config.n_clients << " client datasets to " << outdir << "\n";
      return kExitOk;
    }

    if (serve->parsed()) {
      auto config = resolve_config(config_path, overrides);
      config.transport = fedsim::TransportKind::kTcp;
      fedsim::TransportOptions transport;
      transport.host = host;
      transport.port = port;
      transport.spawn_local_clients = false;
      std::cout << "listening on " << host << ":" << port << ", waiting for "
                << config.n_clients << " clients\n";
      const auto result = fedsim::run_experiment(config, transport);
      const auto dir = fedsim::write_run_reports(fedsim::make_bundle(result), outdir);
      std::cout << "wrote " << dir.string() << "\n";
      return kExitOk;
    }

    if (client->parsed()) {
      auto config = resolve_config(config_path, overrides);
      config.transport = fedsim::TransportKind::kTcp;
      fedsim::run_tcp_client(config, client_id, host, port);
      std::cout << "client " << client_id << " finished " << config.rounds << " rounds\n";
      return kExitOk;
    }

    if (accept->parsed()) {
      const auto scratch = std::filesystem::path(outdir) / "acceptance";
      const auto results = fedsim::run_acceptance(scratch.string());
      const int failures = fedsim::print_acceptance(results, std::cout);
      return failures == 0 ? kExitOk : kExitAcceptanceFailure;
    }
  } catch (const fedsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
  return kExitConfigError;
}
