#include "fedsim/engine.hpp"

#include "fedsim/data.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/model.hpp"
#include "fedsim/strategies.hpp"

#include <memory>
#include <mutex>
#include <thread>
#include <utility>

namespace fedsim {

namespace {

RoundRecord make_record(int round, const StrategyState& state,
                        const std::vector<ClientPartition>& partitions) {
  const int n = state.n_clients;
  RoundRecord record;
  record.round = round;
  record.val_accuracy = Vector(n);
  record.val_loss = Vector(n);
  record.weight_matrix = Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
  for (int i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const ModelParams& model = state.models.size() > 1 ? state.models[idx] : state.models.front();
    record.val_accuracy(i) = accuracy(model, partitions[idx].validation);
    record.val_loss(i) = loss(model, partitions[idx].validation);
    if (!state.peer_weights.empty())
      record.weight_matrix.row(i) = state.peer_weights[idx].weights.transpose();
  }
  return record;
}

std::vector<Vector> extract_deltas(const std::vector<ClientUpdate>& updates) {
  std::vector<Vector> deltas;
  deltas.reserve(updates.size());
  for (const ClientUpdate& u : updates) deltas.push_back(u.delta);
  return deltas;
}

/// Runs the n loopback TCP clients on background threads and collects any
/// client-side failure for rethrow after the server loop finishes.
class LoopbackClients {
 public:
  LoopbackClients(const ExperimentConfig& config, const std::string& host, int port) {
    threads_.reserve(static_cast<std::size_t>(config.n_clients));
    for (int k = 0; k < config.n_clients; ++k) {
      threads_.emplace_back([this, config, k, host, port] {
        try {
          run_tcp_client(config, k, host, port);
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(mu_);
          if (first_error_.empty())
            first_error_ = "client " + std::to_string(k) + ": " + e.what();
        }
      });
    }
  }

  ~LoopbackClients() { join(); }

  void join() {
    for (std::thread& t : threads_)
      if (t.joinable()) t.join();
  }

  void rethrow_if_failed() {
    join();
    std::lock_guard<std::mutex> lock(mu_);
    if (!first_error_.empty()) throw TransportError("loopback " + first_error_);
  }

 private:
  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::string first_error_;
};

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const TransportOptions& transport) {
  config.validate();

  const std::vector<ClientPartition> partitions = build_paired_clients(config);
  StrategyState state = initial_state(config, kFeatureDim);
  const Dataset pooled = config.strategy == StrategyKind::kCentralized
                             ? pool_training_data(partitions)
                             : Dataset{};

  std::unique_ptr<LoopbackClients> loopback;
  std::unique_ptr<UpdateChannel> channel;
  if (config.transport == TransportKind::kInProcess) {
    channel = std::make_unique<InProcessChannel>(config, state.models.front());
  } else {
    std::vector<long> train_sizes;
    train_sizes.reserve(partitions.size());
    for (const ClientPartition& p : partitions)
      train_sizes.push_back(static_cast<long>(p.train.size()));
    TcpOptions tcp;
    tcp.host = transport.host;
    tcp.port = transport.port;
    auto server = std::make_unique<TcpServerChannel>(config, state.models.front(),
                                                     std::move(train_sizes), tcp);
    if (transport.spawn_local_clients)
      loopback = std::make_unique<LoopbackClients>(config, transport.host, server->bound_port());
    server->wait_for_clients();
    channel = std::move(server);
  }

  ExperimentResult result;
  result.config = config;
  result.records.reserve(static_cast<std::size_t>(config.rounds));

  for (int round = 0; round < config.rounds; ++round) {
    const std::vector<ClientUpdate> updates = channel->collect_updates(round);

    RoundReply reply;
    switch (config.strategy) {
      case StrategyKind::kFedSmart:
        fedsmart_round(state, updates, partitions);
        reply.kind = RoundReply::Kind::kPackedDeltas;
        reply.packed = extract_deltas(updates);
        break;
      case StrategyKind::kFedAvg:
      case StrategyKind::kFedSgd:
        global_weighted_apply(state, updates);
        reply.kind = RoundReply::Kind::kNewParams;
        reply.new_params = state.models.front().flat();
        break;
      case StrategyKind::kLoAdaBoost:
        loadaboost_consume(state, updates, partitions);
        reply.kind = RoundReply::Kind::kNewParams;
        reply.new_params = state.models.front().flat();
        break;
      case StrategyKind::kLocal:
        local_consume(state, updates);
        break;
      case StrategyKind::kCentralized:
        centralized_round(state, pooled);
        break;
    }
    channel->complete_round(round, reply);
    result.records.push_back(make_record(round, state, partitions));
  }

  channel->shutdown();
  channel.reset();
  if (loopback) loopback->rethrow_if_failed();
  return result;
}

std::vector<SweepRun> run_sweep(const ExperimentConfig& base,
                                const std::vector<StrategyKind>& strategies,
                                const std::vector<std::uint64_t>& seeds) {
  if (strategies.empty()) throw ConfigError("run_sweep: no strategies given");
  if (seeds.empty()) throw ConfigError("run_sweep: no seeds given");

  std::vector<SweepRun> runs;
  runs.reserve(strategies.size() * seeds.size());
  for (const StrategyKind strategy : strategies) {
    for (const std::uint64_t seed : seeds) {
      SweepRun run;
      run.strategy = strategy;
      run.seed = seed;
      ExperimentConfig config = base;
      config.strategy = strategy;
      config.master_seed = seed;
      try {
        run.result = run_experiment(config);
        run.ok = true;
      } catch (const std::exception& e) {
        run.ok = false;
        run.error = e.what();
      }
      runs.push_back(std::move(run));
    }
  }
  return runs;
}

}  // namespace fedsim
