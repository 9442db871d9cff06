#include "fedsim/strategies.hpp"

#include "fedsim/errors.hpp"
#include "fedsim/model.hpp"
#include "fedsim/rng.hpp"

#include <algorithm>
#include <vector>

namespace fedsim {

namespace {

void check_updates_in_order(const std::vector<ClientUpdate>& updates, int n_clients) {
  if (static_cast<int>(updates.size()) != n_clients)
    throw ProtocolError("expected " + std::to_string(n_clients) + " updates, got " +
                        std::to_string(updates.size()));
  for (int i = 0; i < n_clients; ++i) {
    if (updates[static_cast<std::size_t>(i)].client_id != i)
      throw ProtocolError("missing or out-of-order update for client " + std::to_string(i));
  }
}

}  // namespace

StrategyState initial_state(const ExperimentConfig& config, Eigen::Index dim) {
  StrategyState state;
  state.kind = config.strategy;
  state.n_clients = config.n_clients;
  state.eta = config.eta;
  state.lr = config.lr;
  state.epochs = config.epochs;
  state.batch_size = config.batch_size;
  state.master_seed = config.master_seed;

  const bool per_client = config.strategy == StrategyKind::kFedSmart ||
                          config.strategy == StrategyKind::kLocal;
  const int n_models = per_client ? config.n_clients : 1;
  state.models.assign(static_cast<std::size_t>(n_models), ModelParams(dim));

  if (config.strategy == StrategyKind::kFedSmart) {
    const double uniform = 1.0 / static_cast<double>(config.n_clients);
    for (int i = 0; i < config.n_clients; ++i)
      state.peer_weights.push_back({i, Vector::Constant(config.n_clients, uniform)});
  }
  return state;
}

double median(const Vector& values) {
  if (values.size() == 0) throw std::invalid_argument("median: empty input");
  std::vector<double> sorted(values.data(), values.data() + values.size());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size() / 2;
  if (sorted.size() % 2 == 1) return sorted[m];
  return (sorted[m - 1] + sorted[m]) / 2.0;
}

PeerWeights fedsmart_weight_update(const PeerWeights& prev, const RoundAccuracies& accs, double eta) {
  if (prev.weights.size() != accs.values.size())
    throw std::invalid_argument("fedsmart_weight_update: length mismatch");
  if (!(eta > 0.0)) throw std::invalid_argument("fedsmart_weight_update: eta must be > 0");

  // Equal accuracies mean every deviation from the median is exactly zero;
  // the weights are a fixed point and are returned without renormalization.
  if (accs.values.minCoeff() == accs.values.maxCoeff()) return prev;

  const double med = median(accs.values);
  Vector raw = prev.weights + eta * (accs.values.array() - med).matrix();
  raw = raw.cwiseMax(0.0);
  const double total = raw.sum();
  if (total <= 0.0)
    return {prev.owner, Vector::Constant(prev.weights.size(),
                                         1.0 / static_cast<double>(prev.weights.size()))};
  return {prev.owner, raw / total};
}

Vector mix_updates(const std::vector<Vector>& deltas, const Vector& weights) {
  if (deltas.empty()) throw std::invalid_argument("mix_updates: no deltas");
  if (static_cast<Eigen::Index>(deltas.size()) != weights.size())
    throw std::invalid_argument("mix_updates: weight/delta count mismatch");
  const Vector& anchor = deltas.front();
  Vector mixed = anchor;
  for (std::size_t j = 0; j < deltas.size(); ++j) {
    if (deltas[j].size() != anchor.size())
      throw std::invalid_argument("mix_updates: delta length mismatch");
    mixed += weights(static_cast<Eigen::Index>(j)) * (deltas[j] - anchor);
  }
  return mixed;
}

Vector fedavg_aggregate(const std::vector<ClientUpdate>& updates) {
  if (updates.empty()) throw std::invalid_argument("fedavg_aggregate: no updates");
  double total = 0.0;
  for (const ClientUpdate& u : updates) {
    if (u.train_size <= 0) throw std::invalid_argument("fedavg_aggregate: train_size must be > 0");
    total += static_cast<double>(u.train_size);
  }
  std::vector<Vector> deltas;
  deltas.reserve(updates.size());
  Vector coefficients(static_cast<Eigen::Index>(updates.size()));
  for (std::size_t j = 0; j < updates.size(); ++j) {
    deltas.push_back(updates[j].delta);
    coefficients(static_cast<Eigen::Index>(j)) =
        static_cast<double>(updates[j].train_size) / total;
  }
  return mix_updates(deltas, coefficients);
}

FedsmartStep fedsmart_client_step(const ModelParams& model, const PeerWeights& weights,
                                  const std::vector<Vector>& deltas,
                                  const Dataset& validation, double eta) {
  FedsmartStep step;
  step.accuracies.values = Vector(static_cast<Eigen::Index>(deltas.size()));
  for (std::size_t j = 0; j < deltas.size(); ++j) {
    ModelParams candidate = model;
    apply_delta(candidate, deltas[j]);
    step.accuracies.values(static_cast<Eigen::Index>(j)) = accuracy(candidate, validation);
  }
  step.weights = fedsmart_weight_update(weights, step.accuracies, eta);
  step.model = model;
  apply_delta(step.model, mix_updates(deltas, step.weights.weights));
  return step;
}

void fedsmart_round(StrategyState& state, const std::vector<ClientUpdate>& updates,
                    const std::vector<ClientPartition>& partitions) {
  check_updates_in_order(updates, state.n_clients);
  if (static_cast<int>(partitions.size()) != state.n_clients)
    throw std::invalid_argument("fedsmart_round: partition count mismatch");

  std::vector<Vector> deltas;
  deltas.reserve(updates.size());
  for (const ClientUpdate& u : updates) deltas.push_back(u.delta);

  // Every client steps from the frozen round-t state; commit afterwards.
  std::vector<FedsmartStep> steps;
  steps.reserve(static_cast<std::size_t>(state.n_clients));
  for (int i = 0; i < state.n_clients; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    steps.push_back(fedsmart_client_step(state.models[idx], state.peer_weights[idx], deltas,
                                         partitions[idx].validation, state.eta));
  }
  for (int i = 0; i < state.n_clients; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    state.models[idx] = std::move(steps[idx].model);
    state.peer_weights[idx] = std::move(steps[idx].weights);
  }
  ++state.round;
}

void global_weighted_apply(StrategyState& state, const std::vector<ClientUpdate>& updates) {
  check_updates_in_order(updates, state.n_clients);
  apply_delta(state.models.front(), fedavg_aggregate(updates));
  ++state.round;
}

void loadaboost_consume(StrategyState& state, std::vector<ClientUpdate> updates,
                        const std::vector<ClientPartition>& partitions) {
  check_updates_in_order(updates, state.n_clients);
  if (partitions.size() != updates.size())
    throw std::invalid_argument("loadaboost_consume: partition count mismatch");

  Vector losses(state.n_clients);
  std::vector<ModelParams> trained(static_cast<std::size_t>(state.n_clients));
  for (int i = 0; i < state.n_clients; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    trained[idx] = state.models.front();
    apply_delta(trained[idx], updates[idx].delta);
    losses(i) = loss(trained[idx], partitions[idx].train);
  }

  const double gate = median(losses);
  for (int i = 0; i < state.n_clients; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    if (losses(i) > gate) {
      const ClientUpdate extra = local_train(
          trained[idx], partitions[idx].train, 1, state.batch_size, state.lr,
          derive_seed(state.master_seed, SeedStream::kExtraEpoch, static_cast<std::uint64_t>(i),
                      static_cast<std::uint64_t>(state.round)),
          i);
      updates[idx].delta += extra.delta;
    }
  }
  global_weighted_apply(state, updates);
}

void local_consume(StrategyState& state, const std::vector<ClientUpdate>& updates) {
  check_updates_in_order(updates, state.n_clients);
  for (int i = 0; i < state.n_clients; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    apply_delta(state.models[idx], updates[idx].delta);
  }
  ++state.round;
}

ClientUpdate plan_and_train(StrategyKind kind, int epochs, int batch_size, double lr,
                            std::uint64_t master_seed, const ModelParams& current,
                            const Dataset& train, int client_id, int round) {
  if (kind == StrategyKind::kCentralized) {
    ClientUpdate heartbeat;
    heartbeat.client_id = client_id;
    heartbeat.delta = Vector::Zero(current.dim() + 1);
    heartbeat.train_size = static_cast<long>(train.size());
    return heartbeat;
  }
  if (kind == StrategyKind::kFedSgd) {
    epochs = 1;
    batch_size = static_cast<int>(train.size());
  }
  return local_train(current, train, epochs, batch_size, lr,
                     derive_seed(master_seed, SeedStream::kTrain, static_cast<std::uint64_t>(client_id),
                                 static_cast<std::uint64_t>(round)),
                     client_id);
}

ClientUpdate compute_client_update(const ExperimentConfig& config, const ModelParams& current,
                                   const ClientPartition& partition, int round) {
  return plan_and_train(config.strategy, config.epochs, config.batch_size, config.lr,
                        config.master_seed, current, partition.train, partition.client_id, round);
}

namespace {

std::vector<ClientUpdate> train_all(const StrategyState& state,
                                    const std::vector<ClientPartition>& partitions,
                                    StrategyKind kind) {
  std::vector<ClientUpdate> updates;
  updates.reserve(partitions.size());
  for (int i = 0; i < state.n_clients; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const ModelParams& start =
        state.models.size() > 1 ? state.models[idx] : state.models.front();
    updates.push_back(plan_and_train(kind, state.epochs, state.batch_size, state.lr,
                                     state.master_seed, start, partitions[idx].train, i,
                                     state.round));
  }
  return updates;
}

}  // namespace

void fedsgd_round(StrategyState& state, const std::vector<ClientPartition>& partitions) {
  global_weighted_apply(state, train_all(state, partitions, StrategyKind::kFedSgd));
}

void loadaboost_round(StrategyState& state, const std::vector<ClientPartition>& partitions) {
  loadaboost_consume(state, train_all(state, partitions, StrategyKind::kLoAdaBoost), partitions);
}

void local_only_round(StrategyState& state, const std::vector<ClientPartition>& partitions) {
  local_consume(state, train_all(state, partitions, StrategyKind::kLocal));
}

Dataset pool_training_data(const std::vector<ClientPartition>& partitions) {
  Dataset pooled;
  std::size_t total = 0;
  for (const ClientPartition& p : partitions) total += p.train.size();
  pooled.reserve(total);
  for (const ClientPartition& p : partitions)
    pooled.insert(pooled.end(), p.train.begin(), p.train.end());
  if (pooled.empty()) throw std::invalid_argument("pool_training_data: empty pool");
  return pooled;
}

void centralized_round(StrategyState& state, const Dataset& pooled) {
  // Seeded as client 0's training stream, so a single-client federation and
  // the centralized baseline coincide exactly.
  const ClientUpdate update = local_train(
      state.models.front(), pooled, state.epochs, state.batch_size, state.lr,
      derive_seed(state.master_seed, SeedStream::kTrain, 0, static_cast<std::uint64_t>(state.round)));
  apply_delta(state.models.front(), update.delta);
  ++state.round;
}

ModelParams centralized_train(const std::vector<ClientPartition>& partitions,
                              const ExperimentConfig& config) {
  const Dataset pooled = pool_training_data(partitions);
  ExperimentConfig central = config;
  central.strategy = StrategyKind::kCentralized;
  StrategyState state = initial_state(central, pooled.front().features.size());
  for (int r = 0; r < config.rounds; ++r) centralized_round(state, pooled);
  return state.models.front();
}

}  // namespace fedsim
