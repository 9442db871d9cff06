#pragma once

#include "fedsim/config.hpp"
#include "fedsim/data.hpp"
#include "fedsim/types.hpp"

#include <cstdint>
#include <vector>

namespace fedsim {

/// One client's mixing distribution over all n peers (self included).
/// Nonnegative, sums to 1 within 1e-9.
struct PeerWeights {
  int owner = 0;
  Vector weights;
};

/// Entry j = accuracy of the owner's model with client j's candidate update,
/// measured on the owner's validation set.
struct RoundAccuracies {
  Vector values;
};

/// Mutable state a strategy carries across rounds. FedSmart and local keep one
/// model per client; the global strategies and centralized keep a single
/// model in models[0]. peer_weights is populated for FedSmart only.
struct StrategyState {
  StrategyKind kind = StrategyKind::kFedSmart;
  int n_clients = 0;
  int round = 0;
  double eta = 0.5;
  double lr = 0.1;
  int epochs = 1;
  int batch_size = 32;
  std::uint64_t master_seed = 0;
  std::vector<ModelParams> models;
  std::vector<PeerWeights> peer_weights;
};

/// Zero-initialized models (server-initialized symmetric start) and uniform
/// peer weights.
StrategyState initial_state(const ExperimentConfig& config, Eigen::Index dim);

/// Sorted middle element for odd length, mean of the two middle elements for
/// even length.
double median(const Vector& values);

/// The performance-based weight step: raw_j = prev_j + eta * (acc_j - median),
/// negatives clamped to zero, then L1-normalized. All-zero raws fall back to
/// uniform. When every accuracy is equal the previous weights are returned
/// bitwise unchanged.
PeerWeights fedsmart_weight_update(const PeerWeights& prev, const RoundAccuracies& accs, double eta);

/// Convex mix of the deltas under `weights`, anchored on the first delta
/// (delta_0 + sum_j w_j * (delta_j - delta_0)) so that identical deltas mix
/// to exactly themselves.
Vector mix_updates(const std::vector<Vector>& deltas, const Vector& weights);

/// Sample-size-weighted mean of the deltas, anchored the same way.
Vector fedavg_aggregate(const std::vector<ClientUpdate>& updates);

/// One client's view of a FedSmart round: score every peer's candidate update
/// on the own validation set, update the weight row, mix. Deltas are indexed
/// by client id.
struct FedsmartStep {
  RoundAccuracies accuracies;
  PeerWeights weights;
  ModelParams model;
};
FedsmartStep fedsmart_client_step(const ModelParams& model, const PeerWeights& weights,
                                  const std::vector<Vector>& deltas,
                                  const Dataset& validation, double eta);

/// Full FedSmart round over all clients: candidate evaluation, weight update,
/// per-client mixing. Expects exactly one update per client, in id order.
void fedsmart_round(StrategyState& state, const std::vector<ClientUpdate>& updates,
                    const std::vector<ClientPartition>& partitions);

/// Applies the sample-size-weighted mean delta to the single global model.
/// Shared by FedAvg and FedSGD once the updates are in hand.
void global_weighted_apply(StrategyState& state, const std::vector<ClientUpdate>& updates);

/// Gate + aggregation half of the loss-gated round: clients whose
/// post-training train loss exceeds the cross-client median get one extra
/// local epoch folded into their delta before averaging.
void loadaboost_consume(StrategyState& state, std::vector<ClientUpdate> updates,
                        const std::vector<ClientPartition>& partitions);

/// Applies each client's own delta to its own model; no communication.
void local_consume(StrategyState& state, const std::vector<ClientUpdate>& updates);

/// Runs the configured local training for one client this round and returns
/// its update. FedSGD forces a single full-batch step; centralized clients
/// contribute a zero delta (the pooled model is trained server-side).
ClientUpdate plan_and_train(StrategyKind kind, int epochs, int batch_size, double lr,
                            std::uint64_t master_seed, const ModelParams& current,
                            const Dataset& train, int client_id, int round);

/// Convenience wrapper over plan_and_train driven by an ExperimentConfig.
ClientUpdate compute_client_update(const ExperimentConfig& config, const ModelParams& current,
                                   const ClientPartition& partition, int round);

/// Self-contained round compositions (train + consume) for the baselines.
void fedsgd_round(StrategyState& state, const std::vector<ClientPartition>& partitions);
void loadaboost_round(StrategyState& state, const std::vector<ClientPartition>& partitions);
void local_only_round(StrategyState& state, const std::vector<ClientPartition>& partitions);

/// Train shares pooled in client-id order, example order preserved.
Dataset pool_training_data(const std::vector<ClientPartition>& partitions);

/// One SGD "round" of the centralized baseline on the pooled data.
void centralized_round(StrategyState& state, const Dataset& pooled);

/// The centralized baseline end to end: pool every client's train share and
/// train a single model for config.rounds rounds.
ModelParams centralized_train(const std::vector<ClientPartition>& partitions,
                              const ExperimentConfig& config);

}  // namespace fedsim
