#pragma once

#include "fedsim/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace fedsim {

struct ExperimentConfig;

/// Ground truth of one latent data distribution: binary features sampled per
/// feature_marginals, label = Bernoulli(sigmoid(beta . x + bias)) flipped with
/// probability label_noise.
struct DistributionSpec {
  Vector beta;
  double bias = 0.0;
  Vector feature_marginals;  // per-feature Bernoulli probabilities
  double label_noise = 0.0;  // in [0, 0.5)
};

/// One client's local data after the pipeline: generated, split by alpha,
/// train share minority-upsampled. Validation keeps the raw class balance.
struct ClientPartition {
  int client_id = 0;
  Dataset train;
  Dataset validation;
  int distribution_id = 0;
};

Dataset generate_client_data(const DistributionSpec& spec, long n_samples, std::uint64_t seed);

/// Replicates the minority class so its count becomes factor x the original
/// (originals plus factor-1 copies), then shuffles. On an exact class tie,
/// class 0 counts as the minority. Throws on single-class input.
Dataset upsample_minority(const Dataset& data, int factor, std::uint64_t seed);

/// Shuffles, takes floor(alpha * |data|) examples (at least 1) as validation,
/// the rest as train.
std::pair<Dataset, Dataset> split_validation(const Dataset& data, double alpha, std::uint64_t seed);

/// The latent distributions behind the clients. Each distribution owns a
/// rotating set of coordinates (two strong, one moderate) whose sign flips
/// for everyone else, plus one rare feature shared by all distributions;
/// marginals differ per distribution so heterogeneity covers both the
/// decision rule and the feature frequencies.
std::vector<DistributionSpec> make_distribution_specs(int n_distributions, Eigen::Index dim);

/// Per-client pipeline for client `client_id` under `config`: generate with
/// the client's distribution, split off the validation share, upsample the
/// train share. Pure function of (config data fields, master_seed, client_id).
ClientPartition build_client_partition(const ExperimentConfig& config, int client_id);

/// All n partitions. Clients i and i + n/2 share a distribution, so for n=6
/// the pairs are {0,3}, {1,4}, {2,5}. Requires even n.
std::vector<ClientPartition> build_paired_clients(const ExperimentConfig& config);

/// Dataset dump: columns feature_0..feature_{d-1},label,split with
/// split in {train,val}. Header row included.
void write_partition_csv(const ClientPartition& partition, std::ostream& out);

}  // namespace fedsim
