#include "fedsim/data.hpp"

#include "fedsim/config.hpp"
#include "fedsim/model.hpp"
#include "fedsim/numfmt.hpp"
#include "fedsim/rng.hpp"

#include <cmath>
#include <ostream>

namespace fedsim {

Dataset generate_client_data(const DistributionSpec& spec, long n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw std::invalid_argument("generate_client_data: n_samples must be >= 1");
  if (spec.beta.size() != spec.feature_marginals.size())
    throw std::invalid_argument("generate_client_data: beta/marginals length mismatch");
  if (!(spec.label_noise >= 0.0 && spec.label_noise < 0.5))
    throw std::invalid_argument("generate_client_data: label_noise must be in [0, 0.5)");
  for (Eigen::Index j = 0; j < spec.feature_marginals.size(); ++j) {
    const double m = spec.feature_marginals(j);
    if (!(m >= 0.0 && m <= 1.0))
      throw std::invalid_argument("generate_client_data: feature marginal out of [0, 1]");
  }

  const Eigen::Index d = spec.beta.size();
  ModelParams truth;
  truth.weights = spec.beta;
  truth.bias = spec.bias;

  Rng rng(seed);
  Dataset data;
  data.reserve(static_cast<std::size_t>(n_samples));
  for (long i = 0; i < n_samples; ++i) {
    Example ex;
    ex.features = Vector(d);
    for (Eigen::Index j = 0; j < d; ++j)
      ex.features(j) = rng.bernoulli(spec.feature_marginals(j)) ? 1.0 : 0.0;
    ex.label = rng.bernoulli(predict_proba(truth, ex.features)) ? 1 : 0;
    if (rng.bernoulli(spec.label_noise)) ex.label = 1 - ex.label;
    data.push_back(std::move(ex));
  }
  return data;
}

Dataset upsample_minority(const Dataset& data, int factor, std::uint64_t seed) {
  if (factor < 1) throw std::invalid_argument("upsample_minority: factor must be >= 1");
  long ones = 0;
  for (const Example& ex : data)
    if (ex.label == 1) ++ones;
  const long zeros = static_cast<long>(data.size()) - ones;
  if (zeros == 0 || ones == 0)
    throw std::invalid_argument("upsample_minority: degenerate single-class dataset");

  // Tie goes to class 0.
  const int minority = ones < zeros ? 1 : 0;

  Dataset out = data;
  for (int copy = 1; copy < factor; ++copy)
    for (const Example& ex : data)
      if (ex.label == minority) out.push_back(ex);

  Rng rng(seed);
  rng.shuffle(out);
  return out;
}

std::pair<Dataset, Dataset> split_validation(const Dataset& data, double alpha, std::uint64_t seed) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("split_validation: alpha must be in (0, 1)");
  if (data.size() < 2) throw std::invalid_argument("split_validation: need at least 2 examples");

  Dataset shuffled = data;
  Rng rng(seed);
  rng.shuffle(shuffled);

  std::size_t n_val = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(data.size())));
  if (n_val < 1) n_val = 1;
  Dataset validation(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_val));
  Dataset train(shuffled.begin() + static_cast<std::ptrdiff_t>(n_val), shuffled.end());
  return {std::move(train), std::move(validation)};
}

std::vector<DistributionSpec> make_distribution_specs(int n_distributions, Eigen::Index dim) {
  if (n_distributions < 1) throw std::invalid_argument("make_distribution_specs: need >= 1 distribution");
  if (dim < n_distributions)
    throw std::invalid_argument("make_distribution_specs: dimension smaller than distribution count");

  // Each distribution owns two strongly predictive coordinates and one
  // moderate coordinate; ownership rotates, and the sign flips on everything
  // a distribution does not own, so updates from a different distribution
  // actively conflict. The last coordinate is a rare feature shared by every
  // distribution. Distribution 0 keeps its moderate features nearly absent
  // (the iid control stays dominated by the strong block); the others carry
  // them at low frequency, which leaves their fine structure sample-limited
  // at the default client size.
  constexpr double kStrongBeta = 7.0;
  constexpr double kMediumBeta = 1.8;
  constexpr double kSharedBeta = 1.8;
  constexpr double kStrongOwnMarginal = 0.6;
  constexpr double kStrongCrossMarginal = 0.4;
  constexpr double kMediumOwnMarginal = 0.35;
  constexpr double kMediumCrossMarginal = 0.12;
  constexpr double kMediumAbsentMarginal = 0.03;
  constexpr double kSharedMarginal = 0.12;
  constexpr double kTargetMeanLogit = -1.5;  // positives ~30% before upsampling
  constexpr double kLabelNoise = 0.0;        // labels already stochastic via the sigmoid

  const int D = n_distributions;
  const bool tiered = D <= 3 && dim >= 3 * D + 1;

  std::vector<DistributionSpec> specs;
  specs.reserve(static_cast<std::size_t>(D));
  for (int k = 0; k < D; ++k) {
    DistributionSpec spec;
    spec.beta = Vector::Zero(dim);
    spec.feature_marginals = Vector::Constant(dim, 0.5);
    if (tiered) {
      for (int j = 0; j < 2 * D; ++j) {
        const bool own = (j % D) == k;
        spec.beta(j) = own ? kStrongBeta : -kStrongBeta;
        spec.feature_marginals(j) = own ? kStrongOwnMarginal : kStrongCrossMarginal;
      }
      for (int j = 2 * D; j < 3 * D; ++j) {
        const bool own = (j - 2 * D) == k;
        spec.beta(j) = own ? kMediumBeta : -kMediumBeta;
        if (k == 0)
          spec.feature_marginals(j) = kMediumAbsentMarginal;
        else
          spec.feature_marginals(j) = own ? kMediumOwnMarginal : kMediumCrossMarginal;
      }
      spec.beta(dim - 1) = kSharedBeta;
      spec.feature_marginals(dim - 1) = kSharedMarginal;
    } else {
      // Many distributions or a tight dimension: plain rotating ownership.
      const Eigen::Index patterned = (dim / D) * D;
      for (Eigen::Index j = 0; j < patterned; ++j) {
        const bool own = (j % D) == k;
        spec.beta(j) = own ? kStrongBeta : -kStrongBeta;
        spec.feature_marginals(j) = own ? kStrongOwnMarginal : kStrongCrossMarginal;
      }
    }
    spec.bias = kTargetMeanLogit - spec.beta.dot(spec.feature_marginals);
    spec.label_noise = kLabelNoise;
    specs.push_back(std::move(spec));
  }
  return specs;
}

ClientPartition build_client_partition(const ExperimentConfig& config, int client_id) {
  if (config.n_clients % 2 != 0)
    throw ConfigError("paired client construction requires an even n_clients");
  if (client_id < 0 || client_id >= config.n_clients)
    throw std::invalid_argument("build_client_partition: client_id out of range");

  // iid mode still builds the full family and hands every client the first
  // spec, so the control distribution matches paired distribution 0 exactly.
  const bool iid = config.heterogeneity == Heterogeneity::kIid;
  const int n_dists = config.n_clients / 2;
  const int dist_id = iid ? 0 : client_id % n_dists;
  const auto specs = make_distribution_specs(n_dists, kFeatureDim);

  const std::uint64_t seed = config.master_seed;
  const auto cid = static_cast<std::uint64_t>(client_id);
  Dataset data = generate_client_data(specs[static_cast<std::size_t>(dist_id)],
                                      config.samples_per_client,
                                      derive_seed(seed, SeedStream::kGenerate, cid));
  auto [train, validation] =
      split_validation(data, config.alpha, derive_seed(seed, SeedStream::kSplit, cid));
  // Up-sampling touches the train share only; validation keeps the raw
  // class balance.
  train = upsample_minority(train, config.upsample_factor,
                            derive_seed(seed, SeedStream::kUpsample, cid));

  ClientPartition partition;
  partition.client_id = client_id;
  partition.train = std::move(train);
  partition.validation = std::move(validation);
  partition.distribution_id = dist_id;
  return partition;
}

std::vector<ClientPartition> build_paired_clients(const ExperimentConfig& config) {
  if (config.n_clients % 2 != 0)
    throw ConfigError("n_clients must be even for paired construction");
  std::vector<ClientPartition> partitions;
  partitions.reserve(static_cast<std::size_t>(config.n_clients));
  for (int i = 0; i < config.n_clients; ++i)
    partitions.push_back(build_client_partition(config, i));
  return partitions;
}

void write_partition_csv(const ClientPartition& partition, std::ostream& out) {
  Eigen::Index d = 0;
  if (!partition.train.empty()) d = partition.train.front().features.size();
  else if (!partition.validation.empty()) d = partition.validation.front().features.size();

  for (Eigen::Index j = 0; j < d; ++j) out << "feature_" << j << ",";
  out << "label,split\n";

  const auto write_rows = [&](const Dataset& rows, const char* split) {
    for (const Example& ex : rows) {
      for (Eigen::Index j = 0; j < d; ++j) out << format_double(ex.features(j)) << ",";
      out << ex.label << "," << split << "\n";
    }
  };
  write_rows(partition.train, "train");
  write_rows(partition.validation, "val");
}

}  // namespace fedsim
