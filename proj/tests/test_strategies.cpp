#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fedsim/data.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/model.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

using namespace fedsim;

namespace {

Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

Dataset tiny_dataset(Rng& rng, Eigen::Index d, int size) {
  Dataset data;
  for (int i = 0; i < size; ++i) {
    Example ex;
    ex.features = Vector(d);
    for (Eigen::Index c = 0; c < d; ++c) ex.features(c) = 2.0 * rng.next_double() - 1.0;
    ex.label = rng.bernoulli(0.5) ? 1 : 0;
    data.push_back(std::move(ex));
  }
  return data;
}

std::vector<double> weight_oracle(const std::vector<double>& prev, const std::vector<double>& accs,
                                  double eta) {
  std::vector<double> sorted = accs;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size() / 2;
  const double med = sorted.size() % 2 == 1 ? sorted[m] : (sorted[m - 1] + sorted[m]) / 2.0;
  std::vector<double> raw(prev.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < prev.size(); ++j) {
    raw[j] = prev[j] + eta * (accs[j] - med);
    if (raw[j] < 0.0) raw[j] = 0.0;
    sum += raw[j];
  }
  if (sum <= 0.0) {
    std::fill(raw.begin(), raw.end(), 1.0 / static_cast<double>(prev.size()));
    return raw;
  }
  for (double& w : raw) w /= sum;
  return raw;
}

}  // namespace

TEST_CASE("median of sorted middles") {
  CHECK(median(vec({0.5})) == 0.5);
  CHECK(median(vec({0.6, 0.8})) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(median(vec({0.9, 0.1, 0.5})) == 0.5);
  CHECK_THROWS_AS(median(Vector()), std::invalid_argument);
}

TEST_CASE("median matches a sort-based oracle on random draws") {
  Rng rng(201);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.next_below(9));
    std::vector<double> values(static_cast<std::size_t>(n));
    for (double& v : values) v = rng.next_double();
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size() / 2;
    const double expected =
        sorted.size() % 2 == 1 ? sorted[m] : (sorted[m - 1] + sorted[m]) / 2.0;
    CHECK(median(Eigen::Map<const Vector>(values.data(), n)) == expected);
  }
}

TEST_CASE("weight update leaves equal accuracies bitwise unchanged") {
  const PeerWeights prev{0, vec({0.25, 0.25, 0.25, 0.25})};
  const RoundAccuracies accs{Vector::Constant(4, 0.7)};
  const PeerWeights next = fedsmart_weight_update(prev, accs, 0.5);
  CHECK(std::memcmp(next.weights.data(), prev.weights.data(), 4 * sizeof(double)) == 0);

  Rng rng(202);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.next_below(8));
    Vector w(n);
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      w(j) = 0.01 + rng.next_double();
      sum += w(j);
    }
    w /= sum;
    const PeerWeights p{0, w};
    const RoundAccuracies a{Vector::Constant(n, rng.next_double())};
    const PeerWeights q = fedsmart_weight_update(p, a, 0.05 + rng.next_double());
    CHECK(std::memcmp(q.weights.data(), w.data(), static_cast<std::size_t>(n) * sizeof(double)) ==
          0);
  }
}

TEST_CASE("weight update reproduces the hand-computed example") {
  const PeerWeights prev{1, vec({0.25, 0.25, 0.25, 0.25})};
  const RoundAccuracies accs{vec({0.9, 0.8, 0.7, 0.6})};
  const PeerWeights next = fedsmart_weight_update(prev, accs, 1.0);
  CHECK(next.weights(0) == doctest::Approx(0.40).epsilon(1e-12));
  CHECK(next.weights(1) == doctest::Approx(0.30).epsilon(1e-12));
  CHECK(next.weights(2) == doctest::Approx(0.20).epsilon(1e-12));
  CHECK(next.weights(3) == doctest::Approx(0.10).epsilon(1e-12));
}

TEST_CASE("weight update clamps negatives then renormalizes") {
  const PeerWeights prev{0, vec({0.1, 0.3, 0.6})};
  const RoundAccuracies accs{vec({0.5, 0.9, 0.9})};
  const PeerWeights next = fedsmart_weight_update(prev, accs, 1.0);
  CHECK(next.weights(0) == 0.0);
  CHECK(next.weights(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(next.weights(2) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("weight update matches the brute-force oracle on random triples") {
  Rng rng(203);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_below(7));
    std::vector<double> prev(static_cast<std::size_t>(n));
    double sum = 0.0;
    for (double& p : prev) {
      p = rng.next_below(10) == 0 ? 0.0 : rng.next_double();
      sum += p;
    }
    if (sum == 0.0) {
      prev[0] = 1.0;
      sum = 1.0;
    }
    for (double& p : prev) p /= sum;
    std::vector<double> accs(static_cast<std::size_t>(n));
    for (double& a : accs) a = rng.next_double();
    const double eta = 0.05 + 1.95 * rng.next_double();

    const PeerWeights updated = fedsmart_weight_update(
        {0, Eigen::Map<const Vector>(prev.data(), n)},
        {Eigen::Map<const Vector>(accs.data(), n)}, eta);
    const auto expected = weight_oracle(prev, accs, eta);
    for (int j = 0; j < n; ++j)
      CHECK(std::fabs(updated.weights(j) - expected[static_cast<std::size_t>(j)]) <= 1e-12);
  }
}

TEST_CASE("weight update preserves the simplex and responds monotonically") {
  Rng rng(204);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_below(7));
    Vector prev(n);
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      prev(j) = rng.next_double();
      sum += prev(j);
    }
    prev /= sum;
    Vector accs(n);
    for (int j = 0; j < n; ++j) accs(j) = rng.next_double();
    const double eta = 0.05 + rng.next_double();

    const PeerWeights next = fedsmart_weight_update({0, prev}, {accs}, eta);
    double total = 0.0;
    for (int j = 0; j < n; ++j) {
      CHECK(next.weights(j) >= 0.0);
      total += next.weights(j);
    }
    CHECK(std::fabs(total - 1.0) <= 1e-9);

    // Raising the largest accuracy never crosses the median position and
    // must not lower that peer's weight.
    Eigen::Index top;
    accs.maxCoeff(&top);
    Vector bumped = accs;
    bumped(top) += 0.05;
    const PeerWeights after = fedsmart_weight_update({0, prev}, {bumped}, eta);
    CHECK(after.weights(top) >= next.weights(top) - 1e-12);
  }
}

TEST_CASE("mix_updates anchors identical deltas exactly") {
  Rng rng(205);
  Vector delta(5);
  for (Eigen::Index c = 0; c < 5; ++c) delta(c) = 2.0 * rng.next_double() - 1.0;
  const std::vector<Vector> deltas = {delta, delta, delta};
  const Vector mixed = mix_updates(deltas, vec({0.2, 0.5, 0.3}));
  for (Eigen::Index c = 0; c < 5; ++c) CHECK(mixed(c) == delta(c));
}

TEST_CASE("fedavg_aggregate weights by sample size") {
  ClientUpdate a{0, vec({1.0, 0.0}), 1};
  ClientUpdate b{1, vec({0.0, 1.0}), 3};
  const Vector agg = fedavg_aggregate({a, b});
  CHECK(agg(0) == 0.25);
  CHECK(agg(1) == 0.75);

  // Identical updates of any sizes aggregate to exactly that update.
  ClientUpdate c{0, vec({0.1, -0.7}), 17};
  ClientUpdate d{1, vec({0.1, -0.7}), 5};
  ClientUpdate e{2, vec({0.1, -0.7}), 900};
  const Vector same = fedavg_aggregate({c, d, e});
  CHECK(same(0) == c.delta(0));
  CHECK(same(1) == c.delta(1));

  const Vector single = fedavg_aggregate({a});
  CHECK(single(0) == a.delta(0));

  CHECK_THROWS_AS(fedavg_aggregate({}), std::invalid_argument);
  ClientUpdate bad{0, vec({1.0}), 0};
  CHECK_THROWS_AS(fedavg_aggregate({bad}), std::invalid_argument);
}

TEST_CASE("fedsmart_round with one client degenerates to local training") {
  Rng rng(206);
  StrategyState state;
  state.kind = StrategyKind::kFedSmart;
  state.n_clients = 1;
  state.eta = 0.5;
  state.models.push_back(ModelParams(3));
  state.peer_weights.push_back({0, vec({1.0})});

  std::vector<ClientPartition> partitions(1);
  partitions[0].client_id = 0;
  partitions[0].validation = tiny_dataset(rng, 3, 4);

  ClientUpdate update{0, vec({0.1, -0.2, 0.3, 0.05}), 5};
  const Vector before = state.models[0].flat();
  fedsmart_round(state, {update}, partitions);
  CHECK(state.round == 1);
  CHECK(state.peer_weights[0].weights(0) == 1.0);
  const Vector after = state.models[0].flat();
  for (Eigen::Index c = 0; c < 4; ++c) CHECK(after(c) == before(c) + update.delta(c));
}

TEST_CASE("fedsmart_round applies identical deltas exactly regardless of weights") {
  Rng rng(207);
  StrategyState state;
  state.kind = StrategyKind::kFedSmart;
  state.n_clients = 3;
  state.eta = 0.5;
  std::vector<ClientPartition> partitions(3);
  for (int i = 0; i < 3; ++i) {
    ModelParams m(2);
    m.weights << rng.next_double(), rng.next_double();
    m.bias = rng.next_double();
    state.models.push_back(m);
    Vector w(3);
    w << 0.2, 0.3, 0.5;
    state.peer_weights.push_back({i, w});
    partitions[static_cast<std::size_t>(i)].client_id = i;
    partitions[static_cast<std::size_t>(i)].validation = tiny_dataset(rng, 2, 4);
  }
  const Vector delta = vec({0.25, -0.5, 0.125});
  std::vector<ClientUpdate> updates;
  for (int i = 0; i < 3; ++i) updates.push_back({i, delta, 10});

  std::vector<Vector> before;
  for (const auto& m : state.models) before.push_back(m.flat());
  fedsmart_round(state, updates, partitions);
  for (int i = 0; i < 3; ++i) {
    const Vector after = state.models[static_cast<std::size_t>(i)].flat();
    for (Eigen::Index c = 0; c < 3; ++c)
      CHECK(after(c) == before[static_cast<std::size_t>(i)](c) + delta(c));
  }
}

TEST_CASE("fedsmart_round matches a first-principles reference on tiny instances") {
  Rng rng(208);
  const int n = 3;
  const int d = 2;
  for (int trial = 0; trial < 5; ++trial) {
    StrategyState state;
    state.kind = StrategyKind::kFedSmart;
    state.n_clients = n;
    state.eta = 0.1 + rng.next_double();

    std::vector<std::vector<double>> theta(n, std::vector<double>(d + 1));
    std::vector<std::vector<double>> delta(n, std::vector<double>(d + 1));
    std::vector<std::vector<double>> weights(n, std::vector<double>(n));
    std::vector<ClientPartition> partitions(n);
    std::vector<ClientUpdate> updates;
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c <= d; ++c) theta[i][c] = 2.0 * rng.next_double() - 1.0;
      for (int c = 0; c <= d; ++c) delta[i][c] = 2.0 * rng.next_double() - 1.0;
      double sum = 0.0;
      for (int j = 0; j < n; ++j) {
        weights[i][j] = 0.05 + rng.next_double();
        sum += weights[i][j];
      }
      for (int j = 0; j < n; ++j) weights[i][j] /= sum;

      ModelParams m(d);
      for (int c = 0; c < d; ++c) m.weights(c) = theta[i][static_cast<std::size_t>(c)];
      m.bias = theta[i][static_cast<std::size_t>(d)];
      state.models.push_back(m);
      state.peer_weights.push_back({i, Eigen::Map<const Vector>(weights[i].data(), n)});

      partitions[static_cast<std::size_t>(i)].client_id = i;
      partitions[static_cast<std::size_t>(i)].validation = tiny_dataset(rng, d, 4);
      updates.push_back({i, Eigen::Map<const Vector>(delta[i].data(), d + 1), 1});
    }
    const auto vals = partitions;  // keep a copy for the reference loop
    fedsmart_round(state, updates, partitions);

    for (int i = 0; i < n; ++i) {
      std::vector<double> accs(n);
      for (int j = 0; j < n; ++j) {
        int correct = 0;
        for (const Example& ex : vals[static_cast<std::size_t>(i)].validation) {
          double z = theta[i][static_cast<std::size_t>(d)] + delta[j][static_cast<std::size_t>(d)];
          for (int c = 0; c < d; ++c)
            z += (theta[i][static_cast<std::size_t>(c)] + delta[j][static_cast<std::size_t>(c)]) *
                 ex.features(c);
          const int predicted = (1.0 / (1.0 + std::exp(-z))) >= 0.5 ? 1 : 0;
          if (predicted == ex.label) ++correct;
        }
        accs[static_cast<std::size_t>(j)] = correct / 4.0;
      }
      const auto expected_w = weight_oracle(weights[i], accs, state.eta);
      std::vector<double> expected_theta = theta[i];
      for (int c = 0; c <= d; ++c)
        for (int j = 0; j < n; ++j)
          expected_theta[static_cast<std::size_t>(c)] +=
              expected_w[static_cast<std::size_t>(j)] * delta[j][static_cast<std::size_t>(c)];

      const auto idx = static_cast<std::size_t>(i);
      for (int j = 0; j < n; ++j)
        CHECK(std::fabs(state.peer_weights[idx].weights(j) -
                        expected_w[static_cast<std::size_t>(j)]) <= 1e-12);
      const Vector flat = state.models[idx].flat();
      for (int c = 0; c <= d; ++c)
        CHECK(std::fabs(flat(c) - expected_theta[static_cast<std::size_t>(c)]) <= 1e-12);
    }
  }
}

TEST_CASE("fedsmart_round demands one update per client") {
  StrategyState state;
  state.kind = StrategyKind::kFedSmart;
  state.n_clients = 2;
  state.models.assign(2, ModelParams(2));
  state.peer_weights = {{0, vec({0.5, 0.5})}, {1, vec({0.5, 0.5})}};
  std::vector<ClientPartition> partitions(2);
  Rng rng(209);
  for (int i = 0; i < 2; ++i) {
    partitions[static_cast<std::size_t>(i)].client_id = i;
    partitions[static_cast<std::size_t>(i)].validation = tiny_dataset(rng, 2, 2);
  }
  std::vector<ClientUpdate> updates = {{0, Vector::Zero(3), 1}};
  CHECK_THROWS_AS(fedsmart_round(state, updates, partitions), ProtocolError);
  updates.push_back({0, Vector::Zero(3), 1});  // duplicate id instead of client 1
  CHECK_THROWS_AS(fedsmart_round(state, updates, partitions), ProtocolError);
}

TEST_CASE("fedavg equals local training when all clients are identical") {
  Rng rng(210);
  const Dataset shared = tiny_dataset(rng, 4, 24);
  const int n = 3;

  ExperimentConfig config;
  config.n_clients = n;
  config.strategy = StrategyKind::kFedAvg;
  StrategyState fedavg = initial_state(config, 4);

  ModelParams local_model(4);
  for (int round = 0; round < 5; ++round) {
    // Same data and same seed for every client: identical updates.
    std::vector<ClientUpdate> updates;
    for (int i = 0; i < n; ++i)
      updates.push_back(local_train(fedavg.models.front(), shared, 1, 8, 0.1, 555, i));
    global_weighted_apply(fedavg, updates);

    const ClientUpdate mine = local_train(local_model, shared, 1, 8, 0.1, 555);
    apply_delta(local_model, mine.delta);

    const Vector a = fedavg.models.front().flat();
    const Vector b = local_model.flat();
    for (Eigen::Index c = 0; c < a.size(); ++c) CHECK(a(c) == b(c));
  }
}

TEST_CASE("fedsgd performs one weighted full-batch step") {
  Rng rng(211);
  ExperimentConfig config;
  config.n_clients = 2;
  config.strategy = StrategyKind::kFedSgd;
  config.lr = 0.2;
  StrategyState state = initial_state(config, 3);
  state.master_seed = 42;

  std::vector<ClientPartition> partitions(2);
  partitions[0].client_id = 0;
  partitions[0].train = tiny_dataset(rng, 3, 10);
  partitions[1].client_id = 1;
  partitions[1].train = tiny_dataset(rng, 3, 30);

  const ModelParams start = state.models.front();
  fedsgd_round(state, partitions);

  // Hand-weighted mean of the two full-batch steps.
  const Vector g0 = gradient(start, partitions[0].train);
  const Vector g1 = gradient(start, partitions[1].train);
  const Vector d0 = -config.lr * g0;
  const Vector d1 = -config.lr * g1;
  const Vector expected = d0 + (30.0 / 40.0) * (d1 - d0);
  const Vector actual = state.models.front().flat() - start.flat();
  for (Eigen::Index c = 0; c < expected.size(); ++c)
    CHECK(actual(c) == doctest::Approx(expected(c)).epsilon(1e-12));
}

TEST_CASE("loadaboost retrains only clients above the median loss") {
  Rng rng(212);
  ExperimentConfig config;
  config.n_clients = 3;
  config.strategy = StrategyKind::kLoAdaBoost;
  StrategyState state = initial_state(config, 3);
  state.master_seed = 17;

  std::vector<ClientPartition> partitions(3);
  for (int i = 0; i < 3; ++i) {
    partitions[static_cast<std::size_t>(i)].client_id = i;
    partitions[static_cast<std::size_t>(i)].train = tiny_dataset(rng, 3, 16);
  }

  // Reconstruct the expected round from the public operations.
  std::vector<ClientUpdate> updates;
  for (int i = 0; i < 3; ++i)
    updates.push_back(plan_and_train(StrategyKind::kLoAdaBoost, state.epochs, state.batch_size,
                                     state.lr, state.master_seed, state.models.front(),
                                     partitions[static_cast<std::size_t>(i)].train, i, 0));
  Vector losses(3);
  std::vector<ModelParams> trained(3, state.models.front());
  for (int i = 0; i < 3; ++i) {
    apply_delta(trained[static_cast<std::size_t>(i)], updates[static_cast<std::size_t>(i)].delta);
    losses(i) = loss(trained[static_cast<std::size_t>(i)],
                     partitions[static_cast<std::size_t>(i)].train);
  }
  const double gate = median(losses);
  int retrained = 0;
  std::vector<ClientUpdate> expected_updates = updates;
  for (int i = 0; i < 3; ++i) {
    if (losses(i) > gate) {
      ++retrained;
      const ClientUpdate extra = local_train(
          trained[static_cast<std::size_t>(i)], partitions[static_cast<std::size_t>(i)].train, 1,
          state.batch_size, state.lr,
          derive_seed(state.master_seed, SeedStream::kExtraEpoch, static_cast<std::uint64_t>(i), 0),
          i);
      expected_updates[static_cast<std::size_t>(i)].delta += extra.delta;
    }
  }
  CHECK(retrained >= 1);  // distinct losses: at least the worst client retrains
  ModelParams expected(3);
  apply_delta(expected, fedavg_aggregate(expected_updates));

  loadaboost_round(state, partitions);
  const Vector a = state.models.front().flat();
  const Vector b = expected.flat();
  for (Eigen::Index c = 0; c < a.size(); ++c) CHECK(a(c) == b(c));
}

TEST_CASE("loadaboost with equal losses reduces to fedavg") {
  Rng rng(213);
  const Dataset shared = tiny_dataset(rng, 2, 12);
  ExperimentConfig config;
  config.n_clients = 2;
  config.strategy = StrategyKind::kLoAdaBoost;
  StrategyState lb = initial_state(config, 2);
  config.strategy = StrategyKind::kFedAvg;
  StrategyState fa = initial_state(config, 2);

  std::vector<ClientPartition> partitions(2);
  for (int i = 0; i < 2; ++i) {
    partitions[static_cast<std::size_t>(i)].client_id = i;
    partitions[static_cast<std::size_t>(i)].train = shared;
  }
  // Identical data and identical update seeds give identical post-training
  // losses, so the strict median gate never fires.
  std::vector<ClientUpdate> updates;
  for (int i = 0; i < 2; ++i)
    updates.push_back(local_train(lb.models.front(), shared, 1, 4, 0.1, 999, i));
  loadaboost_consume(lb, updates, partitions);
  global_weighted_apply(fa, updates);

  const Vector a = lb.models.front().flat();
  const Vector b = fa.models.front().flat();
  for (Eigen::Index c = 0; c < a.size(); ++c) CHECK(a(c) == b(c));
}

TEST_CASE("local rounds keep every model on its own data") {
  Rng rng(214);
  ExperimentConfig config;
  config.n_clients = 2;
  config.strategy = StrategyKind::kLocal;
  StrategyState state = initial_state(config, 2);
  state.master_seed = 5;

  std::vector<ClientPartition> partitions(2);
  for (int i = 0; i < 2; ++i) {
    partitions[static_cast<std::size_t>(i)].client_id = i;
    partitions[static_cast<std::size_t>(i)].train = tiny_dataset(rng, 2, 10);
  }
  local_only_round(state, partitions);
  CHECK(state.round == 1);

  ModelParams expected0(2);
  const ClientUpdate u0 = plan_and_train(StrategyKind::kLocal, state.epochs, state.batch_size,
                                         state.lr, state.master_seed, ModelParams(2),
                                         partitions[0].train, 0, 0);
  apply_delta(expected0, u0.delta);
  const Vector a = state.models[0].flat();
  const Vector b = expected0.flat();
  for (Eigen::Index c = 0; c < a.size(); ++c) CHECK(a(c) == b(c));
}

TEST_CASE("centralized training pools train shares in client order") {
  Rng rng(215);
  std::vector<ClientPartition> partitions(2);
  partitions[0].client_id = 0;
  partitions[0].train = tiny_dataset(rng, 2, 3);
  partitions[1].client_id = 1;
  partitions[1].train = tiny_dataset(rng, 2, 2);

  const Dataset pooled = pool_training_data(partitions);
  REQUIRE(pooled.size() == 5);
  for (int i = 0; i < 3; ++i)
    CHECK((pooled[static_cast<std::size_t>(i)].features.array() ==
           partitions[0].train[static_cast<std::size_t>(i)].features.array())
              .all());
  for (int i = 0; i < 2; ++i)
    CHECK((pooled[static_cast<std::size_t>(3 + i)].features.array() ==
           partitions[1].train[static_cast<std::size_t>(i)].features.array())
              .all());
}

TEST_CASE("centralized training on duplicated clients equals one model on the duplicated set") {
  Rng rng(216);
  const Dataset shared = tiny_dataset(rng, 3, 14);
  std::vector<ClientPartition> partitions(2);
  for (int i = 0; i < 2; ++i) {
    partitions[static_cast<std::size_t>(i)].client_id = i;
    partitions[static_cast<std::size_t>(i)].train = shared;
  }
  ExperimentConfig config;
  config.n_clients = 2;
  config.rounds = 4;
  config.strategy = StrategyKind::kCentralized;

  const ModelParams via_partitions = centralized_train(partitions, config);

  Dataset duplicated = shared;
  duplicated.insert(duplicated.end(), shared.begin(), shared.end());
  ModelParams direct(3);
  for (int r = 0; r < config.rounds; ++r) {
    const ClientUpdate u = local_train(
        direct, duplicated, config.epochs, config.batch_size, config.lr,
        derive_seed(config.master_seed, SeedStream::kTrain, 0, static_cast<std::uint64_t>(r)));
    apply_delta(direct, u.delta);
  }
  const Vector a = via_partitions.flat();
  const Vector b = direct.flat();
  for (Eigen::Index c = 0; c < a.size(); ++c) CHECK(a(c) == b(c));
}

TEST_CASE("a single-client federation degenerates to centralized training") {
  Rng rng(217);
  std::vector<ClientPartition> partitions(1);
  partitions[0].client_id = 0;
  partitions[0].train = tiny_dataset(rng, 3, 18);

  ExperimentConfig config;
  config.n_clients = 1;
  config.strategy = StrategyKind::kLocal;
  StrategyState local = initial_state(config, 3);
  config.strategy = StrategyKind::kCentralized;
  StrategyState central = initial_state(config, 3);
  const Dataset pooled = pool_training_data(partitions);

  for (int r = 0; r < 4; ++r) {
    local_only_round(local, partitions);
    centralized_round(central, pooled);
  }
  const Vector a = local.models.front().flat();
  const Vector b = central.models.front().flat();
  for (Eigen::Index c = 0; c < a.size(); ++c) CHECK(a(c) == b(c));
}

TEST_CASE("single-client fedsgd is one explicit full-batch step") {
  Rng rng(218);
  ExperimentConfig config;
  config.n_clients = 1;
  config.strategy = StrategyKind::kFedSgd;
  StrategyState state = initial_state(config, 2);
  state.master_seed = 88;
  std::vector<ClientPartition> partitions(1);
  partitions[0].client_id = 0;
  partitions[0].train = tiny_dataset(rng, 2, 9);

  const ModelParams start = state.models.front();
  fedsgd_round(state, partitions);
  ModelParams expected = start;
  const Vector g = gradient(start, partitions[0].train);
  expected.weights -= state.lr * g.head(2);
  expected.bias -= state.lr * g(2);
  const Vector a = state.models.front().flat();
  const Vector b = expected.flat();
  for (Eigen::Index c = 0; c < a.size(); ++c) CHECK(a(c) == b(c));
}

TEST_CASE("single-client loadaboost never fires the gate") {
  Rng rng(219);
  ExperimentConfig config;
  config.n_clients = 1;
  config.strategy = StrategyKind::kLoAdaBoost;
  StrategyState lb = initial_state(config, 2);
  lb.master_seed = 12;
  config.strategy = StrategyKind::kFedAvg;
  StrategyState fa = initial_state(config, 2);
  fa.master_seed = 12;

  std::vector<ClientPartition> partitions(1);
  partitions[0].client_id = 0;
  partitions[0].train = tiny_dataset(rng, 2, 11);

  loadaboost_round(lb, partitions);
  const std::vector<ClientUpdate> updates = {plan_and_train(
      StrategyKind::kFedAvg, fa.epochs, fa.batch_size, fa.lr, fa.master_seed,
      fa.models.front(), partitions[0].train, 0, 0)};
  global_weighted_apply(fa, updates);

  const Vector a = lb.models.front().flat();
  const Vector b = fa.models.front().flat();
  for (Eigen::Index c = 0; c < a.size(); ++c) CHECK(a(c) == b(c));
}

TEST_CASE("initial_state shapes follow the strategy") {
  ExperimentConfig config;
  config.n_clients = 4;

  config.strategy = StrategyKind::kFedSmart;
  const StrategyState fs = initial_state(config, 10);
  CHECK(fs.models.size() == 4);
  CHECK(fs.peer_weights.size() == 4);
  for (const auto& w : fs.peer_weights) {
    CHECK(w.weights.size() == 4);
    CHECK(w.weights(0) == 0.25);
  }
  for (const auto& m : fs.models) {
    CHECK(m.weights.isZero(0.0));
    CHECK(m.bias == 0.0);
  }

  config.strategy = StrategyKind::kFedAvg;
  CHECK(initial_state(config, 10).models.size() == 1);
  config.strategy = StrategyKind::kLocal;
  CHECK(initial_state(config, 10).models.size() == 4);
  config.strategy = StrategyKind::kCentralized;
  CHECK(initial_state(config, 10).models.size() == 1);
}
