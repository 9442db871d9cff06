#include "fedsim/model.hpp"

#include "fedsim/rng.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numeric>

namespace fedsim {

namespace {

constexpr double kLossClamp = 1e-12;

// May return exactly 0 or 1 once exp saturates; the gradient wants that so
// perfectly classified examples contribute an exactly-zero residual.
double sigmoid_raw(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_batch(const ModelParams& params, const Dataset& batch, const char* op) {
  if (batch.empty()) throw std::invalid_argument(std::string(op) + ": empty batch");
  for (const Example& ex : batch) {
    if (ex.features.size() != params.dim())
      throw std::invalid_argument(std::string(op) + ": feature dimension mismatch");
  }
}

}  // namespace

double predict_proba(const ModelParams& params, const Vector& features) {
  if (features.size() != params.dim())
    throw std::invalid_argument("predict_proba: feature dimension mismatch");
  double p = sigmoid_raw(params.weights.dot(features) + params.bias);
  // Contract: strictly inside (0, 1) for finite inputs.
  if (p <= 0.0) p = DBL_MIN;
  if (p >= 1.0) p = 1.0 - DBL_EPSILON / 2.0;
  return p;
}

double loss(const ModelParams& params, const Dataset& batch) {
  check_batch(params, batch, "loss");
  double sum = 0.0;
  for (const Example& ex : batch) {
    double p = sigmoid_raw(params.weights.dot(ex.features) + params.bias);
    p = std::min(std::max(p, kLossClamp), 1.0 - kLossClamp);
    sum += ex.label == 1 ? -std::log(p) : -std::log(1.0 - p);
  }
  return sum / static_cast<double>(batch.size());
}

Vector gradient(const ModelParams& params, const Dataset& batch) {
  check_batch(params, batch, "gradient");
  const Eigen::Index d = params.dim();
  Vector sum = Vector::Zero(d + 1);
  for (const Example& ex : batch) {
    const double residual =
        sigmoid_raw(params.weights.dot(ex.features) + params.bias) - ex.label;
    sum.head(d) += residual * ex.features;
    sum(d) += residual;
  }
  return sum / static_cast<double>(batch.size());
}

double accuracy(const ModelParams& params, const Dataset& data) {
  check_batch(params, data, "accuracy");
  long correct = 0;
  for (const Example& ex : data) {
    const int predicted =
        sigmoid_raw(params.weights.dot(ex.features) + params.bias) >= 0.5 ? 1 : 0;
    if (predicted == ex.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

ClientUpdate local_train(const ModelParams& params, const Dataset& train,
                         int epochs, int batch_size, double lr,
                         std::uint64_t rng_seed, int client_id) {
  check_batch(params, train, "local_train");
  if (epochs < 1) throw std::invalid_argument("local_train: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("local_train: batch_size must be >= 1");
  if (lr < 0.0) throw std::invalid_argument("local_train: lr must be >= 0");

  const Eigen::Index d = params.dim();
  ModelParams current = params;
  Rng rng(rng_seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  Dataset batch;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
      // Sorted indices pin the accumulation order to the dataset order, which
      // makes a full-size batch reproduce gradient() bitwise.
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(end));
      std::sort(idx.begin(), idx.end());
      batch.clear();
      for (std::size_t i : idx) batch.push_back(train[i]);
      const Vector g = gradient(current, batch);
      current.weights -= lr * g.head(d);
      current.bias -= lr * g(d);
    }
  }

  ClientUpdate update;
  update.client_id = client_id;
  update.delta = current.flat() - params.flat();
  update.train_size = static_cast<long>(train.size());
  return update;
}

}  // namespace fedsim
