#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

namespace fedsim {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Parameters of a single-layer logistic classifier over d features.
struct ModelParams {
  Vector weights;
  double bias = 0.0;

  ModelParams() = default;
  explicit ModelParams(Eigen::Index dim) : weights(Vector::Zero(dim)) {}

  Eigen::Index dim() const { return weights.size(); }

  /// Flat layout [weights..., bias], length d+1. Deltas on the wire and in
  /// ClientUpdate use this layout.
  Vector flat() const {
    Vector v(weights.size() + 1);
    v.head(weights.size()) = weights;
    v(weights.size()) = bias;
    return v;
  }

  static ModelParams from_flat(const Vector& v) {
    if (v.size() < 1) throw std::invalid_argument("flat parameter vector must have length >= 1");
    ModelParams p;
    p.weights = v.head(v.size() - 1);
    p.bias = v(v.size() - 1);
    return p;
  }
};

inline void apply_delta(ModelParams& params, const Vector& delta) {
  if (delta.size() != params.dim() + 1)
    throw std::invalid_argument("delta length does not match parameter dimension");
  params.weights += delta.head(params.dim());
  params.bias += delta(params.dim());
}

/// One labelled row: binary features, binary label.
struct Example {
  Vector features;
  int label = 0;  // 0 or 1
};

using Dataset = std::vector<Example>;

/// A client's parameter delta for one round.
struct ClientUpdate {
  int client_id = 0;
  Vector delta;        // length d+1
  long train_size = 0; // > 0
};

}  // namespace fedsim
