#pragma once

#include "fedsim/types.hpp"

#include <cstdint>

namespace fedsim {

/// sigmoid(weights . features + bias), computed with the numerically stable
/// branch and clamped into the open interval (0, 1).
double predict_proba(const ModelParams& params, const Vector& features);

/// Mean binary cross-entropy over the batch. Probabilities are clamped to
/// [1e-12, 1 - 1e-12] so the value stays finite. Sum first, one divide.
double loss(const ModelParams& params, const Dataset& batch);

/// Analytic gradient of `loss` w.r.t. [weights, bias]: mean over the batch of
/// (p - y) * [features, 1]. Length d+1. No probability clamp here.
Vector gradient(const ModelParams& params, const Dataset& batch);

/// Fraction of examples where (predict_proba >= 0.5) equals the label.
/// Ties at exactly 0.5 predict class 1.
double accuracy(const ModelParams& params, const Dataset& data);

/// Mini-batch SGD for `epochs` passes starting from `params`. The example
/// order is reshuffled each epoch from a generator seeded once with
/// `rng_seed`; within a batch, gradient accumulation follows dataset order so
/// a single full-size batch reproduces gradient() bitwise. The input params
/// are not mutated; the returned delta is final - initial.
ClientUpdate local_train(const ModelParams& params, const Dataset& train,
                         int epochs, int batch_size, double lr,
                         std::uint64_t rng_seed, int client_id = 0);

}  // namespace fedsim
