// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace buzzdef::waus {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct HeadDims {
  std::size_t input = 768;
  std::size_t hidden1 = 512;
  std::size_t hidden2 = 256;
  bool operator==(const HeadDims&) const = default;
};

/// Feed-forward quality head on frozen sentence vectors:
/// logit = w3 . relu(W2 relu(W1 x + b1) + b2) + b3.
struct WausHead {
  HeadDims dims;
  Matrix W1;  // hidden1 x input
  Vector b1;
  Matrix W2;  // hidden2 x hidden1
  Vector b2;
  Vector w3;  // hidden2
  double b3 = 0.0;
  double dropout_rate = 0.5;  // applied only while training

  static WausHead zeros(const HeadDims& dims);
  /// U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  static WausHead init(const HeadDims& dims, std::uint64_t seed);

  double logit(const Vector& x) const;
  /// X holds one example per column.
  Vector logits(const Matrix& X) const;

  std::size_t parameter_count() const;
  /// Parameters in a fixed order: W1, b1, W2, b2, w3, b3 (column-major).
  std::vector<double> flatten() const;
  void unflatten(const std::vector<double>& p);
  bool all_finite() const;
  bool operator==(const WausHead& o) const;

  /// Text checkpoint with a versioned shape header and hexfloat values;
  /// round-trips bit-exactly.
  void save(const std::filesystem::path& path) const;
  static WausHead load(const std::filesystem::path& path);
  std::string serialize() const;
  static WausHead deserialize(const std::string& text);
  std::string digest() const;
};

struct HeadGradients {
  Matrix W1;
  Vector b1;
  Matrix W2;
  Vector b2;
  Vector w3;
  double b3 = 0.0;
  std::vector<double> flatten() const;
};

/// Inverted-dropout keep masks, already scaled by 1/(1-p). Absent means
/// dropout off.
struct DropoutMasks {
  Matrix m1;  // hidden1 x n
  Matrix m2;  // hidden2 x n
};

/// Mean binary cross-entropy with logits over the batch columns of X;
/// fills `grad` when given.
double loss_and_gradient(const WausHead& head, const Matrix& X, const Vector& y,
                         HeadGradients* grad, const DropoutMasks* masks = nullptr);

struct TrainConfig {
  std::size_t epochs = 2;
  double learning_rate = 5e-3;
  double weight_decay = 1e-5;
  std::size_t batch_size = 128;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double dropout = 0.5;
  std::uint64_t seed = 0;
  HeadDims dims;
};

void validate(const TrainConfig& cfg);

struct EpochLog {
  std::size_t epoch = 0;    // 1-based
  double train_loss = 0.0;  // mean batch loss with dropout, as optimized
  double eval_loss = 0.0;   // full training set, dropout off
  double accuracy = 0.0;    // full training set, dropout off
  std::optional<double> val_loss;
  std::optional<double> val_accuracy;
};

struct TrainResult {
  WausHead head;
  std::vector<EpochLog> log;
  std::size_t n_positive = 0;
  std::size_t n_negative = 0;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Validation {
  const Matrix* X = nullptr;
  const Vector* y = nullptr;
};

/// AdamW with decoupled weight decay on every parameter, per-epoch seeded
/// shuffling, dropout on both hidden layers. Labels are 1 (positive) / 0.
TrainResult train_head(const Matrix& X, const Vector& y, const TrainConfig& cfg,
                       Validation validation = {});

double accuracy(const WausHead& head, const Matrix& X, const Vector& y);

}  // namespace buzzdef::waus
