#pragma once

// Small dense autoencoder over grasp patches:
//
//   patch (R x R) --avg-pool (R/16)^2--> 16x16 --FC+tanh--> 32 (latent)
//                 --FC--> 16x16 --nearest upsample--> R x R
//
// The pooling and upsampling stages are fixed, so the pixel MSE splits into a
// constant within-block term plus a weighted error on the 16x16 grid. Training
// runs on that reduced form; `mse` evaluates the full-resolution loss.

#include <Eigen/Core>
#include <cstdint>
#include <nlohmann/json_fwd.hpp>
#include <vector>

#include "trussgrasp/patch.hpp"

namespace trussgrasp {

using Latent = Eigen::VectorXd;

struct TrainConfig {
  double learning_rate = 1e-4;
  double weight_decay = 1e-4;
  double beta = 0.9;  // first-moment decay
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 40;
  int batch_size = 512;
  double validation_fraction = 0.3;
  bool augment = true;  // train on all four flips of every training patch
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainingHistory {
  double initial_train_mse = 0.0;
  double initial_validation_mse = 0.0;
  std::vector<double> train_mse;  // one per epoch
  std::vector<double> validation_mse;
  std::size_t train_samples = 0;
  std::size_t validation_samples = 0;
};

/// A patch reduced to its 16x16 block means plus the constant part of the loss.
struct PooledPatch {
  Eigen::VectorXd grid;  // 256 block means, row-major
  double within_sse = 0.0;
  int resolution = 0;
};

PooledPatch pool_patch(const GraspPatch& patch);

class Autoencoder {
 public:
  static constexpr int kGrid = 16;
  static constexpr int kInput = kGrid * kGrid;
  static constexpr int kLatent = 32;

  Autoencoder() = default;
  /// Untrained network with seeded Glorot-uniform weights.
  Autoencoder(int resolution, std::uint64_t seed);

  int resolution() const { return resolution_; }
  bool trained() const { return trained_; }
  const TrainingHistory& history() const { return history_; }

  Latent encode(const GraspPatch& patch) const;
  GraspPatch decode(const Latent& latent) const;
  double mse(const GraspPatch& patch) const;  // full-resolution pixel MSE

  /// Mean loss over a set and its gradient with respect to `parameters()`
  /// (weight decay excluded).
  double loss(const std::vector<PooledPatch>& batch) const;
  std::vector<double> gradient(const std::vector<PooledPatch>& batch) const;

  std::size_t parameter_count() const;
  double parameter(std::size_t i) const;
  void set_parameter(std::size_t i, double value);

  nlohmann::json to_json() const;
  static Autoencoder from_json(const nlohmann::json& doc);

  friend Autoencoder train_autoencoder(const std::vector<GraspPatch>&, const TrainConfig&);

 private:
  struct Forward {
    Eigen::MatrixXd hidden;  // kLatent x B
    Eigen::MatrixXd output;  // kInput x B
  };
  Forward forward(const Eigen::MatrixXd& inputs) const;
  double* param_ptr(std::size_t i);
  void require_trained() const;

  int resolution_ = 0;
  bool trained_ = false;
  Eigen::MatrixXd w1_;  // kLatent x kInput
  Eigen::VectorXd b1_;
  Eigen::MatrixXd w2_;  // kInput x kLatent
  Eigen::VectorXd b2_;
  TrainingHistory history_;
  TrainConfig config_;
};

/// Adam with coupled L2 weight decay on mini-batches; the first
/// `validation_fraction` of a seeded shuffle is held out.
Autoencoder train_autoencoder(const std::vector<GraspPatch>& patches, const TrainConfig& cfg);

}  // namespace trussgrasp
