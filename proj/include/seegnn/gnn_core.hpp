#pragma once

#include "seegnn/preprocess.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>

namespace seegnn {

class Rng;

// Parameter tensors of the two-layer GCN with a linear head. The same shape
// carries gradients and Adam moments.
struct ParamSet {
  Eigen::MatrixXd w1;        // in_dim x hidden
  Eigen::RowVectorXd b1;     // hidden
  Eigen::MatrixXd w2;        // hidden x hidden
  Eigen::RowVectorXd b2;     // hidden
  Eigen::MatrixXd w_out;     // hidden x classes
  Eigen::RowVectorXd b_out;  // classes

  static ParamSet zeros_like(const ParamSet& other);
  bool all_finite() const;
  bool all_zero() const;
  bool same_shape(const ParamSet& other) const;
  std::size_t size() const;

  // Visits (name, tensor) pairs in a fixed order.
  void for_each(const std::function<void(const char*, Eigen::Ref<Eigen::MatrixXd>)>& fn);
  void for_each(const std::function<void(const char*, const Eigen::MatrixXd&)>& fn) const;
};

using Gradients = ParamSet;

struct GcnModel {
  ParamSet params;
  int in_dim = static_cast<int>(kFeatureLength);
  int hidden = 64;
  int n_classes = 2;
  std::uint64_t init_seed = 0;
  // Bumped on every parameter update; a forward cache remembers the value it
  // was computed at so a stale cache is detected in backward().
  std::uint64_t generation = 0;
};

struct AdamState {
  ParamSet m;
  ParamSet v;
  std::int64_t t = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState make_adam_state(const GcnModel& model, double lr);

// D^{-1/2}(A + I)D^{-1/2} for symmetric nonnegative A with zero diagonal.
Eigen::MatrixXd normalize_adjacency(const Eigen::MatrixXd& weights);

// Holds a pointer to the forward input X, which must outlive the cache.
struct ForwardCache {
  Eigen::MatrixXd a_hat;
  const FeatureMatrix* x = nullptr;
  Eigen::MatrixXd z1, h1;   // h1 after dropout
  Eigen::MatrixXd z2, h2;
  Eigen::MatrixXd dropout_mask;  // empty when dropout was not applied
  Eigen::RowVectorXd pooled;
  std::uint64_t generation = 0;
  int hidden = 0;
  int n_classes = 0;
};

struct ForwardResult {
  Eigen::RowVectorXd logits;
  ForwardCache cache;
};

struct DropoutOptions {
  double rate = 0.0;
  Rng* rng = nullptr;
};

// H1 = ReLU(Â X W1 + b1), H2 = ReLU(Â H1 W2 + b2), g = mean rows of H2,
// logits = g W_out + b_out. Dropout, when enabled, is applied to H1.
ForwardResult forward(const GcnModel& model, const Eigen::MatrixXd& a_hat,
                      const FeatureMatrix& x, DropoutOptions dropout = {});

struct LossResult {
  double loss = 0.0;
  Eigen::RowVectorXd dlogits;
};

LossResult softmax_cross_entropy(const Eigen::RowVectorXd& logits, int label);

Eigen::RowVectorXd softmax(const Eigen::RowVectorXd& logits);

struct BackwardResult {
  Gradients grads;
  // dLoss/dX, filled only when requested.
  Eigen::MatrixXd input_grad;
};

BackwardResult backward(const GcnModel& model, const ForwardCache& cache,
                        const Eigen::RowVectorXd& dlogits, bool want_input_grad = false);

void adam_step(GcnModel& model, const Gradients& grads, AdamState& state);

// Glorot-uniform weights, zero biases.
GcnModel init_model(int hidden, int n_classes, std::uint64_t seed,
                    int in_dim = static_cast<int>(kFeatureLength));

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  GcnModel model;
  AdamState adam;
  // Free-form training metadata (scheme, hyperparameters) stored alongside.
  std::map<std::string, std::string> meta;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace seegnn
