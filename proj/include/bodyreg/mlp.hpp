#pragma once
// Small per-voxel classifier: features -> ReLU hidden layer -> one logistic
// output per class. Deterministic init, explicit forward/backward, JSON
// persistence. Stands in for a full segmentation network at desk scale.

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "bodyreg/types.hpp"

namespace bodyreg {

struct MlpModel {
  Eigen::MatrixXd w1;  // hidden x features
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // classes x hidden
  Eigen::VectorXd b2;
  std::vector<int> class_ids;  // output head c predicts class_ids[c]

  Index n_features() const { return w1.cols(); }
  Index n_hidden() const { return w1.rows(); }
  Index n_classes() const { return w2.rows(); }
  Index parameter_count() const {
    return w1.size() + b1.size() + w2.size() + b2.size();
  }
};

// Uniform init in [-a, a], a = sqrt(6 / (fan_in + fan_out)) per layer; draw
// order is w1 row-major, b1, w2 row-major, b2.
MlpModel init_mlp(Index n_features, Index n_hidden, const std::vector<int>& class_ids,
                  std::uint64_t seed);

struct MlpActivations {
  Eigen::MatrixXd hidden_pre;  // N x H
  Eigen::MatrixXd hidden;      // relu(hidden_pre)
  Eigen::MatrixXd probs;       // N x C
};

MlpActivations mlp_forward(const MlpModel& model, const Eigen::MatrixXd& features);

// Probabilities only, computed in row blocks to bound memory.
Eigen::MatrixXd mlp_probabilities(const MlpModel& model, const Eigen::MatrixXd& features);

struct MlpGradients {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;
};

// dloss_dprob is N x C, d(total loss)/d(prob). ReLU uses the zero subgradient
// at the kink.
MlpGradients mlp_backward(const MlpModel& model, const Eigen::MatrixXd& features,
                          const MlpActivations& acts, const Eigen::MatrixXd& dloss_dprob);

void apply_gradient_step(MlpModel& model, const MlpGradients& g, double learning_rate);

// Flat parameter vector in init order; used by finite-difference checks.
Eigen::VectorXd model_parameters(const MlpModel& model);
void set_model_parameters(MlpModel& model, const Eigen::VectorXd& params);

void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

}  // namespace bodyreg
