#include "bodyreg/mlp.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "bodyreg/rng.hpp"

namespace bodyreg {

namespace {

void fill_uniform(Eigen::Ref<Eigen::MatrixXd> m, double bound, Rng& rng) {
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-bound, bound);
}

Eigen::MatrixXd logistic(const Eigen::MatrixXd& z) {
  return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

}  // namespace

MlpModel init_mlp(Index n_features, Index n_hidden, const std::vector<int>& class_ids,
                  std::uint64_t seed) {
  if (n_features <= 0 || n_hidden <= 0 || class_ids.empty()) {
    throw ValidationError("model sizes must be positive");
  }
  MlpModel m;
  m.class_ids = class_ids;
  const Index n_classes = static_cast<Index>(class_ids.size());
  m.w1.resize(n_hidden, n_features);
  m.b1 = Eigen::VectorXd::Zero(n_hidden);
  m.w2.resize(n_classes, n_hidden);
  m.b2 = Eigen::VectorXd::Zero(n_classes);

  Rng rng(seed);
  const double a1 = std::sqrt(6.0 / static_cast<double>(n_features + n_hidden));
  const double a2 = std::sqrt(6.0 / static_cast<double>(n_hidden + n_classes));
  fill_uniform(m.w1, a1, rng);
  for (Index i = 0; i < n_hidden; ++i) m.b1[i] = rng.uniform(-a1, a1);
  fill_uniform(m.w2, a2, rng);
  for (Index i = 0; i < n_classes; ++i) m.b2[i] = rng.uniform(-a2, a2);
  return m;
}

MlpActivations mlp_forward(const MlpModel& model, const Eigen::MatrixXd& features) {
  if (features.cols() != model.n_features()) {
    throw ValidationError("feature count does not match the model input size");
  }
  MlpActivations acts;
  acts.hidden_pre = (features * model.w1.transpose()).rowwise() + model.b1.transpose();
  acts.hidden = acts.hidden_pre.cwiseMax(0.0);
  acts.probs =
      logistic((acts.hidden * model.w2.transpose()).rowwise() + model.b2.transpose());
  return acts;
}

Eigen::MatrixXd mlp_probabilities(const MlpModel& model, const Eigen::MatrixXd& features) {
  constexpr Index kBlock = 1 << 16;
  Eigen::MatrixXd probs(features.rows(), model.n_classes());
  for (Index start = 0; start < features.rows(); start += kBlock) {
    const Index rows = std::min(kBlock, features.rows() - start);
    probs.middleRows(start, rows) =
        mlp_forward(model, features.middleRows(start, rows)).probs;
  }
  return probs;
}

MlpGradients mlp_backward(const MlpModel& model, const Eigen::MatrixXd& features,
                          const MlpActivations& acts, const Eigen::MatrixXd& dloss_dprob) {
  if (dloss_dprob.rows() != features.rows() || dloss_dprob.cols() != model.n_classes()) {
    throw ValidationError("loss gradient shape mismatch");
  }
  // logistic derivative p(1-p)
  const Eigen::MatrixXd dz2 =
      (dloss_dprob.array() * acts.probs.array() * (1.0 - acts.probs.array())).matrix();
  MlpGradients g;
  g.w2 = dz2.transpose() * acts.hidden;
  g.b2 = dz2.colwise().sum().transpose();
  const Eigen::MatrixXd da1 = dz2 * model.w2;
  const Eigen::MatrixXd dz1 =
      (da1.array() * (acts.hidden_pre.array() > 0.0).cast<double>()).matrix();
  g.w1 = dz1.transpose() * features;
  g.b1 = dz1.colwise().sum().transpose();
  return g;
}

void apply_gradient_step(MlpModel& model, const MlpGradients& g, double learning_rate) {
  model.w1 -= learning_rate * g.w1;
  model.b1 -= learning_rate * g.b1;
  model.w2 -= learning_rate * g.w2;
  model.b2 -= learning_rate * g.b2;
}

Eigen::VectorXd model_parameters(const MlpModel& model) {
  Eigen::VectorXd p(model.parameter_count());
  Index at = 0;
  for (Index r = 0; r < model.w1.rows(); ++r)
    for (Index c = 0; c < model.w1.cols(); ++c) p[at++] = model.w1(r, c);
  for (Index i = 0; i < model.b1.size(); ++i) p[at++] = model.b1[i];
  for (Index r = 0; r < model.w2.rows(); ++r)
    for (Index c = 0; c < model.w2.cols(); ++c) p[at++] = model.w2(r, c);
  for (Index i = 0; i < model.b2.size(); ++i) p[at++] = model.b2[i];
  return p;
}

void set_model_parameters(MlpModel& model, const Eigen::VectorXd& params) {
  if (params.size() != model.parameter_count()) {
    throw ValidationError("parameter vector length mismatch");
  }
  Index at = 0;
  for (Index r = 0; r < model.w1.rows(); ++r)
    for (Index c = 0; c < model.w1.cols(); ++c) model.w1(r, c) = params[at++];
  for (Index i = 0; i < model.b1.size(); ++i) model.b1[i] = params[at++];
  for (Index r = 0; r < model.w2.rows(); ++r)
    for (Index c = 0; c < model.w2.cols(); ++c) model.w2(r, c) = params[at++];
  for (Index i = 0; i < model.b2.size(); ++i) model.b2[i] = params[at++];
}

namespace {

nlohmann::json matrix_rows(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_rows(const nlohmann::json& rows, Index cols_hint = -1) {
  const Index r = static_cast<Index>(rows.size());
  if (r == 0) throw IoError("empty weight matrix in model file");
  const Index c = cols_hint >= 0 ? cols_hint : static_cast<Index>(rows[0].size());
  Eigen::MatrixXd m(r, c);
  for (Index i = 0; i < r; ++i) {
    if (static_cast<Index>(rows[static_cast<std::size_t>(i)].size()) != c) {
      throw IoError("ragged weight matrix in model file");
    }
    for (Index j = 0; j < c; ++j) {
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].get<double>();
    }
  }
  return m;
}

}  // namespace

void save_model(const MlpModel& model, const std::filesystem::path& path) {
  nlohmann::json j;
  j["layer_sizes"] = {model.n_features(), model.n_hidden(), model.n_classes()};
  j["class_ids"] = model.class_ids;
  j["w1"] = matrix_rows(model.w1);
  j["b1"] = std::vector<double>(model.b1.data(), model.b1.data() + model.b1.size());
  j["w2"] = matrix_rows(model.w2);
  j["b2"] = std::vector<double>(model.b2.data(), model.b2.data() + model.b2.size());

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << j.dump(2) << "\n";
  if (!f.good()) throw IoError("write failed for " + path.string());
}

MlpModel load_model(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("missing model file " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt model file " + path.string() + ": " + e.what());
  }

  MlpModel m;
  try {
    const auto sizes = j.at("layer_sizes").get<std::vector<Index>>();
    if (sizes.size() != 3) throw IoError("layer_sizes must have 3 entries");
    m.class_ids = j.at("class_ids").get<std::vector<int>>();
    m.w1 = matrix_from_rows(j.at("w1"), sizes[0]);
    m.w2 = matrix_from_rows(j.at("w2"), sizes[1]);
    const auto b1 = j.at("b1").get<std::vector<double>>();
    const auto b2 = j.at("b2").get<std::vector<double>>();
    m.b1 = Eigen::Map<const Eigen::VectorXd>(b1.data(), static_cast<Index>(b1.size()));
    m.b2 = Eigen::Map<const Eigen::VectorXd>(b2.data(), static_cast<Index>(b2.size()));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt model file " + path.string() + ": " + e.what());
  }
  if (m.w1.rows() != m.b1.size() || m.w2.rows() != m.b2.size() ||
      m.w2.cols() != m.w1.rows() ||
      static_cast<Index>(m.class_ids.size()) != m.w2.rows()) {
    throw IoError("inconsistent layer shapes in model file " + path.string());
  }
  return m;
}

}  // namespace bodyreg
