#pragma once
// Composition of supervised losses and regional penalties across datasets with
// heterogeneous annotations: annotated classes get BCE + soft Dice, every
// other class gets the regional top-k penalty. Also the seeded support-set
// sampler used during training.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "bodyreg/regionloss.hpp"

namespace bodyreg {

inline constexpr double kSoftDiceEps = 1e-5;

struct DatasetSpec {
  std::string dataset_id;
  std::set<int> annotated_classes;  // empty for a pure support dataset
  double sampling_weight = 1.0;

  bool is_support() const { return annotated_classes.empty(); }
};

struct SupervisedLoss {
  double value = 0.0;     // mean BCE + soft Dice term
  double bce = 0.0;
  double dice_term = 0.0;
  Eigen::ArrayXd grad;
};

// y must be binary. Soft Dice term is 1 - 2*sum(yhat*y)/(sum(yhat)+sum(y)+eps_d);
// when both sums vanish the term contributes 0.
SupervisedLoss supervised_loss(const Eigen::ArrayXd& yhat, const Eigen::ArrayXd& y,
                               double eps = kDefaultClampEps);

struct ClassLoss {
  int class_id = 0;
  bool supervised = false;
  double value = 0.0;
  Eigen::ArrayXd grad;
  LossReport region;  // populated when !supervised
};

struct MdLoss {
  double value = 0.0;
  double supervised_sum = 0.0;
  double region_sum = 0.0;
  std::vector<ClassLoss> per_class;  // ascending class id
};

// Sum of supervised losses over the dataset's annotated classes plus regional
// penalties over every other predicted class. scores may be empty when all
// classes are annotated.
MdLoss md_loss(const std::map<int, Eigen::ArrayXd>& yhats,
               const std::map<int, Eigen::ArrayXd>& labels, const DatasetSpec& spec,
               const RegionConfig& regions, const Eigen::ArrayXd& scores, double alpha,
               double k_percent, double eps = kDefaultClampEps);

// Seeded dataset-choice sequence: a support dataset with probability
// p_support, otherwise a labeled one; within each pool, draws are proportional
// to sampling_weight. Returns indices into `datasets`.
std::vector<std::size_t> sample_batch(const std::vector<DatasetSpec>& datasets,
                                      double p_support, std::uint64_t seed,
                                      std::size_t n_draws);

}  // namespace bodyreg
