#pragma once

#include <map>
#include <set>
#include <string>

#include "svla/param_store.hpp"

namespace svla {

// Adaptive-moment optimizer with decoupled weight decay and bias-corrected
// moments, constant learning rate. Moments exist only for the trainable
// tensors handed to the constructor; everything else is left untouched, so
// the freezing contract is structural rather than a masking convention.
class AdamW {
 public:
  AdamW(double lr, std::set<std::string> trainable, double weight_decay = 0.0);

  // applies one update from accumulated gradients; missing gradients count
  // as zero. Throws if a gradient shape disagrees with its parameter.
  void step(ParameterStore& store,
            const std::map<std::string, Eigen::MatrixXd>& grads);

  int steps_taken() const { return t_; }
  const std::set<std::string>& trainable() const { return trainable_; }

 private:
  double lr_;
  double weight_decay_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  int t_ = 0;
  std::set<std::string> trainable_;
  std::map<std::string, Eigen::MatrixXd> m_, v_;
};

}  // namespace svla
