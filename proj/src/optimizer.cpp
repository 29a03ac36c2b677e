#include "svla/optimizer.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace svla {

AdamW::AdamW(double lr, std::set<std::string> trainable, double weight_decay)
    : lr_(lr), weight_decay_(weight_decay), trainable_(std::move(trainable)) {}

void AdamW::step(ParameterStore& store,
                 const std::map<std::string, Eigen::MatrixXd>& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (const std::string& name : trainable_) {
    Eigen::MatrixXd& w = store.at(name);
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(w.rows(), w.cols());
    auto it = grads.find(name);
    if (it != grads.end()) {
      if (it->second.rows() != w.rows() || it->second.cols() != w.cols()) {
        throw std::runtime_error("gradient shape mismatch for " + name);
      }
      g = it->second;
    }
    auto m_it = m_.find(name);
    if (m_it == m_.end()) {
      m_it = m_.emplace(name, Eigen::MatrixXd::Zero(w.rows(), w.cols())).first;
      v_.emplace(name, Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    }
    Eigen::MatrixXd& m = m_it->second;
    Eigen::MatrixXd& v = v_.at(name);
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    Eigen::MatrixXd m_hat = m / bc1;
    Eigen::MatrixXd v_hat = v / bc2;
    Eigen::MatrixXd update =
        m_hat.array() / (v_hat.array().sqrt() + eps_);
    if (weight_decay_ != 0.0) update += weight_decay_ * w;
    w -= lr_ * update;
  }
}

}  // namespace svla
