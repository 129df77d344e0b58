#pragma once

#include <string>

#include "emi/errors.hpp"
#include "emi/ops.hpp"

namespace emi {

struct LossConfig {
  double alpha = 0.7;    ///< weight of the CCC term
  double epsilon = 1e-8; ///< added to the CCC denominator

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("loss alpha must lie in [0, 1], got " + std::to_string(alpha));
    if (!(epsilon >= 0.0)) throw ConfigError("loss epsilon must be non-negative");
  }
};

/// alpha * (1 - mean_d CCC_d) + (1 - alpha) * MSE over a [B x D] batch.
/// CCC uses population moments over the batch for each column.
template <typename Scalar>
Tensor<Scalar> combined_loss(Tape<Scalar>& tape, const Tensor<Scalar>& pred, const Matrix<Scalar>& target,
                             const LossConfig& cfg = {}) {
  cfg.validate();
  if (pred.rank() != 2 || pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw ShapeError("combined_loss: predictions " + to_string(pred.shape()) + " vs targets [" +
                     std::to_string(target.rows()) + ", " + std::to_string(target.cols()) + "]");
  }
  if (pred.rows() < 2) throw ContractError("combined_loss: batch too small (B = " + std::to_string(pred.rows()) + ")");

  const Eigen::MatrixXd p = pred.value().template cast<double>();
  const Eigen::MatrixXd t = target.template cast<double>();
  const auto B = static_cast<double>(p.rows());
  const auto D = static_cast<double>(p.cols());

  const Eigen::RowVectorXd mu_p = p.colwise().mean(), mu_t = t.colwise().mean();
  const Eigen::MatrixXd cp = p.rowwise() - mu_p, ct = t.rowwise() - mu_t;
  const Eigen::RowVectorXd var_p = cp.colwise().squaredNorm() / B;
  const Eigen::RowVectorXd var_t = ct.colwise().squaredNorm() / B;
  const Eigen::RowVectorXd cov = cp.cwiseProduct(ct).colwise().sum() / B;
  const Eigen::RowVectorXd gap = mu_p - mu_t;
  const Eigen::RowVectorXd den = (var_p + var_t + gap.cwiseProduct(gap)).array() + cfg.epsilon;
  const Eigen::RowVectorXd c = 2.0 * cov.cwiseQuotient(den);

  const double l_ccc = 1.0 - c.mean();
  const double l_mse = (p - t).squaredNorm() / (B * D);
  const double loss = cfg.alpha * l_ccc + (1.0 - cfg.alpha) * l_mse;

  const bool record = tape.should_record(pred);
  Tensor<Scalar> out = Tensor<Scalar>::scalar(static_cast<Scalar>(loss), record);
  if (record) {
    // dc_d/dp_i = 2/den (t_i - mu_t)/B - 2 cov/den^2 * 2 ((p_i - mu_p) + (mu_p - mu_t))/B
    Eigen::MatrixXd dc = ct * (2.0 / B);
    dc.array().rowwise() /= den.array();
    Eigen::MatrixXd dden = (cp.rowwise() + gap) * (2.0 / B);
    const Eigen::RowVectorXd k = (2.0 * cov).cwiseQuotient(den.cwiseProduct(den));
    dden.array().rowwise() *= k.array();
    Eigen::MatrixXd grad = -(cfg.alpha / D) * (dc - dden) + (1.0 - cfg.alpha) * 2.0 / (B * D) * (p - t);
    Matrix<Scalar> g = grad.cast<Scalar>();
    tape.push([pred, out, g = std::move(g)] {
      if (!out.has_grad()) return;
      pred.accumulate_grad(g * out.grad()(0, 0));
    });
  }
  return out;
}

}  // namespace emi
