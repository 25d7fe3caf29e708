#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "histolime/errors.hpp"
#include "histolime/lime.hpp"

namespace histolime {

SurrogateFit fit_surrogate(const PerturbationBatch& batch, double lambda) {
  const int n = batch.masks.rows;
  const int k = batch.masks.cols;
  if (n < 1 || k < 1) throw ShapeError("perturbation batch is empty");
  if (batch.weights.size() != static_cast<std::size_t>(n) ||
      batch.responses.size() != static_cast<std::size_t>(n)) {
    throw ShapeError("weights and responses must have one entry per mask row");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ShapeError("lambda must be >= 0");

  SurrogateFit fit;
  fit.segment_weights.assign(static_cast<std::size_t>(k), 0.0);

  const auto [lo, hi] = std::minmax_element(batch.responses.begin(), batch.responses.end());
  if (*lo == *hi) {
    fit.intercept = *lo;
    fit.local_r2 = 1.0;
    return fit;
  }

  Eigen::Map<const Eigen::VectorXd> w(batch.weights.data(), n);
  Eigen::Map<const Eigen::VectorXd> y(batch.responses.data(), n);
  Eigen::MatrixXd X(n, k);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) X(i, j) = batch.masks.at(i, j);
  }

  const double wsum = w.sum();
  if (!(wsum > 0.0)) throw SingularSystem("weights sum to zero");
  const Eigen::RowVectorXd x_mean = (w.transpose() * X) / wsum;
  const double y_mean = w.dot(y) / wsum;

  // Centering absorbs the intercept, so only the slopes are penalized.
  const Eigen::VectorXd sw = w.cwiseSqrt();
  const Eigen::MatrixXd Xc = sw.asDiagonal() * (X.rowwise() - x_mean);
  const Eigen::VectorXd yc = sw.cwiseProduct(y.array().matrix() - Eigen::VectorXd::Constant(n, y_mean));

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(k, k);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(Xc.transpose());
  gram = gram.selfadjointView<Eigen::Lower>();
  gram.diagonal().array() += lambda;
  const Eigen::VectorXd rhs = Xc.transpose() * yc;

  const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  const auto d = ldlt.vectorD().cwiseAbs();
  const double dmax = d.maxCoeff();
  if (ldlt.info() != Eigen::Success || !(dmax > 0.0) ||
      d.minCoeff() <= 1e-12 * dmax * static_cast<double>(k)) {
    throw SingularSystem("normal equations are singular (lambda=" + std::to_string(lambda) +
                         ", k=" + std::to_string(k) + ")");
  }
  const Eigen::VectorXd beta = ldlt.solve(rhs);
  if (!beta.allFinite()) throw SingularSystem("non-finite surrogate coefficients");

  fit.intercept = y_mean - x_mean.dot(beta);
  for (int j = 0; j < k; ++j) fit.segment_weights[static_cast<std::size_t>(j)] = beta(j);

  const Eigen::VectorXd resid = y - (X * beta).array().matrix() - Eigen::VectorXd::Constant(n, fit.intercept);
  const double rss = w.dot(resid.cwiseProduct(resid));
  const Eigen::VectorXd dev = y - Eigen::VectorXd::Constant(n, y_mean);
  const double tss = w.dot(dev.cwiseProduct(dev));
  fit.local_r2 = tss > 0.0 ? std::clamp(1.0 - rss / tss, 0.0, 1.0) : 1.0;
  return fit;
}

double surrogate_predict(const SurrogateFit& fit, std::span<const std::uint8_t> mask) {
  if (mask.size() != fit.segment_weights.size()) {
    throw ShapeError("mask has " + std::to_string(mask.size()) + " entries for " +
                     std::to_string(fit.segment_weights.size()) + " weights");
  }
  double y = fit.intercept;
  for (std::size_t j = 0; j < mask.size(); ++j) {
    if (mask[j]) y += fit.segment_weights[j];
  }
  return y;
}

}  // namespace histolime
