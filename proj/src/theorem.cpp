#include "spheretopic/theorem.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "spheretopic/errors.hpp"
#include "spheretopic/rng.hpp"

namespace spheretopic {

namespace {

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double peak = logits.maxCoeff();
  Eigen::VectorXd p = (logits.array() - peak).exp();
  return p / p.sum();
}

double log_sum_exp(const Eigen::VectorXd& x) {
  const double peak = x.maxCoeff();
  return peak + std::log((x.array() - peak).exp().sum());
}

}  // namespace

GmmSpec build_gmm(const Eigen::MatrixXd& embeddings, const Eigen::VectorXd& bias,
                  const Eigen::MatrixXd& sigma) {
  const auto r = embeddings.cols();
  if (embeddings.rows() == 0 || bias.size() != embeddings.rows()) {
    throw ParameterError("build_gmm: need |V| >= 1 embeddings and one bias per embedding");
  }
  if (sigma.rows() != r || sigma.cols() != r) throw ParameterError("build_gmm: sigma must be r x r");
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw ParameterError("build_gmm: sigma is not symmetric");
  }
  GmmSpec gmm;
  gmm.cholesky.compute(sigma);
  if (gmm.cholesky.info() != Eigen::Success) {
    throw ParameterError("build_gmm: sigma is not positive definite (Cholesky failed)");
  }
  gmm.embeddings = embeddings;
  gmm.bias = bias;
  gmm.covariance = sigma;
  gmm.means = embeddings * sigma;  // row i = (Sigma e_i)', Sigma symmetric
  Eigen::VectorXd prior_logits(embeddings.rows());
  for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
    prior_logits(i) = 0.5 * embeddings.row(i).dot(gmm.means.row(i)) + bias(i);
  }
  gmm.log_weights = prior_logits.array() - log_sum_exp(prior_logits);
  return gmm;
}

Eigen::VectorXd gmm_posterior(const GmmSpec& gmm, const Eigen::VectorXd& h) {
  if (!h.allFinite()) throw ParameterError("gmm_posterior: h is not finite");
  const auto r = static_cast<double>(h.size());
  const Eigen::MatrixXd& L = gmm.cholesky.matrixL();
  const double log_det = 2.0 * L.diagonal().array().log().sum();
  const double log_norm = -0.5 * r * std::log(2.0 * std::numbers::pi) - 0.5 * log_det;
  Eigen::VectorXd joint(gmm.means.rows());
  for (Eigen::Index i = 0; i < gmm.means.rows(); ++i) {
    const Eigen::VectorXd diff = h - gmm.means.row(i).transpose();
    const Eigen::VectorXd white = gmm.cholesky.matrixL().solve(diff);
    joint(i) = log_norm - 0.5 * white.squaredNorm() + gmm.log_weights(i);
  }
  return (joint.array() - log_sum_exp(joint)).exp();
}

Eigen::VectorXd mlm_softmax(const Eigen::MatrixXd& embeddings, const Eigen::VectorXd& bias,
                            const Eigen::VectorXd& h) {
  if (embeddings.cols() != h.size() || embeddings.rows() != bias.size()) {
    throw ParameterError("mlm_softmax: shapes disagree");
  }
  return softmax(embeddings * h + bias);
}

EquivalenceReport verify_equivalence(std::uint64_t seed, std::size_t r, std::size_t vocab_size,
                                     std::size_t trials) {
  if (r == 0 || r > 16 || vocab_size == 0 || vocab_size > 64) {
    throw ParameterError("verify_equivalence is limited to 1 <= r <= 16 and 1 <= |V| <= 64");
  }
  EquivalenceReport report;
  report.trials = trials;
  const auto rr = static_cast<Eigen::Index>(r);
  const auto vv = static_cast<Eigen::Index>(vocab_size);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    Rng rng = substream(seed, "theorem-trial-" + std::to_string(trial));
    std::normal_distribution<double> normal;
    auto draw = [&](Eigen::Index rows, Eigen::Index cols) {
      Eigen::MatrixXd m(rows, cols);
      for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
      }
      return m;
    };
    const Eigen::MatrixXd e = draw(vv, rr);
    const Eigen::VectorXd b = draw(vv, 1);
    const Eigen::MatrixXd a = draw(rr, rr);
    Eigen::MatrixXd sigma = a.transpose() * a + Eigen::MatrixXd::Identity(rr, rr);
    sigma = 0.5 * (sigma + sigma.transpose());
    const Eigen::VectorXd h = draw(rr, 1);

    const Eigen::VectorXd bayes = gmm_posterior(build_gmm(e, b, sigma), h);
    const Eigen::VectorXd direct = mlm_softmax(e, b, h);
    const double deviation = (bayes - direct).cwiseAbs().maxCoeff();
    if (deviation > report.max_deviation || trial == 0) {
      report.max_deviation = std::max(report.max_deviation, deviation);
      report.worst_trial = trial;
    }
  }
  return report;
}

void require_equivalence(const EquivalenceReport& report, double tolerance, std::uint64_t seed) {
  if (!(report.max_deviation < tolerance)) {
    throw VerificationError("posterior identity violated: max deviation " +
                            std::to_string(report.max_deviation) + " >= " +
                            std::to_string(tolerance) + " (seed " + std::to_string(seed) +
                            ", trial " + std::to_string(report.worst_trial) + ")");
  }
}

}  // namespace spheretopic
