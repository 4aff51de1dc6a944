#pragma once

#include <cstddef>
#include <cstdint>

#include <Eigen/Dense>

namespace spheretopic {

// |V|-component Gaussian mixture built from an output softmax layer: shared
// covariance Sigma, means Sigma e_i, weights softmax(e_i' Sigma e_i / 2 + b_i).
struct GmmSpec {
  Eigen::MatrixXd embeddings;  // |V| x r
  Eigen::VectorXd bias;
  Eigen::MatrixXd covariance;
  Eigen::MatrixXd means;        // |V| x r
  Eigen::VectorXd log_weights;  // log pi
  Eigen::LLT<Eigen::MatrixXd> cholesky;
};

// Throws ParameterError when sigma is not symmetric (1e-12) or not positive
// definite.
GmmSpec build_gmm(const Eigen::MatrixXd& embeddings, const Eigen::VectorXd& bias,
                  const Eigen::MatrixXd& sigma);

// Bayes posterior over components via Gaussian log-densities and log-sum-exp.
Eigen::VectorXd gmm_posterior(const GmmSpec& gmm, const Eigen::VectorXd& h);

// softmax_i(e_i . h + b_i)
Eigen::VectorXd mlm_softmax(const Eigen::MatrixXd& embeddings, const Eigen::VectorXd& bias,
                            const Eigen::VectorXd& h);

struct EquivalenceReport {
  double max_deviation = 0.0;
  std::size_t worst_trial = 0;
  std::size_t trials = 0;
};

// Random e, b, h and Sigma = A'A + I per trial; both routes compared.
EquivalenceReport verify_equivalence(std::uint64_t seed, std::size_t r, std::size_t vocab_size,
                                     std::size_t trials);

}  // namespace spheretopic

namespace spheretopic {

// Throws VerificationError (naming the seed and trial) when the deviation
// exceeds the tolerance.
void require_equivalence(const EquivalenceReport& report, double tolerance, std::uint64_t seed);

}  // namespace spheretopic
