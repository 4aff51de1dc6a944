#include "spheretopic/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "spheretopic/errors.hpp"

namespace spheretopic::kernels {

namespace {

Eigen::MatrixXd unit_rows(const Eigen::MatrixXd& topics) {
  Eigen::MatrixXd unit = topics;
  for (Eigen::Index k = 0; k < unit.rows(); ++k) {
    const double norm = unit.row(k).norm();
    if (!(norm > 0.0)) throw NumericError("topic " + std::to_string(k) + " has zero norm");
    unit.row(k) /= norm;
  }
  return unit;
}

void check_shapes(const Eigen::MatrixXd& latents, const Eigen::MatrixXd& topics) {
  if (latents.rows() != topics.cols()) {
    throw ParameterError("latent dimension " + std::to_string(latents.rows()) +
                         " does not match topic dimension " + std::to_string(topics.cols()));
  }
}

void check_kappa(double kappa) {
  if (!(kappa >= 0.0)) throw ParameterError("kappa must be nonnegative");
}

// Cosine of one latent column against every unit topic row.
void cosine_row(const Eigen::MatrixXd& latents, const Eigen::MatrixXd& unit_topics,
                Eigen::Index i, Eigen::MatrixXd& out) {
  const double norm = latents.col(i).norm();
  if (!(norm > 0.0)) throw NumericError("latent " + std::to_string(i) + " has zero norm");
  for (Eigen::Index k = 0; k < unit_topics.rows(); ++k) {
    double dot = 0.0;
    for (Eigen::Index j = 0; j < latents.rows(); ++j) dot += latents(j, i) * unit_topics(k, j);
    out(i, k) = dot / norm;
  }
}

void softmax_row(Eigen::MatrixXd& scores, Eigen::Index i, double kappa) {
  double peak = scores(i, 0) * kappa;
  for (Eigen::Index k = 1; k < scores.cols(); ++k) peak = std::max(peak, scores(i, k) * kappa);
  double denom = 0.0;
  for (Eigen::Index k = 0; k < scores.cols(); ++k) {
    scores(i, k) = std::exp(kappa * scores(i, k) - peak);
    denom += scores(i, k);
  }
  denom = std::max(denom, kEpsilon);
  for (Eigen::Index k = 0; k < scores.cols(); ++k) scores(i, k) /= denom;
}

void target_row(const Eigen::MatrixXd& probs, const Eigen::VectorXd& sums, Eigen::Index i,
                Eigen::MatrixXd& out) {
  double denom = 0.0;
  for (Eigen::Index k = 0; k < probs.cols(); ++k) {
    out(i, k) = probs(i, k) * probs(i, k) / sums(k);
    denom += out(i, k);
  }
  denom = std::max(denom, kEpsilon);
  for (Eigen::Index k = 0; k < probs.cols(); ++k) out(i, k) /= denom;
}

Eigen::VectorXd floored(Eigen::VectorXd sums) {
  for (Eigen::Index k = 0; k < sums.size(); ++k) sums(k) = std::max(sums(k), kEpsilon);
  return sums;
}

}  // namespace

namespace serial {

Eigen::MatrixXd cosine(const Eigen::MatrixXd& latents, const Eigen::MatrixXd& topics) {
  check_shapes(latents, topics);
  const Eigen::MatrixXd unit = unit_rows(topics);
  Eigen::MatrixXd out(latents.cols(), topics.rows());
  for (Eigen::Index i = 0; i < latents.cols(); ++i) cosine_row(latents, unit, i, out);
  return out;
}

Eigen::MatrixXd topic_posterior(const Eigen::MatrixXd& latents, const Eigen::MatrixXd& topics,
                                double kappa) {
  check_kappa(kappa);
  Eigen::MatrixXd probs = cosine(latents, topics);
  for (Eigen::Index i = 0; i < probs.rows(); ++i) softmax_row(probs, i, kappa);
  return probs;
}

Eigen::VectorXd column_sums(const Eigen::MatrixXd& probs) {
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(probs.cols());
  for (Eigen::Index start = 0; start < probs.rows(); start += kReductionChunk) {
    const Eigen::Index end = std::min(probs.rows(), start + kReductionChunk);
    Eigen::VectorXd chunk = Eigen::VectorXd::Zero(probs.cols());
    for (Eigen::Index i = start; i < end; ++i) {
      for (Eigen::Index k = 0; k < probs.cols(); ++k) chunk(k) += probs(i, k);
    }
    sums += chunk;
  }
  return sums;
}

Eigen::MatrixXd target_distribution(const Eigen::MatrixXd& probs) {
  if (probs.rows() == 0) throw ParameterError("target distribution needs at least one row");
  const Eigen::VectorXd sums = floored(column_sums(probs));
  Eigen::MatrixXd out(probs.rows(), probs.cols());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) target_row(probs, sums, i, out);
  return out;
}

}  // namespace serial

namespace parallel {

Eigen::MatrixXd cosine(const Eigen::MatrixXd& latents, const Eigen::MatrixXd& topics) {
  check_shapes(latents, topics);
  const Eigen::MatrixXd unit = unit_rows(topics);
  Eigen::MatrixXd out(latents.cols(), topics.rows());
  const Eigen::Index n = latents.cols();
  Eigen::Index bad = -1;
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(latents.col(i).norm() > 0.0)) {
#pragma omp critical
      bad = (bad < 0 || i < bad) ? i : bad;
      continue;
    }
    cosine_row(latents, unit, i, out);
  }
  if (bad >= 0) throw NumericError("latent " + std::to_string(bad) + " has zero norm");
  return out;
}

Eigen::MatrixXd topic_posterior(const Eigen::MatrixXd& latents, const Eigen::MatrixXd& topics,
                                double kappa) {
  check_kappa(kappa);
  Eigen::MatrixXd probs = cosine(latents, topics);
  const Eigen::Index n = probs.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) softmax_row(probs, i, kappa);
  return probs;
}

Eigen::VectorXd column_sums(const Eigen::MatrixXd& probs) {
  const Eigen::Index n = probs.rows();
  const Eigen::Index chunks = (n + kReductionChunk - 1) / kReductionChunk;
  Eigen::MatrixXd partial = Eigen::MatrixXd::Zero(probs.cols(), chunks);
#pragma omp parallel for schedule(static)
  for (Eigen::Index c = 0; c < chunks; ++c) {
    const Eigen::Index end = std::min(n, (c + 1) * kReductionChunk);
    for (Eigen::Index i = c * kReductionChunk; i < end; ++i) {
      for (Eigen::Index k = 0; k < probs.cols(); ++k) partial(k, c) += probs(i, k);
    }
  }
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(probs.cols());
  for (Eigen::Index c = 0; c < chunks; ++c) sums += partial.col(c);
  return sums;
}

Eigen::MatrixXd target_distribution(const Eigen::MatrixXd& probs) {
  if (probs.rows() == 0) throw ParameterError("target distribution needs at least one row");
  const Eigen::VectorXd sums = floored(column_sums(probs));
  Eigen::MatrixXd out(probs.rows(), probs.cols());
  const Eigen::Index n = probs.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) target_row(probs, sums, i, out);
  return out;
}

}  // namespace parallel

}  // namespace spheretopic::kernels
