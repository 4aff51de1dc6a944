#include "spheretopic/latent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "spheretopic/errors.hpp"
#include "spheretopic/kernels.hpp"

namespace spheretopic {

namespace {

constexpr double kDegenerateNorm = 1e-12;
constexpr Eigen::Index kEncodeChunk = 256;

std::vector<std::size_t> concat(std::size_t first, const std::vector<std::size_t>& middle,
                                std::size_t last) {
  std::vector<std::size_t> dims{first};
  dims.insert(dims.end(), middle.begin(), middle.end());
  dims.push_back(last);
  return dims;
}

}  // namespace

LatentModel make_latent_model(const LatentShape& shape, double kappa, Rng& rng) {
  if (shape.latent_dim == 0 || shape.latent_dim >= shape.input_dim) {
    throw ParameterError("latent dimension must be positive and smaller than the input dimension");
  }
  if (shape.num_topics == 0) throw ParameterError("at least one topic is required");
  if (!(kappa >= 0.0)) throw ParameterError("kappa must be nonnegative");
  LatentModel model;
  model.encoder = Mlp(concat(shape.input_dim, shape.encoder_hidden, shape.latent_dim), rng);
  model.decoder = Mlp(concat(shape.latent_dim, shape.decoder_hidden, shape.input_dim), rng);
  std::normal_distribution<double> normal;
  model.topics.resize(static_cast<Eigen::Index>(shape.num_topics),
                      static_cast<Eigen::Index>(shape.latent_dim));
  for (Eigen::Index k = 0; k < model.topics.rows(); ++k) {
    for (Eigen::Index j = 0; j < model.topics.cols(); ++j) model.topics(k, j) = normal(rng);
  }
  normalize_topics(model.topics);
  model.kappa = kappa;
  return model;
}

void normalize_topics(Eigen::MatrixXd& topics) {
  for (Eigen::Index k = 0; k < topics.rows(); ++k) {
    const double norm = topics.row(k).norm();
    if (!(norm > kDegenerateNorm) || !std::isfinite(norm)) {
      throw NumericError("topic " + std::to_string(k) + " cannot be normalized");
    }
    topics.row(k) /= norm;
  }
}

Eigen::VectorXd encode(const LatentModel& model, const Eigen::VectorXd& h) {
  return encode_batch(model, h);
}

Eigen::MatrixXd encode_batch(const LatentModel& model, const Eigen::MatrixXd& tokens) {
  if (!tokens.allFinite()) throw NumericError("encode input is not finite");
  Eigen::MatrixXd raw = model.encoder.forward(tokens);
  for (Eigen::Index i = 0; i < raw.cols(); ++i) {
    const double norm = raw.col(i).norm();
    if (!(norm >= kDegenerateNorm)) {
      throw NumericError("degenerate encoding: raw latent norm " + std::to_string(norm) +
                         " at column " + std::to_string(i));
    }
    raw.col(i) /= norm;
  }
  return raw;
}

Eigen::MatrixXd encode_all(const LatentModel& model, const Eigen::MatrixXd& tokens) {
  const Eigen::Index n = tokens.cols();
  const Eigen::Index chunks = (n + kEncodeChunk - 1) / kEncodeChunk;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(model.latent_dim()), n);
  std::string failure;
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index c = 0; c < chunks; ++c) {
    const Eigen::Index begin = c * kEncodeChunk;
    const Eigen::Index width = std::min(kEncodeChunk, n - begin);
    try {
      out.middleCols(begin, width) = encode_batch(model, tokens.middleCols(begin, width));
    } catch (const NumericError& e) {
#pragma omp critical
      if (failure.empty()) failure = "chunk at token " + std::to_string(begin) + ": " + e.what();
    }
  }
  if (!failure.empty()) throw NumericError(failure);
  return out;
}

Eigen::VectorXd decode(const LatentModel& model, const Eigen::VectorXd& z) {
  if (!z.allFinite()) throw NumericError("decode input is not finite");
  return model.decoder.forward(z);
}

Eigen::MatrixXd topic_posterior(const Eigen::MatrixXd& latents, const Eigen::MatrixXd& topics,
                                double kappa) {
  return kernels::parallel::topic_posterior(latents, topics, kappa);
}

Eigen::MatrixXd target_distribution(const Eigen::MatrixXd& probs) {
  return kernels::parallel::target_distribution(probs);
}

SphericalKMeansResult spherical_kmeans(const Eigen::MatrixXd& latents, std::size_t k,
                                       std::uint64_t seed, std::size_t max_iters) {
  const auto n = static_cast<std::size_t>(latents.cols());
  if (k == 0) throw ParameterError("k must be positive");
  if (n < k) {
    throw ParameterError("spherical k-means needs at least k points (" + std::to_string(n) +
                         " < " + std::to_string(k) + ")");
  }
  Eigen::MatrixXd points = latents;
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    const double norm = points.col(i).norm();
    if (!(norm > 0.0)) throw NumericError("zero latent at column " + std::to_string(i));
    points.col(i) /= norm;
  }
  const auto dim = points.rows();
  const auto kk = static_cast<Eigen::Index>(k);

  // Greedy farthest-point seeding: each new centroid is the point whose best
  // cosine to the chosen centroids is lowest.
  Rng rng = substream(seed, "spherical-kmeans");
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  SphericalKMeansResult result;
  result.centroids.resize(kk, dim);
  result.centroids.row(0) = points.col(static_cast<Eigen::Index>(pick(rng))).transpose();
  Eigen::VectorXd best = (result.centroids.row(0) * points).transpose();
  for (Eigen::Index c = 1; c < kk; ++c) {
    Eigen::Index far = 0;
    best.minCoeff(&far);
    result.centroids.row(c) = points.col(far).transpose();
    best = best.cwiseMax((result.centroids.row(c) * points).transpose());
  }

  std::vector<std::size_t> assignment(n, k);
  std::vector<double> similarity(n, 0.0);
  for (std::size_t iter = 0; iter < std::max<std::size_t>(max_iters, 1); ++iter) {
    const Eigen::MatrixXd cos = result.centroids * points;  // k x n
    std::vector<std::size_t> next(n);
    const auto nn = static_cast<Eigen::Index>(n);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < nn; ++i) {
      Eigen::Index arg = 0;
      cos.col(i).maxCoeff(&arg);  // first maximum on ties
      next[i] = static_cast<std::size_t>(arg);
      similarity[i] = cos(arg, i);
    }
    double objective = 0.0;
    for (double s : similarity) objective += s;
    result.objective.push_back(objective);
    result.iterations = iter + 1;
    if (next == assignment) break;
    assignment = std::move(next);

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(kk, dim);
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(static_cast<Eigen::Index>(assignment[i])) +=
          points.col(static_cast<Eigen::Index>(i)).transpose();
      ++sizes[assignment[i]];
    }
    std::vector<bool> used(n, false);
    for (Eigen::Index c = 0; c < kk; ++c) {
      if (sizes[c] == 0) {
        // Reseed with the point farthest (in cosine) from its own centroid.
        std::size_t far = n;
        for (std::size_t i = 0; i < n; ++i) {
          if (used[i] || sizes[assignment[i]] < 2) continue;
          if (far == n || similarity[i] < similarity[far]) far = i;
        }
        if (far != n) {
          used[far] = true;
          result.centroids.row(c) = points.col(static_cast<Eigen::Index>(far)).transpose();
        }
        continue;
      }
      const double norm = sums.row(c).norm();
      if (norm > kDegenerateNorm) result.centroids.row(c) = sums.row(c) / norm;
    }
  }
  result.assignment = std::move(assignment);
  return result;
}

Eigen::MatrixXd init_topics_spherical_kmeans(const Eigen::MatrixXd& latents, std::size_t k,
                                             std::uint64_t seed, std::size_t max_iters) {
  return spherical_kmeans(latents, k, seed, max_iters).centroids;
}

}  // namespace spheretopic
