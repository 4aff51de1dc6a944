#pragma once

#include <cstddef>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "spheretopic/attention.hpp"
#include "spheretopic/corpus.hpp"
#include "spheretopic/latent.hpp"

namespace spheretopic {

using TopicWordIds = std::vector<std::vector<std::uint32_t>>;

// Document and sliding-window co-occurrence statistics over a word subset.
// Windows hold `window` consecutive tokens, slide by one and never cross a
// document boundary; a document shorter than the window is one window.
struct CoocCounts {
  std::vector<std::uint32_t> words;
  std::unordered_map<std::uint32_t, std::size_t> index;
  std::vector<std::uint64_t> doc_freq;
  Eigen::Matrix<std::uint64_t, Eigen::Dynamic, Eigen::Dynamic> pair_doc_freq;
  std::vector<std::uint64_t> window_freq;
  Eigen::Matrix<std::uint64_t, Eigen::Dynamic, Eigen::Dynamic> pair_window_freq;
  std::uint64_t total_windows = 0;
  std::uint64_t num_documents = 0;
  std::size_t window = 10;

  bool contains(std::uint32_t word) const { return index.count(word) != 0; }
};

// Subset = union of the given word ids. Parallel over documents.
CoocCounts build_cooc(const Corpus& corpus, const std::vector<std::uint32_t>& words,
                      std::size_t window = 10);

namespace serial {
CoocCounts build_cooc(const Corpus& corpus, const std::vector<std::uint32_t>& words,
                      std::size_t window = 10);
}  // namespace serial

std::vector<std::uint32_t> unique_words(const TopicWordIds& topics, std::size_t m);

struct CoherenceResult {
  double value = 0.0;
  std::size_t skipped_pairs = 0;
};

// Mean over topics of the mean over ordered pairs j < i of
// log((D(w_i, w_j) + 1) / D(w_j)).
CoherenceResult umass(const TopicWordIds& topics, const CoocCounts& counts, std::size_t m);

// Mean over topics of the mean over unordered pairs of
// log((p(w_i, w_j) + 1e-12) / (p(w_i) p(w_j))), window probabilities.
CoherenceResult uci(const TopicWordIds& topics, const CoocCounts& counts, std::size_t m);

// Unique words across all top-m lists divided by K * m.
double topic_diversity(const TopicWordIds& topics, std::size_t m);

// Mutual information normalized by the arithmetic mean of the entropies.
double nmi(const std::vector<std::size_t>& labels_a, const std::vector<std::size_t>& labels_b);

struct KMeansResult {
  Eigen::MatrixXd centroids;  // dim x k
  std::vector<std::size_t> assignment;
  std::size_t iterations = 0;
};

// Euclidean k-means over columns, farthest-point seeding.
KMeansResult kmeans(const Eigen::MatrixXd& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iters = 100);

std::vector<std::size_t> cluster_documents(const LatentModel& model,
                                           const AttentionParams& attention,
                                           const Corpus& corpus, std::size_t k_eval,
                                           std::uint64_t seed);

}  // namespace spheretopic
