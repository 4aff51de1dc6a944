#include "spheretopic/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>

#include <spdlog/spdlog.h>

#include "spheretopic/errors.hpp"
#include "spheretopic/report.hpp"

namespace spheretopic {

namespace {

using CountMatrix = Eigen::Matrix<std::uint64_t, Eigen::Dynamic, Eigen::Dynamic>;

CoocCounts empty_counts(const std::vector<std::uint32_t>& words, std::size_t window) {
  if (window == 0) throw ParameterError("window size must be positive");
  CoocCounts c;
  c.words = words;
  std::sort(c.words.begin(), c.words.end());
  c.words.erase(std::unique(c.words.begin(), c.words.end()), c.words.end());
  for (std::size_t i = 0; i < c.words.size(); ++i) c.index.emplace(c.words[i], i);
  const auto s = static_cast<Eigen::Index>(c.words.size());
  c.doc_freq.assign(c.words.size(), 0);
  c.window_freq.assign(c.words.size(), 0);
  c.pair_doc_freq = CountMatrix::Zero(s, s);
  c.pair_window_freq = CountMatrix::Zero(s, s);
  c.window = window;
  return c;
}

// Distinct subset indices among tokens [begin, end) of the corpus.
void present_words(const Corpus& corpus, const CoocCounts& c, std::size_t begin, std::size_t end,
                   std::vector<std::size_t>& out) {
  out.clear();
  for (std::size_t t = begin; t < end; ++t) {
    auto it = c.index.find(corpus.word_ids()[t]);
    if (it != c.index.end()) out.push_back(it->second);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
}

void count_set(const std::vector<std::size_t>& present, std::vector<std::uint64_t>& freq,
               CountMatrix& pairs) {
  for (std::size_t a : present) {
    ++freq[a];
    for (std::size_t b : present) ++pairs(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  }
}

void count_document(const Corpus& corpus, std::size_t doc_index, CoocCounts& c,
                    std::vector<std::size_t>& scratch) {
  const Document& d = corpus.document(doc_index);
  present_words(corpus, c, d.begin, d.end, scratch);
  count_set(scratch, c.doc_freq, c.pair_doc_freq);
  ++c.num_documents;
  const std::size_t windows = d.size() <= c.window ? 1 : d.size() - c.window + 1;
  for (std::size_t s = 0; s < windows; ++s) {
    const std::size_t end = std::min(d.end, d.begin + s + c.window);
    present_words(corpus, c, d.begin + s, end, scratch);
    count_set(scratch, c.window_freq, c.pair_window_freq);
    ++c.total_windows;
  }
}

void merge(CoocCounts& into, const CoocCounts& part) {
  for (std::size_t i = 0; i < into.words.size(); ++i) {
    into.doc_freq[i] += part.doc_freq[i];
    into.window_freq[i] += part.window_freq[i];
  }
  into.pair_doc_freq += part.pair_doc_freq;
  into.pair_window_freq += part.pair_window_freq;
  into.total_windows += part.total_windows;
  into.num_documents += part.num_documents;
}

std::vector<std::uint32_t> head(const std::vector<std::uint32_t>& list, std::size_t m) {
  return {list.begin(), list.begin() + static_cast<std::ptrdiff_t>(std::min(m, list.size()))};
}

double entropy(const std::map<std::size_t, std::size_t>& counts, double n) {
  double h = 0.0;
  for (const auto& [label, count] : counts) {
    const double p = static_cast<double>(count) / n;
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace

namespace serial {

CoocCounts build_cooc(const Corpus& corpus, const std::vector<std::uint32_t>& words,
                      std::size_t window) {
  CoocCounts c = empty_counts(words, window);
  std::vector<std::size_t> scratch;
  for (std::size_t d = 0; d < corpus.num_documents(); ++d) count_document(corpus, d, c, scratch);
  return c;
}

}  // namespace serial

CoocCounts build_cooc(const Corpus& corpus, const std::vector<std::uint32_t>& words,
                      std::size_t window) {
  CoocCounts total = empty_counts(words, window);
  const auto n = static_cast<std::int64_t>(corpus.num_documents());
  // Integer counts: the merge order cannot change the result.
#pragma omp parallel
  {
    CoocCounts part = empty_counts(words, window);
    std::vector<std::size_t> scratch;
#pragma omp for schedule(dynamic, 16)
    for (std::int64_t d = 0; d < n; ++d) {
      count_document(corpus, static_cast<std::size_t>(d), part, scratch);
    }
#pragma omp critical
    merge(total, part);
  }
  return total;
}

std::vector<std::uint32_t> unique_words(const TopicWordIds& topics, std::size_t m) {
  std::set<std::uint32_t> words;
  for (const auto& list : topics) {
    for (std::uint32_t w : head(list, m)) words.insert(w);
  }
  return {words.begin(), words.end()};
}

CoherenceResult umass(const TopicWordIds& topics, const CoocCounts& counts, std::size_t m) {
  if (m < 2) throw ParameterError("UMass needs m >= 2");
  CoherenceResult result;
  double topic_sum = 0.0;
  std::size_t scored_topics = 0;
  for (const auto& full : topics) {
    const auto list = head(full, m);
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 1; i < list.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        auto wi = counts.index.find(list[i]);
        auto wj = counts.index.find(list[j]);
        if (wi == counts.index.end() || wj == counts.index.end() || counts.doc_freq[wj->second] == 0) {
          ++result.skipped_pairs;
          continue;
        }
        const auto joint = counts.pair_doc_freq(static_cast<Eigen::Index>(wi->second),
                                                static_cast<Eigen::Index>(wj->second));
        sum += std::log((static_cast<double>(joint) + 1.0) /
                        static_cast<double>(counts.doc_freq[wj->second]));
        ++pairs;
      }
    }
    if (pairs > 0) {
      topic_sum += sum / static_cast<double>(pairs);
      ++scored_topics;
    }
  }
  if (result.skipped_pairs > 0) {
    spdlog::warn("UMass: {} word pairs skipped (word absent from the corpus)", result.skipped_pairs);
  }
  result.value = scored_topics > 0 ? topic_sum / static_cast<double>(scored_topics) : 0.0;
  return result;
}

CoherenceResult uci(const TopicWordIds& topics, const CoocCounts& counts, std::size_t m) {
  if (m < 2) throw ParameterError("UCI needs m >= 2");
  constexpr double kSmoothing = 1e-12;
  CoherenceResult result;
  if (counts.total_windows == 0) return result;
  const double windows = static_cast<double>(counts.total_windows);
  double topic_sum = 0.0;
  std::size_t scored_topics = 0;
  for (const auto& full : topics) {
    const auto list = head(full, m);
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < list.size(); ++i) {
      for (std::size_t j = i + 1; j < list.size(); ++j) {
        auto wi = counts.index.find(list[i]);
        auto wj = counts.index.find(list[j]);
        if (wi == counts.index.end() || wj == counts.index.end() ||
            counts.window_freq[wi->second] == 0 || counts.window_freq[wj->second] == 0) {
          ++result.skipped_pairs;
          continue;
        }
        const double pi = static_cast<double>(counts.window_freq[wi->second]) / windows;
        const double pj = static_cast<double>(counts.window_freq[wj->second]) / windows;
        const double pij = static_cast<double>(counts.pair_window_freq(
                               static_cast<Eigen::Index>(wi->second),
                               static_cast<Eigen::Index>(wj->second))) /
                           windows;
        sum += std::log((pij + kSmoothing) / (pi * pj));
        ++pairs;
      }
    }
    if (pairs > 0) {
      topic_sum += sum / static_cast<double>(pairs);
      ++scored_topics;
    }
  }
  if (result.skipped_pairs > 0) {
    spdlog::warn("UCI: {} word pairs skipped (zero window count)", result.skipped_pairs);
  }
  result.value = scored_topics > 0 ? topic_sum / static_cast<double>(scored_topics) : 0.0;
  return result;
}

double topic_diversity(const TopicWordIds& topics, std::size_t m) {
  if (m < 1) throw ParameterError("topic diversity needs m >= 1");
  if (topics.empty()) throw ParameterError("topic diversity needs at least one topic");
  return static_cast<double>(unique_words(topics, m).size()) /
         static_cast<double>(topics.size() * m);
}

double nmi(const std::vector<std::size_t>& labels_a, const std::vector<std::size_t>& labels_b) {
  if (labels_a.size() != labels_b.size()) {
    throw ParameterError("nmi: labelings differ in length (" + std::to_string(labels_a.size()) +
                         " vs " + std::to_string(labels_b.size()) + ")");
  }
  if (labels_a.empty()) throw ParameterError("nmi: empty labelings");
  const double n = static_cast<double>(labels_a.size());
  std::map<std::size_t, std::size_t> count_a, count_b;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> joint;
  for (std::size_t i = 0; i < labels_a.size(); ++i) {
    ++count_a[labels_a[i]];
    ++count_b[labels_b[i]];
    ++joint[{labels_a[i], labels_b[i]}];
  }
  const double ha = entropy(count_a, n);
  const double hb = entropy(count_b, n);
  if (count_a.size() == 1 && count_b.size() == 1) return 1.0;
  if (count_a.size() == 1 || count_b.size() == 1) return 0.0;
  double mi = 0.0;
  for (const auto& [key, count] : joint) {
    const double pab = static_cast<double>(count) / n;
    const double pa = static_cast<double>(count_a[key.first]) / n;
    const double pb = static_cast<double>(count_b[key.second]) / n;
    mi += pab * std::log(pab / (pa * pb));
  }
  return std::clamp(mi / (0.5 * (ha + hb)), 0.0, 1.0);
}

KMeansResult kmeans(const Eigen::MatrixXd& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iters) {
  const auto n = static_cast<std::size_t>(points.cols());
  if (k == 0 || n < k) throw ParameterError("k-means needs 1 <= k <= number of points");
  const auto kk = static_cast<Eigen::Index>(k);
  Rng rng = substream(seed, "kmeans");
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  KMeansResult result;
  result.centroids.resize(points.rows(), kk);
  result.centroids.col(0) = points.col(static_cast<Eigen::Index>(pick(rng)));
  Eigen::VectorXd nearest = (points.colwise() - result.centroids.col(0)).colwise().squaredNorm().transpose();
  for (Eigen::Index c = 1; c < kk; ++c) {
    Eigen::Index far = 0;
    nearest.maxCoeff(&far);
    result.centroids.col(c) = points.col(far);
    nearest = nearest.cwiseMin((points.colwise() - result.centroids.col(c)).colwise().squaredNorm().transpose());
  }

  std::vector<std::size_t> assignment(n, k);
  std::vector<double> distance(n, 0.0);
  for (std::size_t iter = 0; iter < std::max<std::size_t>(max_iters, 1); ++iter) {
    std::vector<std::size_t> next(n);
    const auto nn = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < nn; ++i) {
      const auto col = points.col(static_cast<Eigen::Index>(i));
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < kk; ++c) {
        const double d = (col - result.centroids.col(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = static_cast<std::size_t>(c);
        }
      }
      next[static_cast<std::size_t>(i)] = best;
      distance[static_cast<std::size_t>(i)] = best_d;
    }
    result.iterations = iter + 1;
    if (next == assignment) break;
    assignment = std::move(next);

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(points.rows(), kk);
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.col(static_cast<Eigen::Index>(assignment[i])) += points.col(static_cast<Eigen::Index>(i));
      ++sizes[assignment[i]];
    }
    std::vector<bool> used(n, false);
    for (Eigen::Index c = 0; c < kk; ++c) {
      if (sizes[c] > 0) {
        result.centroids.col(c) = sums.col(c) / static_cast<double>(sizes[c]);
        continue;
      }
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (used[i] || sizes[assignment[i]] < 2) continue;
        if (far == n || distance[i] > distance[far]) far = i;
      }
      if (far != n) {
        used[far] = true;
        result.centroids.col(c) = points.col(static_cast<Eigen::Index>(far));
      }
    }
  }
  result.assignment = std::move(assignment);
  return result;
}

std::vector<std::size_t> cluster_documents(const LatentModel& model,
                                           const AttentionParams& attention,
                                           const Corpus& corpus, std::size_t k_eval,
                                           std::uint64_t seed) {
  if (k_eval < 2) throw ParameterError("document clustering needs K_eval >= 2");
  if (k_eval > corpus.num_documents()) {
    throw ParameterError("K_eval exceeds the number of documents");
  }
  return kmeans(document_latents(model, attention, corpus), k_eval, seed).assignment;
}

}  // namespace spheretopic
