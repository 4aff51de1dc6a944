#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spheretopic/attention.hpp"
#include "spheretopic/corpus.hpp"
#include "spheretopic/latent.hpp"

namespace spheretopic {

// Unit latent direction of every word type: mean of its occurrence latents,
// renormalized. Words whose mean vanishes are left out.
struct WordLatents {
  std::vector<std::uint32_t> word_ids;
  Eigen::MatrixXd latents;  // r' x words
};

WordLatents word_type_latents(const LatentModel& model, const Corpus& corpus);
// Same aggregation over precomputed token latents (r' x N).
WordLatents word_type_latents(const Eigen::MatrixXd& token_latents,
                              const std::vector<std::uint32_t>& word_ids,
                              std::size_t vocab_size);

struct RankedWord {
  std::uint32_t word_id = 0;
  double score = 0.0;  // cosine to the topic direction
};

// The m words closest in cosine to `topic`; ties by ascending word id.
std::vector<RankedWord> top_words(const WordLatents& words, const Eigen::VectorXd& topic,
                                  std::size_t m);
std::vector<RankedWord> top_words(const LatentModel& model, const Corpus& corpus,
                                  std::size_t topic_index, std::size_t m);

Eigen::VectorXd doc_topic_distribution(const LatentModel& model, const AttentionParams& attention,
                                       const Corpus& corpus, std::size_t doc_index);

// All documents at once, n_docs x K.
Eigen::MatrixXd doc_topic_matrix(const LatentModel& model, const AttentionParams& attention,
                                 const Corpus& corpus);
// Encoded attention-pooled document embeddings, r' x n_docs.
Eigen::MatrixXd document_latents(const LatentModel& model, const AttentionParams& attention,
                                 const Corpus& corpus);

class TopicReport {
 public:
  struct Word {
    std::uint32_t word_id = 0;
    std::string surface;
    double score = 0.0;
  };

  // Throws ParameterError when there are no topics or a distribution row
  // does not sum to one within 1e-6.
  TopicReport(std::vector<std::vector<Word>> topics, std::vector<std::uint64_t> doc_ids,
              Eigen::MatrixXd doc_topics, std::vector<std::string> latent_surfaces,
              Eigen::MatrixXd word_latents);

  std::size_t num_topics() const { return topics_.size(); }
  const std::vector<std::vector<Word>>& topics() const { return topics_; }
  const std::vector<std::uint64_t>& doc_ids() const { return doc_ids_; }
  const Eigen::MatrixXd& doc_topics() const { return doc_topics_; }
  const std::vector<std::string>& latent_surfaces() const { return latent_surfaces_; }
  const Eigen::MatrixXd& word_latents() const { return word_latents_; }

  // Word ids of each topic's list, truncated to m.
  std::vector<std::vector<std::uint32_t>> topic_word_ids(std::size_t m) const;

 private:
  std::vector<std::vector<Word>> topics_;
  std::vector<std::uint64_t> doc_ids_;
  Eigen::MatrixXd doc_topics_;
  std::vector<std::string> latent_surfaces_;
  Eigen::MatrixXd word_latents_;
};

TopicReport build_report(const LatentModel& model, const AttentionParams& attention,
                         const Corpus& corpus, std::size_t words_per_topic);

// Writes topics.json, doc_topics.tsv and latent_words.tsv under out_dir.
void export_report(const TopicReport& report, const std::filesystem::path& out_dir);

struct ParsedTopic {
  std::size_t topic_id = 0;
  std::vector<std::pair<std::string, double>> words;
};
std::vector<ParsedTopic> read_topics_json(const std::filesystem::path& path);

}  // namespace spheretopic
