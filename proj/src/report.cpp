#include "spheretopic/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "spheretopic/errors.hpp"

namespace spheretopic {

namespace {

constexpr double kZeroNorm = 1e-12;

double round6(double x) { return std::round(x * 1e6) / 1e6; }

// Rounds a probability row to integer millionths whose sum is exactly 10^6
// (largest-remainder apportionment).
std::vector<long long> apportion(const Eigen::RowVectorXd& row) {
  const auto k = static_cast<std::size_t>(row.size());
  std::vector<long long> units(k);
  std::vector<double> remainder(k);
  long long total = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double scaled = std::max(0.0, row(static_cast<Eigen::Index>(i))) * 1e6;
    units[i] = static_cast<long long>(std::floor(scaled));
    remainder[i] = scaled - static_cast<double>(units[i]);
    total += units[i];
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  // Rows sum to 1 within 1e-6, so the floors never overshoot 10^6.
  long long missing = 1000000 - total;
  for (std::size_t j = 0; missing > 0 && k > 0; j = (j + 1) % k, --missing) ++units[order[j]];
  return units;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

WordLatents word_type_latents(const Eigen::MatrixXd& token_latents,
                              const std::vector<std::uint32_t>& word_ids, std::size_t vocab_size) {
  const auto dim = token_latents.rows();
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(dim, static_cast<Eigen::Index>(vocab_size));
  std::vector<std::size_t> counts(vocab_size, 0);
  for (std::size_t t = 0; t < word_ids.size(); ++t) {
    sums.col(word_ids[t]) += token_latents.col(static_cast<Eigen::Index>(t));
    ++counts[word_ids[t]];
  }
  WordLatents out;
  std::vector<Eigen::Index> kept;
  for (std::uint32_t w = 0; w < vocab_size; ++w) {
    if (counts[w] == 0) continue;
    const double norm = sums.col(w).norm();
    if (!(norm > kZeroNorm * static_cast<double>(counts[w]))) {
      spdlog::warn("word {} has a vanishing mean latent; excluded from rankings", w);
      continue;
    }
    sums.col(w) /= norm;
    out.word_ids.push_back(w);
    kept.push_back(w);
  }
  out.latents = sums(Eigen::all, kept);
  return out;
}

WordLatents word_type_latents(const LatentModel& model, const Corpus& corpus) {
  return word_type_latents(encode_all(model, corpus.embeddings()), corpus.word_ids(),
                           corpus.vocabulary().size());
}

std::vector<RankedWord> top_words(const WordLatents& words, const Eigen::VectorXd& topic,
                                  std::size_t m) {
  if (m < 1) throw ParameterError("top_words needs m >= 1");
  const double topic_norm = topic.norm();
  if (!(topic_norm > 0.0)) throw NumericError("topic vector has zero norm");
  std::vector<RankedWord> ranked(words.word_ids.size());
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto col = words.latents.col(static_cast<Eigen::Index>(i));
    ranked[i] = {words.word_ids[i], col.dot(topic) / (col.norm() * topic_norm)};
  }
  const std::size_t keep = std::min(m, ranked.size());
  if (keep < m) spdlog::warn("only {} words available for a top-{} list", keep, m);
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep), ranked.end(),
                    [](const RankedWord& a, const RankedWord& b) {
                      if (a.score != b.score) return a.score > b.score;
                      return a.word_id < b.word_id;
                    });
  ranked.resize(keep);
  return ranked;
}

std::vector<RankedWord> top_words(const LatentModel& model, const Corpus& corpus,
                                  std::size_t topic_index, std::size_t m) {
  if (topic_index >= model.num_topics()) throw ParameterError("topic index out of range");
  if (m > corpus.vocabulary().size()) throw ParameterError("m exceeds vocabulary size");
  return top_words(word_type_latents(model, corpus),
                   model.topics.row(static_cast<Eigen::Index>(topic_index)).transpose(), m);
}

Eigen::VectorXd doc_topic_distribution(const LatentModel& model, const AttentionParams& attention,
                                       const Corpus& corpus, std::size_t doc_index) {
  const Eigen::VectorXd pooled =
      pool_document(attention, pooling_tokens(attention, corpus, doc_index));
  return topic_posterior(encode(model, pooled), model.topics, model.kappa).row(0).transpose();
}

Eigen::MatrixXd document_latents(const LatentModel& model, const AttentionParams& attention,
                                 const Corpus& corpus) {
  const auto n = static_cast<Eigen::Index>(corpus.num_documents());
  Eigen::MatrixXd pooled(static_cast<Eigen::Index>(corpus.dim()), n);
  std::string failure;
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index d = 0; d < n; ++d) {
    try {
      pooled.col(d) =
          pool_document(attention, pooling_tokens(attention, corpus, static_cast<std::size_t>(d)));
    } catch (const std::exception& e) {
#pragma omp critical
      if (failure.empty()) failure = "document " + std::to_string(d) + ": " + e.what();
    }
  }
  if (!failure.empty()) throw NumericError(failure);
  return encode_all(model, pooled);
}

Eigen::MatrixXd doc_topic_matrix(const LatentModel& model, const AttentionParams& attention,
                                 const Corpus& corpus) {
  return topic_posterior(document_latents(model, attention, corpus), model.topics, model.kappa);
}

TopicReport::TopicReport(std::vector<std::vector<Word>> topics, std::vector<std::uint64_t> doc_ids,
                         Eigen::MatrixXd doc_topics, std::vector<std::string> latent_surfaces,
                         Eigen::MatrixXd word_latents)
    : topics_(std::move(topics)),
      doc_ids_(std::move(doc_ids)),
      doc_topics_(std::move(doc_topics)),
      latent_surfaces_(std::move(latent_surfaces)),
      word_latents_(std::move(word_latents)) {
  if (topics_.empty()) throw ParameterError("a topic report needs at least one topic");
  if (doc_topics_.rows() != static_cast<Eigen::Index>(doc_ids_.size()) ||
      (doc_topics_.rows() > 0 && doc_topics_.cols() != static_cast<Eigen::Index>(topics_.size()))) {
    throw ParameterError("doc_topics must be documents x K");
  }
  for (Eigen::Index i = 0; i < doc_topics_.rows(); ++i) {
    if (std::abs(doc_topics_.row(i).sum() - 1.0) > 1e-6 || doc_topics_.row(i).minCoeff() < 0.0) {
      throw ParameterError("doc_topics row " + std::to_string(i) + " is not a distribution");
    }
  }
  for (const auto& list : topics_) {
    for (std::size_t j = 1; j < list.size(); ++j) {
      if (list[j].score > list[j - 1].score) throw ParameterError("topic words must be sorted by score");
    }
  }
  if (word_latents_.cols() != static_cast<Eigen::Index>(latent_surfaces_.size())) {
    throw ParameterError("latent surfaces and word latents disagree");
  }
}

std::vector<std::vector<std::uint32_t>> TopicReport::topic_word_ids(std::size_t m) const {
  std::vector<std::vector<std::uint32_t>> ids;
  for (const auto& list : topics_) {
    std::vector<std::uint32_t> words;
    for (std::size_t j = 0; j < std::min(m, list.size()); ++j) words.push_back(list[j].word_id);
    ids.push_back(std::move(words));
  }
  return ids;
}

TopicReport build_report(const LatentModel& model, const AttentionParams& attention,
                         const Corpus& corpus, std::size_t words_per_topic) {
  const WordLatents words = word_type_latents(model, corpus);
  const Vocabulary& vocab = corpus.vocabulary();
  std::vector<std::vector<TopicReport::Word>> topics;
  for (Eigen::Index k = 0; k < model.topics.rows(); ++k) {
    std::vector<TopicReport::Word> list;
    for (const RankedWord& w : top_words(words, model.topics.row(k).transpose(), words_per_topic)) {
      list.push_back({w.word_id, vocab[w.word_id].surface, w.score});
    }
    topics.push_back(std::move(list));
  }
  std::vector<std::uint64_t> doc_ids;
  for (const Document& d : corpus.documents()) doc_ids.push_back(d.id);
  std::vector<std::string> surfaces;
  for (std::uint32_t w : words.word_ids) surfaces.push_back(vocab[w].surface);
  return TopicReport(std::move(topics), std::move(doc_ids), doc_topic_matrix(model, attention, corpus),
                     std::move(surfaces), words.latents);
}

void export_report(const TopicReport& report, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  nlohmann::ordered_json topics = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < report.topics().size(); ++k) {
    nlohmann::ordered_json words = nlohmann::ordered_json::array();
    for (const auto& w : report.topics()[k]) {
      words.push_back({{"surface", w.surface}, {"score", round6(w.score)}});
    }
    topics.push_back({{"topic_id", k}, {"words", std::move(words)}});
  }
  {
    auto out = open_for_write(out_dir / "topics.json");
    out << topics.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + (out_dir / "topics.json").string());
  }
  {
    auto out = open_for_write(out_dir / "doc_topics.tsv");
    char cell[32];
    for (Eigen::Index i = 0; i < report.doc_topics().rows(); ++i) {
      out << report.doc_ids()[static_cast<std::size_t>(i)];
      for (long long units : apportion(report.doc_topics().row(i))) {
        std::snprintf(cell, sizeof cell, "\t%lld.%06lld", units / 1000000, units % 1000000);
        out << cell;
      }
      out << '\n';
    }
    if (!out) throw IoError("write failed: " + (out_dir / "doc_topics.tsv").string());
  }
  {
    auto out = open_for_write(out_dir / "latent_words.tsv");
    char cell[48];
    for (std::size_t w = 0; w < report.latent_surfaces().size(); ++w) {
      out << report.latent_surfaces()[w];
      for (Eigen::Index j = 0; j < report.word_latents().rows(); ++j) {
        std::snprintf(cell, sizeof cell, "\t%.6f", report.word_latents()(j, static_cast<Eigen::Index>(w)));
        out << cell;
      }
      out << '\n';
    }
    if (!out) throw IoError("write failed: " + (out_dir / "latent_words.tsv").string());
  }
}

std::vector<ParsedTopic> read_topics_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string(), e.byte, e.what());
  }
  std::vector<ParsedTopic> topics;
  for (const auto& t : doc) {
    ParsedTopic parsed;
    parsed.topic_id = t.at("topic_id").get<std::size_t>();
    for (const auto& w : t.at("words")) {
      parsed.words.emplace_back(w.at("surface").get<std::string>(), w.at("score").get<double>());
    }
    topics.push_back(std::move(parsed));
  }
  return topics;
}

}  // namespace spheretopic
