#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace spheretopic {

enum class PosClass : std::uint8_t { kOther = 0, kNoun = 1, kVerb = 2, kAdjective = 3 };

inline bool is_content_word(PosClass pos) { return pos != PosClass::kOther; }

struct VocabEntry {
  std::uint32_t word_id = 0;
  std::string surface;
  std::uint64_t frequency = 0;
};

class Vocabulary {
 public:
  Vocabulary() = default;
  // Validates dense ids, unique surfaces and frequencies >= 1.
  explicit Vocabulary(std::vector<VocabEntry> entries);

  std::size_t size() const { return entries_.size(); }
  const VocabEntry& operator[](std::uint32_t word_id) const { return entries_[word_id]; }
  const std::vector<VocabEntry>& entries() const { return entries_; }

 private:
  std::vector<VocabEntry> entries_;
};

struct Document {
  std::uint64_t id = 0;
  std::size_t begin = 0;  // index of the first token
  std::size_t end = 0;    // one past the last token

  std::size_t size() const { return end - begin; }
};

// Token embeddings grouped by document. Immutable once built; embeddings are
// stored column-per-token in double precision.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<Document> documents, std::vector<std::uint32_t> word_ids,
         std::vector<PosClass> pos, Eigen::MatrixXd embeddings, Vocabulary vocabulary);

  std::size_t dim() const { return static_cast<std::size_t>(embeddings_.rows()); }
  std::size_t num_tokens() const { return word_ids_.size(); }
  std::size_t num_documents() const { return documents_.size(); }

  const std::vector<Document>& documents() const { return documents_; }
  const Document& document(std::size_t index) const { return documents_.at(index); }
  const std::vector<std::uint32_t>& word_ids() const { return word_ids_; }
  const std::vector<PosClass>& pos() const { return pos_; }
  const Eigen::MatrixXd& embeddings() const { return embeddings_; }
  const Vocabulary& vocabulary() const { return vocabulary_; }

  // Embeddings of one document's tokens, column per token.
  auto document_embeddings(std::size_t index) const {
    const Document& d = documents_.at(index);
    return embeddings_.middleCols(static_cast<Eigen::Index>(d.begin),
                                  static_cast<Eigen::Index>(d.size()));
  }

 private:
  std::vector<Document> documents_;
  std::vector<std::uint32_t> word_ids_;
  std::vector<PosClass> pos_;
  Eigen::MatrixXd embeddings_;
  Vocabulary vocabulary_;
};

Vocabulary load_vocabulary(const std::filesystem::path& path);
void save_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path);

// Reads the binary embedding file together with its vocabulary. Throws
// FormatError naming the byte offset of the first violation.
Corpus load_corpus(const std::filesystem::path& embedding_path,
                   const std::filesystem::path& vocab_path);
Corpus load_corpus(const std::filesystem::path& embedding_path, Vocabulary vocab);

// Writes the binary embedding file. Values are narrowed to single precision,
// which is lossless for corpora that were loaded from disk.
void save_embeddings(const Corpus& corpus, const std::filesystem::path& path);

struct FilterResult {
  Corpus corpus;
  std::vector<std::uint64_t> dropped_documents;  // ids of documents left empty
  std::size_t removed_words = 0;
  std::size_t removed_tokens = 0;
};

// Removes every token whose word occurs fewer than `min_count` times in the
// corpus, re-densifies the vocabulary and drops documents left empty.
FilterResult filter_vocabulary(const Corpus& corpus, std::uint64_t min_count);

// Mean embedding of the noun/verb/adjective tokens of a document. Falls back
// to the all-token mean (with a warning) when the document has none.
Eigen::VectorXd generic_document_embedding(const Corpus& corpus, std::size_t doc_index,
                                           bool warn_on_fallback = true);

// doc_id -> label, from the TSV label file.
std::map<std::uint64_t, std::string> load_labels(const std::filesystem::path& path);

}  // namespace spheretopic
