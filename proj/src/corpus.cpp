#include "spheretopic/corpus.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "spheretopic/errors.hpp"

namespace spheretopic {

namespace {

constexpr char kMagic[4] = {'T', 'P', 'C', 'L'};
constexpr std::uint32_t kVersion = 1;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

class ByteReader {
 public:
  ByteReader(const std::string& bytes, std::string path) : bytes_(bytes), path_(std::move(path)) {}

  std::uint64_t offset() const { return offset_; }
  bool at_end() const { return offset_ == bytes_.size(); }

  template <typename T>
  T read(const char* what) {
    if (bytes_.size() - offset_ < sizeof(T)) {
      throw FormatError(path_, offset_, std::string("truncated record: expected ") + what);
    }
    std::uint64_t value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      value |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[offset_ + i])) << (8 * i);
    }
    offset_ += sizeof(T);
    return static_cast<T>(value);
  }

  float read_f32(const char* what) { return std::bit_cast<float>(read<std::uint32_t>(what)); }

 private:
  const std::string& bytes_;
  std::string path_;
  std::uint64_t offset_ = 0;
};

template <typename T>
void put(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
  }
}

std::uint64_t parse_u64(const std::string& text, const std::string& path, std::uint64_t offset,
                        const char* what) {
  std::size_t used = 0;
  std::uint64_t value = 0;
  try {
    if (text.empty() || text[0] == '-') throw std::invalid_argument(what);
    value = std::stoull(text, &used);
  } catch (const std::exception&) {
    throw FormatError(path, offset, std::string("invalid ") + what + " '" + text + "'");
  }
  if (used != text.size()) throw FormatError(path, offset, std::string("invalid ") + what);
  return value;
}

// Splits on tabs; strips a trailing '\r'.
std::vector<std::string> split_tsv(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

template <typename Fn>
void for_each_line(const std::string& text, Fn&& fn) {
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    std::size_t end = nl == std::string::npos ? text.size() : nl;
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line != "\r") fn(line, static_cast<std::uint64_t>(start));
    if (nl == std::string::npos) break;
    start = nl + 1;
  }
}

}  // namespace

Vocabulary::Vocabulary(std::vector<VocabEntry> entries) : entries_(std::move(entries)) {
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const VocabEntry& e = entries_[i];
    if (e.word_id != i) {
      throw ParameterError("vocabulary ids must be dense: expected " + std::to_string(i) +
                           ", got " + std::to_string(e.word_id));
    }
    if (e.frequency < 1) throw ParameterError("word '" + e.surface + "' has frequency 0");
    if (!seen.insert(e.surface).second) {
      throw ParameterError("duplicate vocabulary surface '" + e.surface + "'");
    }
  }
}

Corpus::Corpus(std::vector<Document> documents, std::vector<std::uint32_t> word_ids,
               std::vector<PosClass> pos, Eigen::MatrixXd embeddings, Vocabulary vocabulary)
    : documents_(std::move(documents)),
      word_ids_(std::move(word_ids)),
      pos_(std::move(pos)),
      embeddings_(std::move(embeddings)),
      vocabulary_(std::move(vocabulary)) {
  if (word_ids_.empty()) throw ParameterError("corpus has no tokens");
  if (pos_.size() != word_ids_.size() ||
      static_cast<std::size_t>(embeddings_.cols()) != word_ids_.size()) {
    throw ParameterError("token arrays disagree in length");
  }
  std::size_t cursor = 0;
  for (const Document& d : documents_) {
    if (d.begin != cursor || d.end <= d.begin) {
      throw ParameterError("document ranges must partition the tokens");
    }
    cursor = d.end;
  }
  if (cursor != word_ids_.size()) throw ParameterError("document ranges must cover every token");
  for (std::uint32_t w : word_ids_) {
    if (w >= vocabulary_.size()) throw ParameterError("word id out of range");
  }
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::vector<VocabEntry> entries;
  std::unordered_set<std::string> seen;
  for_each_line(text, [&](const std::string& line, std::uint64_t offset) {
    auto fields = split_tsv(line);
    if (fields.size() != 3) throw FormatError(path.string(), offset, "expected 3 tab-separated fields");
    VocabEntry e;
    std::uint64_t id = parse_u64(fields[0], path.string(), offset, "word_id");
    if (id != entries.size()) {
      throw FormatError(path.string(), offset,
                        "word ids must be dense and ascending; expected " + std::to_string(entries.size()));
    }
    e.word_id = static_cast<std::uint32_t>(id);
    e.surface = fields[1];
    if (e.surface.empty()) throw FormatError(path.string(), offset, "empty surface");
    if (!seen.insert(e.surface).second) {
      throw FormatError(path.string(), offset, "duplicate surface '" + e.surface + "'");
    }
    e.frequency = parse_u64(fields[2], path.string(), offset, "frequency");
    if (e.frequency < 1) throw FormatError(path.string(), offset, "frequency must be >= 1");
    entries.push_back(std::move(e));
  });
  return Vocabulary(std::move(entries));
}

void save_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const VocabEntry& e : vocab.entries()) {
    out << e.word_id << '\t' << e.surface << '\t' << e.frequency << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Corpus load_corpus(const std::filesystem::path& embedding_path,
                   const std::filesystem::path& vocab_path) {
  return load_corpus(embedding_path, load_vocabulary(vocab_path));
}

Corpus load_corpus(const std::filesystem::path& embedding_path, Vocabulary vocab) {
  const std::string bytes = read_file(embedding_path);
  const std::string path = embedding_path.string();
  ByteReader in(bytes, path);

  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError(path, 0, "bad magic, expected \"TPCL\"");
  }
  in.read<std::uint32_t>("magic");
  const std::uint64_t version_at = in.offset();
  if (in.read<std::uint32_t>("version") != kVersion) {
    throw FormatError(path, version_at, "unsupported version");
  }
  const std::uint64_t dim_at = in.offset();
  const std::uint32_t dim = in.read<std::uint32_t>("dimension");
  if (dim == 0) throw FormatError(path, dim_at, "dimension must be positive");
  const std::uint64_t doc_count = in.read<std::uint64_t>("document count");
  const std::uint64_t count_at = in.offset();
  const std::uint64_t token_count = in.read<std::uint64_t>("token count");
  if (token_count == 0) throw FormatError(path, count_at, "corpus declares no tokens");

  // Reserve no more than the file could possibly hold; a lying header then
  // fails at the first missing record instead of at allocation.
  const std::uint64_t remaining = bytes.size() - in.offset();
  const std::uint64_t plausible = std::min<std::uint64_t>(token_count, remaining / (5 + 4ULL * dim));

  std::vector<Document> documents;
  documents.reserve(std::min<std::uint64_t>(doc_count, remaining / 12));
  std::vector<std::uint32_t> word_ids;
  std::vector<PosClass> pos;
  std::vector<double> values;
  word_ids.reserve(plausible);
  pos.reserve(plausible);
  values.reserve(plausible * dim);
  std::unordered_set<std::uint64_t> doc_ids;

  std::size_t token = 0;
  for (std::uint64_t d = 0; d < doc_count; ++d) {
    const std::uint64_t doc_at = in.offset();
    Document doc;
    doc.id = in.read<std::uint64_t>("doc_id");
    if (!doc_ids.insert(doc.id).second) {
      throw FormatError(path, doc_at, "duplicate doc_id " + std::to_string(doc.id));
    }
    const std::uint64_t n_at = in.offset();
    const std::uint32_t n = in.read<std::uint32_t>("n_tokens");
    if (n == 0) throw FormatError(path, n_at, "document has no tokens");
    if (token + n > token_count) {
      throw FormatError(path, n_at, "documents hold more tokens than the header declares");
    }
    doc.begin = token;
    for (std::uint32_t i = 0; i < n; ++i, ++token) {
      const std::uint64_t word_at = in.offset();
      const std::uint32_t word = in.read<std::uint32_t>("word_id");
      if (word >= vocab.size()) {
        throw FormatError(path, word_at, "word_id " + std::to_string(word) + " out of range");
      }
      const std::uint64_t pos_at = in.offset();
      const std::uint8_t tag = in.read<std::uint8_t>("pos_class");
      if (tag > 3) throw FormatError(path, pos_at, "pos_class must be 0..3");
      for (std::uint32_t j = 0; j < dim; ++j) {
        const std::uint64_t value_at = in.offset();
        const float value = in.read_f32("embedding value");
        if (!std::isfinite(value)) throw FormatError(path, value_at, "non-finite embedding value");
        values.push_back(value);
      }
      word_ids.push_back(word);
      pos.push_back(static_cast<PosClass>(tag));
    }
    doc.end = token;
    documents.push_back(doc);
  }
  if (token != token_count) {
    throw FormatError(path, in.offset(),
                      "header declares " + std::to_string(token_count) + " tokens, found " +
                          std::to_string(token));
  }
  if (!in.at_end()) throw FormatError(path, in.offset(), "trailing bytes after last document");

  Eigen::MatrixXd embeddings = Eigen::Map<const Eigen::MatrixXd>(
      values.data(), dim, static_cast<Eigen::Index>(token_count));
  return Corpus(std::move(documents), std::move(word_ids), std::move(pos), std::move(embeddings),
                std::move(vocab));
}

void save_embeddings(const Corpus& corpus, const std::filesystem::path& path) {
  std::string out;
  out.reserve(32 + corpus.num_tokens() * (5 + 4 * corpus.dim()) + corpus.num_documents() * 12);
  out.append(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(corpus.dim()));
  put<std::uint64_t>(out, corpus.num_documents());
  put<std::uint64_t>(out, corpus.num_tokens());
  const auto& emb = corpus.embeddings();
  for (const Document& d : corpus.documents()) {
    put<std::uint64_t>(out, d.id);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(d.size()));
    for (std::size_t t = d.begin; t < d.end; ++t) {
      put<std::uint32_t>(out, corpus.word_ids()[t]);
      put<std::uint8_t>(out, static_cast<std::uint8_t>(corpus.pos()[t]));
      for (Eigen::Index j = 0; j < emb.rows(); ++j) {
        put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(
                                    static_cast<float>(emb(j, static_cast<Eigen::Index>(t)))));
      }
    }
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot write " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw IoError("write failed: " + path.string());
}

FilterResult filter_vocabulary(const Corpus& corpus, std::uint64_t min_count) {
  if (min_count < 1) throw ParameterError("min_count must be >= 1");
  const Vocabulary& vocab = corpus.vocabulary();
  std::vector<std::uint64_t> counts(vocab.size(), 0);
  for (std::uint32_t w : corpus.word_ids()) ++counts[w];

  constexpr std::uint32_t kRemoved = ~0u;
  std::vector<std::uint32_t> remap(vocab.size(), kRemoved);
  std::vector<VocabEntry> entries;
  FilterResult result;
  for (std::uint32_t w = 0; w < vocab.size(); ++w) {
    if (counts[w] >= min_count) {
      remap[w] = static_cast<std::uint32_t>(entries.size());
      entries.push_back({remap[w], vocab[w].surface, counts[w]});
    } else {
      ++result.removed_words;
    }
  }

  std::vector<std::size_t> kept;
  std::vector<Document> documents;
  for (const Document& d : corpus.documents()) {
    Document out{d.id, kept.size(), 0};
    for (std::size_t t = d.begin; t < d.end; ++t) {
      if (remap[corpus.word_ids()[t]] != kRemoved) kept.push_back(t);
    }
    out.end = kept.size();
    if (out.end == out.begin) {
      result.dropped_documents.push_back(d.id);
      spdlog::warn("document {} is empty after vocabulary filtering; dropped", d.id);
    } else {
      documents.push_back(out);
    }
  }
  result.removed_tokens = corpus.num_tokens() - kept.size();
  if (kept.empty()) {
    throw ParameterError("vocabulary filtering with min_count " + std::to_string(min_count) +
                         " removed every token");
  }

  std::vector<std::uint32_t> word_ids(kept.size());
  std::vector<PosClass> pos(kept.size());
  Eigen::MatrixXd embeddings(corpus.embeddings().rows(), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t i = 0; i < kept.size(); ++i) {
    word_ids[i] = remap[corpus.word_ids()[kept[i]]];
    pos[i] = corpus.pos()[kept[i]];
    embeddings.col(static_cast<Eigen::Index>(i)) =
        corpus.embeddings().col(static_cast<Eigen::Index>(kept[i]));
  }
  result.corpus = Corpus(std::move(documents), std::move(word_ids), std::move(pos),
                         std::move(embeddings), Vocabulary(std::move(entries)));
  return result;
}

Eigen::VectorXd generic_document_embedding(const Corpus& corpus, std::size_t doc_index,
                                           bool warn_on_fallback) {
  const Document& d = corpus.document(doc_index);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(corpus.dim()));
  std::size_t count = 0;
  for (std::size_t t = d.begin; t < d.end; ++t) {
    if (is_content_word(corpus.pos()[t])) {
      sum += corpus.embeddings().col(static_cast<Eigen::Index>(t));
      ++count;
    }
  }
  if (count == 0) {
    if (warn_on_fallback) spdlog::warn("document {} has no noun/verb/adjective token; using all tokens", d.id);
    for (std::size_t t = d.begin; t < d.end; ++t) {
      sum += corpus.embeddings().col(static_cast<Eigen::Index>(t));
    }
    count = d.size();
  }
  return sum / static_cast<double>(count);
}

std::map<std::uint64_t, std::string> load_labels(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::map<std::uint64_t, std::string> labels;
  for_each_line(text, [&](const std::string& line, std::uint64_t offset) {
    auto fields = split_tsv(line);
    if (fields.size() != 2 || fields[1].empty()) {
      throw FormatError(path.string(), offset, "expected doc_id<TAB>label");
    }
    const std::uint64_t id = parse_u64(fields[0], path.string(), offset, "doc_id");
    if (!labels.emplace(id, fields[1]).second) {
      throw FormatError(path.string(), offset, "duplicate doc_id " + fields[0]);
    }
  });
  return labels;
}

}  // namespace spheretopic
