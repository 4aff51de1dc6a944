#include "support.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <stdexcept>

namespace testing_support {

namespace st = spheretopic;

TempDir::TempDir() {
  static std::uint64_t counter = 0;
  std::random_device rd;
  path_ = fs::temp_directory_path() /
          ("spheretopic-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

Bytes& Bytes::u8(std::uint8_t v) {
  bytes_.push_back(static_cast<char>(v));
  return *this;
}

Bytes& Bytes::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  return *this;
}

Bytes& Bytes::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  return *this;
}

Bytes& Bytes::f32(float v) { return u32(std::bit_cast<std::uint32_t>(v)); }

Bytes& Bytes::raw(const std::string& s) {
  bytes_ += s;
  return *this;
}

std::string encode_embedding_file(std::uint32_t dim, const std::vector<RawDoc>& docs) {
  std::uint64_t tokens = 0;
  for (const RawDoc& d : docs) tokens += d.tokens.size();
  Bytes b;
  b.raw("TPCL").u32(1).u32(dim).u64(docs.size()).u64(tokens);
  for (const RawDoc& d : docs) {
    b.u64(d.id).u32(static_cast<std::uint32_t>(d.tokens.size()));
    for (const RawToken& t : d.tokens) {
      b.u32(t.word_id).u8(t.pos);
      for (float v : t.values) b.f32(v);
    }
  }
  return b.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_vocab(const fs::path& path, const std::vector<std::string>& surfaces,
                 const std::vector<std::uint64_t>& frequencies) {
  std::string text;
  for (std::size_t i = 0; i < surfaces.size(); ++i) {
    text += std::to_string(i) + "\t" + surfaces[i] + "\t" + std::to_string(frequencies[i]) + "\n";
  }
  write_file(path, text);
}

TinyFixture write_tiny_fixture(const fs::path& dir) {
  std::vector<RawDoc> docs = {
      {10, {{0, 1, {1, 0, 0, 0}}, {1, 2, {0, 1, 0, 0}}, {2, 0, {0, 0, 1, 0}}}},
      {11, {{3, 3, {0, 0, 0, 1}}, {0, 1, {1, 1, 0, 0}}}},
  };
  TinyFixture f{dir / "tiny.bin", dir / "tiny.tsv"};
  write_file(f.embeddings, encode_embedding_file(4, docs));
  write_vocab(f.vocab, {"apple", "eat", "the", "red"}, {2, 1, 1, 1});
  return f;
}

namespace {

st::Vocabulary counted_vocabulary(const std::vector<std::uint32_t>& word_ids, std::size_t size,
                                  const std::string& prefix) {
  std::vector<std::uint64_t> counts(size, 0);
  for (std::uint32_t w : word_ids) ++counts[w];
  std::vector<st::VocabEntry> entries;
  for (std::uint32_t w = 0; w < size; ++w) {
    entries.push_back({w, prefix + std::to_string(w), std::max<std::uint64_t>(1, counts[w])});
  }
  return st::Vocabulary(std::move(entries));
}

std::vector<st::Document> uniform_documents(std::size_t tokens, std::size_t length) {
  std::vector<st::Document> docs;
  for (std::size_t begin = 0; begin < tokens; begin += length) {
    docs.push_back({docs.size(), begin, std::min(tokens, begin + length)});
  }
  return docs;
}

// Embeddings pass through single precision so a save/load cycle is exact.
void round_to_float(Eigen::MatrixXd& m) {
  m = m.cast<float>().cast<double>();
}

}  // namespace

st::Corpus random_corpus(std::mt19937_64& rng, std::size_t dim, const std::vector<std::size_t>& doc_sizes,
                         std::size_t vocab_size, double other_fraction) {
  std::size_t total = 0;
  std::vector<st::Document> docs;
  for (std::size_t s : doc_sizes) {
    docs.push_back({docs.size() + 1, total, total + s});
    total += s;
  }
  std::uniform_int_distribution<std::uint32_t> word(0, static_cast<std::uint32_t>(vocab_size - 1));
  std::uniform_int_distribution<int> content(1, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal;
  std::vector<std::uint32_t> ids(total);
  std::vector<st::PosClass> pos(total);
  Eigen::MatrixXd emb(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(total));
  for (std::size_t t = 0; t < total; ++t) {
    ids[t] = word(rng);
    pos[t] = unit(rng) < other_fraction ? st::PosClass::kOther : static_cast<st::PosClass>(content(rng));
    for (std::size_t j = 0; j < dim; ++j) emb(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(t)) = normal(rng);
  }
  round_to_float(emb);
  st::Vocabulary vocab = counted_vocabulary(ids, vocab_size, "w");
  return st::Corpus(std::move(docs), std::move(ids), std::move(pos), std::move(emb), std::move(vocab));
}

Eigen::VectorXd random_unit(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = normal(rng);
  return v.normalized();
}

Eigen::VectorXd sample_vmf(std::mt19937_64& rng, const Eigen::VectorXd& mean, double kappa) {
  const double p = static_cast<double>(mean.size());
  const double b = (-2.0 * kappa + std::sqrt(4.0 * kappa * kappa + (p - 1.0) * (p - 1.0))) / (p - 1.0);
  const double x0 = (1.0 - b) / (1.0 + b);
  const double c = kappa * x0 + (p - 1.0) * std::log(1.0 - x0 * x0);
  std::gamma_distribution<double> gamma((p - 1.0) / 2.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double w = 0.0;
  while (true) {
    const double g1 = gamma(rng);
    const double g2 = gamma(rng);
    const double z = g1 / (g1 + g2);
    w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
    const double u = unit(rng);
    if (kappa * w + (p - 1.0) * std::log(1.0 - x0 * w) - c >= std::log(u)) break;
  }
  Eigen::VectorXd v = random_unit(rng, static_cast<std::size_t>(mean.size()));
  v -= v.dot(mean) * mean;
  v.normalize();
  return w * mean + std::sqrt(std::max(0.0, 1.0 - w * w)) * v;
}

PlantedCorpus planted_corpus(const PlantedSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_topic(0, spec.topics - 1);
  std::uniform_int_distribution<std::size_t> pick_word(0, spec.words_per_topic - 1);

  std::vector<Eigen::VectorXd> centers;
  for (std::size_t k = 0; k < spec.topics; ++k) centers.push_back(random_unit(rng, spec.sphere_dim));
  std::vector<Eigen::VectorXd> word_dirs;
  for (std::size_t k = 0; k < spec.topics; ++k) {
    for (std::size_t w = 0; w < spec.words_per_topic; ++w) {
      word_dirs.push_back(sample_vmf(rng, centers[k], spec.word_kappa));
    }
  }
  Eigen::MatrixXd map(static_cast<Eigen::Index>(spec.dim), static_cast<Eigen::Index>(spec.sphere_dim));
  for (Eigen::Index i = 0; i < map.size(); ++i) map(i) = normal(rng) / std::sqrt(static_cast<double>(spec.sphere_dim));

  PlantedCorpus out;
  std::vector<st::Document> docs = uniform_documents(spec.tokens, spec.doc_length);
  std::vector<std::uint32_t> ids(spec.tokens);
  std::vector<st::PosClass> pos(spec.tokens, st::PosClass::kNoun);
  Eigen::MatrixXd emb(static_cast<Eigen::Index>(spec.dim), static_cast<Eigen::Index>(spec.tokens));
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const std::size_t dominant = d % spec.topics;
    out.doc_labels.push_back(dominant);
    for (std::size_t t = docs[d].begin; t < docs[d].end; ++t) {
      const std::size_t topic = unit(rng) < spec.topic_purity ? dominant : pick_topic(rng);
      const std::size_t word = topic * spec.words_per_topic + pick_word(rng);
      ids[t] = static_cast<std::uint32_t>(word);
      emb.col(static_cast<Eigen::Index>(t)) = map * sample_vmf(rng, word_dirs[word], spec.token_kappa);
      out.token_labels.push_back(topic);
    }
  }
  round_to_float(emb);
  st::Vocabulary vocab = counted_vocabulary(ids, spec.topics * spec.words_per_topic, "word");
  out.corpus = st::Corpus(std::move(docs), std::move(ids), std::move(pos), std::move(emb), std::move(vocab));
  return out;
}

st::Corpus linear_subspace_corpus(std::uint64_t seed, std::size_t tokens, std::size_t doc_length) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  Eigen::MatrixXd map(8, 2);
  for (Eigen::Index i = 0; i < map.size(); ++i) map(i) = normal(rng);
  constexpr std::size_t kWords = 12;
  std::vector<std::uint32_t> ids(tokens);
  Eigen::MatrixXd emb(8, static_cast<Eigen::Index>(tokens));
  for (std::size_t t = 0; t < tokens; ++t) {
    const double theta = angle(rng);
    emb.col(static_cast<Eigen::Index>(t)) = map * Eigen::Vector2d(std::cos(theta), std::sin(theta));
    ids[t] = static_cast<std::uint32_t>(theta / (2.0 * std::numbers::pi) * kWords) % kWords;
  }
  round_to_float(emb);
  st::Vocabulary vocab = counted_vocabulary(ids, kWords, "arc");
  return st::Corpus(uniform_documents(tokens, doc_length), std::move(ids),
                    std::vector<st::PosClass>(tokens, st::PosClass::kNoun), std::move(emb), std::move(vocab));
}

}  // namespace testing_support

namespace testing_support {

st::Corpus corpus_from_words(const std::vector<std::vector<std::uint32_t>>& docs, std::size_t vocab_size,
                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<st::Document> ranges;
  std::vector<std::uint32_t> ids;
  for (const auto& d : docs) {
    ranges.push_back({ranges.size(), ids.size(), ids.size() + d.size()});
    ids.insert(ids.end(), d.begin(), d.end());
  }
  Eigen::MatrixXd emb(4, static_cast<Eigen::Index>(ids.size()));
  for (Eigen::Index i = 0; i < emb.size(); ++i) emb(i) = normal(rng);
  round_to_float(emb);
  std::vector<st::PosClass> pos(ids.size(), st::PosClass::kNoun);
  st::Vocabulary vocab = counted_vocabulary(ids, vocab_size, "v");
  return st::Corpus(std::move(ranges), std::move(ids), std::move(pos), std::move(emb), std::move(vocab));
}

namespace {

bool contains(const std::vector<std::uint32_t>& seq, std::size_t begin, std::size_t end, std::uint32_t w) {
  for (std::size_t i = begin; i < end; ++i) {
    if (seq[i] == w) return true;
  }
  return false;
}

std::vector<std::pair<const std::vector<std::uint32_t>*, std::pair<std::size_t, std::size_t>>> windows_of(
    const std::vector<std::vector<std::uint32_t>>& docs, std::size_t window) {
  std::vector<std::pair<const std::vector<std::uint32_t>*, std::pair<std::size_t, std::size_t>>> out;
  for (const auto& d : docs) {
    if (d.size() <= window) {
      out.push_back({&d, {0, d.size()}});
      continue;
    }
    for (std::size_t s = 0; s + window <= d.size(); ++s) out.push_back({&d, {s, s + window}});
  }
  return out;
}

}  // namespace

double brute_umass(const std::vector<std::vector<std::uint32_t>>& docs,
                   const std::vector<std::vector<std::uint32_t>>& topics, std::size_t m) {
  double total = 0.0;
  std::size_t scored = 0;
  for (const auto& topic : topics) {
    const std::size_t len = std::min(m, topic.size());
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 1; i < len; ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        double dj = 0.0, dij = 0.0;
        for (const auto& d : docs) {
          const bool has_j = contains(d, 0, d.size(), topic[j]);
          const bool has_i = contains(d, 0, d.size(), topic[i]);
          dj += has_j ? 1.0 : 0.0;
          dij += (has_i && has_j) ? 1.0 : 0.0;
        }
        if (dj == 0.0) continue;
        sum += std::log((dij + 1.0) / dj);
        ++pairs;
      }
    }
    if (pairs > 0) {
      total += sum / static_cast<double>(pairs);
      ++scored;
    }
  }
  return scored > 0 ? total / static_cast<double>(scored) : 0.0;
}

double brute_uci(const std::vector<std::vector<std::uint32_t>>& docs,
                 const std::vector<std::vector<std::uint32_t>>& topics, std::size_t m, std::size_t window) {
  const auto windows = windows_of(docs, window);
  const double n = static_cast<double>(windows.size());
  double total = 0.0;
  std::size_t scored = 0;
  for (const auto& topic : topics) {
    const std::size_t len = std::min(m, topic.size());
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < len; ++i) {
      for (std::size_t j = i + 1; j < len; ++j) {
        double ci = 0.0, cj = 0.0, cij = 0.0;
        for (const auto& [doc, range] : windows) {
          const bool hi = contains(*doc, range.first, range.second, topic[i]);
          const bool hj = contains(*doc, range.first, range.second, topic[j]);
          ci += hi ? 1.0 : 0.0;
          cj += hj ? 1.0 : 0.0;
          cij += (hi && hj) ? 1.0 : 0.0;
        }
        if (ci == 0.0 || cj == 0.0) continue;
        sum += std::log((cij / n + 1e-12) / ((ci / n) * (cj / n)));
        ++pairs;
      }
    }
    if (pairs > 0) {
      total += sum / static_cast<double>(pairs);
      ++scored;
    }
  }
  return scored > 0 ? total / static_cast<double>(scored) : 0.0;
}

}  // namespace testing_support
