#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spheretopic/corpus.hpp"

namespace testing_support {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

// Independent little-endian encoder for the embedding file format.
class Bytes {
 public:
  Bytes& u8(std::uint8_t v);
  Bytes& u32(std::uint32_t v);
  Bytes& u64(std::uint64_t v);
  Bytes& f32(float v);
  Bytes& raw(const std::string& s);

  const std::string& str() const { return bytes_; }
  std::size_t size() const { return bytes_.size(); }

 private:
  std::string bytes_;
};

struct RawToken {
  std::uint32_t word_id = 0;
  std::uint8_t pos = 1;
  std::vector<float> values;
};

struct RawDoc {
  std::uint64_t id = 0;
  std::vector<RawToken> tokens;
};

std::string encode_embedding_file(std::uint32_t dim, const std::vector<RawDoc>& docs);
void write_file(const fs::path& path, const std::string& bytes);
std::string read_file(const fs::path& path);

// Writes a TSV vocabulary of `surfaces` with the given frequencies.
void write_vocab(const fs::path& path, const std::vector<std::string>& surfaces,
                 const std::vector<std::uint64_t>& frequencies);

// Two documents, five tokens, four words, r = 4.
struct TinyFixture {
  fs::path embeddings;
  fs::path vocab;
};
TinyFixture write_tiny_fixture(const fs::path& dir);

// In-memory corpus with random embeddings; words drawn uniformly.
spheretopic::Corpus random_corpus(std::mt19937_64& rng, std::size_t dim,
                                  const std::vector<std::size_t>& doc_sizes,
                                  std::size_t vocab_size, double other_fraction = 0.2);

Eigen::VectorXd random_unit(std::mt19937_64& rng, std::size_t dim);

// Sample from a von Mises-Fisher distribution on the unit sphere (Wood 1994).
Eigen::VectorXd sample_vmf(std::mt19937_64& rng, const Eigen::VectorXd& mean, double kappa);

// Planted clusters: K topic directions in a small sphere, words scattered
// around their topic, tokens around their word, everything mapped linearly
// into dimension `dim`.
struct PlantedCorpus {
  spheretopic::Corpus corpus;
  std::vector<std::size_t> token_labels;
  std::vector<std::size_t> doc_labels;
};

struct PlantedSpec {
  std::size_t topics = 5;
  std::size_t dim = 32;
  std::size_t sphere_dim = 8;
  std::size_t tokens = 2000;
  std::size_t doc_length = 20;
  std::size_t words_per_topic = 20;
  double topic_purity = 0.8;
  double word_kappa = 60.0;
  double token_kappa = 200.0;
  std::uint64_t seed = 0;
};

PlantedCorpus planted_corpus(const PlantedSpec& spec);

// Rank-2 data in r = 8: every token is A (cos t, sin t) for a random 8x2 A.
spheretopic::Corpus linear_subspace_corpus(std::uint64_t seed, std::size_t tokens,
                                           std::size_t doc_length);

// Corpus with the given word sequences as documents; embeddings random.
spheretopic::Corpus corpus_from_words(const std::vector<std::vector<std::uint32_t>>& docs,
                                      std::size_t vocab_size, std::uint64_t seed = 0);

// Exhaustive-count coherence: documents and windows scanned directly for
// every pair, with no shared count tables.
double brute_umass(const std::vector<std::vector<std::uint32_t>>& docs,
                   const std::vector<std::vector<std::uint32_t>>& topics, std::size_t m);
double brute_uci(const std::vector<std::vector<std::uint32_t>>& docs,
                 const std::vector<std::vector<std::uint32_t>>& topics, std::size_t m,
                 std::size_t window);

}  // namespace testing_support
