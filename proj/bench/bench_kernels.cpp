// Serial reference kernels against their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include <random>

#include "spheretopic/corpus.hpp"
#include "spheretopic/kernels.hpp"
#include "spheretopic/metrics.hpp"

namespace st = spheretopic;
namespace sk = spheretopic::kernels;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = normal(rng);
  return m;
}

constexpr Eigen::Index kLatentDim = 100;
constexpr Eigen::Index kTopics = 100;

struct Inputs {
  Eigen::MatrixXd latents;
  Eigen::MatrixXd topics;
  Eigen::MatrixXd probs;
};

Inputs inputs(Eigen::Index n) {
  Inputs in{gaussian(kLatentDim, n, 1), gaussian(kTopics, kLatentDim, 2), {}};
  in.probs = sk::serial::topic_posterior(in.latents, in.topics, 10.0);
  return in;
}

template <bool Parallel>
void BM_Cosine(benchmark::State& state) {
  const Inputs in = inputs(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(Parallel ? sk::parallel::cosine(in.latents, in.topics)
                                      : sk::serial::cosine(in.latents, in.topics));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_Posterior(benchmark::State& state) {
  const Inputs in = inputs(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(Parallel ? sk::parallel::topic_posterior(in.latents, in.topics, 10.0)
                                      : sk::serial::topic_posterior(in.latents, in.topics, 10.0));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_ColumnSums(benchmark::State& state) {
  const Inputs in = inputs(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(Parallel ? sk::parallel::column_sums(in.probs) : sk::serial::column_sums(in.probs));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_Target(benchmark::State& state) {
  const Inputs in = inputs(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(Parallel ? sk::parallel::target_distribution(in.probs)
                                      : sk::serial::target_distribution(in.probs));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

st::Corpus word_corpus(std::size_t docs, std::size_t length, std::uint32_t vocab) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::uint32_t> word(0, vocab - 1);
  std::vector<st::Document> ranges;
  std::vector<std::uint32_t> ids;
  for (std::size_t d = 0; d < docs; ++d) {
    ranges.push_back({d, ids.size(), ids.size() + length});
    for (std::size_t t = 0; t < length; ++t) ids.push_back(word(rng));
  }
  std::vector<st::VocabEntry> entries;
  for (std::uint32_t w = 0; w < vocab; ++w) entries.push_back({w, "w" + std::to_string(w), 1});
  const auto n = static_cast<Eigen::Index>(ids.size());
  std::vector<st::PosClass> pos(ids.size(), st::PosClass::kNoun);
  return st::Corpus(std::move(ranges), std::move(ids), std::move(pos), Eigen::MatrixXd::Ones(1, n),
                    st::Vocabulary(std::move(entries)));
}

template <bool Parallel>
void BM_Cooc(benchmark::State& state) {
  const st::Corpus corpus = word_corpus(static_cast<std::size_t>(state.range(0)), 200, 2000);
  std::vector<std::uint32_t> words;
  for (std::uint32_t w = 0; w < 250; ++w) words.push_back(w * 7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(Parallel ? st::build_cooc(corpus, words, 10)
                                      : st::serial::build_cooc(corpus, words, 10));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_Cosine<false>)->Name("cosine/serial")->Arg(4096)->Arg(32768);
BENCHMARK(BM_Cosine<true>)->Name("cosine/parallel")->Arg(4096)->Arg(32768);
BENCHMARK(BM_Posterior<false>)->Name("posterior/serial")->Arg(4096)->Arg(32768);
BENCHMARK(BM_Posterior<true>)->Name("posterior/parallel")->Arg(4096)->Arg(32768);
BENCHMARK(BM_ColumnSums<false>)->Name("column_sums/serial")->Arg(4096)->Arg(32768);
BENCHMARK(BM_ColumnSums<true>)->Name("column_sums/parallel")->Arg(4096)->Arg(32768);
BENCHMARK(BM_Target<false>)->Name("target/serial")->Arg(4096)->Arg(32768);
BENCHMARK(BM_Target<true>)->Name("target/parallel")->Arg(4096)->Arg(32768);
BENCHMARK(BM_Cooc<false>)->Name("cooc/serial")->Arg(200)->Arg(1000);
BENCHMARK(BM_Cooc<true>)->Name("cooc/parallel")->Arg(200)->Arg(1000);

BENCHMARK_MAIN();
