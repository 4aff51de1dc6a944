// spheretopic: ingest, pretrain, train, topics, eval and verify-theorem.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/cfg/env.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "spheretopic/checkpoint.hpp"
#include "spheretopic/config.hpp"
#include "spheretopic/corpus.hpp"
#include "spheretopic/errors.hpp"
#include "spheretopic/metrics.hpp"
#include "spheretopic/report.hpp"
#include "spheretopic/theorem.hpp"
#include "spheretopic/trainer.hpp"

namespace st = spheretopic;
namespace fs = std::filesystem;

namespace {

enum ExitCode : int { kOk = 0, kInputFormat = 2, kTrainingFailure = 3, kUsage = 4, kVerification = 5 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Options shared by the commands that read a corpus or train.
struct RunOptions {
  std::string config;
  std::optional<std::string> embeddings, vocab, labels, out_dir;
  std::optional<std::uint64_t> min_count, seed, epochs, pretrain_epochs, batch_size, topics, latent_dim;
  std::optional<double> kappa, lambda, learning_rate;
  std::vector<std::string> set;

  void add_corpus_options(CLI::App& cmd) {
    cmd.add_option("--config", config, "key = value config file");
    cmd.add_option("--embeddings", embeddings, "binary embedding file");
    cmd.add_option("--vocab", vocab, "vocabulary TSV");
    cmd.add_option("--out", out_dir, "output directory");
    cmd.add_option("--min-count", min_count, "drop words seen fewer times (default 5)");
  }
  void add_train_options(CLI::App& cmd) {
    cmd.add_option("--seed", seed);
    cmd.add_option("--K", topics, "number of topics");
    cmd.add_option("--r-prime", latent_dim, "latent dimension");
    cmd.add_option("--kappa", kappa);
    cmd.add_option("--lambda", lambda, "clustering loss weight");
    cmd.add_option("--epochs", epochs);
    cmd.add_option("--pretrain-epochs", pretrain_epochs);
    cmd.add_option("--lr", learning_rate);
    cmd.add_option("--batch-size", batch_size);
    cmd.add_option("--set", set, "any config key, as key=value")->take_all();
  }

  st::RunConfig resolve() const {
    st::RunConfig run;
    if (!config.empty()) {
      if (!fs::exists(config)) throw UsageError("config file not found: " + config);
      st::apply_config(st::read_config_file(config), run);
    }
    std::map<std::string, std::string> overrides;
    for (const std::string& kv : set) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
      overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    st::apply_config(overrides, run);
    if (embeddings) run.embeddings = *embeddings;
    if (vocab) run.vocab = *vocab;
    if (labels) run.labels = *labels;
    if (out_dir) run.out_dir = *out_dir;
    if (min_count) run.min_count = *min_count;
    if (seed) run.train.seed = *seed;
    if (topics) run.train.num_topics = *topics;
    if (latent_dim) run.train.latent_dim = *latent_dim;
    if (kappa) run.train.kappa = *kappa;
    if (lambda) run.train.lambda = *lambda;
    if (epochs) run.train.epochs = *epochs;
    if (pretrain_epochs) run.train.pretrain_epochs = *pretrain_epochs;
    if (learning_rate) run.train.learning_rate = *learning_rate;
    if (batch_size) run.train.batch_size = *batch_size;
    return run;
  }
};

void require_file(const fs::path& path, const char* what) {
  if (path.empty()) throw UsageError(std::string("missing ") + what + " path");
  if (!fs::is_regular_file(path)) throw UsageError(std::string(what) + " not found: " + path.string());
}

void prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw UsageError("cannot create output directory " + dir.string() + ": " + ec.message());
}

std::string describe(const st::Corpus& corpus) {
  return std::to_string(corpus.num_documents()) + " docs, " + std::to_string(corpus.num_tokens()) +
         " tokens, " + std::to_string(corpus.vocabulary().size()) + " words";
}

st::Corpus load_filtered(const st::RunConfig& run) {
  require_file(run.embeddings, "embeddings");
  require_file(run.vocab, "vocabulary");
  st::FilterResult filtered = st::filter_vocabulary(st::load_corpus(run.embeddings, run.vocab), run.min_count);
  return std::move(filtered.corpus);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw st::IoError("cannot write " + path.string());
}

int cmd_ingest(const RunOptions& opts) {
  st::RunConfig run = opts.resolve();
  require_file(run.embeddings, "embeddings");
  require_file(run.vocab, "vocabulary");
  const st::Corpus corpus = st::load_corpus(run.embeddings, run.vocab);
  std::cout << describe(corpus) << "\n";
  st::FilterResult filtered = st::filter_vocabulary(corpus, run.min_count);
  std::cout << "min_count " << run.min_count << ": " << describe(filtered.corpus) << ", "
            << filtered.removed_words << " words removed, " << filtered.dropped_documents.size()
            << " docs dropped\n";
  for (std::uint64_t id : filtered.dropped_documents) std::cout << "dropped doc " << id << "\n";
  if (opts.out_dir) {
    prepare_out_dir(run.out_dir);
    st::save_embeddings(filtered.corpus, run.out_dir / "corpus.bin");
    st::save_vocabulary(filtered.corpus.vocabulary(), run.out_dir / "vocab.tsv");
  }
  return kOk;
}

int cmd_pretrain(const RunOptions& opts) {
  const st::RunConfig run = opts.resolve();
  run.train.validate();
  const st::Corpus corpus = load_filtered(run);
  prepare_out_dir(run.out_dir);
  std::cout << st::format_config(run);
  const st::PretrainResult result = st::pretrain(corpus, run.train);
  st::Checkpoint ck;
  ck.seed = run.train.seed;
  ck.params.model = result.model;
  st::Rng attention_rng = st::substream(run.train.seed, "attention-init");
  ck.params.attention = st::init_attention(corpus.dim(), run.train.attention_dim, attention_rng);
  ck.params.attention.content_words_only = run.train.attention_content_only;
  st::save_checkpoint(ck, run.out_dir / "pretrain.ckpt");
  std::ofstream log(run.out_dir / "pretrain_log.tsv", std::ios::binary);
  char line[64];
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
    std::snprintf(line, sizeof line, "%zu\t%.9g\n", e + 1, result.epoch_loss[e]);
    log << line;
  }
  std::snprintf(line, sizeof line, "final\t%.9g\n", result.final_loss);
  log << line;
  return kOk;
}

int cmd_train(const RunOptions& opts, const std::string& pretrained, std::size_t top_m) {
  const st::RunConfig run = opts.resolve();
  run.train.validate();
  const st::Corpus corpus = load_filtered(run);
  prepare_out_dir(run.out_dir);
  const std::string echo = st::format_config(run);
  std::cout << echo;
  write_text(run.out_dir / "config.txt", echo);
  spdlog::info("objective weights: clus {} rec 1 pre 1", run.train.lambda);

  st::TrainResult result;
  if (pretrained.empty()) {
    result = st::train(corpus, run.train);
  } else {
    require_file(pretrained, "pretrained checkpoint");
    st::PretrainResult start;
    start.model = st::load_checkpoint(pretrained).params.model;
    result = st::train_from(corpus, run.train, std::move(start));
  }
  st::save_checkpoint({result.params, run.train.seed}, run.out_dir / "model.ckpt");
  {
    std::ofstream log(run.out_dir / "train_log.tsv", std::ios::binary);
    log << "epoch\tclus\trec\tpre\ttotal\n";
    st::write_epoch_log(result.epoch_log, log);
  }
  st::export_report(st::build_report(result.params.model, result.params.attention, corpus, top_m),
                    run.out_dir);
  return kOk;
}

int cmd_topics(const RunOptions& opts, const std::string& checkpoint, std::size_t top_m) {
  const st::RunConfig run = opts.resolve();
  require_file(checkpoint, "checkpoint");
  const st::Checkpoint ck = st::load_checkpoint(checkpoint);
  const st::Corpus corpus = load_filtered(run);
  if (corpus.dim() != ck.params.model.input_dim()) {
    throw UsageError("checkpoint expects r = " + std::to_string(ck.params.model.input_dim()) +
                     ", corpus has r = " + std::to_string(corpus.dim()));
  }
  prepare_out_dir(run.out_dir);
  const st::TopicReport report = st::build_report(ck.params.model, ck.params.attention, corpus, top_m);
  st::export_report(report, run.out_dir);
  for (std::size_t k = 0; k < report.num_topics(); ++k) {
    std::cout << "topic " << k << ":";
    for (const auto& w : report.topics()[k]) std::cout << " " << w.surface;
    std::cout << "\n";
  }
  return kOk;
}

struct EvalOptions {
  std::string checkpoint;
  std::string labels;
  bool nmi = false;
  std::size_t top_m = 10;
  std::size_t diversity_m = 25;
  std::size_t window = 10;
};

int cmd_eval(const RunOptions& opts, const EvalOptions& eval) {
  if (eval.nmi && eval.labels.empty()) throw UsageError("--nmi requires --labels");
  if (eval.nmi) require_file(eval.labels, "label file");
  require_file(eval.checkpoint, "checkpoint");
  const st::RunConfig run = opts.resolve();
  const st::Checkpoint ck = st::load_checkpoint(eval.checkpoint);
  const st::Corpus corpus = load_filtered(run);
  if (corpus.dim() != ck.params.model.input_dim()) {
    throw UsageError("checkpoint and corpus disagree on the embedding dimension");
  }
  prepare_out_dir(run.out_dir);
  const st::LatentModel& model = ck.params.model;
  const st::WordLatents words = st::word_type_latents(model, corpus);
  const std::size_t m_max = std::max(eval.top_m, eval.diversity_m);
  st::TopicWordIds lists;
  for (Eigen::Index k = 0; k < model.topics.rows(); ++k) {
    std::vector<std::uint32_t> ids;
    for (const st::RankedWord& w : st::top_words(words, model.topics.row(k).transpose(), m_max)) {
      ids.push_back(w.word_id);
    }
    lists.push_back(std::move(ids));
  }
  const st::CoocCounts counts = st::build_cooc(corpus, st::unique_words(lists, eval.top_m), eval.window);

  nlohmann::ordered_json out;
  out["umass"] = st::umass(lists, counts, eval.top_m).value;
  out["uci"] = st::uci(lists, counts, eval.top_m).value;
  out["diversity"] = st::topic_diversity(lists, eval.diversity_m);
  if (eval.nmi) {
    const auto labels = st::load_labels(eval.labels);
    std::map<std::string, std::size_t> label_index;
    for (const auto& [id, label] : labels) label_index.emplace(label, label_index.size());
    std::vector<std::size_t> truth;
    for (const st::Document& d : corpus.documents()) {
      auto it = labels.find(d.id);
      if (it == labels.end()) throw UsageError("no label for document " + std::to_string(d.id));
      truth.push_back(label_index.at(it->second));
    }
    const std::set<std::size_t> distinct(truth.begin(), truth.end());
    const auto predicted = st::cluster_documents(model, ck.params.attention, corpus, distinct.size(), ck.seed);
    out["nmi"] = st::nmi(predicted, truth);
  }
  out["config"] = {{"top_m", eval.top_m},
                   {"diversity_m", eval.diversity_m},
                   {"window", eval.window},
                   {"min_count", run.min_count},
                   {"nmi", eval.nmi}};
  write_text(run.out_dir / "metrics.json", out.dump(2) + "\n");
  std::cout << out.dump(2) << "\n";
  return kOk;
}

int cmd_verify(std::uint64_t seed, std::size_t trials, std::size_t dim, std::size_t vocab_size,
               double tolerance) {
  const st::EquivalenceReport report = st::verify_equivalence(seed, dim, vocab_size, trials);
  const bool pass = report.max_deviation < tolerance;
  std::printf("trials %zu\nmax deviation %.17g (trial %zu)\n%s\n", report.trials, report.max_deviation,
              report.worst_trial, pass ? "PASS" : "FAIL");
  st::require_equivalence(report, tolerance, seed);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("spheretopic");
  spdlog::set_default_logger(logger);
  spdlog::cfg::load_env_levels();

  CLI::App app{"Topic discovery in a spherical latent space of token embeddings"};
  app.require_subcommand(1);

  RunOptions run;
  std::string pretrained, checkpoint;
  std::size_t top_m = 10;
  EvalOptions eval;
  std::uint64_t verify_seed = 0;
  std::size_t trials = 100, dim = 8, vocab_size = 32;
  double tolerance = 1e-9;

  auto* ingest = app.add_subcommand("ingest", "validate and filter an embedding corpus");
  run.add_corpus_options(*ingest);

  auto* pre = app.add_subcommand("pretrain", "pretrain the autoencoder and seed topics");
  run.add_corpus_options(*pre);
  run.add_train_options(*pre);

  auto* train = app.add_subcommand("train", "full training; writes checkpoint, log and report");
  run.add_corpus_options(*train);
  run.add_train_options(*train);
  train->add_option("--pretrained", pretrained, "start from a pretrain checkpoint");
  train->add_option("--top-m", top_m, "words per topic in the report");

  auto* topics = app.add_subcommand("topics", "write the topic report for a checkpoint");
  run.add_corpus_options(*topics);
  topics->add_option("--checkpoint", checkpoint)->required();
  topics->add_option("--top-m", top_m, "words per topic");

  auto* ev = app.add_subcommand("eval", "coherence, diversity and NMI into metrics.json");
  run.add_corpus_options(*ev);
  ev->add_option("--checkpoint", eval.checkpoint)->required();
  ev->add_option("--labels", eval.labels, "doc_id<TAB>label file");
  ev->add_flag("--nmi", eval.nmi, "cluster documents and score against labels");
  ev->add_option("--top-m", eval.top_m, "words per topic for coherence");
  ev->add_option("--diversity-m", eval.diversity_m, "words per topic for diversity");
  ev->add_option("--window", eval.window, "UCI sliding window size");

  auto* verify = app.add_subcommand("verify-theorem", "softmax vs Gaussian-mixture posterior check");
  verify->add_option("--seed", verify_seed);
  verify->add_option("--trials", trials);
  verify->add_option("--dim", dim);
  verify->add_option("--vocab-size", vocab_size);
  verify->add_option("--tolerance", tolerance);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (ingest->parsed()) return cmd_ingest(run);
    if (pre->parsed()) return cmd_pretrain(run);
    if (train->parsed()) return cmd_train(run, pretrained, top_m);
    if (topics->parsed()) return cmd_topics(run, checkpoint, top_m);
    if (ev->parsed()) return cmd_eval(run, eval);
    if (verify->parsed()) return cmd_verify(verify_seed, trials, dim, vocab_size, tolerance);
  } catch (const st::FormatError& e) {
    spdlog::error("{}", e.what());
    return kInputFormat;
  } catch (const st::IoError& e) {
    spdlog::error("{}", e.what());
    return kInputFormat;
  } catch (const st::VerificationError& e) {
    spdlog::error("{}", e.what());
    return kVerification;
  } catch (const st::TrainingError& e) {
    spdlog::error("{}", e.what());
    return kTrainingFailure;
  } catch (const st::NumericError& e) {
    spdlog::error("{}", e.what());
    return kTrainingFailure;
  } catch (const st::ParameterError& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  }
  return kUsage;
}
