#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spheretopic/attention.hpp"
#include "spheretopic/corpus.hpp"
#include "spheretopic/latent.hpp"
#include "spheretopic/parameters.hpp"

namespace spheretopic {

struct TrainConfig {
  std::size_t num_topics = 100;
  std::size_t latent_dim = 100;
  double kappa = 10.0;
  double lambda = 0.1;
  std::size_t epochs = 20;
  std::size_t pretrain_epochs = 10;
  double learning_rate = 5e-4;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double grad_check_tolerance = 1e-4;
  std::size_t attention_dim = 100;
  std::vector<std::size_t> encoder_hidden{500, 500, 1000};
  std::vector<std::size_t> decoder_hidden{1000, 500, 500};
  bool attention_content_only = false;
  std::size_t kmeans_max_iters = 100;

  // Throws ParameterError on K < 2, negative lambda or kappa, zero batch
  // size, or optimizer settings out of range. lambda = 0 and epochs = 0 are
  // accepted: they switch off the clustering term and the main loop.
  void validate() const;
};

struct LossBreakdown {
  double clus = 0.0;
  double rec = 0.0;
  double pre = 0.0;
  double total = 0.0;
};

// Which terms enter the objective, and the clustering weight.
struct ObjectiveTerms {
  double lambda = 0.1;
  bool clustering = true;
  bool reconstruction = true;
  bool preservation = true;

  static ObjectiveTerms preservation_only() { return {0.0, false, false, true}; }
};

// -sum_i sum_k Q[i,k] log P[i,k]; log floored at 1e-12.
double clustering_loss(const Eigen::MatrixXd& probs, const Eigen::MatrixXd& target);

// sum over docs of ||sum_k p(t_k|z_d) g(t_k) - generic_document_embedding(d)||^2.
double reconstruction_loss(const LatentModel& model, const AttentionParams& attention,
                           const Corpus& corpus, std::span<const std::size_t> doc_batch);

// sum over columns of ||h - g(f(h))||^2.
double preservation_loss(const LatentModel& model, const Eigen::MatrixXd& tokens);

// Targets for every corpus token (N x K), using corpus-wide column sums.
Eigen::MatrixXd e_step(const LatentModel& model, const Corpus& corpus);

// Objective on a batch of documents. `targets` holds the epoch's Q rows for
// every corpus token and may be empty when clustering is off. When `grad` is
// non-null the gradient of `total` is accumulated into it.
LossBreakdown batch_objective(const Parameters& params, const Corpus& corpus,
                              std::span<const std::size_t> doc_batch,
                              const Eigen::MatrixXd& targets, const ObjectiveTerms& terms,
                              Parameters* grad);

struct TrainObserver {
  std::function<void(std::size_t epoch, const Eigen::MatrixXd& targets)> on_epoch_begin;
  std::function<void(std::size_t epoch, const Eigen::MatrixXd& targets)> on_epoch_end;
  std::function<void(std::size_t epoch, std::size_t batch, const LossBreakdown&,
                     const Parameters&)>
      on_batch;
};

struct PretrainResult {
  LatentModel model;
  std::vector<double> epoch_loss;  // summed L_pre per epoch, before each epoch's updates
  double final_loss = 0.0;         // L_pre over the corpus after training
};

// Autoencoder pretraining on L_pre, then topics from spherical k-means over
// the encoded tokens. Throws TrainingError on a non-finite loss.
PretrainResult pretrain(const Corpus& corpus, const TrainConfig& config);

struct TrainResult {
  Parameters params;
  std::vector<LossBreakdown> epoch_log;
  std::vector<LossBreakdown> batch_log;
  PretrainResult pretraining;
};

TrainResult train(const Corpus& corpus, const TrainConfig& config,
                  const TrainObserver* observer = nullptr);

// Continues from an already pretrained model.
TrainResult train_from(const Corpus& corpus, const TrainConfig& config, PretrainResult pretrained,
                       const TrainObserver* observer = nullptr);

// Appends `epoch<TAB>clus<TAB>rec<TAB>pre<TAB>total` lines, 9 significant digits.
void write_epoch_log(const std::vector<LossBreakdown>& log, std::ostream& out);

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::vector<std::string> failures;  // tensors above tolerance

  bool passed() const { return failures.empty(); }
};

// Central finite differences (step 1e-5) against the analytic gradient of
// batch_objective for every tensor. The error of a tensor is
// ||analytic - numeric|| / max(||analytic||, ||numeric||), or the absolute
// difference when both norms vanish.
GradientCheckReport gradient_check(const Parameters& params, const Corpus& corpus,
                                   std::span<const std::size_t> doc_batch,
                                   const Eigen::MatrixXd& targets, const ObjectiveTerms& terms,
                                   double tolerance);

}  // namespace spheretopic
