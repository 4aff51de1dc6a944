#include "spheretopic/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "spheretopic/errors.hpp"
#include "spheretopic/kernels.hpp"

namespace spheretopic {

namespace {

constexpr double kLogFloor = 1e-12;

void zero(Parameters& p) {
  for (TensorView& t : tensors(p)) std::fill(t.data, t.data + t.size, 0.0);
}

// Unit rows of T and their original norms.
struct UnitTopics {
  Eigen::MatrixXd unit;
  Eigen::VectorXd norms;
};

UnitTopics unit_topics(const Eigen::MatrixXd& topics) {
  UnitTopics u{topics, topics.rowwise().norm()};
  for (Eigen::Index k = 0; k < topics.rows(); ++k) {
    if (!(u.norms(k) > 0.0)) throw NumericError("topic " + std::to_string(k) + " has zero norm");
    u.unit.row(k) /= u.norms(k);
  }
  return u;
}

// Normalizes columns, returning the raw norms.
Eigen::VectorXd normalize_columns(Eigen::MatrixXd& m) {
  Eigen::VectorXd norms = m.colwise().norm().transpose();
  for (Eigen::Index i = 0; i < m.cols(); ++i) {
    if (!(norms(i) >= 1e-12)) {
      throw NumericError("degenerate encoding at column " + std::to_string(i));
    }
    m.col(i) /= norms(i);
  }
  return norms;
}

// Gradient through z = u / ||u||.
Eigen::MatrixXd normalize_backward(const Eigen::MatrixXd& unit, const Eigen::VectorXd& norms,
                                   const Eigen::MatrixXd& grad_unit) {
  Eigen::MatrixXd grad = grad_unit;
  for (Eigen::Index i = 0; i < unit.cols(); ++i) {
    const double along = unit.col(i).dot(grad_unit.col(i));
    grad.col(i) = (grad_unit.col(i) - along * unit.col(i)) / norms(i);
  }
  return grad;
}

// Cosine scores (n x K) of unit latents against topics, and their softmax.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& cos, double kappa) {
  Eigen::MatrixXd p(cos.rows(), cos.cols());
  for (Eigen::Index i = 0; i < cos.rows(); ++i) {
    const double peak = kappa * cos.row(i).maxCoeff();
    p.row(i) = (kappa * cos.row(i).array() - peak).exp();
    p.row(i) /= std::max(p.row(i).sum(), kernels::kEpsilon);
  }
  return p;
}

// Backward of cos(i,k) = z_i . t_k / ||t_k|| for unit z_i. Adds the topic
// gradient into grad_topics and returns d/dz (r' x n).
Eigen::MatrixXd cosine_backward(const Eigen::MatrixXd& unit_latents, const UnitTopics& topics,
                                const Eigen::MatrixXd& cos, const Eigen::MatrixXd& grad_cos,
                                Eigen::MatrixXd& grad_topics) {
  // d/dt_k = sum_i g_ik (z_i - c_ik tn_k) / ||t_k||
  Eigen::MatrixXd from_latents = grad_cos.transpose() * unit_latents.transpose();  // K x r'
  const Eigen::VectorXd weight = (grad_cos.array() * cos.array()).colwise().sum().transpose();
  for (Eigen::Index k = 0; k < topics.unit.rows(); ++k) {
    grad_topics.row(k) += (from_latents.row(k) - weight(k) * topics.unit.row(k)) / topics.norms(k);
  }
  return (grad_cos * topics.unit).transpose();
}

std::vector<std::size_t> batch_tokens(const Corpus& corpus, std::span<const std::size_t> docs) {
  std::vector<std::size_t> tokens;
  for (std::size_t d : docs) {
    const Document& doc = corpus.document(d);
    for (std::size_t t = doc.begin; t < doc.end; ++t) tokens.push_back(t);
  }
  return tokens;
}

bool finite(const LossBreakdown& l) {
  return std::isfinite(l.clus) && std::isfinite(l.rec) && std::isfinite(l.pre) &&
         std::isfinite(l.total);
}

std::string describe(const LossBreakdown& l) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "clus=%.9g rec=%.9g pre=%.9g total=%.9g", l.clus, l.rec, l.pre,
                l.total);
  return buf;
}

std::string state_dump(Parameters& params) {
  std::ostringstream out;
  for (const TensorView& t : tensors(params)) {
    double norm = 0.0;
    bool ok = true;
    for (std::size_t i = 0; i < t.size; ++i) {
      norm += t.data[i] * t.data[i];
      ok = ok && std::isfinite(t.data[i]);
    }
    out << "\n  " << t.name << ": norm " << std::sqrt(norm) << (ok ? "" : " (non-finite entries)");
  }
  return out.str();
}

std::vector<std::vector<std::size_t>> make_batches(std::vector<std::size_t> order,
                                                   std::size_t batch_size) {
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

Adam::Options adam_options(const TrainConfig& config) {
  return {config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_epsilon};
}

AttentionParams initial_attention(std::size_t r, const TrainConfig& config) {
  Rng rng = substream(config.seed, "attention-init");
  AttentionParams a = init_attention(r, config.attention_dim, rng);
  a.content_words_only = config.attention_content_only;
  return a;
}

}  // namespace

void TrainConfig::validate() const {
  if (num_topics < 2) throw ParameterError("K must be at least 2");
  if (latent_dim == 0) throw ParameterError("latent dimension must be positive");
  if (!(kappa >= 0.0)) throw ParameterError("kappa must be nonnegative");
  if (!(lambda >= 0.0)) throw ParameterError("lambda must be nonnegative");
  if (batch_size == 0) throw ParameterError("batch size must be at least 1");
  if (!(learning_rate > 0.0)) throw ParameterError("learning rate must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ParameterError("adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw ParameterError("adam epsilon must be positive");
  if (attention_dim == 0) throw ParameterError("attention dimension must be positive");
}

double clustering_loss(const Eigen::MatrixXd& probs, const Eigen::MatrixXd& target) {
  if (probs.rows() != target.rows() || probs.cols() != target.cols()) {
    throw ParameterError("clustering loss: P and Q shapes differ");
  }
  double loss = 0.0;
  std::size_t floored = 0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    for (Eigen::Index k = 0; k < probs.cols(); ++k) {
      if (target(i, k) == 0.0) continue;
      double p = probs(i, k);
      if (p < kLogFloor) {
        p = kLogFloor;
        ++floored;
      }
      loss -= target(i, k) * std::log(p);
    }
  }
  if (floored > 0) spdlog::warn("clustering loss: {} probabilities floored at 1e-12", floored);
  return loss;
}

double reconstruction_loss(const LatentModel& model, const AttentionParams& attention,
                           const Corpus& corpus, std::span<const std::size_t> doc_batch) {
  if (doc_batch.empty()) throw ParameterError("reconstruction loss needs a non-empty batch");
  const Eigen::MatrixXd decoded_topics = model.decoder.forward(model.topics.transpose());
  double loss = 0.0;
  for (std::size_t d : doc_batch) {
    const Eigen::VectorXd pooled = pool_document(attention, pooling_tokens(attention, corpus, d));
    const Eigen::VectorXd z = encode(model, pooled);
    const Eigen::VectorXd p = kernels::serial::topic_posterior(z, model.topics, model.kappa).row(0);
    const Eigen::VectorXd residual =
        decoded_topics * p - generic_document_embedding(corpus, d, false);
    loss += residual.squaredNorm();
  }
  return loss;
}

double preservation_loss(const LatentModel& model, const Eigen::MatrixXd& tokens) {
  if (tokens.cols() == 0) throw ParameterError("preservation loss needs a non-empty batch");
  const Eigen::MatrixXd recon = model.decoder.forward(encode_batch(model, tokens));
  return (recon - tokens).squaredNorm();
}

Eigen::MatrixXd e_step(const LatentModel& model, const Corpus& corpus) {
  const Eigen::MatrixXd latents = encode_all(model, corpus.embeddings());
  return target_distribution(topic_posterior(latents, model.topics, model.kappa));
}

LossBreakdown batch_objective(const Parameters& params, const Corpus& corpus,
                              std::span<const std::size_t> doc_batch,
                              const Eigen::MatrixXd& targets, const ObjectiveTerms& terms,
                              Parameters* grad) {
  if (doc_batch.empty()) throw ParameterError("empty document batch");
  const LatentModel& model = params.model;
  const double kappa = model.kappa;
  LossBreakdown loss;

  const bool token_path = terms.clustering || terms.preservation;
  const bool need_topics = terms.clustering || terms.reconstruction;
  UnitTopics topics;
  if (need_topics) topics = unit_topics(model.topics);

  if (token_path) {
    const std::vector<std::size_t> token_index = batch_tokens(corpus, doc_batch);
    const auto n = static_cast<Eigen::Index>(token_index.size());
    Eigen::MatrixXd tokens(corpus.embeddings().rows(), n);
    for (Eigen::Index i = 0; i < n; ++i) {
      tokens.col(i) = corpus.embeddings().col(static_cast<Eigen::Index>(token_index[i]));
    }
    Mlp::Tape enc_tape;
    Eigen::MatrixXd latents = model.encoder.forward(tokens, enc_tape);
    const Eigen::VectorXd norms = normalize_columns(latents);
    Eigen::MatrixXd grad_latents = Eigen::MatrixXd::Zero(latents.rows(), latents.cols());

    if (terms.preservation) {
      Mlp::Tape dec_tape;
      const Eigen::MatrixXd residual = model.decoder.forward(latents, dec_tape) - tokens;
      loss.pre = residual.squaredNorm();
      if (grad) grad_latents += model.decoder.backward(dec_tape, 2.0 * residual, grad->model.decoder);
    }

    if (terms.clustering) {
      if (targets.rows() != static_cast<Eigen::Index>(corpus.num_tokens()) ||
          targets.cols() != model.topics.rows()) {
        throw ParameterError("targets must be N x K for the clustering term");
      }
      const Eigen::MatrixXd cos = latents.transpose() * topics.unit.transpose();
      const Eigen::MatrixXd probs = softmax_rows(cos, kappa);
      Eigen::MatrixXd q(n, targets.cols());
      for (Eigen::Index i = 0; i < n; ++i) {
        q.row(i) = targets.row(static_cast<Eigen::Index>(token_index[i]));
      }
      loss.clus = clustering_loss(probs, q);
      if (grad && terms.lambda != 0.0) {
        // d/dc_ik of -sum_k q_k log p_k is kappa (p_k sum(q) - q_k)
        Eigen::MatrixXd grad_cos = probs;
        grad_cos.array().colwise() *= q.rowwise().sum().array();
        grad_cos = terms.lambda * kappa * (grad_cos - q);
        grad_latents += cosine_backward(latents, topics, cos, grad_cos, grad->model.topics);
      }
    }

    if (grad) {
      model.encoder.backward(enc_tape, normalize_backward(latents, norms, grad_latents),
                             grad->model.encoder);
    }
  }

  if (terms.reconstruction) {
    const auto nd = static_cast<Eigen::Index>(doc_batch.size());
    const auto r = corpus.embeddings().rows();
    std::vector<Eigen::MatrixXd> doc_tokens(doc_batch.size());
    std::vector<AttentionTape> att_tapes(doc_batch.size());
    Eigen::MatrixXd pooled(r, nd);
    Eigen::MatrixXd generic(r, nd);
    for (Eigen::Index d = 0; d < nd; ++d) {
      doc_tokens[d] = pooling_tokens(params.attention, corpus, doc_batch[d]);
      pooled.col(d) = pool_document(params.attention, doc_tokens[d], att_tapes[d]);
      generic.col(d) = generic_document_embedding(corpus, doc_batch[d], false);
    }
    Mlp::Tape enc_tape;
    Eigen::MatrixXd latents = model.encoder.forward(pooled, enc_tape);
    const Eigen::VectorXd norms = normalize_columns(latents);

    Mlp::Tape topic_tape;
    const Eigen::MatrixXd decoded = model.decoder.forward(model.topics.transpose(), topic_tape);
    const Eigen::MatrixXd cos = latents.transpose() * topics.unit.transpose();  // nd x K
    const Eigen::MatrixXd probs = softmax_rows(cos, kappa);
    const Eigen::MatrixXd residual = decoded * probs.transpose() - generic;    // r x nd
    loss.rec = residual.squaredNorm();

    if (grad) {
      const Eigen::MatrixXd grad_recon = 2.0 * residual;
      const Eigen::MatrixXd grad_decoded = grad_recon * probs;                 // r x K
      const Eigen::MatrixXd grad_probs = grad_recon.transpose() * decoded;     // nd x K
      Eigen::MatrixXd grad_cos = grad_probs;
      const Eigen::VectorXd mean = (probs.array() * grad_probs.array()).rowwise().sum();
      grad_cos.colwise() -= mean;
      grad_cos = kappa * probs.cwiseProduct(grad_cos);
      const Eigen::MatrixXd grad_latents =
          cosine_backward(latents, topics, cos, grad_cos, grad->model.topics);
      const Eigen::MatrixXd grad_topic_inputs =
          model.decoder.backward(topic_tape, grad_decoded, grad->model.decoder);
      grad->model.topics += grad_topic_inputs.transpose();
      const Eigen::MatrixXd grad_pooled = model.encoder.backward(
          enc_tape, normalize_backward(latents, norms, grad_latents), grad->model.encoder);
      for (Eigen::Index d = 0; d < nd; ++d) {
        pool_document_backward(params.attention, doc_tokens[d], att_tapes[d], grad_pooled.col(d),
                               grad->attention);
      }
    }
  }

  loss.total = (terms.clustering ? terms.lambda * loss.clus : 0.0) + loss.rec + loss.pre;
  return loss;
}

PretrainResult pretrain(const Corpus& corpus, const TrainConfig& config) {
  config.validate();
  if (corpus.num_tokens() < config.num_topics) {
    throw ParameterError("corpus has fewer tokens than topics");
  }
  LatentShape shape{corpus.dim(), config.latent_dim, config.num_topics, config.encoder_hidden,
                    config.decoder_hidden};
  Rng init = substream(config.seed, "latent-init");
  Parameters params{initial_attention(corpus.dim(), config),
                    make_latent_model(shape, config.kappa, init)};
  Parameters grad = Parameters::zeros_like(params);
  Adam adam(params, adam_options(config));
  Rng shuffle = substream(config.seed, "pretrain-shuffle");

  std::vector<std::size_t> order(corpus.num_documents());
  std::iota(order.begin(), order.end(), 0);
  PretrainResult result;
  const ObjectiveTerms terms = ObjectiveTerms::preservation_only();

  for (std::size_t epoch = 0; epoch < config.pretrain_epochs; ++epoch) {
    result.epoch_loss.push_back(preservation_loss(params.model, corpus.embeddings()));
    std::shuffle(order.begin(), order.end(), shuffle);
    const auto batches = make_batches(order, config.batch_size);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      zero(grad);
      const LossBreakdown loss = batch_objective(params, corpus, batches[b], {}, terms, &grad);
      if (!finite(loss)) {
        throw TrainingError("pretraining diverged at epoch " + std::to_string(epoch + 1) +
                            " batch " + std::to_string(b + 1) + ": " + describe(loss) +
                            state_dump(params));
      }
      adam.step(params, grad);
    }
    spdlog::info("pretrain epoch {}: L_pre {:.9g}", epoch + 1, result.epoch_loss.back());
  }
  result.final_loss = preservation_loss(params.model, corpus.embeddings());
  if (!std::isfinite(result.final_loss)) {
    throw TrainingError("pretraining produced a non-finite loss" + state_dump(params));
  }

  const Eigen::MatrixXd latents = encode_all(params.model, corpus.embeddings());
  params.model.topics =
      init_topics_spherical_kmeans(latents, config.num_topics, config.seed, config.kmeans_max_iters);
  result.model = std::move(params.model);
  return result;
}

TrainResult train(const Corpus& corpus, const TrainConfig& config, const TrainObserver* observer) {
  return train_from(corpus, config, pretrain(corpus, config), observer);
}

TrainResult train_from(const Corpus& corpus, const TrainConfig& config, PretrainResult pretrained,
                       const TrainObserver* observer) {
  config.validate();
  TrainResult result;
  result.params.attention = initial_attention(corpus.dim(), config);
  result.params.model = pretrained.model;
  result.params.model.kappa = config.kappa;
  result.pretraining = std::move(pretrained);
  Parameters& params = result.params;

  for (std::size_t d = 0; d < corpus.num_documents(); ++d) generic_document_embedding(corpus, d);

  Parameters grad = Parameters::zeros_like(params);
  Adam adam(params, adam_options(config));
  Rng shuffle = substream(config.seed, "train-shuffle");
  std::vector<std::size_t> order(corpus.num_documents());
  std::iota(order.begin(), order.end(), 0);
  const ObjectiveTerms terms{config.lambda, true, true, true};

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const Eigen::MatrixXd targets = e_step(params.model, corpus);
    if (observer && observer->on_epoch_begin) observer->on_epoch_begin(epoch, targets);
    std::shuffle(order.begin(), order.end(), shuffle);
    const auto batches = make_batches(order, config.batch_size);
    LossBreakdown sum;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      zero(grad);
      const LossBreakdown loss = batch_objective(params, corpus, batches[b], targets, terms, &grad);
      if (!finite(loss)) {
        throw TrainingError("training aborted at epoch " + std::to_string(epoch) + " batch " +
                            std::to_string(b + 1) + ": non-finite loss, " + describe(loss) +
                            state_dump(params));
      }
      adam.step(params, grad);
      normalize_topics(params.model.topics);
      sum.clus += loss.clus;
      sum.rec += loss.rec;
      sum.pre += loss.pre;
      sum.total += loss.total;
      result.batch_log.push_back(loss);
      if (observer && observer->on_batch) observer->on_batch(epoch, b + 1, loss, params);
    }
    result.epoch_log.push_back(sum);
    if (observer && observer->on_epoch_end) observer->on_epoch_end(epoch, targets);
    spdlog::info("epoch {}: {}", epoch, describe(sum));
  }
  return result;
}

void write_epoch_log(const std::vector<LossBreakdown>& log, std::ostream& out) {
  char line[256];
  for (std::size_t e = 0; e < log.size(); ++e) {
    std::snprintf(line, sizeof line, "%zu\t%.9g\t%.9g\t%.9g\t%.9g\n", e + 1, log[e].clus,
                  log[e].rec, log[e].pre, log[e].total);
    out << line;
  }
}

GradientCheckReport gradient_check(const Parameters& params, const Corpus& corpus,
                                   std::span<const std::size_t> doc_batch,
                                   const Eigen::MatrixXd& targets, const ObjectiveTerms& terms,
                                   double tolerance) {
  if (corpus.dim() > 8 || params.model.latent_dim() > 4 || params.model.num_topics() > 3) {
    throw ParameterError("gradient_check is limited to r <= 8, r' <= 4, K <= 3");
  }
  constexpr double kStep = 1e-5;
  Parameters analytic = Parameters::zeros_like(params);
  batch_objective(params, corpus, doc_batch, targets, terms, &analytic);

  Parameters probe = params;
  auto probe_tensors = tensors(probe);
  auto analytic_tensors = tensors(analytic);
  GradientCheckReport report;
  for (std::size_t t = 0; t < probe_tensors.size(); ++t) {
    TensorView& p = probe_tensors[t];
    double diff = 0.0, norm_a = 0.0, norm_n = 0.0;
    for (std::size_t i = 0; i < p.size; ++i) {
      const double saved = p.data[i];
      p.data[i] = saved + kStep;
      const double plus = batch_objective(probe, corpus, doc_batch, targets, terms, nullptr).total;
      p.data[i] = saved - kStep;
      const double minus = batch_objective(probe, corpus, doc_batch, targets, terms, nullptr).total;
      p.data[i] = saved;
      const double numeric = (plus - minus) / (2.0 * kStep);
      const double a = analytic_tensors[t].data[i];
      diff += (a - numeric) * (a - numeric);
      norm_a += a * a;
      norm_n += numeric * numeric;
    }
    const double denom = std::sqrt(std::max(norm_a, norm_n));
    const double error = denom > 0.0 ? std::sqrt(diff) / denom : std::sqrt(diff);
    if (error > report.max_relative_error || report.worst_tensor.empty()) {
      report.max_relative_error = std::max(report.max_relative_error, error);
      if (error >= report.max_relative_error) report.worst_tensor = p.name;
    }
    if (error > tolerance) report.failures.push_back(p.name);
  }
  return report;
}

}  // namespace spheretopic
