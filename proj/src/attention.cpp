#include "spheretopic/attention.hpp"

#include <cmath>
#include <string>

#include "spheretopic/errors.hpp"

namespace spheretopic {

AttentionParams AttentionParams::zeros_like(const AttentionParams& other) {
  AttentionParams z;
  z.weight = Eigen::MatrixXd::Zero(other.weight.rows(), other.weight.cols());
  z.bias = Eigen::VectorXd::Zero(other.bias.size());
  z.query = Eigen::VectorXd::Zero(other.query.size());
  z.content_words_only = other.content_words_only;
  return z;
}

AttentionParams init_attention(std::size_t r, std::size_t hidden_dim, Rng& rng) {
  if (r == 0 || hidden_dim == 0) throw ParameterError("attention dims must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(r));
  std::uniform_real_distribution<double> uniform(-bound, bound);
  const auto rows = static_cast<Eigen::Index>(hidden_dim);
  const auto cols = static_cast<Eigen::Index>(r);
  AttentionParams p;
  p.weight.resize(rows, cols);
  p.bias.resize(rows);
  p.query.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) p.weight(i, j) = uniform(rng);
  }
  for (Eigen::Index i = 0; i < rows; ++i) p.bias(i) = uniform(rng);
  for (Eigen::Index i = 0; i < rows; ++i) p.query(i) = uniform(rng);
  return p;
}

namespace {

void score_tokens(const AttentionParams& params, const Eigen::MatrixXd& tokens,
                  AttentionTape& tape) {
  if (tokens.cols() == 0) throw ParameterError("attention needs at least one token");
  if (tokens.rows() != params.weight.cols()) {
    throw ParameterError("token dimension does not match attention input dimension");
  }
  tape.hidden = params.weight * tokens;
  tape.hidden.colwise() += params.bias;
  tape.hidden = tape.hidden.array().tanh();
  Eigen::VectorXd logits = tape.hidden.transpose() * params.query;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    if (!std::isfinite(logits(i))) {
      throw NumericError("non-finite attention score at token " + std::to_string(i));
    }
  }
  const double peak = logits.maxCoeff();
  tape.weights = (logits.array() - peak).exp();
  tape.weights /= tape.weights.sum();
}

}  // namespace

Eigen::VectorXd attention_weights(const AttentionParams& params, const Eigen::MatrixXd& tokens) {
  AttentionTape tape;
  score_tokens(params, tokens, tape);
  return tape.weights;
}

Eigen::VectorXd pool_document(const AttentionParams& params, const Eigen::MatrixXd& tokens) {
  AttentionTape tape;
  return pool_document(params, tokens, tape);
}

Eigen::VectorXd pool_document(const AttentionParams& params, const Eigen::MatrixXd& tokens,
                              AttentionTape& tape) {
  score_tokens(params, tokens, tape);
  return tokens * tape.weights;
}

void pool_document_backward(const AttentionParams& params, const Eigen::MatrixXd& tokens,
                            const AttentionTape& tape, const Eigen::VectorXd& grad_pooled,
                            AttentionParams& grad) {
  // h_d = H alpha; alpha = softmax(s); s_i = v . l_i; l_i = tanh(W h_i + b)
  const Eigen::VectorXd grad_weights = tokens.transpose() * grad_pooled;
  const double mean = tape.weights.dot(grad_weights);
  const Eigen::VectorXd grad_logits = tape.weights.array() * (grad_weights.array() - mean);
  grad.query.noalias() += tape.hidden * grad_logits;
  const Eigen::MatrixXd grad_pre =
      (params.query * grad_logits.transpose()).array() * (1.0 - tape.hidden.array().square());
  grad.weight.noalias() += grad_pre * tokens.transpose();
  grad.bias += grad_pre.rowwise().sum();
}

Eigen::MatrixXd pooling_tokens(const AttentionParams& params, const Corpus& corpus,
                               std::size_t doc_index) {
  const Document& d = corpus.document(doc_index);
  if (!params.content_words_only) return corpus.document_embeddings(doc_index);
  std::vector<Eigen::Index> columns;
  for (std::size_t t = d.begin; t < d.end; ++t) {
    if (is_content_word(corpus.pos()[t])) columns.push_back(static_cast<Eigen::Index>(t));
  }
  if (columns.empty()) return corpus.document_embeddings(doc_index);
  return corpus.embeddings()(Eigen::all, columns);
}

}  // namespace spheretopic
