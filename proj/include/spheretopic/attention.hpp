#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "spheretopic/corpus.hpp"
#include "spheretopic/rng.hpp"

namespace spheretopic {

// Scores how topic-indicative each token is: l_i = tanh(W h_i + b),
// logit_i = l_i . v, weights = softmax over the document's tokens.
struct AttentionParams {
  Eigen::MatrixXd weight;  // d_a x r
  Eigen::VectorXd bias;    // d_a
  Eigen::VectorXd query;   // d_a
  // Pool over noun/verb/adjective tokens only (all tokens if a document has none).
  bool content_words_only = false;

  std::size_t input_dim() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t hidden_dim() const { return static_cast<std::size_t>(weight.rows()); }

  static AttentionParams zeros_like(const AttentionParams& other);
};

// Entries uniform in +-1/sqrt(r).
AttentionParams init_attention(std::size_t r, std::size_t hidden_dim, Rng& rng);

// H is r x n, one column per token. Throws NumericError naming the token when
// a score is non-finite.
Eigen::VectorXd attention_weights(const AttentionParams& params, const Eigen::MatrixXd& tokens);
Eigen::VectorXd pool_document(const AttentionParams& params, const Eigen::MatrixXd& tokens);

struct AttentionTape {
  Eigen::MatrixXd hidden;   // tanh activations, d_a x n
  Eigen::VectorXd weights;  // alpha
};

Eigen::VectorXd pool_document(const AttentionParams& params, const Eigen::MatrixXd& tokens,
                              AttentionTape& tape);

// Backpropagates d(loss)/d(h_d) into `grad`. Token embeddings are constants.
void pool_document_backward(const AttentionParams& params, const Eigen::MatrixXd& tokens,
                            const AttentionTape& tape, const Eigen::VectorXd& grad_pooled,
                            AttentionParams& grad);

// The token columns the attention pools over for a document.
Eigen::MatrixXd pooling_tokens(const AttentionParams& params, const Corpus& corpus,
                               std::size_t doc_index);

}  // namespace spheretopic
