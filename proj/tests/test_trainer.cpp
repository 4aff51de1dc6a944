#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "spheretopic/checkpoint.hpp"
#include "spheretopic/errors.hpp"
#include "spheretopic/trainer.hpp"
#include "support.hpp"

namespace st = spheretopic;
namespace ts = testing_support;

namespace {

st::TrainConfig small_config(std::uint64_t seed = 3) {
  st::TrainConfig c;
  c.num_topics = 3;
  c.latent_dim = 4;
  c.kappa = 5.0;
  c.lambda = 0.1;
  c.epochs = 2;
  c.pretrain_epochs = 2;
  c.learning_rate = 1e-3;
  c.batch_size = 4;
  c.seed = seed;
  c.attention_dim = 4;
  c.encoder_hidden = {8};
  c.decoder_hidden = {8};
  return c;
}

st::Corpus small_corpus(std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  return ts::random_corpus(rng, 6, {4, 3, 5, 2, 6, 4, 3, 5, 4}, 10);
}

st::Corpus single_doc(const Eigen::MatrixXd& embeddings, std::vector<st::PosClass> pos = {}) {
  const auto n = static_cast<std::size_t>(embeddings.cols());
  if (pos.empty()) pos.assign(n, st::PosClass::kNoun);
  return st::Corpus({{1, 0, n}}, std::vector<std::uint32_t>(n, 0), std::move(pos), embeddings,
                    st::Vocabulary({{0, "w", n}}));
}

st::LatentModel tiny_model(std::uint64_t seed, std::size_t r, std::size_t r_prime, std::size_t k) {
  st::Rng rng(seed);
  return st::make_latent_model({r, r_prime, k, {5}, {5}}, 4.0, rng);
}

}  // namespace

TEST(ClusteringLoss, MatchingOneHotIsZero) {
  const Eigen::MatrixXd p = Eigen::MatrixXd::Identity(3, 3);
  EXPECT_DOUBLE_EQ(st::clustering_loss(p, p), 0.0);
}

TEST(ClusteringLoss, OneHotAgainstUniform) {
  const Eigen::MatrixXd q = Eigen::MatrixXd::Identity(4, 4);
  const Eigen::MatrixXd p = Eigen::MatrixXd::Constant(4, 4, 0.25);
  EXPECT_NEAR(st::clustering_loss(p, q), 4 * std::log(4.0), 1e-12);
}

TEST(ClusteringLoss, HandExample) {
  Eigen::MatrixXd q(1, 2), p(1, 2);
  q << 0.8, 0.2;
  p << 0.5, 0.5;
  EXPECT_NEAR(st::clustering_loss(p, q), 0.6931, 1e-4);
  EXPECT_NEAR(st::clustering_loss(p, q), std::log(2.0), 1e-15);
}

TEST(ClusteringLoss, ZeroProbabilityIsFloored) {
  Eigen::MatrixXd q(1, 2), p(1, 2);
  q << 1.0, 0.0;
  p << 0.0, 1.0;
  EXPECT_NEAR(st::clustering_loss(p, q), -std::log(1e-12), 1e-9);
}

TEST(ClusteringLoss, ShapeMismatchRejected) {
  EXPECT_THROW(st::clustering_loss(Eigen::MatrixXd::Zero(2, 3), Eigen::MatrixXd::Zero(3, 2)),
               st::ParameterError);
}

TEST(PreservationLoss, ZeroReconstruction) {
  st::LatentModel m{st::Mlp::zeros({2, 1}), st::Mlp::zeros({1, 2}), Eigen::MatrixXd::Ones(2, 1), 1.0};
  m.encoder.layers()[0].bias << 1.0;
  Eigen::MatrixXd h(2, 1);
  h << 3, 4;
  EXPECT_DOUBLE_EQ(st::preservation_loss(m, h), 25.0);
  Eigen::MatrixXd two(2, 2);
  two << 3, 1, 4, -2;
  EXPECT_DOUBLE_EQ(st::preservation_loss(m, two), 30.0);
}

TEST(PreservationLoss, PerfectAutoencoderIsZero) {
  // Tokens on the ray x = y map to z = 1 and decode back exactly.
  st::LatentModel m{st::Mlp::zeros({2, 1}), st::Mlp::zeros({1, 2}), Eigen::MatrixXd::Ones(2, 1), 1.0};
  m.encoder.layers()[0].weight << 1, 1;
  m.decoder.layers()[0].weight << 2, 2;
  Eigen::MatrixXd h(2, 1);
  h << 2, 2;
  EXPECT_DOUBLE_EQ(st::preservation_loss(m, h), 0.0);
}

TEST(PreservationLoss, EmptyBatchRejected) {
  const auto m = tiny_model(1, 4, 2, 2);
  EXPECT_THROW(st::preservation_loss(m, Eigen::MatrixXd(4, 0)), st::ParameterError);
}

TEST(ReconstructionLoss, HandToyInstance) {
  // Topics +1 and -1 on the 1-sphere decode to [1,0] and [0,1]. The document
  // pools to the origin, the encoder bias sends it to z = -1, and kappa is
  // chosen so that p = [0.3, 0.7]. The content mean is [0,0].
  Eigen::MatrixXd topics(2, 1);
  topics << 1, -1;
  const double kappa = 0.5 * std::log(7.0 / 3.0);
  st::LatentModel m{st::Mlp::zeros({2, 1}), st::Mlp::zeros({1, 2}), topics, kappa};
  m.encoder.layers()[0].bias << -1.0;
  m.decoder.layers()[0].weight << 0.5, -0.5;
  m.decoder.layers()[0].bias << 0.5, 0.5;
  st::AttentionParams att;
  att.weight = Eigen::MatrixXd::Zero(1, 2);
  att.bias = Eigen::VectorXd::Zero(1);
  att.query = Eigen::VectorXd::Ones(1);
  Eigen::MatrixXd e(2, 2);
  e << 1, -1, 1, -1;
  const st::Corpus c = single_doc(e);
  const std::size_t doc = 0;
  EXPECT_NEAR(st::reconstruction_loss(m, att, c, {&doc, 1}), 0.58, 1e-12);
}

TEST(ReconstructionLoss, SingleTopicIgnoresDocument) {
  std::mt19937_64 rng(2);
  const st::Corpus c = ts::random_corpus(rng, 4, {3, 2, 4}, 5);
  st::Rng init(2);
  const st::LatentModel m = st::make_latent_model({4, 2, 1, {5}, {5}}, 3.0, init);
  const auto att = st::init_attention(4, 3, init);
  const Eigen::VectorXd g = st::decode(m, m.topics.row(0).transpose());
  double expected = 0.0;
  for (std::size_t d = 0; d < 3; ++d) {
    expected += (g - st::generic_document_embedding(c, d, false)).squaredNorm();
  }
  const std::vector<std::size_t> all{0, 1, 2};
  EXPECT_NEAR(st::reconstruction_loss(m, att, c, all), expected, 1e-12);
}

TEST(EStep, SingleTokenTargetEqualsPosterior) {
  std::mt19937_64 rng(3);
  Eigen::MatrixXd e(4, 1);
  e.col(0) = ts::random_unit(rng, 4) * 2.0;
  const st::Corpus c = single_doc(e);
  const auto m = tiny_model(3, 4, 2, 3);
  const Eigen::MatrixXd p = st::topic_posterior(st::encode_all(m, e), m.topics, m.kappa);
  EXPECT_LT((st::e_step(m, c) - p).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(EStep, ZeroKappaIsUniform) {
  const st::Corpus c = small_corpus();
  auto m = tiny_model(4, 6, 3, 4);
  m.kappa = 0.0;
  const Eigen::MatrixXd q = st::e_step(m, c);
  EXPECT_LT((q.array() - 0.25).abs().maxCoeff(), 1e-15);
}

TEST(EStep, TokenPermutationPermutesRows) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd e(5, 9);
    for (Eigen::Index i = 0; i < 9; ++i) e.col(i) = ts::random_unit(rng, 5) * (1.0 + i);
    std::vector<Eigen::Index> perm(9);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto m = tiny_model(static_cast<std::uint64_t>(trial), 5, 3, 3);
    const Eigen::MatrixXd q = st::e_step(m, single_doc(e));
    const Eigen::MatrixXd qp = st::e_step(m, single_doc(e(Eigen::all, perm)));
    for (Eigen::Index i = 0; i < 9; ++i) {
      EXPECT_LT((qp.row(i) - q.row(perm[static_cast<std::size_t>(i)])).cwiseAbs().maxCoeff(), 1e-14);
    }
  }
}

class GradientCheck : public ::testing::Test {
 protected:
  void SetUp() override {
    std::mt19937_64 rng(21);
    corpus = ts::random_corpus(rng, 7, {3, 4}, 4, 0.3);
    st::Rng init = st::substream(21, "grad-test");
    params.model = st::make_latent_model({7, 3, 3, {5}, {4, 5}}, 6.0, init);
    params.attention = st::init_attention(7, 4, init);
    targets = st::e_step(params.model, corpus);
  }

  st::Corpus corpus;
  st::Parameters params;
  Eigen::MatrixXd targets;
  const std::vector<std::size_t> batch{0, 1};
};

TEST_F(GradientCheck, PreservationOnly) {
  const auto report = st::gradient_check(params, corpus, batch, {},
                                         st::ObjectiveTerms::preservation_only(), 1e-5);
  EXPECT_TRUE(report.passed()) << report.worst_tensor << " " << report.max_relative_error;
}

TEST_F(GradientCheck, EachTermAlone) {
  const st::ObjectiveTerms clus{0.7, true, false, false}, rec{0.1, false, true, false};
  for (const auto& terms : {clus, rec}) {
    const auto report = st::gradient_check(params, corpus, batch, targets, terms, 1e-5);
    EXPECT_TRUE(report.passed()) << report.worst_tensor << " " << report.max_relative_error;
  }
}

TEST_F(GradientCheck, FullObjective) {
  const auto report = st::gradient_check(params, corpus, batch, targets, {0.1, true, true, true}, 1e-5);
  EXPECT_TRUE(report.passed()) << report.worst_tensor << " " << report.max_relative_error;
  EXPECT_LT(report.max_relative_error, 1e-5);
}

TEST_F(GradientCheck, ZeroWeightGivesZeroGradient) {
  const auto report = st::gradient_check(params, corpus, batch, targets, {0.0, true, false, false}, 1e-12);
  EXPECT_TRUE(report.passed());
  EXPECT_EQ(report.max_relative_error, 0.0);
}

TEST_F(GradientCheck, ObjectiveIdentity) {
  st::Parameters grad = st::Parameters::zeros_like(params);
  const auto loss = st::batch_objective(params, corpus, batch, targets, {0.3, true, true, true}, &grad);
  EXPECT_NEAR(loss.total, 0.3 * loss.clus + loss.rec + loss.pre, 1e-12);
  EXPECT_GE(loss.rec, 0.0);
  EXPECT_GE(loss.pre, 0.0);
  const auto plain = st::batch_objective(params, corpus, batch, targets, {0.3, true, true, true}, nullptr);
  EXPECT_EQ(plain.total, loss.total);
}

TEST_F(GradientCheck, OversizedModelRejected) {
  std::mt19937_64 rng(1);
  const st::Corpus big = ts::random_corpus(rng, 9, {3}, 3);
  st::Rng init(1);
  st::Parameters p{st::init_attention(9, 2, init), st::make_latent_model({9, 3, 2, {4}, {4}}, 1.0, init)};
  const std::vector<std::size_t> one{0};
  EXPECT_THROW(st::gradient_check(p, big, one, {}, st::ObjectiveTerms::preservation_only(), 1e-4),
               st::ParameterError);
}

TEST(TrainConfig, Validation) {
  EXPECT_NO_THROW(small_config().validate());
  auto bad = [](auto mutate) {
    st::TrainConfig c = small_config();
    mutate(c);
    EXPECT_THROW(c.validate(), st::ParameterError);
  };
  bad([](st::TrainConfig& c) { c.num_topics = 1; });
  bad([](st::TrainConfig& c) { c.kappa = -1.0; });
  bad([](st::TrainConfig& c) { c.lambda = -0.1; });
  bad([](st::TrainConfig& c) { c.batch_size = 0; });
  bad([](st::TrainConfig& c) { c.learning_rate = 0.0; });
  bad([](st::TrainConfig& c) { c.adam_beta1 = 1.0; });
  bad([](st::TrainConfig& c) { c.adam_epsilon = 0.0; });
  bad([](st::TrainConfig& c) { c.attention_dim = 0; });
  st::TrainConfig zeros = small_config();
  zeros.lambda = 0.0;
  zeros.epochs = 0;
  EXPECT_NO_THROW(zeros.validate());
}

TEST(Pretrain, ZeroEpochsSmokePath) {
  st::TrainConfig c = small_config();
  c.pretrain_epochs = 0;
  const auto result = st::pretrain(small_corpus(), c);
  EXPECT_TRUE(result.epoch_loss.empty());
  EXPECT_EQ(result.model.topics.rows(), 3);
  EXPECT_EQ(result.model.topics.cols(), 4);
  EXPECT_LT((result.model.topics.rowwise().norm().array() - 1.0).abs().maxCoeff(), 1e-12);
  EXPECT_TRUE(std::isfinite(result.final_loss));
}

TEST(Pretrain, LossDecreases) {
  st::TrainConfig c = small_config();
  c.pretrain_epochs = 15;
  c.learning_rate = 3e-3;
  const auto result = st::pretrain(small_corpus(), c);
  ASSERT_EQ(result.epoch_loss.size(), 15u);
  EXPECT_LT(result.final_loss, result.epoch_loss.front());
}

TEST(Pretrain, TooFewTokensRejected) {
  st::TrainConfig c = small_config();
  c.num_topics = 50;
  EXPECT_THROW(st::pretrain(small_corpus(), c), st::ParameterError);
}

TEST(Train, ZeroEpochsReturnsPretrainedState) {
  st::TrainConfig c = small_config();
  c.epochs = 0;
  const st::Corpus corpus = small_corpus();
  const auto pre = st::pretrain(corpus, c);
  const auto result = st::train_from(corpus, c, pre);
  EXPECT_TRUE(result.epoch_log.empty());
  EXPECT_EQ(result.params.model.topics, pre.model.topics);
  for (std::size_t l = 0; l < pre.model.encoder.layers().size(); ++l) {
    EXPECT_EQ(result.params.model.encoder.layers()[l].weight, pre.model.encoder.layers()[l].weight);
  }
  for (std::size_t l = 0; l < pre.model.decoder.layers().size(); ++l) {
    EXPECT_EQ(result.params.model.decoder.layers()[l].bias, pre.model.decoder.layers()[l].bias);
  }
}

TEST(Train, LambdaZeroExcludesClustering) {
  st::TrainConfig c = small_config();
  c.lambda = 0.0;
  const auto result = st::train(small_corpus(), c);
  ASSERT_FALSE(result.batch_log.empty());
  for (const auto& l : result.batch_log) EXPECT_NEAR(l.total, l.rec + l.pre, 1e-9);
  for (const auto& l : result.epoch_log) EXPECT_NEAR(l.total, l.rec + l.pre, 1e-9);
}

TEST(Train, LoggedTotalsSatisfyIdentity) {
  st::TrainConfig c = small_config();
  c.lambda = 0.4;
  const auto result = st::train(small_corpus(), c);
  ASSERT_EQ(result.epoch_log.size(), 2u);
  ASSERT_EQ(result.batch_log.size(), 2u * 3u);
  for (const auto& l : result.batch_log) {
    EXPECT_NEAR(l.total, 0.4 * l.clus + l.rec + l.pre, 1e-9);
    EXPECT_GE(l.rec, 0.0);
    EXPECT_GE(l.pre, 0.0);
  }
}

TEST(Train, TopicsStayUnitAfterEveryStep) {
  st::TrainConfig c = small_config();
  c.epochs = 3;
  st::TrainObserver obs;
  std::size_t calls = 0, begins = 0;
  obs.on_batch = [&](std::size_t, std::size_t, const st::LossBreakdown&, const st::Parameters& p) {
    ++calls;
    EXPECT_LT((p.model.topics.rowwise().norm().array() - 1.0).abs().maxCoeff(), 1e-12);
  };
  obs.on_epoch_begin = [&](std::size_t, const Eigen::MatrixXd& q) {
    ++begins;
    EXPECT_LT((q.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
  };
  st::train(small_corpus(), c, &obs);
  EXPECT_EQ(calls, 9u);
  EXPECT_EQ(begins, 3u);
}

TEST(Train, SameSeedSameCheckpoint) {
  const st::Corpus corpus = small_corpus();
  const auto a = st::train(corpus, small_config(8));
  const auto b = st::train(corpus, small_config(8));
  const auto other = st::train(corpus, small_config(9));
  EXPECT_EQ(st::serialize_checkpoint({a.params, 8}), st::serialize_checkpoint({b.params, 8}));
  EXPECT_NE(st::serialize_checkpoint({a.params, 8}), st::serialize_checkpoint({other.params, 8}));
}

TEST(EpochLog, Format) {
  std::ostringstream out;
  st::write_epoch_log({{0.5, 1.0, 2.0, 3.05}, {1.0 / 3.0, 0.0, 0.0, 0.25}}, out);
  EXPECT_EQ(out.str(), "1\t0.5\t1\t2\t3.05\n2\t0.333333333\t0\t0\t0.25\n");
}
