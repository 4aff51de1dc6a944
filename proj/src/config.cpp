#include "spheretopic/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>

#include "spheretopic/errors.hpp"

namespace spheretopic {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ParameterError("config key '" + key + "': expected a nonnegative integer, got '" + value + "'");
  }
  return out;
}

double to_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ParameterError("config key '" + key + "': expected a number, got '" + value + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ParameterError("config key '" + key + "': expected true/false, got '" + value + "'");
}

std::vector<std::size_t> to_dims(const std::string& key, const std::string& value) {
  std::vector<std::size_t> dims;
  std::stringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) dims.push_back(to_u64(key, trim(item)));
  if (dims.empty()) throw ParameterError("config key '" + key + "': empty list");
  return dims;
}

std::string join(const std::vector<std::size_t>& dims) {
  std::string out;
  for (std::size_t i = 0; i < dims.size(); ++i) out += (i ? "," : "") + std::to_string(dims[i]);
  return out;
}

std::string number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"embeddings", [](RunConfig& c, auto&, auto& v) { c.embeddings = v; }},
      {"vocab", [](RunConfig& c, auto&, auto& v) { c.vocab = v; }},
      {"labels", [](RunConfig& c, auto&, auto& v) { c.labels = v; }},
      {"out_dir", [](RunConfig& c, auto&, auto& v) { c.out_dir = v; }},
      {"min_count", [](RunConfig& c, auto& k, auto& v) { c.min_count = to_u64(k, v); }},
      {"m_coherence", [](RunConfig& c, auto& k, auto& v) { c.m_coherence = to_u64(k, v); }},
      {"m_diversity", [](RunConfig& c, auto& k, auto& v) { c.m_diversity = to_u64(k, v); }},
      {"window", [](RunConfig& c, auto& k, auto& v) { c.window = to_u64(k, v); }},
      {"K", [](RunConfig& c, auto& k, auto& v) { c.train.num_topics = to_u64(k, v); }},
      {"r_prime", [](RunConfig& c, auto& k, auto& v) { c.train.latent_dim = to_u64(k, v); }},
      {"kappa", [](RunConfig& c, auto& k, auto& v) { c.train.kappa = to_double(k, v); }},
      {"lambda", [](RunConfig& c, auto& k, auto& v) { c.train.lambda = to_double(k, v); }},
      {"epochs", [](RunConfig& c, auto& k, auto& v) { c.train.epochs = to_u64(k, v); }},
      {"pretrain_epochs", [](RunConfig& c, auto& k, auto& v) { c.train.pretrain_epochs = to_u64(k, v); }},
      {"learning_rate", [](RunConfig& c, auto& k, auto& v) { c.train.learning_rate = to_double(k, v); }},
      {"batch_size", [](RunConfig& c, auto& k, auto& v) { c.train.batch_size = to_u64(k, v); }},
      {"seed", [](RunConfig& c, auto& k, auto& v) { c.train.seed = to_u64(k, v); }},
      {"adam_beta1", [](RunConfig& c, auto& k, auto& v) { c.train.adam_beta1 = to_double(k, v); }},
      {"adam_beta2", [](RunConfig& c, auto& k, auto& v) { c.train.adam_beta2 = to_double(k, v); }},
      {"adam_epsilon", [](RunConfig& c, auto& k, auto& v) { c.train.adam_epsilon = to_double(k, v); }},
      {"grad_check_tolerance",
       [](RunConfig& c, auto& k, auto& v) { c.train.grad_check_tolerance = to_double(k, v); }},
      {"attention_dim", [](RunConfig& c, auto& k, auto& v) { c.train.attention_dim = to_u64(k, v); }},
      {"attention_content_only",
       [](RunConfig& c, auto& k, auto& v) { c.train.attention_content_only = to_bool(k, v); }},
      {"encoder_hidden", [](RunConfig& c, auto& k, auto& v) { c.train.encoder_hidden = to_dims(k, v); }},
      {"decoder_hidden", [](RunConfig& c, auto& k, auto& v) { c.train.decoder_hidden = to_dims(k, v); }},
      {"kmeans_max_iters", [](RunConfig& c, auto& k, auto& v) { c.train.kmeans_max_iters = to_u64(k, v); }},
  };
  return table;
}

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> values;
  std::stringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParameterError("config line " + std::to_string(number) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParameterError("config line " + std::to_string(number) + ": empty key");
    if (!values.emplace(key, value).second) {
      throw ParameterError("config line " + std::to_string(number) + ": duplicate key '" + key + "'");
    }
  }
  return values;
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse_config_text(std::string(std::istreambuf_iterator<char>(in), {}));
}

void apply_config(const std::map<std::string, std::string>& values, RunConfig& config) {
  for (const auto& [key, value] : values) {
    auto it = setters().find(key);
    if (it == setters().end()) throw ParameterError("unknown config key '" + key + "'");
    it->second(config, key, value);
  }
}

std::string format_config(const RunConfig& c) {
  const TrainConfig& t = c.train;
  std::map<std::string, std::string> values = {
      {"embeddings", c.embeddings.string()},
      {"vocab", c.vocab.string()},
      {"labels", c.labels.string()},
      {"out_dir", c.out_dir.string()},
      {"min_count", std::to_string(c.min_count)},
      {"m_coherence", std::to_string(c.m_coherence)},
      {"m_diversity", std::to_string(c.m_diversity)},
      {"window", std::to_string(c.window)},
      {"K", std::to_string(t.num_topics)},
      {"r_prime", std::to_string(t.latent_dim)},
      {"kappa", number(t.kappa)},
      {"lambda", number(t.lambda)},
      {"epochs", std::to_string(t.epochs)},
      {"pretrain_epochs", std::to_string(t.pretrain_epochs)},
      {"learning_rate", number(t.learning_rate)},
      {"batch_size", std::to_string(t.batch_size)},
      {"seed", std::to_string(t.seed)},
      {"adam_beta1", number(t.adam_beta1)},
      {"adam_beta2", number(t.adam_beta2)},
      {"adam_epsilon", number(t.adam_epsilon)},
      {"grad_check_tolerance", number(t.grad_check_tolerance)},
      {"attention_dim", std::to_string(t.attention_dim)},
      {"attention_content_only", t.attention_content_only ? "true" : "false"},
      {"encoder_hidden", join(t.encoder_hidden)},
      {"decoder_hidden", join(t.decoder_hidden)},
      {"kmeans_max_iters", std::to_string(t.kmeans_max_iters)},
  };
  std::string out;
  for (const auto& [key, value] : values) out += key + " = " + value + "\n";
  return out;
}

}  // namespace spheretopic
