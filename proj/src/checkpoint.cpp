#include "spheretopic/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "spheretopic/errors.hpp"

namespace spheretopic {

namespace {

constexpr char kMagic[4] = {'T', 'P', 'C', 'K'};

class Writer {
 public:
  template <typename T>
  void put(T value) {
    const auto bits = static_cast<std::uint64_t>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes_.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
  void put_f64(double value) { put<std::uint64_t>(std::bit_cast<std::uint64_t>(value)); }

  void put_matrix(const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) put_f64(m(i, j));
    }
  }
  void put_vector(const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) put_f64(v(i));
  }
  void put_mlp(const Mlp& mlp) {
    put<std::uint32_t>(static_cast<std::uint32_t>(mlp.layers().size()));
    for (const Mlp::Layer& l : mlp.layers()) {
      put<std::uint32_t>(static_cast<std::uint32_t>(l.weight.rows()));
      put<std::uint32_t>(static_cast<std::uint32_t>(l.weight.cols()));
      put_matrix(l.weight);
      put_vector(l.bias);
    }
  }

  std::string take() { return std::move(bytes_); }

 private:
  std::string bytes_;
};

class Reader {
 public:
  Reader(std::string bytes, std::string path) : bytes_(std::move(bytes)), path_(std::move(path)) {}

  std::uint64_t offset() const { return offset_; }
  bool at_end() const { return offset_ == bytes_.size(); }
  const std::string& path() const { return path_; }

  template <typename T>
  T get(const char* what) {
    if (bytes_.size() - offset_ < sizeof(T)) {
      throw FormatError(path_, offset_, std::string("truncated checkpoint: expected ") + what);
    }
    std::uint64_t value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      value |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[offset_ + i])) << (8 * i);
    }
    offset_ += sizeof(T);
    return static_cast<T>(value);
  }
  double get_f64(const char* what) { return std::bit_cast<double>(get<std::uint64_t>(what)); }

  // Rejects sizes the remaining bytes cannot hold before allocating.
  void require(std::uint64_t count, const char* what) {
    if (count > (bytes_.size() - offset_) / 8) {
      throw FormatError(path_, offset_, std::string("truncated checkpoint: ") + what);
    }
  }

  Eigen::MatrixXd get_matrix(std::uint32_t rows, std::uint32_t cols, const char* what) {
    require(static_cast<std::uint64_t>(rows) * cols, what);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = get_f64(what);
    }
    return m;
  }
  Eigen::VectorXd get_vector(std::uint32_t size, const char* what) {
    require(size, what);
    Eigen::VectorXd v(size);
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = get_f64(what);
    return v;
  }
  Mlp get_mlp(const char* what) {
    const std::uint64_t at = offset_;
    const auto count = get<std::uint32_t>("layer count");
    if (count == 0 || count > 64) throw FormatError(path_, at, std::string("bad layer count in ") + what);
    Mlp mlp;
    std::uint32_t previous_out = 0;
    for (std::uint32_t l = 0; l < count; ++l) {
      const std::uint64_t layer_at = offset_;
      const auto out = get<std::uint32_t>("layer rows");
      const auto in = get<std::uint32_t>("layer cols");
      if (out == 0 || in == 0 || (l > 0 && in != previous_out)) {
        throw FormatError(path_, layer_at, std::string("incompatible layer dims in ") + what);
      }
      previous_out = out;
      Mlp::Layer layer;
      layer.weight = get_matrix(out, in, what);
      layer.bias = get_vector(out, what);
      mlp.layers().push_back(std::move(layer));
    }
    return mlp;
  }

 private:
  std::string bytes_;
  std::string path_;
  std::uint64_t offset_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
  const Parameters& p = checkpoint.params;
  const LatentModel& m = p.model;
  Writer w;
  for (char c : kMagic) w.put<std::uint8_t>(static_cast<std::uint8_t>(c));
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint64_t>(checkpoint.seed);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.input_dim()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.latent_dim()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.num_topics()));
  w.put_f64(m.kappa);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(p.attention.hidden_dim()));
  w.put<std::uint8_t>(p.attention.content_words_only ? 1 : 0);
  w.put_matrix(p.attention.weight);
  w.put_vector(p.attention.bias);
  w.put_vector(p.attention.query);
  w.put_mlp(m.encoder);
  w.put_mlp(m.decoder);
  w.put_matrix(m.topics);
  return w.take();
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError(path.string(), 0, "bad magic, expected \"TPCK\"");
  }
  Reader r(std::move(bytes), path.string());
  r.get<std::uint32_t>("magic");
  const std::uint64_t version_at = r.offset();
  if (r.get<std::uint32_t>("version") != kCheckpointVersion) {
    throw FormatError(path.string(), version_at, "unsupported checkpoint version");
  }
  Checkpoint ck;
  ck.seed = r.get<std::uint64_t>("seed");
  const std::uint64_t dims_at = r.offset();
  const auto input_dim = r.get<std::uint32_t>("r");
  const auto latent_dim = r.get<std::uint32_t>("r'");
  const auto topics = r.get<std::uint32_t>("K");
  if (input_dim == 0 || latent_dim == 0 || topics == 0) {
    throw FormatError(path.string(), dims_at, "zero dimension");
  }
  LatentModel& m = ck.params.model;
  m.kappa = r.get_f64("kappa");
  const auto att_dim = r.get<std::uint32_t>("attention dim");
  ck.params.attention.content_words_only = r.get<std::uint8_t>("attention flag") != 0;
  ck.params.attention.weight = r.get_matrix(att_dim, input_dim, "attention weight");
  ck.params.attention.bias = r.get_vector(att_dim, "attention bias");
  ck.params.attention.query = r.get_vector(att_dim, "attention query");
  const std::uint64_t enc_at = r.offset();
  m.encoder = r.get_mlp("encoder");
  if (m.encoder.input_dim() != input_dim || m.encoder.output_dim() != latent_dim) {
    throw FormatError(path.string(), enc_at, "encoder dims disagree with header");
  }
  const std::uint64_t dec_at = r.offset();
  m.decoder = r.get_mlp("decoder");
  if (m.decoder.input_dim() != latent_dim || m.decoder.output_dim() != input_dim) {
    throw FormatError(path.string(), dec_at, "decoder dims disagree with header");
  }
  m.topics = r.get_matrix(topics, latent_dim, "topics");
  if (!r.at_end()) throw FormatError(path.string(), r.offset(), "trailing bytes");
  return ck;
}

}  // namespace spheretopic
