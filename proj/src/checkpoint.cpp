#include "latgen/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace latgen {
namespace {

constexpr char kMagic[8] = {'L', 'A', 'T', 'G', 'E', 'N', 'C', 'K'};

class Writer {
public:
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  template <typename U>
  void uint(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  void str32(const std::string& s) {
    uint(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::string take() { return std::move(out_); }

private:
  std::string out_;
};

class Reader {
public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::string_view bytes(std::size_t n) {
    if (in_.size() - pos_ < n) throw CheckpointError("checkpoint truncated at byte " + std::to_string(pos_));
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  template <typename U>
  U uint() {
    auto b = bytes(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
  std::string str32() { return std::string(bytes(uint<std::uint32_t>())); }
  bool done() const { return pos_ == in_.size(); }

private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Model& model, const Vocabulary& vocab) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.uint(kCheckpointVersion);
  const std::string config = nlohmann::json(model.config).dump();
  w.uint(static_cast<std::uint64_t>(config.size()));
  w.bytes(config.data(), config.size());

  w.uint(static_cast<std::uint64_t>(vocab.size()));
  for (const std::string& t : vocab.tokens()) w.str32(t);
  w.uint(static_cast<std::uint32_t>(vocab.min_count()));

  w.uint(static_cast<std::uint64_t>(model.params.size()));
  for (const Parameter& p : model.params.all()) {
    w.str32(p.name);
    w.uint(static_cast<std::uint64_t>(p.value.rows()));
    w.uint(static_cast<std::uint64_t>(p.value.cols()));
    for (Index i = 0; i < p.value.size(); ++i) w.f64(p.value.data()[i]);
    w.uint(static_cast<std::uint8_t>(p.trainable ? 1 : 0));
  }
  return w.take();
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.bytes(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic)) throw CheckpointError("not a checkpoint file");
  const auto version = r.uint<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));

  Checkpoint ck;
  const auto config_len = r.uint<std::uint64_t>();
  try {
    ck.model.config = nlohmann::json::parse(r.bytes(config_len)).get<ModelConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad config record: ") + e.what());
  }

  const auto vocab_size = r.uint<std::uint64_t>();
  if (vocab_size > bytes.size()) throw CheckpointError("vocabulary larger than file");
  std::vector<std::string> tokens(vocab_size);
  for (auto& t : tokens) t = r.str32();
  const int min_count = static_cast<int>(r.uint<std::uint32_t>());
  try {
    ck.vocab = Vocabulary::from_tokens(std::move(tokens), min_count);
  } catch (const DataError& e) {
    throw CheckpointError(e.what());
  }

  const auto count = r.uint<std::uint64_t>();
  for (std::uint64_t k = 0; k < count; ++k) {
    std::string name = r.str32();
    const auto rows = r.uint<std::uint64_t>(), cols = r.uint<std::uint64_t>();
    if (rows * cols > bytes.size()) throw CheckpointError("parameter '" + name + "' larger than file");
    Tensor value(static_cast<Index>(rows), static_cast<Index>(cols));
    for (Index i = 0; i < value.size(); ++i) value.data()[i] = r.f64();
    const bool trainable = r.uint<std::uint8_t>() != 0;
    ck.model.params.add(std::move(name), std::move(value), trainable);
  }
  if (!r.done()) throw CheckpointError("trailing bytes after parameters");

  // The stored arrays must be exactly what the config would allocate.
  ParamStore expected = init_params(ck.model.config, 0);
  if (expected.size() != ck.model.params.size())
    throw CheckpointError("parameter set does not match the stored config");
  for (const Parameter& e : expected.all()) {
    const Parameter* p = ck.model.params.find(e.name);
    if (!p || p->value.rows() != e.value.rows() || p->value.cols() != e.value.cols())
      throw CheckpointError("parameter '" + e.name + "' missing or misshapen");
  }
  if (static_cast<int>(ck.vocab.size()) != ck.model.config.vocab_size)
    throw CheckpointError("vocabulary size does not match the stored config");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const Vocabulary& vocab) {
  const std::string data = serialize_checkpoint(model, vocab);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw CheckpointError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace latgen
