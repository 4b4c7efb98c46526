#include "grpolab/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "grpolab/util.hpp"

namespace grpolab {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'G', 'P', 'L', 'C'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof(bits));
  put_u64(out, bits);
}

class ByteReader {
 public:
  ByteReader(const std::string& data, const std::string& where)
      : data_(data), where_(where) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }

  double f64() {
    const std::uint64_t bits = u64();
    double d;
    std::memcpy(&d, &bits, sizeof(d));
    return d;
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool exhausted() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw DataError(where_ + ": truncated checkpoint");
  }
  const std::string& data_;
  std::string where_;
  std::size_t pos_ = 0;
};

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return data;
}

// 17 significant digits round-trips any finite double exactly.
std::string double_to_decimal(double d) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", d);
  return buf;
}

PolicyParams rebuild_params(const Vocabulary& vocab, int context_window, int embed_dim,
                            int hidden_dim, std::vector<double> weights,
                            const std::string& where) {
  PolicyConfig cfg{context_window, embed_dim, hidden_dim};
  PolicyParams p = PolicyParams::zeros(vocab, cfg);
  if (weights.size() != p.param_count())
    throw DataError(where + ": parameter count " + std::to_string(weights.size()) +
                    " does not match dims (expected " + std::to_string(p.param_count()) + ")");
  p.weights = std::move(weights);
  return p;
}

}  // namespace

void save_checkpoint(const Vocabulary& vocab, const PolicyParams& params,
                     const std::filesystem::path& path) {
  if (vocab.size() != params.vocab_size)
    throw std::invalid_argument("checkpoint: vocabulary size mismatch");
  if (path.extension() == ".json") {
    json j;
    j["format_version"] = kCheckpointFormatVersion;
    j["context_window"] = params.context_window;
    j["embed_dim"] = params.embed_dim;
    j["hidden_dim"] = params.hidden_dim;
    j["vocab"] = vocab.tokens();
    json values = json::array();
    for (double w : params.weights) values.push_back(double_to_decimal(w));
    j["params"] = std::move(values);
    write_atomic(path, j.dump() + "\n");
    return;
  }
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put_u32(out, kCheckpointFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(params.context_window));
  put_u32(out, static_cast<std::uint32_t>(params.embed_dim));
  put_u32(out, static_cast<std::uint32_t>(params.hidden_dim));
  put_u32(out, static_cast<std::uint32_t>(vocab.size()));
  for (const std::string& tok : vocab.tokens()) {
    put_u32(out, static_cast<std::uint32_t>(tok.size()));
    out += tok;
  }
  put_u64(out, params.param_count());
  for (double w : params.weights) put_f64(out, w);
  write_atomic(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string where = path.string();
  const std::string data = read_all(path);
  if (path.extension() == ".json") {
    json j = json::parse(data, nullptr, false);
    if (j.is_discarded()) throw DataError(where + ": malformed JSON checkpoint");
    for (const char* key :
         {"format_version", "context_window", "embed_dim", "hidden_dim", "vocab", "params"})
      if (!j.contains(key)) throw DataError(where + ": missing key '" + key + "'");
    if (j.at("format_version").get<std::uint32_t>() != kCheckpointFormatVersion)
      throw DataError(where + ": unsupported format_version");
    Vocabulary vocab = Vocabulary::from_tokens(j.at("vocab").get<std::vector<std::string>>());
    std::vector<double> weights;
    weights.reserve(j.at("params").size());
    for (const json& v : j.at("params")) {
      if (!v.is_string()) throw DataError(where + ": params entries must be decimal strings");
      weights.push_back(std::strtod(v.get<std::string>().c_str(), nullptr));
    }
    PolicyParams params =
        rebuild_params(vocab, j.at("context_window").get<int>(), j.at("embed_dim").get<int>(),
                       j.at("hidden_dim").get<int>(), std::move(weights), where);
    return {std::move(vocab), std::move(params)};
  }

  ByteReader r(data, where);
  if (r.bytes(4) != std::string(kMagic, sizeof(kMagic)))
    throw DataError(where + ": not a checkpoint file");
  if (r.u32() != kCheckpointFormatVersion)
    throw DataError(where + ": unsupported format_version");
  const int context_window = static_cast<int>(r.u32());
  const int embed_dim = static_cast<int>(r.u32());
  const int hidden_dim = static_cast<int>(r.u32());
  const std::uint32_t vocab_size = r.u32();
  std::vector<std::string> tokens;
  tokens.reserve(vocab_size);
  for (std::uint32_t i = 0; i < vocab_size; ++i) tokens.push_back(r.bytes(r.u32()));
  Vocabulary vocab = Vocabulary::from_tokens(std::move(tokens));
  const std::uint64_t count = r.u64();
  std::vector<double> weights;
  weights.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) weights.push_back(r.f64());
  if (!r.exhausted()) throw DataError(where + ": trailing bytes in checkpoint");
  PolicyParams params = rebuild_params(vocab, context_window, embed_dim, hidden_dim,
                                       std::move(weights), where);
  return {std::move(vocab), std::move(params)};
}

}  // namespace grpolab
