#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "nutricast/core/error.hpp"
#include "nutricast/core/hash.hpp"
#include "nutricast/data/binning.hpp"
#include "nutricast/data/split.hpp"
#include "nutricast/model/model.hpp"
#include "nutricast/train/train_config.hpp"

namespace nutricast {

template <typename T>
struct Checkpoint {
  NutrientModel<T> model;
  std::map<std::string, BinningSpec> bins;
  TrainConfig train;
  SplitAssignment split;
  std::vector<LossRecord> history;
};

namespace ckpt {

inline constexpr char kMagic[8] = {'N', 'U', 'T', 'R', 'I', 'C', 'K', 'P'};
inline constexpr std::uint32_t kVersion = 1;

enum class DType : std::uint8_t { F32 = 1, F64 = 2 };

template <typename T>
constexpr DType dtype_of() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? DType::F32 : DType::F64;
}

template <typename U>
void put(std::string& out, U v) {
  static_assert(std::is_trivially_copyable_v<U>);
  char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(U));
  out.append(buf, sizeof(U));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    char buf[sizeof(U)];
    std::memcpy(buf, bytes_.data() + pos_, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(U));
    pos_ += sizeof(U);
    U v;
    std::memcpy(&v, buf, sizeof(U));
    return v;
  }

  std::string_view take(std::uint64_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  void need(std::uint64_t n, const char* what) {
    if (n > remaining()) {
      throw ParseError(std::string("checkpoint truncated while reading ") + what + " (need " + std::to_string(n) +
                           " bytes, " + std::to_string(remaining()) + " left)",
                       pos_);
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

inline nlohmann::json history_json(const std::vector<LossRecord>& h) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& r : h) a.push_back({r.epoch, r.step, r.loss});
  return a;
}

}  // namespace ckpt

template <typename T>
nlohmann::json checkpoint_metadata(const Checkpoint<T>& c) {
  const auto& m = c.model;
  nlohmann::json heads = nlohmann::json::object();
  for (const auto& [name, h] : m.heads) heads[name] = h;
  nlohmann::json bins = nlohmann::json::object();
  for (const auto& [name, b] : c.bins) bins[name] = b;
  return {{"format_version", ckpt::kVersion},
          {"model_config", m.config},
          {"variant", to_string(m.variant)},
          {"preprocess", {{"mean", m.preprocess.mean}, {"std", m.preprocess.stddev}}},
          {"vocabulary", {{"tokens", m.vocab.tokens()}, {"min_frequency", m.vocab.min_frequency()}}},
          {"heads", heads},
          {"bins", bins},
          {"train_config", c.train},
          {"seed", c.train.seed},
          {"split", c.split},
          {"loss_history", ckpt::history_json(c.history)}};
}

template <typename T>
std::string serialize_checkpoint(const Checkpoint<T>& c) {
  std::string out(ckpt::kMagic, sizeof ckpt::kMagic);
  ckpt::put<std::uint32_t>(out, ckpt::kVersion);
  const std::string meta = checkpoint_metadata(c).dump();
  ckpt::put<std::uint64_t>(out, meta.size());
  out += meta;
  ckpt::put<std::uint32_t>(out, static_cast<std::uint32_t>(c.model.params.size()));
  for (const auto& [name, p] : c.model.params) {
    ckpt::put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    ckpt::put<std::uint8_t>(out, static_cast<std::uint8_t>(ckpt::dtype_of<T>()));
    ckpt::put<std::uint8_t>(out, p.trainable ? 1 : 0);
    ckpt::put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rank()));
    for (auto d : p.value.shape()) ckpt::put<std::uint64_t>(out, d);
    ckpt::put<std::uint64_t>(out, p.value.size() * sizeof(T));
    for (T v : p.value.values()) ckpt::put<T>(out, v);
  }
  Fnv1a h;
  h.update(out);
  ckpt::put<std::uint64_t>(out, h.digest());
  return out;
}

/// Parses a checkpoint image. Any defect raises ParseError carrying the byte
/// offset where reading failed; nothing partial is returned.
template <typename T>
Checkpoint<T> deserialize_checkpoint(std::string_view bytes) {
  ckpt::Reader r(bytes);
  if (r.take(sizeof ckpt::kMagic, "magic") != std::string_view(ckpt::kMagic, sizeof ckpt::kMagic)) {
    throw ParseError("not a checkpoint (bad magic)", 0);
  }
  const std::size_t version_at = r.pos();
  const auto version = r.get<std::uint32_t>("version");
  if (version != ckpt::kVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version) + " (this build reads " +
                         std::to_string(ckpt::kVersion) + ")",
                     version_at);
  }
  const auto meta_len = r.get<std::uint64_t>("metadata length");
  const std::size_t meta_at = r.pos();
  const auto meta_text = r.take(meta_len, "metadata");

  std::map<std::string, Parameter<T>> tensors;
  const auto count = r.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t record_at = r.pos();
    const auto name_len = r.get<std::uint32_t>("tensor name length");
    std::string name(r.take(name_len, "tensor name"));
    const auto dtype = static_cast<ckpt::DType>(r.get<std::uint8_t>("dtype"));
    if (dtype != ckpt::DType::F32 && dtype != ckpt::DType::F64) {
      throw ParseError("tensor '" + name + "' has unknown dtype", record_at);
    }
    const bool trainable = r.get<std::uint8_t>("trainable flag") != 0;
    const auto rank = r.get<std::uint32_t>("rank");
    if (rank == 0 || rank > 8) throw ParseError("tensor '" + name + "' has invalid rank", record_at);
    Shape shape;
    std::uint64_t elems = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      const auto d = r.get<std::uint64_t>("dimension");
      if (d == 0 || d > (std::uint64_t{1} << 32)) throw ParseError("tensor '" + name + "' has invalid shape", record_at);
      shape.push_back(d);
      elems *= d;
    }
    const std::size_t width = dtype == ckpt::DType::F32 ? 4 : 8;
    const auto payload = r.get<std::uint64_t>("payload length");
    if (payload != elems * width) throw ParseError("tensor '" + name + "' payload length disagrees with shape", record_at);
    std::vector<T> values;
    values.reserve(elems);
    for (std::uint64_t k = 0; k < elems; ++k) {
      if (dtype == ckpt::DType::F32) values.push_back(static_cast<T>(r.get<float>("payload")));
      else values.push_back(static_cast<T>(r.get<double>("payload")));
    }
    Parameter<T> p;
    p.name = name;
    p.value = Tensor<T>(std::move(shape), std::move(values));
    p.trainable = trainable;
    if (!tensors.emplace(name, std::move(p)).second) throw ParseError("duplicate tensor '" + name + "'", record_at);
  }
  const std::size_t body_end = r.pos();
  const auto digest = r.get<std::uint64_t>("checksum");
  Fnv1a h;
  h.update(bytes.substr(0, body_end));
  if (h.digest() != digest) throw ParseError("checkpoint checksum mismatch", body_end);
  if (r.remaining() != 0) throw ParseError("trailing bytes after checkpoint", r.pos());

  Checkpoint<T> c;
  try {
    const auto meta = nlohmann::json::parse(meta_text);
    if (meta.at("format_version").get<std::uint32_t>() != ckpt::kVersion) {
      throw ParseError("metadata format_version disagrees with header", meta_at);
    }
    auto& m = c.model;
    m.config = meta.at("model_config").get<ModelConfig>();
    m.variant = variant_from_string(meta.at("variant").get<std::string>());
    m.preprocess.mean = meta.at("preprocess").at("mean").template get<std::array<double, 3>>();
    m.preprocess.stddev = meta.at("preprocess").at("std").template get<std::array<double, 3>>();
    m.vocab = Vocabulary::from_tokens(meta.at("vocabulary").at("tokens").get<std::vector<std::string>>(),
                                      meta.at("vocabulary").at("min_frequency").get<std::size_t>());
    for (const auto& [name, h] : meta.at("heads").items()) m.heads[name] = h.template get<HeadConfig>();
    for (const auto& [name, b] : meta.at("bins").items()) c.bins[name] = b.template get<BinningSpec>();
    c.train = meta.at("train_config").get<TrainConfig>();
    c.split = meta.at("split").get<SplitAssignment>();
    for (const auto& rec : meta.at("loss_history")) {
      c.history.push_back({rec.at(0).get<std::size_t>(), rec.at(1).get<std::size_t>(), rec.at(2).get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad checkpoint metadata: ") + e.what(), meta_at);
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(std::string("bad checkpoint metadata: ") + e.what(), meta_at);
  }
  for (auto& [name, p] : tensors) c.model.params.add(name, std::move(p.value), p.trainable);
  return c;
}

template <typename T>
void save_checkpoint(const Checkpoint<T>& c, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(c);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint<T>(bytes);
}

inline void write_loss_csv(const std::vector<LossRecord>& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "epoch,step,loss\n";
  char buf[64];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%.17g", r.loss);
    out << r.epoch << ',' << r.step << ',' << buf << '\n';
  }
}

}  // namespace nutricast
