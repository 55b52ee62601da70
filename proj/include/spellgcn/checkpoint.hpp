#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spellgcn/confusion.hpp"
#include "spellgcn/error.hpp"
#include "spellgcn/matrix.hpp"
#include "spellgcn/model.hpp"
#include "spellgcn/vocab.hpp"

namespace spellgcn {

// Self-contained model file: magic + version, a JSON block carrying the
// configuration, vocabulary and confusion entries, then named tensors as
// (name, rank, dims, 64-bit little-endian floats). Storing 64-bit floats
// makes the round trip bit-exact for both arithmetic modes.
inline constexpr char kCheckpointMagic[4] = {'S', 'G', 'C', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

namespace detail {

template <class T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw DataError("checkpoint: unexpected end of file");
  return v;
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in) {
  const auto len = read_pod<std::uint32_t>(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw DataError("checkpoint: unexpected end of file");
  return s;
}

template <class Real>
void write_tensor(std::ostream& out, const std::string& name, const Matrix<Real>& m) {
  write_string(out, name);
  write_pod<std::uint32_t>(out, 2);
  write_pod<std::uint64_t>(out, m.rows());
  write_pod<std::uint64_t>(out, m.cols());
  for (Real v : m.values()) write_pod<double>(out, static_cast<double>(v));
}

}  // namespace detail

template <class Real>
void save_checkpoint(CscModel<Real>& model, std::ostream& out) {
  const ModelConfig& cfg = model.config();
  nlohmann::json j;
  j["dim"] = cfg.dim;
  j["n_layers"] = cfg.n_layers;
  j["n_heads"] = cfg.n_heads;
  j["max_len"] = cfg.max_len;
  j["gcn_depth"] = cfg.gcn_depth;
  j["beta"] = cfg.beta;
  j["mode"] = to_string(cfg.mode);
  j["use_gcn"] = cfg.use_gcn;
  j["seed"] = cfg.seed;
  j["real"] = sizeof(Real) == 8 ? "float64" : "float32";
  std::vector<std::uint32_t> vocab_points;
  for (char32_t c : model.vocab().tokens()) vocab_points.push_back(c);
  j["vocab"] = vocab_points;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : model.confusion().entries()) {
    entries.push_back({static_cast<std::uint32_t>(e.ch), e.category,
                       static_cast<std::uint32_t>(e.candidate)});
  }
  j["confusion"] = entries;

  out.write(kCheckpointMagic, 4);
  detail::write_pod<std::uint32_t>(out, kCheckpointVersion);
  const std::string blob = j.dump();
  detail::write_pod<std::uint64_t>(out, blob.size());
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));

  auto params = model.params();
  detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) detail::write_tensor(out, p.name, *p.tensor);
  if (!out) throw DataError("checkpoint: write failed");
}

template <class Real>
void save_checkpoint(CscModel<Real>& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  save_checkpoint(model, out);
}

template <class Real>
CscModel<Real> load_checkpoint(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw DataError("checkpoint: bad magic");
  }
  const auto version = detail::read_pod<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto blob_len = detail::read_pod<std::uint64_t>(in);
  std::string blob(blob_len, '\0');
  in.read(blob.data(), static_cast<std::streamsize>(blob_len));
  if (!in) throw DataError("checkpoint: unexpected end of file");

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(blob);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: bad config block: ") + e.what());
  }
  ModelConfig cfg;
  try {
    cfg.dim = j.at("dim").get<std::size_t>();
    cfg.n_layers = j.at("n_layers").get<std::size_t>();
    cfg.n_heads = j.at("n_heads").get<std::size_t>();
    cfg.max_len = j.at("max_len").get<std::size_t>();
    cfg.gcn_depth = j.at("gcn_depth").get<std::size_t>();
    cfg.beta = j.at("beta").get<double>();
    cfg.mode = parse_combine_mode(j.at("mode").get<std::string>());
    cfg.use_gcn = j.at("use_gcn").get<bool>();
    cfg.seed = j.at("seed").get<std::uint64_t>();

    std::vector<ConfusionEntry> entries;
    for (const auto& e : j.at("confusion")) {
      entries.push_back({static_cast<char32_t>(e.at(0).get<std::uint32_t>()),
                         e.at(1).get<int>(),
                         static_cast<char32_t>(e.at(2).get<std::uint32_t>())});
    }
    std::vector<char32_t> vocab_chars;
    for (const auto& c : j.at("vocab")) {
      vocab_chars.push_back(static_cast<char32_t>(c.get<std::uint32_t>()));
    }

    CscModel<Real> model(ConfusionSet(entries), Vocab(vocab_chars), cfg);

    const auto n_tensors = detail::read_pod<std::uint32_t>(in);
    auto params = model.params();
    if (n_tensors != params.size()) {
      throw DataError("checkpoint: expected " + std::to_string(params.size()) +
                      " tensors, found " + std::to_string(n_tensors));
    }
    for (std::uint32_t t = 0; t < n_tensors; ++t) {
      const std::string name = detail::read_string(in);
      const auto rank = detail::read_pod<std::uint32_t>(in);
      if (rank != 2) throw DataError("checkpoint: tensor '" + name + "' has rank != 2");
      const auto rows = detail::read_pod<std::uint64_t>(in);
      const auto cols = detail::read_pod<std::uint64_t>(in);
      Matrix<Real>* dst = nullptr;
      for (const auto& p : params) {
        if (p.name == name) {
          dst = p.tensor;
          break;
        }
      }
      if (!dst) throw DataError("checkpoint: unknown tensor '" + name + "'");
      if (dst->rows() != rows || dst->cols() != cols) {
        throw DataError("checkpoint: tensor '" + name + "' has unexpected shape");
      }
      for (Real& v : dst->values()) v = static_cast<Real>(detail::read_pod<double>(in));
    }
    model.rebuild_maps();
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: bad config block: ") + e.what());
  }
}

template <class Real>
CscModel<Real> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  return load_checkpoint<Real>(in);
}

// Reads only the header: "float32" or "float64". Lets callers pick the
// matching arithmetic mode before a full load.
inline std::string checkpoint_real_mode(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw DataError("checkpoint: bad magic");
  }
  const auto version = detail::read_pod<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto blob_len = detail::read_pod<std::uint64_t>(in);
  std::string blob(blob_len, '\0');
  in.read(blob.data(), static_cast<std::streamsize>(blob_len));
  if (!in) throw DataError("checkpoint: unexpected end of file");
  try {
    return nlohmann::json::parse(blob).at("real").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: bad config block: ") + e.what());
  }
}

}  // namespace spellgcn
