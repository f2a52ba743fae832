#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cwm/controller.hpp"
#include "cwm/csv.hpp"
#include "cwm/esn.hpp"
#include "cwm/training.hpp"

namespace cwm {

/**
 * Single-file container ("CWM1"):
 *
 *   bytes 0..3   magic "CWM1"
 *   bytes 4..7   metadata length, u32 little-endian
 *   ...          metadata, UTF-8 JSON (format version, dtype, array
 *                directory with byte offsets, params, rng state)
 *   payload      arrays back to back, row-major, f64 little-endian
 *
 * Array offsets in the directory are relative to the payload start.
 * Round-trips are bitwise: doubles are moved through their u64 bit pattern.
 */
inline constexpr char kContainerMagic[4] = {'C', 'W', 'M', '1'};
inline constexpr int kContainerVersion = 1;

enum class IoErrorKind { BadMagic, BadVersion, Truncated, BadMetadata, FileAccess };

class IoError : public std::runtime_error {
 public:
  IoError(IoErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  IoErrorKind kind() const { return kind_; }

 private:
  IoErrorKind kind_;
};

namespace detail {

inline void append_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void append_f64_le(std::string& out, double d) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

inline double read_f64_le(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

inline void append_matrix_row_major(std::string& out, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) append_f64_le(out, m(r, c));
}

struct ArrayEntry {
  std::string name;
  Eigen::Index rows = 0, cols = 0;
  std::uint64_t offset = 0;
};

class ContainerWriter {
 public:
  void add(const std::string& name, const Matrix& m) {
    ArrayEntry e;
    e.name = name;
    e.rows = m.rows();
    e.cols = m.cols();
    e.offset = payload_.size();
    append_matrix_row_major(payload_, m);
    directory_.push_back(e);
  }

  void add(const std::string& name, const Vector& v) {
    add(name, Matrix(v));
  }

  void write(const std::string& path, nlohmann::json meta) const {
    meta["format_version"] = kContainerVersion;
    meta["dtype"] = "f64";
    nlohmann::json dir = nlohmann::json::array();
    for (const auto& e : directory_)
      dir.push_back({{"name", e.name}, {"rows", e.rows}, {"cols", e.cols}, {"offset", e.offset}});
    meta["arrays"] = dir;

    const std::string meta_str = meta.dump();
    std::string out;
    out.append(kContainerMagic, 4);
    append_u32_le(out, static_cast<std::uint32_t>(meta_str.size()));
    out += meta_str;
    out += payload_;

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError(IoErrorKind::FileAccess, "cannot open for writing: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError(IoErrorKind::FileAccess, "write failed: " + path);
  }

 private:
  std::string payload_;
  std::vector<ArrayEntry> directory_;
};

class ContainerReader {
 public:
  explicit ContainerReader(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError(IoErrorKind::FileAccess, "cannot open: " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (bytes.size() < 8 || std::memcmp(bytes.data(), kContainerMagic, 4) != 0)
      throw IoError(IoErrorKind::BadMagic, "not a CWM1 container: " + path);
    std::uint32_t meta_len = 0;
    for (int i = 0; i < 4; ++i)
      meta_len |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 + i])) << (8 * i);
    if (bytes.size() < 8 + static_cast<std::size_t>(meta_len))
      throw IoError(IoErrorKind::Truncated, "metadata extends past end of file: " + path);

    try {
      meta_ = nlohmann::json::parse(bytes.substr(8, meta_len));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(IoErrorKind::BadMetadata, std::string("metadata parse error: ") + e.what());
    }
    if (!meta_.contains("format_version") || meta_["format_version"].get<int>() != kContainerVersion)
      throw IoError(IoErrorKind::BadVersion, "unsupported container version in " + path);
    if (meta_.value("dtype", "") != "f64")
      throw IoError(IoErrorKind::BadMetadata, "unsupported dtype in " + path);

    payload_ = bytes.substr(8 + meta_len);
    for (const auto& e : meta_["arrays"]) {
      ArrayEntry a;
      a.name = e.at("name").get<std::string>();
      a.rows = e.at("rows").get<Eigen::Index>();
      a.cols = e.at("cols").get<Eigen::Index>();
      a.offset = e.at("offset").get<std::uint64_t>();
      const std::uint64_t end = a.offset + static_cast<std::uint64_t>(a.rows) * a.cols * 8;
      if (end > payload_.size())
        throw IoError(IoErrorKind::Truncated, "array " + a.name + " extends past payload end");
      directory_.push_back(a);
    }
  }

  const nlohmann::json& meta() const { return meta_; }

  Matrix matrix(const std::string& name) const {
    for (const auto& a : directory_) {
      if (a.name != name) continue;
      Matrix m(a.rows, a.cols);
      const char* p = payload_.data() + a.offset;
      for (Eigen::Index r = 0; r < a.rows; ++r)
        for (Eigen::Index c = 0; c < a.cols; ++c, p += 8) m(r, c) = read_f64_le(p);
      return m;
    }
    throw IoError(IoErrorKind::BadMetadata, "array not in container: " + name);
  }

  Vector vector(const std::string& name) const {
    Matrix m = matrix(name);
    if (m.cols() != 1) throw IoError(IoErrorKind::BadMetadata, "array is not a vector: " + name);
    return Vector(m.col(0));
  }

 private:
  nlohmann::json meta_;
  std::string payload_;
  std::vector<ArrayEntry> directory_;
};

}  // namespace detail

/// Task episode as CSV (step,V,T,M).
inline void write_trace_csv(const TaskTrace& trace, const std::string& path) {
  CsvWriter csv(path, {"step", "V", "T", "M"});
  for (long i = 0; i < trace.size(); ++i)
    csv.row().col(i).col(trace.V(i)).col(trace.T(i)).col(trace.M(i));
}

/// Gated session as CSV (step,V,T,y,phase,conceptor_tag).
inline void write_session_csv(const SessionTrace& st, const std::string& path) {
  CsvWriter csv(path, {"step", "V", "T", "y", "phase", "conceptor_tag"});
  for (long i = 0; i < st.size(); ++i)
    csv.row()
        .col(i)
        .col(st.V(i))
        .col(st.T(i))
        .col(st.y(i))
        .col(to_string(st.phase[i]))
        .col(format_double(st.conceptor_tag[i]));
}

/// Evaluation metrics as one CSV row (seed,variant,rmse_hold,rmse_trigger,max_drift).
inline void write_metrics_csv(std::uint64_t seed, const std::string& variant, const Metrics& m,
                              const std::string& path) {
  CsvWriter csv(path, {"seed", "variant", "rmse_hold", "rmse_trigger", "max_drift"});
  csv.row().col(seed).col(variant).col(m.rmse_hold).col(m.rmse_trigger).col(m.max_drift);
}

inline void save_model(const EsnModel& m, const std::string& path) {
  detail::ContainerWriter w;
  w.add("W", m.W);
  w.add("W_in", m.W_in);
  w.add("W_fb", m.W_fb);
  if (m.trained()) w.add("W_out", m.W_out);
  w.add("x", m.x);
  w.add("y", m.y);

  nlohmann::json meta;
  meta["kind"] = "model";
  meta["params"] = {{"n_neurons", m.params.n_neurons},
                    {"sparsity", m.params.sparsity},
                    {"spectral_radius", m.params.spectral_radius},
                    {"noise_std", m.params.noise_std},
                    {"input_dim", m.params.input_dim},
                    {"output_dim", m.params.output_dim},
                    {"seed", m.params.seed}};
  meta["rng_state"] = m.rng.save_state();
  w.write(path, std::move(meta));
}

inline EsnModel load_model(const std::string& path) {
  detail::ContainerReader r(path);
  if (r.meta().value("kind", "") != "model")
    throw IoError(IoErrorKind::BadMetadata, "container does not hold a model: " + path);

  EsnModel m;
  const auto& p = r.meta().at("params");
  m.params.n_neurons = p.at("n_neurons").get<int>();
  m.params.sparsity = p.at("sparsity").get<double>();
  m.params.spectral_radius = p.at("spectral_radius").get<double>();
  m.params.noise_std = p.at("noise_std").get<double>();
  m.params.input_dim = p.at("input_dim").get<int>();
  m.params.output_dim = p.at("output_dim").get<int>();
  m.params.seed = p.at("seed").get<std::uint64_t>();

  m.W = r.matrix("W");
  m.W_in = r.matrix("W_in");
  m.W_fb = r.matrix("W_fb");
  try {
    m.W_out = r.matrix("W_out");
  } catch (const IoError&) {
    m.W_out.resize(0, 0);
  }
  m.x = r.vector("x");
  m.y = r.vector("y");
  m.rng.load_state(r.meta().at("rng_state").get<std::string>());
  return m;
}

inline void save_bank(const ConceptorBank& bank, const std::string& path) {
  detail::ContainerWriter w;
  nlohmann::json tags = nlohmann::json::array();
  nlohmann::json lens = nlohmann::json::array();
  for (std::size_t i = 0; i < bank.size(); ++i) {
    w.add("C" + std::to_string(i), bank.entries[i].second.matrix);
    tags.push_back(bank.entries[i].first);
    lens.push_back(bank.entries[i].second.source_len);
  }
  nlohmann::json meta;
  meta["kind"] = "bank";
  meta["tags"] = tags;
  meta["source_lens"] = lens;
  meta["aperture"] = bank.aperture;
  meta["n_levels"] = bank.n_levels;
  w.write(path, std::move(meta));
}

inline ConceptorBank load_bank(const std::string& path) {
  detail::ContainerReader r(path);
  if (r.meta().value("kind", "") != "bank")
    throw IoError(IoErrorKind::BadMetadata, "container does not hold a bank: " + path);

  ConceptorBank bank;
  bank.aperture = r.meta().at("aperture").get<double>();
  bank.n_levels = r.meta().at("n_levels").get<int>();
  const auto& tags = r.meta().at("tags");
  const auto& lens = r.meta().at("source_lens");
  for (std::size_t i = 0; i < tags.size(); ++i) {
    Conceptor c;
    c.matrix = r.matrix("C" + std::to_string(i));
    c.aperture = bank.aperture;
    c.tag = tags[i].get<double>();
    c.source_len = lens[i].get<long>();
    bank.entries.emplace_back(*c.tag, std::move(c));
  }
  bank.validate();
  return bank;
}

}  // namespace cwm
