// Binary checkpoints: every named parameter, the full optimizer state, and a
// small metadata block, written bit-exactly so save/load round trips are
// lossless.

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "clap/optim.hpp"

namespace clap {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CheckpointMeta {
  std::string config_digest;  // serialized run config, checked on resume
  std::uint64_t epoch = 0;
  double zero_shot = 0.0;
};

namespace detail {

constexpr char kCheckpointMagic[8] = {'C', 'L', 'A', 'P', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

inline void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = (unsigned char)(v >> (8 * i));
  out.write((const char*)buf, 8);
}

inline std::uint64_t read_u64(std::istream& in) {
  unsigned char buf[8];
  in.read((char*)buf, 8);
  if (!in) throw CheckpointError("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= (std::uint64_t)buf[i] << (8 * i);
  return v;
}

inline void write_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(out, bits);
}

inline double read_f64(std::istream& in) {
  std::uint64_t bits = read_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), (std::streamsize)s.size());
}

inline std::string read_string(std::istream& in) {
  std::uint64_t n = read_u64(in);
  std::string s(n, '\0');
  in.read(s.data(), (std::streamsize)n);
  if (!in) throw CheckpointError("checkpoint: truncated string");
  return s;
}

inline void write_f64_array(std::ostream& out, const std::vector<double>& v) {
  write_u64(out, v.size());
  for (double x : v) write_f64(out, x);
}

inline std::vector<double> read_f64_array(std::istream& in) {
  std::uint64_t n = read_u64(in);
  std::vector<double> v(n);
  for (auto& x : v) x = read_f64(in);
  return v;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path,
                            const ParameterStore& store, const AdamState& adam,
                            const CheckpointMeta& meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("save_checkpoint: cannot open " + path);
  out.write(detail::kCheckpointMagic, 8);
  detail::write_u64(out, detail::kCheckpointVersion);
  detail::write_string(out, meta.config_digest);
  detail::write_u64(out, meta.epoch);
  detail::write_f64(out, meta.zero_shot);

  detail::write_u64(out, store.names().size());
  for (const auto& name : store.names()) {
    Tensor t = store.get(name);
    detail::write_string(out, name);
    detail::write_u64(out, t.shape().size());
    for (std::size_t d : t.shape()) detail::write_u64(out, d);
    detail::write_f64_array(out, t.value());
  }

  detail::write_f64(out, adam.learning_rate);
  detail::write_f64(out, adam.beta1);
  detail::write_f64(out, adam.beta2);
  detail::write_f64(out, adam.epsilon);
  detail::write_u64(out, adam.step);
  detail::write_u64(out, adam.m.size());
  for (const auto& name : store.names()) {
    auto it = adam.m.find(name);
    if (it == adam.m.end()) continue;
    detail::write_string(out, name);
    detail::write_f64_array(out, it->second);
    detail::write_f64_array(out, adam.v.at(name));
  }
  if (!out) throw CheckpointError("save_checkpoint: write failed for " + path);
}

// Loads into an existing store; every checkpoint parameter must exist with the
// same shape. Returns the stored metadata.
inline CheckpointMeta load_checkpoint(const std::string& path,
                                      ParameterStore& store, AdamState& adam) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("load_checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, detail::kCheckpointMagic, 8) != 0)
    throw CheckpointError("load_checkpoint: " + path +
                          " is not a checkpoint file");
  std::uint64_t version = detail::read_u64(in);
  if (version != detail::kCheckpointVersion)
    throw CheckpointError("load_checkpoint: unsupported version " +
                          std::to_string(version) + " (expected " +
                          std::to_string(detail::kCheckpointVersion) + ")");
  CheckpointMeta meta;
  meta.config_digest = detail::read_string(in);
  meta.epoch = detail::read_u64(in);
  meta.zero_shot = detail::read_f64(in);

  std::uint64_t n_params = detail::read_u64(in);
  std::uint64_t restored = 0;
  for (std::uint64_t p = 0; p < n_params; ++p) {
    std::string name = detail::read_string(in);
    std::uint64_t ndim = detail::read_u64(in);
    Shape shape(ndim);
    for (auto& d : shape) d = detail::read_u64(in);
    std::vector<double> values = detail::read_f64_array(in);
    if (!store.has(name))
      throw CheckpointError("load_checkpoint: parameter " + name +
                            " not present in the model");
    Tensor t = store.get(name);
    if (t.shape() != shape)
      throw CheckpointError("load_checkpoint: shape mismatch for " + name);
    t.value() = values;
    ++restored;
  }
  if (restored != store.names().size())
    throw CheckpointError(
        "load_checkpoint: checkpoint has " + std::to_string(restored) +
        " parameters, model has " + std::to_string(store.names().size()));

  adam.learning_rate = detail::read_f64(in);
  adam.beta1 = detail::read_f64(in);
  adam.beta2 = detail::read_f64(in);
  adam.epsilon = detail::read_f64(in);
  adam.step = detail::read_u64(in);
  adam.m.clear();
  adam.v.clear();
  std::uint64_t n_states = detail::read_u64(in);
  for (std::uint64_t s = 0; s < n_states; ++s) {
    std::string name = detail::read_string(in);
    adam.m[name] = detail::read_f64_array(in);
    adam.v[name] = detail::read_f64_array(in);
  }
  return meta;
}

}  // namespace clap
