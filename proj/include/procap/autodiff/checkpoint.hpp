#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "procap/autodiff/adam.hpp"
#include "procap/autodiff/tensor.hpp"
#include "procap/binary_io.hpp"
#include "procap/error.hpp"

namespace procap::ad {

inline constexpr std::array<char, 6> kCheckpointMagic = {'P', 'C', 'K', 'P', 'T', '1'};

struct NamedBuffer {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct Checkpoint {
  nlohmann::json metadata;
  std::vector<NamedBuffer> params;
  std::optional<AdamState<float>> adam;

  const NamedBuffer* find(const std::string& name) const {
    for (const auto& p : params) {
      if (p.name == name) return &p;
    }
    return nullptr;
  }
};

// Layout (little-endian):
//   "PCKPT1", string metadata_json,
//   u32 n, n x {string name, u32 ndim, u32 dims[ndim], f32 payload},
//   u8 has_adam, [u64 t, f32 lr, f32 beta1, f32 beta2, f32 eps,
//                 u32 k, k x {string name, u32 len, f32 m[len], f32 v[len]}]
// Strings are u32 length + bytes.
template <class T>
void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& metadata,
                     const ParameterSet<T>& params, const AdamState<T>* adam) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write checkpoint " + path.string());
  os.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  io::put_string(os, metadata.dump());
  io::put_u32(os, static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter<T>& p = params[i];
    io::put_string(os, p.name);
    io::put_u32(os, static_cast<std::uint32_t>(p.shape.size()));
    for (std::size_t d : p.shape) io::put_u32(os, static_cast<std::uint32_t>(d));
    for (T v : p.value) io::put_f32(os, static_cast<float>(v));
  }
  os.put(adam != nullptr ? 1 : 0);
  if (adam != nullptr) {
    io::put_u64(os, adam->t);
    io::put_f32(os, static_cast<float>(adam->lr));
    io::put_f32(os, static_cast<float>(adam->beta1));
    io::put_f32(os, static_cast<float>(adam->beta2));
    io::put_f32(os, static_cast<float>(adam->eps));
    io::put_u32(os, static_cast<std::uint32_t>(adam->m.size()));
    for (const auto& [name, m] : adam->m) {
      const auto& v = adam->v.at(name);
      io::put_string(os, name);
      io::put_u32(os, static_cast<std::uint32_t>(m.size()));
      for (T x : m) io::put_f32(os, static_cast<float>(x));
      for (T x : v) io::put_f32(os, static_cast<float>(x));
    }
  }
  if (!os) throw DataError("failed writing checkpoint " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read checkpoint " + path.string());
  auto fail = [&](const std::string& what) {
    return DataError("corrupt checkpoint " + path.string() + ": " + what);
  };
  std::array<char, 6> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kCheckpointMagic) throw fail("bad magic");
  Checkpoint ck;
  std::string meta;
  if (!io::get_string(is, meta)) throw fail("truncated metadata");
  try {
    ck.metadata = nlohmann::json::parse(meta);
  } catch (const std::exception& e) {
    throw fail(std::string("metadata is not JSON: ") + e.what());
  }
  std::uint32_t n = 0;
  if (!io::get_u32(is, n)) throw fail("truncated parameter count");
  for (std::uint32_t i = 0; i < n; ++i) {
    NamedBuffer b;
    std::uint32_t ndim = 0;
    if (!io::get_string(is, b.name) || !io::get_u32(is, ndim)) throw fail("truncated entry header");
    for (std::uint32_t d = 0; d < ndim; ++d) {
      std::uint32_t dim = 0;
      if (!io::get_u32(is, dim)) throw fail("truncated shape");
      b.shape.push_back(dim);
    }
    b.values.resize(numel(b.shape));
    for (auto& v : b.values) {
      if (!io::get_f32(is, v)) throw fail("truncated payload of '" + b.name + "'");
    }
    ck.params.push_back(std::move(b));
  }
  char has_adam = 0;
  if (!is.get(has_adam)) throw fail("missing optimizer flag");
  if (has_adam != 0) {
    AdamState<float> st;
    std::uint32_t k = 0;
    if (!io::get_u64(is, st.t) || !io::get_f32(is, st.lr) || !io::get_f32(is, st.beta1) ||
        !io::get_f32(is, st.beta2) || !io::get_f32(is, st.eps) || !io::get_u32(is, k)) {
      throw fail("truncated optimizer header");
    }
    for (std::uint32_t i = 0; i < k; ++i) {
      std::string name;
      std::uint32_t len = 0;
      if (!io::get_string(is, name) || !io::get_u32(is, len)) throw fail("truncated moment entry");
      std::vector<float> m(len), v(len);
      for (auto& x : m) {
        if (!io::get_f32(is, x)) throw fail("truncated first moment");
      }
      for (auto& x : v) {
        if (!io::get_f32(is, x)) throw fail("truncated second moment");
      }
      st.m.emplace(name, std::move(m));
      st.v.emplace(name, std::move(v));
    }
    ck.adam = std::move(st);
  }
  return ck;
}

// Copies checkpoint buffers into matching parameters; every parameter must be
// present with the same shape.
template <class T>
void restore_parameters(const Checkpoint& ck, ParameterSet<T>& params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter<T>& p = params[i];
    const NamedBuffer* b = ck.find(p.name);
    if (b == nullptr) throw DataError("checkpoint lacks parameter '" + p.name + "'");
    if (b->shape != p.shape) {
      throw DataError("checkpoint parameter '" + p.name + "' has shape " + shape_str(b->shape) +
                      ", model expects " + shape_str(p.shape));
    }
    for (std::size_t k = 0; k < p.size(); ++k) p.value[k] = static_cast<T>(b->values[k]);
  }
}

}  // namespace procap::ad
