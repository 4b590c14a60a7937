#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "procap/binary_io.hpp"
#include "procap/error.hpp"

namespace procap::corpus {

// Dense row-major float32 matrix of per-frame features (frames x dims).
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}

  float& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  float at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const float> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  bool operator==(const FeatureMatrix&) const = default;
};

inline constexpr std::array<char, 4> kFeatureMagic = {'P', 'C', 'F', '1'};

namespace detail {

inline std::string shape_str(std::size_t r, std::size_t c) {
  return "(" + std::to_string(r) + ", " + std::to_string(c) + ")";
}

}  // namespace detail

// Little-endian: "PCF1", u32 num_frames, u32 feature_dim, then the payload.
inline void write_features(const std::filesystem::path& path, const FeatureMatrix& m) {
  if (m.data.size() != m.rows * m.cols) {
    throw ShapeError("write_features: payload size does not match " +
                     detail::shape_str(m.rows, m.cols));
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open feature file for writing: " + path.string());
  os.write(kFeatureMagic.data(), 4);
  io::put_u32(os, static_cast<std::uint32_t>(m.rows));
  io::put_u32(os, static_cast<std::uint32_t>(m.cols));
  for (float f : m.data) io::put_f32(os, f);
  if (!os) throw DataError("failed writing feature file: " + path.string());
}

// Reads a feature file; throws DataError on truncation or trailing bytes.
inline FeatureMatrix read_features(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open feature file: " + path.string());
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), 4) || magic != kFeatureMagic) {
    throw DataError("bad feature file magic in " + path.string());
  }
  std::uint32_t rows = 0, cols = 0;
  if (!io::get_u32(is, rows) || !io::get_u32(is, cols)) {
    throw DataError("truncated feature header in " + path.string());
  }
  FeatureMatrix m(rows, cols);
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    if (!io::get_f32(is, m.data[i])) {
      throw DataError("feature file " + path.string() + " declares shape " +
                      detail::shape_str(rows, cols) + " but holds only " + std::to_string(i) +
                      " floats");
    }
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw DataError("trailing bytes after payload in feature file " + path.string());
  }
  return m;
}

}  // namespace procap::corpus
