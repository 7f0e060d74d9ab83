#pragma once

// IDX binary tensors (the MNIST distribution format), unsigned-byte flavour:
//
// [offset] [type]          [value]
// 0000     32 bit integer  0x00000801 labels (1 dim) / 0x00000803 images (3 dims)
// 0004     32 bit integer  dim 0 (item count)
// 0008     32 bit integer  dim 1 (rows)      images only
// 0012     32 bit integer  dim 2 (cols)      images only
// ....     unsigned byte   payload, row-major
//
// All header integers are big-endian.

#include <algorithm>
#include <cstddef>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedsubsel/dataset.hpp"
#include "fedsubsel/error.hpp"

namespace fedsubsel {

inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;

struct IdxTensor {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;

  bool is_images() const noexcept { return dims.size() == 3; }
  std::size_t count() const noexcept { return dims.empty() ? 0 : dims[0]; }
  friend bool operator==(const IdxTensor&, const IdxTensor&) = default;
};

namespace detail {

inline std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  if (offset + 4 > bytes.size()) throw ParseError("truncated IDX header", bytes.size());
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

inline void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace detail

inline IdxTensor parse_idx(std::span<const std::uint8_t> bytes) {
  const std::uint32_t magic = detail::read_be32(bytes, 0);
  std::size_t ndims = 0;
  if (magic == kIdxLabelMagic)
    ndims = 1;
  else if (magic == kIdxImageMagic)
    ndims = 3;
  else
    throw ParseError("unsupported IDX magic 0x" + [&] {
      char buf[9];
      std::snprintf(buf, sizeof buf, "%08x", magic);
      return std::string(buf);
    }(), 0);

  IdxTensor t;
  std::size_t expected = 1;
  for (std::size_t k = 0; k < ndims; ++k) {
    t.dims.push_back(detail::read_be32(bytes, 4 + 4 * k));
    expected *= t.dims.back();
  }
  const std::size_t header = 4 + 4 * ndims;
  const std::size_t payload = bytes.size() - header;
  if (payload < expected)
    throw ParseError("truncated IDX payload: expected " + std::to_string(expected) + " bytes, found " +
                         std::to_string(payload),
                     bytes.size());
  if (payload > expected)
    throw ParseError("IDX payload longer than dimensions imply: expected " + std::to_string(expected) +
                         " bytes, found " + std::to_string(payload),
                     header + expected);
  t.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return t;
}

inline std::vector<std::uint8_t> serialize_idx(const IdxTensor& t) {
  if (t.dims.size() != 1 && t.dims.size() != 3) throw DomainError("IDX tensor must have 1 or 3 dimensions");
  std::size_t expected = 1;
  for (auto d : t.dims) expected *= d;
  if (expected != t.data.size()) throw DomainError("IDX tensor payload does not match its dimensions");
  std::vector<std::uint8_t> out;
  out.reserve(4 + 4 * t.dims.size() + t.data.size());
  detail::append_be32(out, t.dims.size() == 1 ? kIdxLabelMagic : kIdxImageMagic);
  for (auto d : t.dims) detail::append_be32(out, d);
  out.insert(out.end(), t.data.begin(), t.data.end());
  return out;
}

inline IdxTensor read_idx(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open IDX file '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_idx(bytes);
}

inline void write_idx(const std::string& path, const IdxTensor& t) {
  const auto bytes = serialize_idx(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

// Pairs an image tensor with a label tensor; pixels are scaled to [0, 1].
// `classes` of 0 means max label + 1.
inline LabeledDataset pair_idx(const IdxTensor& images, const IdxTensor& labels, std::size_t classes = 0) {
  if (!images.is_images()) throw DataError("first IDX tensor is not an image file");
  if (labels.dims.size() != 1) throw DataError("second IDX tensor is not a label file");
  if (images.count() != labels.count())
    throw DataError("image count " + std::to_string(images.count()) + " does not match label count " +
                    std::to_string(labels.count()));
  LabeledDataset ds;
  ds.rows = images.count();
  ds.cols = std::size_t{images.dims[1]} * images.dims[2];
  ds.features.resize(images.data.size());
  std::transform(images.data.begin(), images.data.end(), ds.features.begin(),
                 [](std::uint8_t p) { return static_cast<double>(p) / 255.0; });
  ds.labels.assign(labels.data.begin(), labels.data.end());
  const int max_label = ds.labels.empty() ? 0 : *std::max_element(ds.labels.begin(), ds.labels.end());
  ds.classes = classes ? classes : static_cast<std::size_t>(max_label) + 1;
  ds.validate();
  return ds;
}

struct IdxPair {
  IdxTensor images;
  IdxTensor labels;
};

// Quantizes features to bytes with a global min/max affine map and lays each
// row out as a 1×cols image.
inline IdxPair to_idx(const LabeledDataset& ds) {
  ds.validate();
  IdxPair out;
  out.images.dims = {static_cast<std::uint32_t>(ds.rows), 1, static_cast<std::uint32_t>(ds.cols)};
  out.labels.dims = {static_cast<std::uint32_t>(ds.rows)};
  double lo = 0.0, hi = 0.0;
  if (!ds.features.empty()) {
    auto [mn, mx] = std::minmax_element(ds.features.begin(), ds.features.end());
    lo = *mn;
    hi = *mx;
  }
  const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
  out.images.data.reserve(ds.features.size());
  for (double v : ds.features) {
    const double q = std::floor((v - lo) * scale + 0.5);
    out.images.data.push_back(static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0)));
  }
  for (int l : ds.labels) {
    if (l > 255) throw DomainError("label does not fit in one byte");
    out.labels.data.push_back(static_cast<std::uint8_t>(l));
  }
  return out;
}

}  // namespace fedsubsel
