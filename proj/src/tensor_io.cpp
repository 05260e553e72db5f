// Copyright 2026 The spkdiar Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "spkdiar/tensor_io.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "spkdiar/error.hpp"

namespace spkdiar::tensor_io {

namespace {

constexpr char kMagic[4] = {'S', 'P', 'K', 'T'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 34;

void put_uint(std::ostream& out, std::uint64_t v, int bytes) {
  char b[8];
  for (int i = 0; i < bytes; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, bytes);
}

std::uint64_t get_uint(std::istream& in, int bytes) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), bytes);
  SPKDIAR_CHECK(in.gcount() == bytes, "truncated tensor container");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

std::uint64_t Tensor::numel() const {
  std::uint64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

void write_tensor(std::ostream& out, const Tensor& t, DType dtype) {
  SPKDIAR_CHECK(t.numel() == t.data.size(), "tensor shape/data size mismatch");
  out.write(kMagic, 4);
  put_uint(out, kVersion, 4);
  put_uint(out, static_cast<std::uint32_t>(dtype), 4);
  put_uint(out, t.shape.size(), 4);
  for (auto d : t.shape) put_uint(out, d, 8);
  for (double x : t.data) {
    if (dtype == DType::kFloat32) {
      const float f = static_cast<float>(x);
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_uint(out, bits, 4);
    } else {
      std::uint64_t bits;
      std::memcpy(&bits, &x, 8);
      put_uint(out, bits, 8);
    }
  }
}

Tensor read_tensor(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  SPKDIAR_CHECK(in.gcount() == 4 && std::memcmp(magic, kMagic, 4) == 0,
                "not a tensor container (bad magic)");
  const auto version = get_uint(in, 4);
  SPKDIAR_CHECK(version == kVersion, "unsupported tensor container version ",
                version);
  const auto dtype = static_cast<DType>(get_uint(in, 4));
  SPKDIAR_CHECK(dtype == DType::kFloat32 || dtype == DType::kFloat64,
                "unsupported tensor element type");
  const auto ndim = get_uint(in, 4);
  SPKDIAR_CHECK(ndim <= 8, "tensor rank ", ndim, " too large");
  Tensor t;
  t.shape.resize(ndim);
  for (auto& d : t.shape) d = get_uint(in, 8);
  const auto n = t.numel();
  SPKDIAR_CHECK(n <= kMaxElements, "tensor too large");
  t.data.resize(n);
  for (auto& x : t.data) {
    if (dtype == DType::kFloat32) {
      const auto bits = static_cast<std::uint32_t>(get_uint(in, 4));
      float f;
      std::memcpy(&f, &bits, 4);
      x = f;
    } else {
      const auto bits = get_uint(in, 8);
      std::memcpy(&x, &bits, 8);
    }
  }
  return t;
}

void write_tensor_file(const std::filesystem::path& path, const Tensor& t,
                       DType dtype) {
  std::ofstream out(path, std::ios::binary);
  SPKDIAR_CHECK(out.good(), "cannot open '", path.string(), "' for writing");
  write_tensor(out, t, dtype);
  SPKDIAR_CHECK(out.good(), "write to '", path.string(), "' failed");
}

Tensor read_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  SPKDIAR_CHECK(in.good(), "cannot open tensor file '", path.string(), "'");
  return read_tensor(in);
}

Tensor from_matrix(const Eigen::MatrixXd& m) {
  Tensor t;
  t.shape = {static_cast<std::uint64_t>(m.rows()),
             static_cast<std::uint64_t>(m.cols())};
  t.data.resize(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      t.data[r * m.cols() + c] = m(r, c);
  return t;
}

Eigen::MatrixXd to_matrix(const Tensor& t) {
  SPKDIAR_CHECK(t.shape.size() == 2, "expected a 2-D tensor, got rank ",
                t.shape.size());
  const auto rows = static_cast<Eigen::Index>(t.shape[0]);
  const auto cols = static_cast<Eigen::Index>(t.shape[1]);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = t.data[r * cols + c];
  return m;
}

}  // namespace spkdiar::tensor_io
