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

#pragma once

// Flat binary tensor container used for feature caches, embedding files and
// model weights.
//
// Layout (all integers little-endian):
//   char[4]  magic "SPKT"
//   uint32   version (1)
//   uint32   element type (1 = IEEE float32, 2 = IEEE float64)
//   uint32   ndim
//   uint64   dims[ndim]
//   element  data[prod(dims)]   row-major, little-endian

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace spkdiar::tensor_io {

enum class DType : std::uint32_t { kFloat32 = 1, kFloat64 = 2 };

struct Tensor {
  std::vector<std::uint64_t> shape;
  std::vector<double> data;

  std::uint64_t numel() const;
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

void write_tensor(std::ostream& out, const Tensor& t,
                  DType dtype = DType::kFloat32);
Tensor read_tensor(std::istream& in);

void write_tensor_file(const std::filesystem::path& path, const Tensor& t,
                       DType dtype = DType::kFloat32);
Tensor read_tensor_file(const std::filesystem::path& path);

/// Row-major 2-D conversions.
Tensor from_matrix(const Eigen::MatrixXd& m);
Eigen::MatrixXd to_matrix(const Tensor& t);

}  // namespace spkdiar::tensor_io
