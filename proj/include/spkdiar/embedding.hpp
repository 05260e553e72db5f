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

#include <Eigen/Dense>

#include <filesystem>
#include <vector>

namespace spkdiar {

/// Fixed-length speaker vector taken from the embedder's penultimate layer.
struct Embedding {
  Eigen::VectorXd values;
};

/// Embeddings as an n x D float32 tensor container.
void write_embeddings(const std::filesystem::path& path,
                      const std::vector<Embedding>& embs);
std::vector<Embedding> read_embeddings(const std::filesystem::path& path);

namespace ecapa {
using spkdiar::Embedding;
}  // namespace ecapa

}  // namespace spkdiar
