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

#include "spkdiar/embedding.hpp"

#include "spkdiar/error.hpp"
#include "spkdiar/tensor_io.hpp"

namespace spkdiar {

void write_embeddings(const std::filesystem::path& path,
                      const std::vector<Embedding>& embs) {
  SPKDIAR_CHECK(!embs.empty(), "no embeddings to write");
  const auto d = embs.front().values.size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(embs.size()), d);
  for (std::size_t i = 0; i < embs.size(); ++i) {
    SPKDIAR_CHECK(embs[i].values.size() == d, "embedding ", i, " has dimension ",
                  embs[i].values.size(), ", expected ", d);
    m.row(static_cast<Eigen::Index>(i)) = embs[i].values.transpose();
  }
  tensor_io::write_tensor_file(path, tensor_io::from_matrix(m));
}

std::vector<Embedding> read_embeddings(const std::filesystem::path& path) {
  const Eigen::MatrixXd m = tensor_io::to_matrix(tensor_io::read_tensor_file(path));
  std::vector<Embedding> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    out[static_cast<std::size_t>(i)].values = m.row(i).transpose();
  return out;
}

}  // namespace spkdiar
