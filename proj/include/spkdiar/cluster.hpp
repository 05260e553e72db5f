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

// Unnormalized spectral clustering of speaker embeddings:
// cosine affinity -> row-wise pruning -> L = D - A -> eigendecomposition ->
// eigengap speaker count -> k-means on the spectral embeddings.

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <random>
#include <vector>

#include "spkdiar/embedding.hpp"

namespace spkdiar::cluster {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Rng = std::mt19937_64;

struct AffinityMatrix {
  MatrixXd values;
  bool pruned = false;

  Eigen::Index size() const { return values.rows(); }
};

struct SpectralDecomposition {
  /// Ascending.
  VectorXd eigenvalues;
  /// Orthonormal columns aligned with `eigenvalues`.
  MatrixXd eigenvectors;
  int sweeps = 0;
};

double cosine_similarity(const VectorXd& a, const VectorXd& b);

/// A[i][j] = cos(e_i, e_j) off the diagonal, 0 on it.
AffinityMatrix build_affinity(const std::vector<Embedding>& embs);

/// Zeroes the floor(p * n) smallest entries of every row, keeps the rest at
/// their actual values, clamps negatives to 0 and returns (M + M^T) / 2
/// with a zero diagonal.
AffinityMatrix prune_symmetrize(const AffinityMatrix& a, double p);

/// L = D - A. Throws if A is asymmetric beyond 1e-9.
MatrixXd unnormalized_laplacian(const AffinityMatrix& a);

/// Cyclic Jacobi eigensolver for symmetric matrices. Iterates until the
/// off-diagonal Frobenius norm falls below 1e-12 * ||L||_F; throws with the
/// residual after `max_sweeps`.
SpectralDecomposition eig_sym(const MatrixXd& l, int max_sweeps = 100);

/// Largest gap between consecutive ascending eigenvalues over
/// i in [1, min(max_k, n - 1)]; ties go to the smallest i.
int estimate_num_speakers(const VectorXd& eigenvalues, int max_k);

/// n x k matrix of the eigenvectors of the k smallest eigenvalues.
MatrixXd spectral_embeddings(const SpectralDecomposition& dec, int k);

struct KMeansResult {
  std::vector<int> labels;
  MatrixXd centroids;
  double inertia = 0.0;
};

/// Lloyd's algorithm with k-means++ seeding; best of `restarts` by
/// within-cluster sum of squares. Rows of `points` are the samples.
KMeansResult kmeans(const MatrixXd& points, int k, Rng& rng, int restarts = 10,
                    int max_iter = 300);

enum class Backend { kSpectral, kKMeans };

struct ClusterConfig {
  double prune_fraction = 0.7;
  int max_speakers = 10;
  std::optional<int> oracle_k;
  Backend backend = Backend::kSpectral;
  /// Row-normalize spectral embeddings before k-means.
  bool normalize_rows = false;
  int kmeans_restarts = 10;
  int kmeans_max_iter = 300;
};

struct ClusterResult {
  std::vector<int> labels;
  int num_speakers = 0;
  VectorXd eigenvalues;
};

/// Full pipeline. The speaker count comes from the eigengap of the pruned
/// affinity's Laplacian (or oracle_k) for both backends; the k-means backend
/// then clusters the length-normalized embeddings directly.
ClusterResult cluster_embeddings(const std::vector<Embedding>& embs,
                                 const ClusterConfig& cfg, Rng& rng);

/// "index label" lines.
void write_labels(std::ostream& out, const std::vector<int>& labels);

}  // namespace spkdiar::cluster
