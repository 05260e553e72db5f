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

#include "spkdiar/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "spkdiar/error.hpp"

namespace spkdiar::cluster {

double cosine_similarity(const VectorXd& a, const VectorXd& b) {
  SPKDIAR_CHECK(a.size() == b.size(), "dimension mismatch: ", a.size(), " vs ",
                b.size());
  const double na = a.norm(), nb = b.norm();
  SPKDIAR_CHECK(na > 0.0 && nb > 0.0, "cosine similarity of a zero-norm vector");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

AffinityMatrix build_affinity(const std::vector<Embedding>& embs) {
  const auto n = static_cast<Eigen::Index>(embs.size());
  SPKDIAR_CHECK(n >= 2, "affinity needs at least 2 embeddings, got ", n);
  const auto d = embs.front().values.size();
  MatrixXd u(d, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& v = embs[static_cast<std::size_t>(i)].values;
    SPKDIAR_CHECK(v.size() == d, "embedding ", i, " has dimension ", v.size(),
                  ", expected ", d);
    const double norm = v.norm();
    SPKDIAR_CHECK(norm > 0.0 && std::isfinite(norm), "embedding ", i,
                  " has zero or non-finite norm");
    u.col(i) = v / norm;
  }
  AffinityMatrix a;
  a.values = (u.transpose() * u).cwiseMax(-1.0).cwiseMin(1.0);
  a.values = 0.5 * (a.values + a.values.transpose()).eval();
  a.values.diagonal().setZero();
  return a;
}

AffinityMatrix prune_symmetrize(const AffinityMatrix& a, double p) {
  SPKDIAR_CHECK(a.values.rows() == a.values.cols(), "affinity must be square");
  SPKDIAR_CHECK(p >= 0.0 && p < 1.0, "prune fraction ", p, " outside [0, 1)");
  const Eigen::Index n = a.values.rows();
  const auto n_drop = static_cast<Eigen::Index>(
      std::floor(p * static_cast<double>(n) + 1e-9));
  MatrixXd m = a.values;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) {
      return a.values(i, x) < a.values(i, y);
    });
    for (Eigen::Index r = 0; r < n_drop; ++r) m(i, order[static_cast<std::size_t>(r)]) = 0.0;
  }
  m = m.cwiseMax(0.0);
  AffinityMatrix out;
  out.values = 0.5 * (m + m.transpose());
  out.values.diagonal().setZero();
  out.pruned = true;
  return out;
}

MatrixXd unnormalized_laplacian(const AffinityMatrix& a) {
  const MatrixXd& v = a.values;
  SPKDIAR_CHECK(v.rows() == v.cols(), "affinity must be square");
  SPKDIAR_CHECK(v.allFinite(), "affinity has non-finite entries");
  const double asym = (v - v.transpose()).cwiseAbs().maxCoeff();
  SPKDIAR_CHECK(asym <= 1e-9, "affinity is asymmetric (max deviation ", asym,
                ")");
  MatrixXd l = -v;
  l.diagonal() = v.rowwise().sum() - v.diagonal();
  return l;
}

namespace {

double off_diagonal_norm(const MatrixXd& a) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

}  // namespace

SpectralDecomposition eig_sym(const MatrixXd& l, int max_sweeps) {
  SPKDIAR_CHECK(l.rows() == l.cols() && l.rows() > 0, "eig_sym needs a square matrix");
  SPKDIAR_CHECK(l.allFinite(), "eig_sym input has non-finite entries");
  const Eigen::Index n = l.rows();
  MatrixXd a = 0.5 * (l + l.transpose());
  MatrixXd v = MatrixXd::Identity(n, n);
  const double tol = 1e-12 * l.norm();

  SpectralDecomposition dec;
  double off = off_diagonal_norm(a);
  while (off > tol) {
    SPKDIAR_CHECK(dec.sweeps < max_sweeps, "eigensolver did not converge after ",
                  max_sweeps, " sweeps (off-diagonal residual ", off, ")");
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // Columns p and q of A * J, then mirror into rows.
        for (Eigen::Index k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
          a(p, k) = a(k, p);
          a(q, k) = a(k, q);
        }
        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    ++dec.sweeps;
    off = off_diagonal_norm(a);
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) {
    return a(x, x) < a(y, y);
  });
  dec.eigenvalues.resize(n);
  dec.eigenvectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index src = order[static_cast<std::size_t>(i)];
    dec.eigenvalues(i) = a(src, src);
    dec.eigenvectors.col(i) = v.col(src);
  }
  return dec;
}

int estimate_num_speakers(const VectorXd& eigenvalues, int max_k) {
  const auto n = eigenvalues.size();
  SPKDIAR_CHECK(n >= 2, "eigengap needs at least 2 eigenvalues");
  SPKDIAR_CHECK(max_k >= 1, "max_k must be >= 1, got ", max_k);
  const auto hi = std::min<Eigen::Index>(max_k, n - 1);
  Eigen::Index best = 1;
  double best_gap = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 1; i <= hi; ++i) {
    const double gap = eigenvalues(i) - eigenvalues(i - 1);
    if (gap > best_gap) {
      best_gap = gap;
      best = i;
    }
  }
  return static_cast<int>(best);
}

MatrixXd spectral_embeddings(const SpectralDecomposition& dec, int k) {
  const auto n = dec.eigenvectors.cols();
  SPKDIAR_CHECK(k >= 1 && k <= n, "k = ", k, " outside [1, ", n, "]");
  return dec.eigenvectors.leftCols(k);
}

namespace {

KMeansResult lloyd_once(const MatrixXd& x, int k, Rng& rng, int max_iter) {
  const Eigen::Index n = x.rows();
  MatrixXd c(k, x.cols());

  // k-means++ seeding.
  c.row(0) = x.row(std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng));
  VectorXd d2 = (x.rowwise() - c.row(0)).rowwise().squaredNorm();
  for (int j = 1; j < k; ++j) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        r -= d2(i);
        if (r < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng);
    }
    c.row(j) = x.row(pick);
    d2 = d2.cwiseMin((x.rowwise() - c.row(j)).rowwise().squaredNorm());
  }

  std::vector<int> labels(static_cast<std::size_t>(n), -1);
  VectorXd dist(n);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int j = 0; j < k; ++j) {
        const double d = (x.row(i) - c.row(j)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      dist(i) = best_d;
      if (labels[static_cast<std::size_t>(i)] != best) {
        labels[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;

    MatrixXd sum = MatrixXd::Zero(k, x.cols());
    std::vector<int> count(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sum.row(labels[static_cast<std::size_t>(i)]) += x.row(i);
      ++count[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
    }
    for (int j = 0; j < k; ++j) {
      if (count[static_cast<std::size_t>(j)] > 0) {
        c.row(j) = sum.row(j) / count[static_cast<std::size_t>(j)];
        continue;
      }
      // Re-seed an empty cluster from the point farthest from its centroid,
      // taken from a cluster that can spare it.
      Eigen::Index far = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        const int li = labels[static_cast<std::size_t>(i)];
        if (count[static_cast<std::size_t>(li)] < 2) continue;
        if (far < 0 || dist(i) > dist(far)) far = i;
      }
      if (far < 0) continue;
      --count[static_cast<std::size_t>(labels[static_cast<std::size_t>(far)])];
      labels[static_cast<std::size_t>(far)] = j;
      count[static_cast<std::size_t>(j)] = 1;
      dist(far) = 0.0;
      c.row(j) = x.row(far);
    }
  }

  KMeansResult r;
  r.labels = std::move(labels);
  r.centroids = c;
  for (Eigen::Index i = 0; i < n; ++i)
    r.inertia += (x.row(i) - c.row(r.labels[static_cast<std::size_t>(i)])).squaredNorm();
  return r;
}

std::vector<int> first_appearance_order(const std::vector<int>& labels) {
  std::vector<int> remap;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int l = labels[i];
    if (l >= static_cast<int>(remap.size())) remap.resize(static_cast<std::size_t>(l) + 1, -1);
    if (remap[static_cast<std::size_t>(l)] < 0) {
      remap[static_cast<std::size_t>(l)] =
          static_cast<int>(std::count_if(remap.begin(), remap.end(), [](int v) { return v >= 0; }));
    }
    out[i] = remap[static_cast<std::size_t>(l)];
  }
  return out;
}

}  // namespace

KMeansResult kmeans(const MatrixXd& points, int k, Rng& rng, int restarts,
                    int max_iter) {
  SPKDIAR_CHECK(k >= 1 && k <= points.rows(), "kmeans needs 1 <= k <= n (k = ", k,
                ", n = ", points.rows(), ")");
  SPKDIAR_CHECK(restarts >= 1 && max_iter >= 1, "kmeans needs restarts, iterations >= 1");
  SPKDIAR_CHECK(points.allFinite(), "kmeans input has non-finite entries");
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    KMeansResult cur = lloyd_once(points, k, rng, max_iter);
    if (cur.inertia < best.inertia) best = std::move(cur);
  }
  return best;
}

ClusterResult cluster_embeddings(const std::vector<Embedding>& embs,
                                 const ClusterConfig& cfg, Rng& rng) {
  const auto n = static_cast<int>(embs.size());
  SPKDIAR_CHECK(n >= 2, "clustering needs at least 2 embeddings, got ", n);
  SPKDIAR_CHECK(cfg.max_speakers >= 1, "max_speakers must be >= 1");
  if (cfg.oracle_k)
    SPKDIAR_CHECK(*cfg.oracle_k >= 1 && *cfg.oracle_k <= n, "oracle k = ",
                  *cfg.oracle_k, " outside [1, ", n, "]");

  const AffinityMatrix a = prune_symmetrize(build_affinity(embs), cfg.prune_fraction);
  const SpectralDecomposition dec = eig_sym(unnormalized_laplacian(a));

  ClusterResult out;
  out.eigenvalues = dec.eigenvalues;
  out.num_speakers =
      cfg.oracle_k ? *cfg.oracle_k : estimate_num_speakers(dec.eigenvalues, cfg.max_speakers);

  MatrixXd points;
  if (cfg.backend == Backend::kSpectral) {
    points = spectral_embeddings(dec, out.num_speakers);
    if (cfg.normalize_rows) {
      for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const double norm = points.row(i).norm();
        if (norm > 0.0) points.row(i) /= norm;
      }
    }
  } else {
    points.resize(n, embs.front().values.size());
    for (int i = 0; i < n; ++i)
      points.row(i) = embs[static_cast<std::size_t>(i)].values.normalized().transpose();
  }
  const KMeansResult km =
      kmeans(points, out.num_speakers, rng, cfg.kmeans_restarts, cfg.kmeans_max_iter);
  out.labels = first_appearance_order(km.labels);
  return out;
}

void write_labels(std::ostream& out, const std::vector<int>& labels) {
  for (std::size_t i = 0; i < labels.size(); ++i) out << i << ' ' << labels[i] << '\n';
}

}  // namespace spkdiar::cluster
