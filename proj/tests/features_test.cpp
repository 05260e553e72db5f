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
#include "spkdiar/features.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <sstream>

#include "spkdiar/embedding.hpp"
#include "spkdiar/error.hpp"
#include "spkdiar/tensor_io.hpp"
#include "support/signals.hpp"

namespace spkdiar::features {
namespace {

using testing::sine;
using testing::white_noise;

// Mel-spaced centers from the textbook formula, independent of the library.
std::vector<double> reference_centers(int n_mels, double f_lo, double f_hi) {
  auto mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  auto hz = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
  const double a = mel(f_lo), b = mel(f_hi);
  std::vector<double> c;
  for (int i = 1; i <= n_mels; ++i) c.push_back(hz(a + (b - a) * i / (n_mels + 1)));
  return c;
}

TEST(MelScale, FormulaAndInverse) {
  EXPECT_NEAR(hz_to_mel(700.0), 2595.0 * std::log10(2.0), 1e-9);
  for (double f : {0.0, 123.0, 1000.0, 7999.0}) EXPECT_NEAR(mel_to_hz(hz_to_mel(f)), f, 1e-7);
}

TEST(Filterbank, ShapeFor512PointFft) {
  FeatureConfig cfg;
  cfg.n_fft = 512;
  const auto fb = mel_filterbank(cfg);
  EXPECT_EQ(fb.rows(), 80);
  EXPECT_EQ(fb.cols(), 257);
  EXPECT_EQ(cfg.fft_size(), 512);
  EXPECT_EQ(FeatureConfig{}.fft_size(), 512);
}

TEST(Filterbank, RowsNonnegativeNonzeroAndOverlapping) {
  const FeatureConfig cfg;
  const auto fb = mel_filterbank(cfg);
  const auto c = mel_centers_hz(cfg);
  const double bin_hz = static_cast<double>(cfg.sample_rate_hz) / cfg.fft_size();
  EXPECT_GE(fb.minCoeff(), 0.0);
  for (Eigen::Index m = 0; m < fb.rows(); ++m) {
    EXPECT_GT(fb.row(m).sum(), 0.0) << m;
    // Neighbours share a bin once their centers are more than a bin apart.
    const auto i = static_cast<std::size_t>(m);
    if (m + 1 < fb.rows() && c[i + 1] - c[i] > bin_hz)
      EXPECT_GT(fb.row(m).cwiseProduct(fb.row(m + 1)).sum(), 0.0) << m;
  }
}

TEST(Filterbank, CentersStrictlyIncreasingOnMelScale) {
  const auto c = mel_centers_hz(FeatureConfig{});
  const auto ref = reference_centers(80, 0.0, 8000.0);
  ASSERT_EQ(c.size(), 80u);
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_NEAR(c[i], ref[i], 1e-6);
    if (i > 0) EXPECT_GT(c[i], c[i - 1]);
  }
}

TEST(Filterbank, TooManyFiltersIsRejected) {
  FeatureConfig cfg;
  cfg.n_mels = 400;
  EXPECT_THROW(mel_filterbank(cfg), Error);
}

TEST(LogMel, ThreeSecondsGive298Frames) {
  const auto f = log_mel(white_noise(48000, 1), FeatureConfig{});
  EXPECT_EQ(f.num_frames(), 298);
  EXPECT_EQ(f.num_mels(), 80);
  EXPECT_EQ(num_frames(48000, FeatureConfig{}), 298);
  EXPECT_DOUBLE_EQ(f.frame_hop_s, 0.010);
}

TEST(LogMel, SilenceHitsTheFloor) {
  audio::Waveform w;
  w.samples.assign(8000, 0.0);
  FeatureConfig cfg;
  const auto f = log_mel(w, cfg);
  EXPECT_EQ(f.frames.minCoeff(), std::log(cfg.log_floor));
  EXPECT_EQ(f.frames.maxCoeff(), std::log(cfg.log_floor));
}

TEST(LogMel, ToneLandsInNearestCenterBin) {
  const FeatureConfig cfg;
  const auto f = log_mel(sine(1000.0, 1.0), cfg);
  const auto centers = reference_centers(cfg.n_mels, 0.0, 8000.0);
  int nearest = 0;
  for (int i = 1; i < cfg.n_mels; ++i)
    if (std::abs(centers[i] - 1000.0) < std::abs(centers[nearest] - 1000.0)) nearest = i;
  for (Eigen::Index t = 0; t < f.num_frames(); ++t) {
    Eigen::Index arg = 0;
    f.frames.row(t).maxCoeff(&arg);
    ASSERT_EQ(arg, nearest) << "frame " << t;
  }
}

TEST(LogMel, ScalingShiftsLogEnergy) {
  auto w = white_noise(16000, 2, 16000, 0.1);
  auto w2 = w;
  for (auto& s : w2.samples) s *= 2.0;
  const auto a = log_mel(w, FeatureConfig{});
  const auto b = log_mel(w2, FeatureConfig{});
  ASSERT_GT(a.frames.minCoeff(), std::log(1e-10) + 5.0);
  EXPECT_LE((b.frames.array() - a.frames.array() - 2.0 * std::log(2.0)).abs().maxCoeff(),
            1e-6);
}

TEST(LogMel, Deterministic) {
  const auto w = white_noise(9000, 3);
  EXPECT_EQ(log_mel(w, FeatureConfig{}).frames, log_mel(w, FeatureConfig{}).frames);
}

TEST(LogMel, ShortSignalIsRejected) {
  EXPECT_THROW(log_mel(white_noise(100, 4), FeatureConfig{}), Error);
}

TEST(LogMel, RateMismatchIsRejected) {
  EXPECT_THROW(log_mel(white_noise(8000, 5, 8000), FeatureConfig{}), Error);
}

TEST(MeanNormalize, ConstantMatrixBecomesZero) {
  FeatureMatrix f;
  f.frames = Eigen::MatrixXd::Constant(7, 4, 3.25);
  EXPECT_LE(mean_normalize(f).frames.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(MeanNormalize, ZeroColumnMeansAndIdempotent) {
  FeatureMatrix f;
  std::srand(3);
  f.frames = Eigen::MatrixXd::Random(50, 80) * 7.0;
  const auto g = mean_normalize(f);
  EXPECT_LE(g.frames.colwise().mean().cwiseAbs().maxCoeff(), 1e-9);
  const auto h = mean_normalize(g);
  EXPECT_LE((h.frames - g.frames).cwiseAbs().maxCoeff(), 1e-12);
  // Variance is untouched.
  for (Eigen::Index c = 0; c < 80; ++c) {
    const double va = (f.frames.col(c).array() - f.frames.col(c).mean()).square().sum();
    const double vb = g.frames.col(c).squaredNorm();
    EXPECT_NEAR(va, vb, 1e-9 * va);
  }
}

TEST(Extract, IsLogMelThenMeanNormalize) {
  const auto w = white_noise(6000, 6);
  EXPECT_LE((extract(w, FeatureConfig{}).frames -
             mean_normalize(log_mel(w, FeatureConfig{})).frames)
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
}

TEST(Config, RejectsInvalidValues) {
  FeatureConfig cfg;
  cfg.f_max_hz = 9000.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = FeatureConfig{};
  cfg.n_fft = 300;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = FeatureConfig{};
  cfg.n_mels = 0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(TensorIo, Float32HeaderAndRowMajorData) {
  tensor_io::Tensor t{{2, 3}, {1, 2, 3, 4, 5, 6.5}};
  std::stringstream buf;
  tensor_io::write_tensor(buf, t);
  const std::string bytes = buf.str();
  // Magic, version, dtype tag, dimension count, extents, then six floats.
  std::uint32_t ndim = 0;
  std::memcpy(&ndim, bytes.data() + 12, 4);
  ASSERT_EQ(bytes.size(), 16u + 2 * 8 + 6 * 4);
  EXPECT_EQ(ndim, 2u);
  float last = 0.0f;
  std::memcpy(&last, bytes.data() + bytes.size() - 4, 4);
  EXPECT_EQ(last, 6.5f);
  EXPECT_EQ(tensor_io::read_tensor(buf), t);
}

TEST(TensorIo, Float64IsLosslessAndMatrixRoundTrips) {
  const Eigen::MatrixXd m = Eigen::MatrixXd::Random(4, 7) * 1e3;
  std::stringstream buf;
  tensor_io::write_tensor(buf, tensor_io::from_matrix(m), tensor_io::DType::kFloat64);
  EXPECT_EQ(tensor_io::to_matrix(tensor_io::read_tensor(buf)), m);
}

TEST(TensorIo, TruncatedStreamIsRejected) {
  std::stringstream buf;
  tensor_io::write_tensor(buf, tensor_io::Tensor{{3}, {1, 2, 3}});
  std::stringstream cut(buf.str().substr(0, buf.str().size() - 2));
  EXPECT_THROW(tensor_io::read_tensor(cut), Error);
}

TEST(TensorIo, FeatureAndEmbeddingFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "spkdiar_tensor_io";
  std::filesystem::create_directories(dir);
  const auto f = extract(white_noise(5000, 7), FeatureConfig{});
  tensor_io::write_tensor_file(dir / "f.bin", tensor_io::from_matrix(f.frames));
  const auto back = tensor_io::to_matrix(tensor_io::read_tensor_file(dir / "f.bin"));
  EXPECT_LE((back - f.frames).cwiseAbs().maxCoeff(), 1e-5 * (1.0 + f.frames.cwiseAbs().maxCoeff()));
  std::vector<Embedding> embs = {{Eigen::VectorXd::Constant(3, 0.5)},
                                 {(Eigen::VectorXd(3) << 1, -2, 3).finished()}};
  write_embeddings(dir / "e.bin", embs);
  const auto r = read_embeddings(dir / "e.bin");
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[1].values, embs[1].values);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace spkdiar::features
