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

#include "spkdiar/audio_io.hpp"

namespace spkdiar::features {

/// Log-Mel filterbank settings. Power spectrum, natural log, Hann window,
/// no pre-emphasis.
struct FeatureConfig {
  int sample_rate_hz = 16000;
  int n_mels = 80;
  double win_len_s = 0.025;
  double hop_s = 0.010;
  /// 0 selects the smallest power of two >= window length.
  int n_fft = 0;
  double f_min_hz = 0.0;
  /// 0 selects Nyquist.
  double f_max_hz = 0.0;
  double log_floor = 1e-10;

  int win_samples() const;
  int hop_samples() const;
  int fft_size() const;
  double f_max() const;
  void validate() const;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular Mel filters, n_mels x (n_fft/2 + 1). Throws if any filter
/// covers no FFT bin.
Eigen::MatrixXd mel_filterbank(const FeatureConfig& cfg);

/// Filter center frequencies in Hz, ascending.
std::vector<double> mel_centers_hz(const FeatureConfig& cfg);

/// T x n_mels log filterbank energies of one segment.
struct FeatureMatrix {
  Eigen::MatrixXd frames;
  double frame_hop_s = 0.010;

  Eigen::Index num_frames() const { return frames.rows(); }
  Eigen::Index num_mels() const { return frames.cols(); }
};

/// Number of frames produced for `n_samples` input samples.
int num_frames(std::size_t n_samples, const FeatureConfig& cfg);

/// Log-Mel features: log(max(fbank * |STFT|^2, log_floor)) over a
/// Hann-windowed STFT with T = 1 + floor((len - win) / hop).
FeatureMatrix log_mel(const audio::Waveform& w, const FeatureConfig& cfg);

/// Subtracts each Mel dimension's mean over the segment.
FeatureMatrix mean_normalize(FeatureMatrix f);

/// log_mel followed by mean_normalize; the embedder input.
FeatureMatrix extract(const audio::Waveform& w, const FeatureConfig& cfg);

}  // namespace spkdiar::features
