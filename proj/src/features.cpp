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

#include <cmath>

#include "spkdiar/dsp.hpp"
#include "spkdiar/error.hpp"

namespace spkdiar::features {

int FeatureConfig::win_samples() const {
  return static_cast<int>(std::lround(win_len_s * sample_rate_hz));
}

int FeatureConfig::hop_samples() const {
  return static_cast<int>(std::lround(hop_s * sample_rate_hz));
}

int FeatureConfig::fft_size() const {
  return n_fft > 0 ? n_fft : dsp::next_pow2(win_samples());
}

double FeatureConfig::f_max() const {
  return f_max_hz > 0.0 ? f_max_hz : sample_rate_hz / 2.0;
}

void FeatureConfig::validate() const {
  SPKDIAR_CHECK(sample_rate_hz > 0, "sample rate must be positive");
  SPKDIAR_CHECK(n_mels >= 1, "n_mels must be >= 1");
  SPKDIAR_CHECK(win_samples() >= 2 && hop_samples() >= 1,
                "window/hop too short for the sample rate");
  const int nfft = fft_size();
  SPKDIAR_CHECK((nfft & (nfft - 1)) == 0 && nfft >= win_samples(),
                "n_fft must be a power of two >= window samples");
  SPKDIAR_CHECK(f_min_hz >= 0.0 && f_min_hz < f_max(),
                "need 0 <= f_min < f_max");
  SPKDIAR_CHECK(f_max() <= sample_rate_hz / 2.0 + 1e-9,
                "f_max exceeds Nyquist");
  SPKDIAR_CHECK(log_floor > 0.0, "log_floor must be positive");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

std::vector<double> mel_centers_hz(const FeatureConfig& cfg) {
  const double lo = hz_to_mel(cfg.f_min_hz);
  const double hi = hz_to_mel(cfg.f_max());
  const double step = (hi - lo) / (cfg.n_mels + 1);
  std::vector<double> c(cfg.n_mels);
  for (int m = 0; m < cfg.n_mels; ++m) c[m] = mel_to_hz(lo + (m + 1) * step);
  return c;
}

Eigen::MatrixXd mel_filterbank(const FeatureConfig& cfg) {
  cfg.validate();
  const int nfft = cfg.fft_size();
  const int bins = nfft / 2 + 1;
  const double lo = hz_to_mel(cfg.f_min_hz);
  const double hi = hz_to_mel(cfg.f_max());
  const double step = (hi - lo) / (cfg.n_mels + 1);

  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(cfg.n_mels, bins);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double left = lo + m * step;
    const double center = left + step;
    const double right = center + step;
    for (int k = 0; k < bins; ++k) {
      const double mel =
          hz_to_mel(static_cast<double>(k) * cfg.sample_rate_hz / nfft);
      if (mel > left && mel <= center) {
        fb(m, k) = (mel - left) / (center - left);
      } else if (mel > center && mel < right) {
        fb(m, k) = (right - mel) / (right - center);
      }
    }
    SPKDIAR_CHECK(fb.row(m).sum() > 0.0, "Mel filter ", m,
                  " covers no FFT bin; n_mels=", cfg.n_mels,
                  " is too large for n_fft=", nfft);
  }
  return fb;
}

int num_frames(std::size_t n_samples, const FeatureConfig& cfg) {
  const auto win = static_cast<std::size_t>(cfg.win_samples());
  if (n_samples < win) return 0;
  return 1 + static_cast<int>((n_samples - win) / cfg.hop_samples());
}

FeatureMatrix log_mel(const audio::Waveform& w, const FeatureConfig& cfg_in) {
  FeatureConfig cfg = cfg_in;
  SPKDIAR_CHECK(w.sample_rate_hz == cfg.sample_rate_hz, "waveform rate ",
                w.sample_rate_hz, " Hz does not match feature config rate ",
                cfg.sample_rate_hz, " Hz");
  const Eigen::MatrixXd fb = mel_filterbank(cfg);
  const int win = cfg.win_samples();
  const int hop = cfg.hop_samples();
  const int t_frames = num_frames(w.size(), cfg);
  SPKDIAR_CHECK(t_frames >= 1, "signal of ", w.size(),
                " samples is shorter than one window (", win, ")");

  std::vector<double> window(win);
  for (int i = 0; i < win; ++i)
    window[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / (win - 1));

  dsp::RealFft fft(cfg.fft_size());
  Eigen::MatrixXd power(fft.num_bins(), t_frames);
  std::vector<double> frame(win);
  for (int t = 0; t < t_frames; ++t) {
    const double* src = w.samples.data() + static_cast<std::size_t>(t) * hop;
    for (int i = 0; i < win; ++i) frame[i] = src[i] * window[i];
    fft.power(frame, std::span<double>(power.col(t).data(), fft.num_bins()));
  }

  FeatureMatrix out;
  out.frame_hop_s = static_cast<double>(hop) / cfg.sample_rate_hz;
  out.frames = (fb * power).transpose();
  const double floor = cfg.log_floor;
  out.frames = out.frames.unaryExpr(
      [floor](double e) { return std::log(std::max(e, floor)); });
  return out;
}

FeatureMatrix mean_normalize(FeatureMatrix f) {
  SPKDIAR_CHECK(f.frames.rows() >= 1, "feature matrix has no frames");
  const Eigen::RowVectorXd mean = f.frames.colwise().mean();
  f.frames.rowwise() -= mean;
  return f;
}

FeatureMatrix extract(const audio::Waveform& w, const FeatureConfig& cfg) {
  return mean_normalize(log_mel(w, cfg));
}

}  // namespace spkdiar::features
