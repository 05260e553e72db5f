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

// Waveform-domain contamination strategies and the multi-view batch
// construction used for embedder training. Every strategy is a pure
// function of its inputs and an explicitly seeded generator.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spkdiar/audio_io.hpp"

namespace spkdiar::augment {

using audio::Waveform;
using Rng = std::mt19937_64;

enum class Strategy {
  kClean,
  kWaveformDropout,
  kFrequencyDropout,
  kSpeedPerturb,
  kReverb,
  kNoise,
  kNoiseReverb,
};

std::string_view strategy_name(Strategy s);
/// Inverse of strategy_name; throws on unknown names.
Strategy parse_strategy(std::string_view name);

/// Whether the strategy draws from the RIR / noise corpora.
bool needs_rir(Strategy s);
bool needs_noise(Strategy s);

enum class SpeedMode { kDiscrete, kContinuous };

struct AugmentConfig {
  int wav_drop_chunks = 3;
  std::pair<double, double> wav_drop_len_s = {0.05, 0.1};

  int freq_drop_bands = 2;
  std::pair<double, double> freq_drop_width_hz = {100.0, 400.0};

  /// Discrete mode draws uniformly from this set; continuous mode draws
  /// uniformly from [min, max] of it.
  std::vector<double> speed_factors = {0.95, 1.0, 1.05};
  SpeedMode speed_mode = SpeedMode::kDiscrete;

  std::pair<double, double> snr_db_range = {0.0, 10.0};

  std::filesystem::path rir_corpus;
  std::filesystem::path noise_corpus;

  std::vector<Strategy> view_list = {
      Strategy::kClean,        Strategy::kWaveformDropout,
      Strategy::kFrequencyDropout, Strategy::kSpeedPerturb,
      Strategy::kReverb,       Strategy::kNoise};

  /// Throws on out-of-range speed factors, inverted ranges, and so on.
  void validate() const;
};

/// Impulse responses and noise recordings the reverb/noise views draw from.
struct Corpora {
  std::vector<Waveform> rirs;
  std::vector<Waveform> noises;

  /// Loads cfg.rir_corpus / cfg.noise_corpus (directories scanned
  /// recursively or manifest files). Empty paths give empty corpora.
  static Corpora load(const AugmentConfig& cfg);
};

/// Sample interval [begin, end).
struct SampleSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Zeroes cfg.wav_drop_chunks random chunks. Chunk starts are uniform over
/// valid positions, so chunks may overlap one another. If `zeroed` is
/// non-null it receives the chosen chunks.
Waveform waveform_dropout(const Waveform& w, const AugmentConfig& cfg,
                          Rng& rng, std::vector<SampleSpan>* zeroed = nullptr);

/// Number of taps of the band-stop FIR.
inline constexpr int kBandStopTaps = 1025;

/// Linear-phase band-stop FIR for [lo_hz, hi_hz] at the given rate.
std::vector<double> design_band_stop(double lo_hz, double hi_hz,
                                     int sample_rate_hz);

/// Applies one band-stop filter (same-length, zero-delay output).
Waveform band_stop(const Waveform& w, double lo_hz, double hi_hz);

/// Filters with cfg.freq_drop_bands random band-stop filters.
Waveform frequency_dropout(const Waveform& w, const AugmentConfig& cfg,
                           Rng& rng);

/// Tempo/pitch change by `factor` in [0.95, 1.05]: a tone at f becomes a
/// tone at f * factor, and the length becomes round(len / factor).
Waveform speed_perturb(const Waveform& w, double factor);

/// Draws a speed factor according to cfg.speed_mode.
double draw_speed_factor(const AugmentConfig& cfg, Rng& rng);

/// Linear convolution truncated to len(w), rescaled to the input peak.
/// The RIR is resampled to w's rate if needed.
Waveform add_reverb(const Waveform& w, const Waveform& rir);

/// w + g * noise with g chosen so that 10 log10(P_w / P_{g*noise}) is
/// exactly snr_db. Short noise is looped from a random offset; long noise
/// is cropped at a random offset. If `gain` is non-null it receives g.
Waveform add_noise(const Waveform& w, const Waveform& noise, double snr_db,
                   Rng& rng, double* gain = nullptr);

/// add_noise(add_reverb(w, rir), noise, snr_db): SNR relative to the
/// reverberant signal.
Waveform add_noise_reverb(const Waveform& w, const Waveform& rir,
                          const Waveform& noise, double snr_db, Rng& rng);

/// Applies one strategy with corpus/SNR draws taken from `rng`. If `snr_db`
/// is non-null it receives the drawn SNR (NaN for noise-free strategies).
Waveform apply_strategy(Strategy s, const Waveform& w, const AugmentConfig& cfg,
                        const Corpora& corpora, Rng& rng,
                        double* snr_db = nullptr);

struct LabeledWaveform {
  Waveform wave;
  int label = 0;
};

struct AugmentedBatch {
  std::vector<Waveform> inputs;
  std::vector<int> labels;
  std::vector<Strategy> view_of;
  /// Target SNR of each input; NaN where no noise was added.
  std::vector<double> snr_db;

  std::size_t size() const { return inputs.size(); }
};

/// Deterministic per-(utterance, view) seed derived from a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t utterance,
                          std::uint64_t view);

/// Concatenated-views batch: one block per entry of cfg.view_list, each
/// block holding that strategy applied to every clean utterance in order.
/// Output size is |clean| * |view_list|; labels repeat per block.
AugmentedBatch build_augmented_batch(const std::vector<LabeledWaveform>& clean,
                                     const AugmentConfig& cfg,
                                     const Corpora& corpora, Rng& rng);

/// Conventional augmentation: each utterance is contaminated by a single
/// strategy drawn uniformly from cfg.view_list. Output size is |clean|.
AugmentedBatch build_single_view_batch(
    const std::vector<LabeledWaveform>& clean, const AugmentConfig& cfg,
    const Corpora& corpora, Rng& rng);

}  // namespace spkdiar::augment
