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

#include "spkdiar/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "spkdiar/dsp.hpp"
#include "spkdiar/error.hpp"

namespace spkdiar::augment {

namespace {

constexpr std::array<std::pair<Strategy, std::string_view>, 7> kNames = {{
    {Strategy::kClean, "clean"},
    {Strategy::kWaveformDropout, "waveform_dropout"},
    {Strategy::kFrequencyDropout, "frequency_dropout"},
    {Strategy::kSpeedPerturb, "speed_perturb"},
    {Strategy::kReverb, "reverb"},
    {Strategy::kNoise, "noise"},
    {Strategy::kNoiseReverb, "noise_reverb"},
}};

constexpr double kMinSpeed = 0.95;
constexpr double kMaxSpeed = 1.05;

double uniform(Rng& rng, double lo, double hi) {
  if (hi <= lo) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace

std::string_view strategy_name(Strategy s) {
  for (const auto& [k, v] : kNames)
    if (k == s) return v;
  return "unknown";
}

Strategy parse_strategy(std::string_view name) {
  for (const auto& [k, v] : kNames)
    if (v == name) return k;
  detail::fail("unknown augmentation strategy '", std::string(name), "'");
}

bool needs_rir(Strategy s) {
  return s == Strategy::kReverb || s == Strategy::kNoiseReverb;
}

bool needs_noise(Strategy s) {
  return s == Strategy::kNoise || s == Strategy::kNoiseReverb;
}

void AugmentConfig::validate() const {
  SPKDIAR_CHECK(wav_drop_chunks >= 0, "wav_drop_chunks must be >= 0");
  SPKDIAR_CHECK(wav_drop_len_s.first >= 0.0 &&
                    wav_drop_len_s.first <= wav_drop_len_s.second,
                "wav_drop_len_s must satisfy 0 <= min <= max");
  SPKDIAR_CHECK(freq_drop_bands >= 0, "freq_drop_bands must be >= 0");
  SPKDIAR_CHECK(freq_drop_width_hz.first > 0.0 &&
                    freq_drop_width_hz.first <= freq_drop_width_hz.second,
                "freq_drop_width_hz must satisfy 0 < min <= max");
  SPKDIAR_CHECK(!speed_factors.empty(), "speed_factors must be non-empty");
  for (double f : speed_factors) {
    SPKDIAR_CHECK(f >= kMinSpeed && f <= kMaxSpeed, "speed factor ", f,
                  " outside [0.95, 1.05]");
  }
  SPKDIAR_CHECK(snr_db_range.first <= snr_db_range.second,
                "snr range must satisfy min <= max");
  SPKDIAR_CHECK(!view_list.empty(), "view_list must be non-empty");
}

Corpora Corpora::load(const AugmentConfig& cfg) {
  Corpora c;
  if (!cfg.rir_corpus.empty()) {
    for (const auto& p : audio::list_wav_corpus(cfg.rir_corpus))
      c.rirs.push_back(audio::read_wav(p));
  }
  if (!cfg.noise_corpus.empty()) {
    for (const auto& p : audio::list_wav_corpus(cfg.noise_corpus))
      c.noises.push_back(audio::read_wav(p));
  }
  return c;
}

// ---------------------------------------------------------------------------

Waveform waveform_dropout(const Waveform& w, const AugmentConfig& cfg,
                          Rng& rng, std::vector<SampleSpan>* zeroed) {
  if (zeroed) zeroed->clear();
  Waveform out = w;
  if (cfg.wav_drop_chunks == 0) return out;
  const auto n = w.size();
  const auto fs = static_cast<double>(w.sample_rate_hz);
  const auto max_len =
      static_cast<std::size_t>(std::llround(cfg.wav_drop_len_s.second * fs));
  SPKDIAR_CHECK(max_len < n, "dropout chunk of ", max_len,
                " samples is not shorter than the signal (", n, ")");
  for (int c = 0; c < cfg.wav_drop_chunks; ++c) {
    const auto len = static_cast<std::size_t>(std::llround(
        uniform(rng, cfg.wav_drop_len_s.first, cfg.wav_drop_len_s.second) *
        fs));
    const std::size_t start = uniform_index(rng, n - len + 1);
    std::fill(out.samples.begin() + start, out.samples.begin() + start + len,
              0.0);
    if (zeroed) zeroed->push_back({start, start + len});
  }
  return out;
}

std::vector<double> design_band_stop(double lo_hz, double hi_hz,
                                     int sample_rate_hz) {
  const double fs = sample_rate_hz;
  const double nyquist = fs / 2.0;
  SPKDIAR_CHECK(lo_hz >= 0.0 && lo_hz < hi_hz, "band-stop needs 0 <= lo < hi");
  SPKDIAR_CHECK(hi_hz < nyquist, "band [", lo_hz, ", ", hi_hz,
                "] Hz exceeds Nyquist (", nyquist, " Hz)");
  constexpr int kHalf = (kBandStopTaps - 1) / 2;

  // The ideal stop band is widened by half the Blackman transition width so
  // the requested band sits entirely inside the deep attenuation region.
  const double guard = 2.75 * fs / kBandStopTaps;
  const double f1 = std::max(0.0, lo_hz - guard) / fs;
  const double f2 = std::min(nyquist, hi_hz + guard) / fs;

  // Ideal response: all-pass minus the band-pass [f1, f2].
  std::vector<double> h(kBandStopTaps);
  for (int i = 0; i < kBandStopTaps; ++i) {
    const int n = i - kHalf;
    double bp;
    if (n == 0) {
      bp = 2.0 * (f2 - f1);
    } else {
      bp = (std::sin(2.0 * M_PI * f2 * n) - std::sin(2.0 * M_PI * f1 * n)) /
           (M_PI * n);
    }
    const double win = 0.42 + 0.5 * std::cos(M_PI * n / kHalf) +
                       0.08 * std::cos(2.0 * M_PI * n / kHalf);
    h[i] = ((n == 0 ? 1.0 : 0.0) - bp) * win;
  }
  return h;
}

Waveform band_stop(const Waveform& w, double lo_hz, double hi_hz) {
  const auto h = design_band_stop(lo_hz, hi_hz, w.sample_rate_hz);
  const auto full = dsp::convolve(w.samples, h);
  constexpr std::size_t kDelay = (kBandStopTaps - 1) / 2;
  Waveform out;
  out.sample_rate_hz = w.sample_rate_hz;
  out.samples.assign(full.begin() + kDelay, full.begin() + kDelay + w.size());
  return out;
}

Waveform frequency_dropout(const Waveform& w, const AugmentConfig& cfg,
                           Rng& rng) {
  Waveform out = w;
  const double nyquist = w.sample_rate_hz / 2.0;
  for (int b = 0; b < cfg.freq_drop_bands; ++b) {
    const double width =
        uniform(rng, cfg.freq_drop_width_hz.first, cfg.freq_drop_width_hz.second);
    SPKDIAR_CHECK(width < nyquist, "frequency dropout width ", width,
                  " Hz exceeds Nyquist");
    const double center = uniform(rng, width / 2.0, nyquist - width / 2.0);
    // Keep the upper edge strictly below Nyquist.
    const double hi = std::min(center + width / 2.0, std::nextafter(nyquist, 0.0));
    out = band_stop(out, center - width / 2.0, hi);
  }
  return out;
}

Waveform speed_perturb(const Waveform& w, double factor) {
  SPKDIAR_CHECK(factor >= kMinSpeed && factor <= kMaxSpeed, "speed factor ",
                factor, " outside [0.95, 1.05]");
  if (factor == 1.0) return w;
  const int target =
      static_cast<int>(std::lround(w.sample_rate_hz / factor));
  Waveform out = audio::resample(w, target);
  out.sample_rate_hz = w.sample_rate_hz;
  return out;
}

double draw_speed_factor(const AugmentConfig& cfg, Rng& rng) {
  if (cfg.speed_mode == SpeedMode::kDiscrete)
    return cfg.speed_factors[uniform_index(rng, cfg.speed_factors.size())];
  const auto [lo, hi] =
      std::minmax_element(cfg.speed_factors.begin(), cfg.speed_factors.end());
  return uniform(rng, *lo, *hi);
}

Waveform add_reverb(const Waveform& w, const Waveform& rir_in) {
  SPKDIAR_CHECK(!rir_in.empty(), "empty room impulse response");
  const Waveform rir = rir_in.sample_rate_hz == w.sample_rate_hz
                           ? rir_in
                           : audio::resample(rir_in, w.sample_rate_hz);
  auto full = dsp::convolve(w.samples, rir.samples);
  Waveform out;
  out.sample_rate_hz = w.sample_rate_hz;
  out.samples.assign(full.begin(), full.begin() + w.size());
  const double peak_out = out.peak();
  if (peak_out > 0.0) {
    const double g = w.peak() / peak_out;
    for (double& s : out.samples) s *= g;
  }
  return out;
}

Waveform add_noise(const Waveform& w, const Waveform& noise_in, double snr_db,
                   Rng& rng, double* gain) {
  SPKDIAR_CHECK(!noise_in.empty(), "empty noise waveform");
  const Waveform noise_rs = noise_in.sample_rate_hz == w.sample_rate_hz
                                ? noise_in
                                : audio::resample(noise_in, w.sample_rate_hz);
  const auto n = w.size();
  const auto m = noise_rs.size();
  std::vector<double> seg(n);
  if (m >= n) {
    const std::size_t off = uniform_index(rng, m - n + 1);
    std::copy_n(noise_rs.samples.begin() + off, n, seg.begin());
  } else {
    const std::size_t off = uniform_index(rng, m);
    for (std::size_t i = 0; i < n; ++i) seg[i] = noise_rs.samples[(off + i) % m];
  }

  const double p_w = w.power();
  double p_n = 0.0;
  for (double s : seg) p_n += s * s;
  p_n /= static_cast<double>(n);
  SPKDIAR_CHECK(p_w > 0.0, "speech power is zero");
  SPKDIAR_CHECK(p_n > 0.0, "noise power is zero");

  const double g = std::sqrt(p_w / (p_n * std::pow(10.0, snr_db / 10.0)));
  if (gain) *gain = g;
  Waveform out = w;
  for (std::size_t i = 0; i < n; ++i) out.samples[i] += g * seg[i];
  return out;
}

Waveform add_noise_reverb(const Waveform& w, const Waveform& rir,
                          const Waveform& noise, double snr_db, Rng& rng) {
  return add_noise(add_reverb(w, rir), noise, snr_db, rng);
}

Waveform apply_strategy(Strategy s, const Waveform& w, const AugmentConfig& cfg,
                        const Corpora& corpora, Rng& rng, double* snr_db) {
  if (snr_db) *snr_db = std::numeric_limits<double>::quiet_NaN();
  SPKDIAR_CHECK(!needs_rir(s) || !corpora.rirs.empty(), "view '",
                std::string(strategy_name(s)), "' needs a non-empty RIR corpus");
  SPKDIAR_CHECK(!needs_noise(s) || !corpora.noises.empty(), "view '",
                std::string(strategy_name(s)),
                "' needs a non-empty noise corpus");
  switch (s) {
    case Strategy::kClean:
      return w;
    case Strategy::kWaveformDropout:
      return waveform_dropout(w, cfg, rng);
    case Strategy::kFrequencyDropout:
      return frequency_dropout(w, cfg, rng);
    case Strategy::kSpeedPerturb:
      return speed_perturb(w, draw_speed_factor(cfg, rng));
    case Strategy::kReverb: {
      const auto& rir = corpora.rirs[uniform_index(rng, corpora.rirs.size())];
      return add_reverb(w, rir);
    }
    case Strategy::kNoise: {
      const auto& noise =
          corpora.noises[uniform_index(rng, corpora.noises.size())];
      const double snr = uniform(rng, cfg.snr_db_range.first, cfg.snr_db_range.second);
      if (snr_db) *snr_db = snr;
      return add_noise(w, noise, snr, rng);
    }
    case Strategy::kNoiseReverb: {
      const auto& rir = corpora.rirs[uniform_index(rng, corpora.rirs.size())];
      const auto& noise =
          corpora.noises[uniform_index(rng, corpora.noises.size())];
      const double snr = uniform(rng, cfg.snr_db_range.first, cfg.snr_db_range.second);
      if (snr_db) *snr_db = snr;
      return add_noise_reverb(w, rir, noise, snr, rng);
    }
  }
  detail::fail("unhandled strategy");
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t utterance,
                          std::uint64_t view) {
  // splitmix64 finalizer over a simple combination of the three keys.
  auto mix = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(master) ^ utterance) ^ (view * 0xD6E8FEB86659FD93ULL));
}

AugmentedBatch build_augmented_batch(const std::vector<LabeledWaveform>& clean,
                                     const AugmentConfig& cfg,
                                     const Corpora& corpora, Rng& rng) {
  SPKDIAR_CHECK(!clean.empty(), "augmented batch needs at least one utterance");
  cfg.validate();
  for (Strategy s : cfg.view_list) {
    SPKDIAR_CHECK(!needs_rir(s) || !corpora.rirs.empty(), "view '",
                  std::string(strategy_name(s)), "' references an empty RIR corpus");
    SPKDIAR_CHECK(!needs_noise(s) || !corpora.noises.empty(), "view '",
                  std::string(strategy_name(s)),
                  "' references an empty noise corpus");
  }
  const std::uint64_t master = rng();
  AugmentedBatch batch;
  const std::size_t total = clean.size() * cfg.view_list.size();
  batch.inputs.reserve(total);
  batch.labels.reserve(total);
  batch.view_of.reserve(total);
  for (std::size_t v = 0; v < cfg.view_list.size(); ++v) {
    for (std::size_t j = 0; j < clean.size(); ++j) {
      Rng sub(derive_seed(master, j, v));
      double snr = 0.0;
      batch.inputs.push_back(
          apply_strategy(cfg.view_list[v], clean[j].wave, cfg, corpora, sub, &snr));
      batch.labels.push_back(clean[j].label);
      batch.view_of.push_back(cfg.view_list[v]);
      batch.snr_db.push_back(snr);
    }
  }
  return batch;
}

AugmentedBatch build_single_view_batch(
    const std::vector<LabeledWaveform>& clean, const AugmentConfig& cfg,
    const Corpora& corpora, Rng& rng) {
  SPKDIAR_CHECK(!clean.empty(), "batch needs at least one utterance");
  cfg.validate();
  const std::uint64_t master = rng();
  AugmentedBatch batch;
  for (std::size_t j = 0; j < clean.size(); ++j) {
    Rng sub(derive_seed(master, j, 0));
    const Strategy s = cfg.view_list[uniform_index(sub, cfg.view_list.size())];
    double snr = 0.0;
    batch.inputs.push_back(apply_strategy(s, clean[j].wave, cfg, corpora, sub, &snr));
    batch.labels.push_back(clean[j].label);
    batch.view_of.push_back(s);
    batch.snr_db.push_back(snr);
  }
  return batch;
}

}  // namespace spkdiar::augment
