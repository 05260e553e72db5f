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

#include "spkdiar/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

#include "spkdiar/error.hpp"

namespace spkdiar::synth {

namespace {

constexpr double kPi = std::numbers::pi;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Two-pole resonator with unit gain at DC.
struct Resonator {
  double a1 = 0.0, a2 = 0.0, b0 = 1.0;
  double y1 = 0.0, y2 = 0.0;

  void tune(double freq_hz, double bandwidth_hz, double fs) {
    const double r = std::exp(-kPi * bandwidth_hz / fs);
    const double theta = 2.0 * kPi * freq_hz / fs;
    a1 = 2.0 * r * std::cos(theta);
    a2 = -r * r;
    b0 = 1.0 - a1 - a2;
  }
  double step(double x) {
    const double y = b0 * x + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

double rms(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

void scale_to_rms(std::vector<double>& x, double target) {
  const double r = rms(x);
  if (r <= 0.0) return;
  for (double& v : x) v *= target / r;
}

void limit_peak(std::vector<double>& x, double peak) {
  double p = 0.0;
  for (double v : x) p = std::max(p, std::abs(v));
  if (p > peak)
    for (double& v : x) v *= peak / p;
}

// Reference vowel formants (F1, F2, F3) in Hz.
constexpr std::array<std::array<double, 3>, 5> kVowels = {{
    {730.0, 1090.0, 2440.0},
    {270.0, 2290.0, 3010.0},
    {300.0, 870.0, 2240.0},
    {530.0, 1840.0, 2480.0},
    {570.0, 840.0, 2410.0},
}};

}  // namespace

std::vector<SpeakerProfile> make_speakers(int n, std::uint64_t seed) {
  SPKDIAR_CHECK(n >= 1, "need at least one speaker");
  Rng rng(seed);
  // Pitch and vocal-tract length are stratified so that no two speakers
  // share a neighborhood in both.
  std::vector<int> tract_slot(static_cast<std::size_t>(n));
  std::iota(tract_slot.begin(), tract_slot.end(), 0);
  std::shuffle(tract_slot.begin(), tract_slot.end(), rng);
  std::vector<SpeakerProfile> out;
  for (int i = 0; i < n; ++i) {
    SpeakerProfile p;
    p.name = "S" + std::to_string(i);
    const double fpos = (i + uniform(rng, 0.2, 0.8)) / n;
    p.f0_hz = 90.0 * std::pow(240.0 / 90.0, fpos);
    const double tpos = (tract_slot[static_cast<std::size_t>(i)] + uniform(rng, 0.2, 0.8)) / n;
    const double alpha = 0.82 + 0.4 * tpos;
    for (const auto& v : kVowels) {
      std::array<double, 3> f{};
      for (int k = 0; k < 3; ++k) f[static_cast<std::size_t>(k)] = alpha * v[static_cast<std::size_t>(k)] * uniform(rng, 0.9, 1.1);
      std::sort(f.begin(), f.end());
      p.vowels.push_back(f);
    }
    p.bandwidths_hz = {uniform(rng, 60.0, 110.0), uniform(rng, 90.0, 160.0),
                       uniform(rng, 150.0, 250.0)};
    p.breathiness = uniform(rng, 0.05, 0.5);
    p.syllables_per_s = uniform(rng, 3.5, 6.0);
    out.push_back(std::move(p));
  }
  return out;
}

Waveform synth_utterance(const SpeakerProfile& spk, double duration_s, Rng& rng,
                         int sample_rate_hz) {
  SPKDIAR_CHECK(duration_s > 0.0, "utterance duration must be positive");
  SPKDIAR_CHECK(!spk.vowels.empty(), "speaker '", spk.name, "' has no vowels");
  const double fs = sample_rate_hz;
  const auto n = static_cast<std::size_t>(std::llround(duration_s * fs));
  std::vector<double> y(n, 0.0);
  std::vector<char> voiced(n, 0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::array<Resonator, 3> formants;
  double phase = uniform(rng, 0.0, 1.0);
  double glottal = 0.0;
  const double vibrato_hz = uniform(rng, 0.5, 1.2);
  const double vibrato_phase = uniform(rng, 0.0, 2.0 * kPi);

  std::size_t i = static_cast<std::size_t>(uniform(rng, 0.0, 0.05) * fs);
  while (i < n) {
    const auto len = static_cast<std::size_t>(uniform(rng, 0.7, 1.3) * fs / spk.syllables_per_s);
    const auto gap = static_cast<std::size_t>(uniform(rng, 0.02, 0.08) * fs);
    const auto& v = spk.vowels[std::uniform_int_distribution<std::size_t>(
        0, spk.vowels.size() - 1)(rng)];
    for (std::size_t k = 0; k < 3; ++k)
      formants[k].tune(v[k] * uniform(rng, 0.97, 1.03), spk.bandwidths_hz[k], fs);
    const double f0 = spk.f0_hz * uniform(rng, 0.94, 1.06);
    const double sigma = std::sqrt(spk.breathiness * f0 / fs);
    for (std::size_t j = 0; j < len && i < n; ++j, ++i) {
      const double t = static_cast<double>(i) / fs;
      const double inst = f0 * (1.0 + 0.03 * std::sin(2.0 * kPi * vibrato_hz * t + vibrato_phase));
      phase += inst / fs;
      double pulse = 0.0;
      if (phase >= 1.0) {
        phase -= 1.0;
        pulse = 1.0;
      }
      glottal = 0.9 * glottal + pulse;
      double s = glottal * 0.1 + sigma * gauss(rng);
      for (auto& f : formants) s = f.step(s);
      const double env = 0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(j) / static_cast<double>(len)));
      y[i] = env * s;
      voiced[i] = 1;
    }
    for (std::size_t j = 0; j < gap && i < n; ++j, ++i) {
      double s = 0.0;
      for (auto& f : formants) s = f.step(s);
      y[i] = s;
    }
  }

  // Level set on the voiced portion, then the background floor.
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < n; ++k)
    if (voiced[k]) {
      acc += y[k] * y[k];
      ++count;
    }
  const double level = 0.1 * std::pow(10.0, uniform(rng, -2.0, 2.0) / 20.0);
  if (count > 0 && acc > 0.0) {
    const double g = level / std::sqrt(acc / static_cast<double>(count));
    for (double& s : y) s *= g;
  }
  const double floor = 0.1 * std::pow(10.0, -45.0 / 20.0);
  for (double& s : y) s += floor * gauss(rng);
  limit_peak(y, 0.99);

  Waveform w;
  w.sample_rate_hz = sample_rate_hz;
  w.samples = std::move(y);
  return w;
}

Waveform synth_noise(double duration_s, Rng& rng, int sample_rate_hz) {
  SPKDIAR_CHECK(duration_s > 0.0, "noise duration must be positive");
  const double fs = sample_rate_hz;
  const auto n = static_cast<std::size_t>(std::llround(duration_s * fs));
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<double> colored(n);
  const double pole = uniform(rng, 0.0, 0.98);
  double state = 0.0;
  for (auto& v : colored) v = state = pole * state + gauss(rng);
  scale_to_rms(colored, 1.0);

  std::vector<double> babble(n, 0.0);
  const int n_bands = std::uniform_int_distribution<int>(2, 4)(rng);
  for (int b = 0; b < n_bands; ++b) {
    Resonator r;
    r.tune(uniform(rng, 300.0, 3000.0), uniform(rng, 100.0, 400.0), fs);
    const double fm = uniform(rng, 2.0, 6.0), ph = uniform(rng, 0.0, 2.0 * kPi);
    std::vector<double> band(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double am = 1.0 + 0.8 * std::sin(2.0 * kPi * fm * static_cast<double>(i) / fs + ph);
      band[i] = am * r.step(gauss(rng));
    }
    scale_to_rms(band, 1.0);
    for (std::size_t i = 0; i < n; ++i) babble[i] += band[i];
  }
  scale_to_rms(babble, 1.0);

  std::vector<double> hum(n, 0.0);
  const double base = uniform(rng, 50.0, 120.0);
  for (int h = 1; h <= 5; ++h)
    for (std::size_t i = 0; i < n; ++i)
      hum[i] += std::sin(2.0 * kPi * base * h * static_cast<double>(i) / fs) / h;
  scale_to_rms(hum, 1.0);

  const double wc = uniform(rng, 0.3, 1.0), wb = uniform(rng, 0.0, 1.0),
               wh = uniform(rng, 0.0, 0.3);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = wc * colored[i] + wb * babble[i] + wh * hum[i];
  scale_to_rms(out, 0.1);
  limit_peak(out, 0.99);
  Waveform w;
  w.sample_rate_hz = sample_rate_hz;
  w.samples = std::move(out);
  return w;
}

Waveform synth_rir(Rng& rng, int sample_rate_hz) {
  const double fs = sample_rate_hz;
  const double rt60 = uniform(rng, 0.2, 0.8);
  const auto n = static_cast<std::size_t>(std::llround(std::min(1.0, 1.2 * rt60) * fs));
  std::vector<double> h(n, 0.0);
  h[0] = 1.0;
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int n_early = std::uniform_int_distribution<int>(4, 10)(rng);
  for (int e = 0; e < n_early; ++e) {
    const auto d = static_cast<std::size_t>(uniform(rng, 0.002, 0.03) * fs);
    if (d < n) h[d] += uniform(rng, 0.2, 0.7) * (uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0);
  }
  const auto tail_start = static_cast<std::size_t>(0.005 * fs);
  for (std::size_t i = tail_start; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    h[i] += 0.15 * gauss(rng) * std::exp(-6.9 * t / rt60);
  }
  Waveform w;
  w.sample_rate_hz = sample_rate_hz;
  w.samples = std::move(h);
  return w;
}

Meeting synth_meeting(const std::string& id, const std::vector<SpeakerProfile>& speakers,
                      const MeetingConfig& cfg, Rng& rng) {
  SPKDIAR_CHECK(!speakers.empty(), "meeting needs at least one speaker");
  SPKDIAR_CHECK(cfg.duration_s > 0.0 && cfg.turn_s.first > 0.0 &&
                    cfg.turn_s.first <= cfg.turn_s.second,
                "invalid meeting configuration");
  const int fs = 16000;
  Meeting m;
  m.id = id;
  m.num_speakers = static_cast<int>(speakers.size());
  m.reference.file_id = id;
  m.audio.sample_rate_hz = fs;
  m.audio.samples.assign(static_cast<std::size_t>(std::llround(cfg.duration_s * fs)), 0.0);

  std::vector<std::size_t> first(speakers.size());
  std::iota(first.begin(), first.end(), std::size_t{0});
  std::shuffle(first.begin(), first.end(), rng);

  double t = uniform(rng, 0.1, 0.5);
  std::size_t turn = 0, current = first.front();
  const double min_turn = 0.5;
  while (cfg.duration_s - t >= min_turn) {
    if (turn < first.size()) {
      current = first[turn];
    } else if (speakers.size() > 1) {
      std::size_t next = current;
      while (next == current)
        next = std::uniform_int_distribution<std::size_t>(0, speakers.size() - 1)(rng);
      current = next;
    }
    // Snap to milliseconds so the reference is exact in RTTM form.
    const double len = std::min(std::round(uniform(rng, cfg.turn_s.first, cfg.turn_s.second) * 1000.0) / 1000.0,
                                std::floor((cfg.duration_s - t) * 1000.0) / 1000.0);
    const Waveform u = synth_utterance(speakers[current], len, rng, fs);
    const auto start = static_cast<std::size_t>(std::llround(t * fs));
    for (std::size_t i = 0; i < u.size() && start + i < m.audio.size(); ++i)
      m.audio.samples[start + i] = u.samples[i];
    m.reference.entries.push_back({speakers[current].name, t, t + len});
    t += len;
    if (uniform(rng, 0.0, 1.0) >= cfg.back_to_back)
      t += std::round(uniform(rng, cfg.pause_s.first, cfg.pause_s.second) * 1000.0) / 1000.0;
    t = std::round(t * 1000.0) / 1000.0;
    ++turn;
  }
  m.reference.sort();
  return m;
}

Meeting contaminate(const Meeting& m, const augment::Corpora& corpora,
                    std::pair<double, double> snr_db, Rng& rng) {
  SPKDIAR_CHECK(!corpora.rirs.empty() && !corpora.noises.empty(),
                "contamination needs impulse responses and noises");
  const auto& rir = corpora.rirs[std::uniform_int_distribution<std::size_t>(
      0, corpora.rirs.size() - 1)(rng)];
  const auto& noise = corpora.noises[std::uniform_int_distribution<std::size_t>(
      0, corpora.noises.size() - 1)(rng)];
  Meeting out = m;
  out.audio = audio::clip(
      augment::add_noise_reverb(m.audio, rir, noise, uniform(rng, snr_db.first, snr_db.second), rng));
  return out;
}

Benchmark make_benchmark(const BenchmarkConfig& cfg) {
  SPKDIAR_CHECK(cfg.num_speakers >= 2, "benchmark needs at least 2 speakers");
  Benchmark b;
  b.speakers = make_speakers(cfg.num_speakers, augment::derive_seed(cfg.seed, 1, 0));

  Rng train_rng(augment::derive_seed(cfg.seed, 2, 0));
  for (int s = 0; s < cfg.num_speakers; ++s)
    for (int u = 0; u < cfg.train_utts_per_speaker; ++u)
      b.train.push_back({synth_utterance(b.speakers[static_cast<std::size_t>(s)],
                                         cfg.train_utt_s, train_rng),
                         s});

  auto corpora = [&](std::uint64_t tag) {
    Rng rng(augment::derive_seed(cfg.seed, tag, 0));
    augment::Corpora c;
    for (int i = 0; i < cfg.noises; ++i) c.noises.push_back(synth_noise(cfg.noise_s, rng));
    for (int i = 0; i < cfg.rirs; ++i) c.rirs.push_back(synth_rir(rng));
    return c;
  };
  b.train_corpora = corpora(3);
  b.test_corpora = corpora(4);

  auto meetings = [&](const std::string& prefix, int count, std::uint64_t tag) {
    Rng rng(augment::derive_seed(cfg.seed, tag, 0));
    std::vector<Meeting> out;
    for (int i = 0; i < count; ++i) {
      const int k = 2 + i % (cfg.num_speakers - 1);
      std::vector<std::size_t> idx(b.speakers.size());
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      std::shuffle(idx.begin(), idx.end(), rng);
      std::vector<SpeakerProfile> chosen;
      for (int j = 0; j < k; ++j) chosen.push_back(b.speakers[idx[static_cast<std::size_t>(j)]]);
      char id[32];
      std::snprintf(id, sizeof id, "%s%02d", prefix.c_str(), i + 1);
      out.push_back(synth_meeting(id, chosen, cfg.meeting, rng));
    }
    return out;
  };
  b.dev = meetings("dev", cfg.dev_meetings, 5);
  b.eval = meetings("eval", cfg.eval_meetings, 6);
  return b;
}

}  // namespace spkdiar::synth
