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

// Synthetic speakers, meetings, noises and impulse responses for desk-scale
// end-to-end experiments.
//
// A speaker is a source-filter voice: a jittered pulse train at the
// speaker's pitch mixed with breath noise, shaped by a cascade of formant
// resonators. Each syllable picks one of the speaker's vowel formant sets,
// so the spectrum moves over time in a speaker-specific way.

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "spkdiar/audio_io.hpp"
#include "spkdiar/augment.hpp"

namespace spkdiar::synth {

using audio::Timeline;
using audio::Waveform;
using Rng = std::mt19937_64;

struct SpeakerProfile {
  std::string name;
  double f0_hz = 120.0;
  /// Formant frequencies (F1, F2, F3) of each vowel.
  std::vector<std::array<double, 3>> vowels;
  std::array<double, 3> bandwidths_hz = {80.0, 120.0, 200.0};
  /// Breath noise relative to the pulse source.
  double breathiness = 0.2;
  double syllables_per_s = 4.5;
};

/// `n` profiles with pitch, vowel space and voice quality drawn from `seed`.
std::vector<SpeakerProfile> make_speakers(int n, std::uint64_t seed);

/// Speech-like signal of exactly `duration_s` at an RMS of -20 dBFS (before
/// a +-2 dB per-utterance gain), with a -45 dB background floor.
Waveform synth_utterance(const SpeakerProfile& spk, double duration_s, Rng& rng,
                         int sample_rate_hz = 16000);

/// Mixture of colored noise, babble-like modulated resonances and mains hum.
Waveform synth_noise(double duration_s, Rng& rng, int sample_rate_hz = 16000);

/// Direct path, sparse early reflections and an exponentially decaying
/// diffuse tail with RT60 drawn from [0.2, 0.8] s.
Waveform synth_rir(Rng& rng, int sample_rate_hz = 16000);

struct MeetingConfig {
  double duration_s = 60.0;
  std::pair<double, double> turn_s = {2.0, 6.0};
  std::pair<double, double> pause_s = {0.2, 0.8};
  /// Probability that a turn follows the previous one without a pause.
  double back_to_back = 0.25;
};

struct Meeting {
  std::string id;
  Waveform audio;
  /// Construction truth; also the oracle VAD.
  Timeline reference;
  int num_speakers = 0;
};

/// Alternating single-speaker turns; every listed speaker takes a turn
/// before anyone repeats.
Meeting synth_meeting(const std::string& id, const std::vector<SpeakerProfile>& speakers,
                      const MeetingConfig& cfg, Rng& rng);

/// Reverberation with a random RIR followed by noise at a random SNR.
Meeting contaminate(const Meeting& m, const augment::Corpora& corpora,
                    std::pair<double, double> snr_db, Rng& rng);

struct BenchmarkConfig {
  int num_speakers = 4;
  int train_utts_per_speaker = 16;
  double train_utt_s = 4.0;
  int dev_meetings = 5;
  int eval_meetings = 5;
  MeetingConfig meeting;
  int noises = 8;
  double noise_s = 8.0;
  int rirs = 8;
  std::uint64_t seed = 0;
};

struct Benchmark {
  std::vector<SpeakerProfile> speakers;
  std::vector<augment::LabeledWaveform> train;
  /// Augmentation material for training.
  augment::Corpora train_corpora;
  /// Disjoint material for test-time contamination.
  augment::Corpora test_corpora;
  std::vector<Meeting> dev;
  std::vector<Meeting> eval;
};

/// Meetings use 2..num_speakers speakers in rotation; their audio is drawn
/// independently of the training utterances.
Benchmark make_benchmark(const BenchmarkConfig& cfg);

}  // namespace spkdiar::synth
