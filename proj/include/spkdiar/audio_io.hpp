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

#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

namespace spkdiar::audio {

/// Mono PCM signal; amplitudes nominally in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate_hz = 16000;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
  double peak() const;
  /// Mean squared amplitude.
  double power() const;
};

/// Clamps every sample into [-1, 1]. This is the only place samples are
/// clipped; write_wav refuses out-of-range input instead.
Waveform clip(Waveform w);

/// Scales the signal so its peak magnitude equals `target_peak` (no-op on
/// an all-zero signal).
Waveform normalize_peak(Waveform w, double target_peak = 0.99);

enum class WavEncoding { kPcm16, kFloat32 };

/// Reads a RIFF/WAVE file and returns channel `channel` (no downmix).
Waveform read_wav(const std::filesystem::path& path, int channel = 0);
Waveform read_wav(std::istream& in, int channel = 0);

/// Writes a mono RIFF/WAVE file. Throws if any |sample| > 1.
void write_wav(const Waveform& w, const std::filesystem::path& path,
               WavEncoding encoding = WavEncoding::kPcm16);
void write_wav(const Waveform& w, std::ostream& out,
               WavEncoding encoding = WavEncoding::kPcm16);

/// Band-limited sample-rate conversion: polyphase windowed-sinc with a
/// Kaiser window and 64 taps per phase (measured at the lower of the two
/// rates). Output length is round(len * target / source).
Waveform resample(const Waveform& w, int target_rate_hz);

/// Collects every *.wav under `root` recursively, or the lines of `root`
/// when it is a regular file (manifest, one path per line). Sorted so the
/// corpus order is stable across filesystems.
std::vector<std::filesystem::path> list_wav_corpus(
    const std::filesystem::path& root);

// ---------------------------------------------------------------------------
// Diarization annotations.

struct Segment {
  std::string speaker;
  double onset_s = 0.0;
  double offset_s = 0.0;

  double duration_s() const { return offset_s - onset_s; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Ordered speech segments for one recording. Reference, oracle VAD and
/// hypothesis segmentations all use this type; overlap is allowed.
struct Timeline {
  std::string file_id;
  std::vector<Segment> entries;

  /// Stable sort by onset.
  void sort();
  /// Throws if any entry has offset <= onset or negative onset.
  void validate() const;
  std::vector<std::string> speakers() const;
  double end_s() const;
};

/// Parses NIST RTTM text. One Timeline per distinct file id, in order of
/// first appearance, entries sorted by onset. Lines starting with '#' and
/// blank lines are skipped; other record types are rejected.
std::vector<Timeline> parse_rttm(std::istream& in);
std::vector<Timeline> parse_rttm_file(const std::filesystem::path& path);

/// Renders SPEAKER lines with millisecond precision (3 decimals by default).
std::string emit_rttm(const Timeline& t, int precision = 3);
void write_rttm_file(const std::vector<Timeline>& ts,
                     const std::filesystem::path& path);

}  // namespace spkdiar::audio
