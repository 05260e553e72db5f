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

// Oracle-VAD diarization: sliding windows over speech regions, one
// embedding per window, clustering, and conversion back to a timeline.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spkdiar/audio_io.hpp"
#include "spkdiar/cluster.hpp"
#include "spkdiar/ecapa.hpp"
#include "spkdiar/features.hpp"

namespace spkdiar::pipeline {

using audio::Timeline;
using audio::Waveform;

struct Window {
  double onset_s = 0.0;
  double offset_s = 0.0;

  double center_s() const { return 0.5 * (onset_s + offset_s); }
  double duration_s() const { return offset_s - onset_s; }
  friend bool operator==(const Window&, const Window&) = default;
};

struct DiarizeConfig {
  double win_s = 3.0;
  double shift_s = 1.5;
  int max_speakers = 10;
  double prune_fraction = 0.7;
  std::optional<int> oracle_k;
  std::uint64_t seed = 0;
  std::filesystem::path weights_path;
  cluster::Backend backend = cluster::Backend::kSpectral;
  features::FeatureConfig features;
  /// Worker threads for embedding extraction; 0 picks the hardware count.
  int threads = 1;

  void validate() const;
};

/// Union of the VAD segments (speaker labels ignored), sorted.
std::vector<Window> speech_regions(const Timeline& vad);

/// Windows [r + i*shift, r + i*shift + win] inside each speech region while
/// they fit, plus a right-aligned window when the stride leaves more than
/// shift/2 of the region uncovered. Regions no longer than win_s give one
/// window spanning the region.
std::vector<Window> slide_windows(const Timeline& vad, double win_s, double shift_s);

/// Every instant of every speech region takes the label of the nearest
/// window center among the windows covering it (or among the region's
/// windows when none covers it); same-label neighbors are merged. Without a
/// VAD the speech regions are the union of the windows. Labels render as
/// "spk<N>".
Timeline assign_labels(const std::vector<Window>& windows,
                       const std::vector<int>& labels,
                       const std::optional<Timeline>& vad = std::nullopt);

/// Log-Mel -> mean normalization -> embedder, one embedding per window.
std::vector<Embedding> embed_windows(const Waveform& audio,
                                     const std::vector<Window>& windows,
                                     const ecapa::EcapaModel& model,
                                     const features::FeatureConfig& fc,
                                     int threads = 1);

struct DiarizeResult {
  Timeline timeline;
  int num_speakers = 0;
  std::vector<Window> windows;
  std::vector<int> labels;
  std::vector<Embedding> embeddings;
  Eigen::VectorXd eigenvalues;
  std::vector<std::string> warnings;
};

/// With fewer than 2 windows, every speech region goes to one speaker and a
/// warning is recorded.
DiarizeResult diarize(const Waveform& audio, const Timeline& vad,
                      const ecapa::EcapaModel& model, const DiarizeConfig& cfg);
DiarizeResult diarize(const Waveform& audio, const Timeline& vad,
                      const ecapa::ModelWeights& weights, const DiarizeConfig& cfg);

/// Clusters precomputed window embeddings and builds the timeline.
DiarizeResult diarize_embeddings(std::vector<Window> windows,
                                 std::vector<Embedding> embeddings,
                                 const Timeline& vad, const DiarizeConfig& cfg);

}  // namespace spkdiar::pipeline
