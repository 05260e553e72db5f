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

// Train/diarize/score loops over the synthetic benchmark.

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "spkdiar/ecapa.hpp"
#include "spkdiar/pipeline.hpp"
#include "spkdiar/synth.hpp"
#include "spkdiar/train.hpp"

namespace spkdiar::experiment {

struct EvalOptions {
  pipeline::DiarizeConfig diarize;
  double collar_s = 0.25;
  bool ignore_overlap = true;
};

/// Windows and their embeddings for one recording.
struct WindowEmbeddings {
  std::vector<pipeline::Window> windows;
  std::vector<Embedding> embeddings;
};

std::vector<WindowEmbeddings> embed_meetings(const ecapa::EcapaModel& model,
                                             const std::vector<synth::Meeting>& meetings,
                                             const pipeline::DiarizeConfig& cfg);

struct MeetingResult {
  std::string id;
  int true_k = 0;
  int estimated_k = 0;
  double der_oracle = 0.0;
  double der_estimated = 0.0;
};

struct SplitResult {
  std::vector<MeetingResult> meetings;
  /// Pooled over the split's meetings.
  double der_oracle = 0.0;
  double der_estimated = 0.0;
  int k_correct = 0;
};

/// Clusters each meeting twice (oracle and estimated speaker count) with
/// `backend` and scores both against the construction truth.
SplitResult score_split(const std::vector<synth::Meeting>& meetings,
                        const std::vector<WindowEmbeddings>& embs,
                        const EvalOptions& opt, cluster::Backend backend);

SplitResult evaluate(const ecapa::EcapaModel& model,
                     const std::vector<synth::Meeting>& meetings,
                     const EvalOptions& opt);

/// Dev/Eval x oracle/estimated DER fractions.
struct DerCell {
  double dev_oracle = 0.0, dev_estimated = 0.0;
  double eval_oracle = 0.0, eval_estimated = 0.0;
};

/// Desk-scale training schedule for the synthetic benchmark: batches of 8
/// crops, 10 epochs, CLR between 1e-3 and 5e-3 with a 40-step cycle.
train::TrainConfig desk_training();

struct AblationConfig {
  synth::BenchmarkConfig bench;
  ecapa::EcapaConfig model = ecapa::EcapaConfig::toy();
  train::TrainConfig train = desk_training();
  EvalOptions eval;
  /// Test-time contamination: reverberation plus noise in this SNR range.
  std::pair<double, double> test_snr_db = {0.0, 5.0};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
};

struct AblationRow {
  std::string name;
  train::AugmentMode mode = train::AugmentMode::kNone;
  std::vector<DerCell> per_seed;
  DerCell median;
};

struct AblationReport {
  std::vector<AblationRow> rows;
  std::vector<std::uint64_t> seeds;
};

using Progress = std::function<void(const std::string&)>;

/// For every seed: builds the benchmark, contaminates the held-out meetings
/// with the test corpora, trains one model per augmentation mode (none,
/// single strategy per utterance, concatenated views) and scores it.
AblationReport ablation_harness(const AblationConfig& cfg, const Progress& progress = {});

/// Rows "Without Aug.", "Standard Aug.", "Proposed Aug."; columns
/// Dev/Eval x oracle/estimated, as median DER % over seeds.
std::string format_ablation(const AblationReport& r);

struct ParityRow {
  std::string backend;
  DerCell der;
  int k_correct = 0;
  int meetings = 0;
};

/// Spectral and k-means backends on identical window embeddings.
std::vector<ParityRow> backend_parity(const ecapa::EcapaModel& model,
                                      const std::vector<synth::Meeting>& dev,
                                      const std::vector<synth::Meeting>& eval,
                                      const EvalOptions& opt);

std::string format_parity(const std::vector<ParityRow>& rows);

/// Median of a non-empty sample (mean of the middle pair for even sizes).
double median(std::vector<double> v);

}  // namespace spkdiar::experiment
