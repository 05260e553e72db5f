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

// Diarization error rate with md-eval counting semantics. All interval
// arithmetic is done on integer milliseconds.

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spkdiar/audio_io.hpp"

namespace spkdiar::scoring {

using audio::Timeline;

/// Half-open [begin_ms, end_ms).
struct Interval {
  std::int64_t begin_ms = 0;
  std::int64_t end_ms = 0;

  double onset_s() const { return static_cast<double>(begin_ms) / 1000.0; }
  double offset_s() const { return static_cast<double>(end_ms) / 1000.0; }
  std::int64_t length_ms() const { return end_ms - begin_ms; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

std::int64_t to_ms(double seconds);

/// [0, axis_end_s] minus +-collar_s around every reference boundary and,
/// with ignore_overlap, minus every instant with >= 2 active reference
/// speakers. A negative axis_end_s means the reference end.
std::vector<Interval> scoring_regions(const Timeline& ref, double collar_s,
                                      bool ignore_overlap,
                                      double axis_end_s = -1.0);

/// Exact maximum-weight one-to-one assignment. Returns, for every row, the
/// assigned column or -1 when there are more rows than columns.
std::vector<int> max_weight_assignment(const Eigen::MatrixXd& weight);

/// Hypothesis label -> reference speaker. Clusters left over when there are
/// more hypothesis labels than reference speakers are absent.
using Mapping = std::map<std::string, std::string>;

/// Assignment maximizing jointly active time inside `regions`.
Mapping optimal_mapping(const Timeline& ref, const Timeline& hyp,
                        const std::vector<Interval>& regions);

struct DerReport {
  std::string file_id;
  /// Fractions of scored reference speech.
  double der = 0.0, ser = 0.0, fa = 0.0, ms = 0.0;
  double scored_speech_s = 0.0;
  double confusion_s = 0.0, false_alarm_s = 0.0, missed_s = 0.0;
  double collar_s = 0.0;
  Mapping mapping;
};

/// Throws if no reference speech survives the collar and overlap removal.
DerReport compute_der(const Timeline& ref, const Timeline& hyp,
                      double collar_s = 0.25, bool ignore_overlap = true);

/// Pooled over recordings: summed error times over summed scored speech.
DerReport aggregate(const std::vector<DerReport>& reports);

struct CorpusScore {
  std::vector<DerReport> files;
  DerReport total;
};

/// Scores every reference recording against the hypothesis with the same
/// file id (an absent hypothesis counts as all-missed).
CorpusScore score_corpus(const std::vector<Timeline>& refs,
                         const std::vector<Timeline>& hyps, double collar_s,
                         bool ignore_overlap);

/// Fixed-width table, one row per file plus "*** OVERALL ***".
std::string format_table(const CorpusScore& s);
/// "key=value" lines, one block per file and one for the total.
std::string format_key_values(const CorpusScore& s);

}  // namespace spkdiar::scoring
