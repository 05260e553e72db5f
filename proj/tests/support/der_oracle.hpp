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

// Brute-force DER on a 1 ms grid with an exhaustive search over
// hypothesis-to-reference assignments. Slow but independent of the scorer.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "spkdiar/audio_io.hpp"

namespace spkdiar::testing {

struct OracleDer {
  double der = 0.0, ser = 0.0, fa = 0.0, ms = 0.0;
  double scored_s = 0.0;
};

inline std::int64_t ms_of(double s) { return std::llround(s * 1000.0); }

inline OracleDer brute_force_der(const audio::Timeline& ref, const audio::Timeline& hyp,
                                 double collar_s, bool ignore_overlap) {
  const auto rs = ref.speakers();
  const auto hs = hyp.speakers();
  std::int64_t end = 0;
  for (const auto& e : ref.entries) end = std::max(end, ms_of(e.offset_s));
  for (const auto& e : hyp.entries) end = std::max(end, ms_of(e.offset_s));
  const auto n = static_cast<std::size_t>(end);
  const std::int64_t collar = ms_of(collar_s);

  // Per-millisecond activity as bitmasks (at most 16 speakers per side).
  std::vector<std::uint32_t> rmask(n, 0), hmask(n, 0);
  std::vector<bool> scored(n, true);
  auto idx = [](const std::vector<std::string>& v, const std::string& s) {
    return static_cast<int>(std::find(v.begin(), v.end(), s) - v.begin());
  };
  for (const auto& e : ref.entries) {
    const int k = idx(rs, e.speaker);
    for (auto t = ms_of(e.onset_s); t < ms_of(e.offset_s); ++t) rmask[t] |= 1u << k;
    for (auto b : {ms_of(e.onset_s), ms_of(e.offset_s)})
      for (auto t = std::max<std::int64_t>(0, b - collar);
           t < std::min<std::int64_t>(end, b + collar); ++t)
        scored[t] = false;
  }
  for (const auto& e : hyp.entries) {
    const int k = idx(hs, e.speaker);
    for (auto t = ms_of(e.onset_s); t < ms_of(e.offset_s); ++t) hmask[t] |= 1u << k;
  }
  if (ignore_overlap)
    for (std::size_t t = 0; t < n; ++t)
      if (__builtin_popcount(rmask[t]) >= 2) scored[t] = false;

  // Every injective map of hyp clusters into ref speakers or "none".
  std::vector<int> assign(hs.size(), -1);
  double best_correct = -1.0;
  std::vector<int> best;
  std::vector<bool> used(rs.size(), false);
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == hs.size()) {
      double c = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        if (!scored[t]) continue;
        for (std::size_t h = 0; h < hs.size(); ++h)
          if (assign[h] >= 0 && (hmask[t] >> h & 1u) && (rmask[t] >> assign[h] & 1u)) c += 1.0;
      }
      if (c > best_correct) best_correct = c, best = assign;
      return;
    }
    assign[i] = -1;
    rec(i + 1);
    for (std::size_t r = 0; r < rs.size(); ++r) {
      if (used[r]) continue;
      used[r] = true;
      assign[i] = static_cast<int>(r);
      rec(i + 1);
      used[r] = false;
    }
    assign[i] = -1;
  };
  rec(0);

  double total = 0.0, miss = 0.0, fa = 0.0, conf = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    if (!scored[t]) continue;
    const int nr = __builtin_popcount(rmask[t]);
    const int nh = __builtin_popcount(hmask[t]);
    int correct = 0;
    for (std::size_t h = 0; h < hs.size(); ++h)
      if (best[h] >= 0 && (hmask[t] >> h & 1u) && (rmask[t] >> best[h] & 1u)) ++correct;
    total += nr;
    miss += std::max(0, nr - nh);
    fa += std::max(0, nh - nr);
    conf += std::min(nr, nh) - correct;
  }
  OracleDer o;
  o.scored_s = total / 1000.0;
  o.ms = miss / total;
  o.fa = fa / total;
  o.ser = conf / total;
  o.der = o.ms + o.fa + o.ser;
  return o;
}

/// Random millisecond-aligned timeline; overlaps between speakers allowed.
inline audio::Timeline random_timeline(std::mt19937_64& rng, int speakers,
                                       double span_s, const std::string& prefix,
                                       int max_segments = 12) {
  std::uniform_int_distribution<int> count(1, max_segments);
  std::uniform_int_distribution<int> who(0, speakers - 1);
  std::uniform_int_distribution<std::int64_t> start(0, ms_of(span_s) - 100);
  std::uniform_int_distribution<std::int64_t> len(50, 4000);
  audio::Timeline t{"rec", {}};
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    const auto a = start(rng);
    const auto b = std::min(ms_of(span_s), a + len(rng));
    t.entries.push_back({prefix + std::to_string(who(rng)), a / 1000.0, b / 1000.0});
  }
  t.sort();
  return t;
}

/// Same timeline with every speaker label renamed through a permutation.
inline audio::Timeline relabel(const audio::Timeline& t, std::mt19937_64& rng,
                               const std::string& prefix) {
  auto names = t.speakers();
  std::vector<std::string> shuffled = names;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  std::map<std::string, std::string> m;
  for (std::size_t i = 0; i < names.size(); ++i) m[names[i]] = prefix + shuffled[i];
  audio::Timeline out = t;
  for (auto& e : out.entries) e.speaker = m.at(e.speaker);
  return out;
}

}  // namespace spkdiar::testing
