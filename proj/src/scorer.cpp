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

#include "spkdiar/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "spkdiar/error.hpp"

namespace spkdiar::scoring {

std::int64_t to_ms(double seconds) {
  return static_cast<std::int64_t>(std::llround(seconds * 1000.0));
}

namespace {

// Union of possibly overlapping intervals, sorted, empty ones dropped.
std::vector<Interval> merge(std::vector<Interval> v) {
  std::sort(v.begin(), v.end(), [](const Interval& a, const Interval& b) {
    return a.begin_ms < b.begin_ms;
  });
  std::vector<Interval> out;
  for (const auto& iv : v) {
    if (iv.end_ms <= iv.begin_ms) continue;
    if (!out.empty() && iv.begin_ms <= out.back().end_ms)
      out.back().end_ms = std::max(out.back().end_ms, iv.end_ms);
    else
      out.push_back(iv);
  }
  return out;
}

std::vector<Interval> subtract(const Interval& axis, const std::vector<Interval>& holes) {
  std::vector<Interval> out;
  std::int64_t cur = axis.begin_ms;
  for (const auto& h : merge(holes)) {
    if (h.end_ms <= cur) continue;
    if (h.begin_ms >= axis.end_ms) break;
    if (h.begin_ms > cur) out.push_back({cur, h.begin_ms});
    cur = std::max(cur, h.end_ms);
  }
  if (cur < axis.end_ms) out.push_back({cur, axis.end_ms});
  return out;
}

std::vector<std::string> sorted_speakers(const Timeline& t) {
  auto s = t.speakers();
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

// Per-speaker activity over the elementary intervals between consecutive
// entries of `bounds`: active[spk][i] is true when spk speaks in
// [bounds[i], bounds[i+1]).
std::vector<std::vector<char>> activity(const Timeline& t,
                                        const std::vector<std::string>& spk,
                                        const std::vector<std::int64_t>& bounds) {
  const std::size_t n = bounds.empty() ? 0 : bounds.size() - 1;
  std::vector<std::vector<int>> diff(spk.size(), std::vector<int>(n + 1, 0));
  auto index_of = [&](std::int64_t ms) {
    return static_cast<std::size_t>(
        std::lower_bound(bounds.begin(), bounds.end(), ms) - bounds.begin());
  };
  for (const auto& e : t.entries) {
    const auto s = static_cast<std::size_t>(
        std::lower_bound(spk.begin(), spk.end(), e.speaker) - spk.begin());
    const std::size_t a = index_of(to_ms(e.onset_s)), b = index_of(to_ms(e.offset_s));
    if (b <= a) continue;
    ++diff[s][a];
    --diff[s][b];
  }
  std::vector<std::vector<char>> active(spk.size(), std::vector<char>(n, 0));
  for (std::size_t s = 0; s < spk.size(); ++s) {
    int run = 0;
    for (std::size_t i = 0; i < n; ++i) {
      run += diff[s][i];
      active[s][i] = run > 0;
    }
  }
  return active;
}

std::vector<char> region_mask(const std::vector<Interval>& regions,
                              const std::vector<std::int64_t>& bounds) {
  const std::size_t n = bounds.empty() ? 0 : bounds.size() - 1;
  std::vector<char> mask(n, 0);
  for (const auto& r : regions) {
    auto a = static_cast<std::size_t>(
        std::lower_bound(bounds.begin(), bounds.end(), r.begin_ms) - bounds.begin());
    const auto b = static_cast<std::size_t>(
        std::lower_bound(bounds.begin(), bounds.end(), r.end_ms) - bounds.begin());
    for (; a < b && a < n; ++a) mask[a] = 1;
  }
  return mask;
}

// Shared elementary-interval decomposition of a ref/hyp pair.
struct Grid {
  std::vector<std::int64_t> bounds;
  std::vector<std::string> ref_spk, hyp_spk;
  std::vector<std::vector<char>> ref_on, hyp_on;
  std::vector<char> scored;

  std::size_t size() const { return scored.size(); }
  std::int64_t length(std::size_t i) const { return bounds[i + 1] - bounds[i]; }
};

Grid make_grid(const Timeline& ref, const Timeline& hyp,
               const std::vector<Interval>& regions) {
  Grid g;
  auto add = [&](const Timeline& t) {
    for (const auto& e : t.entries) {
      g.bounds.push_back(to_ms(e.onset_s));
      g.bounds.push_back(to_ms(e.offset_s));
    }
  };
  add(ref);
  add(hyp);
  for (const auto& r : regions) {
    g.bounds.push_back(r.begin_ms);
    g.bounds.push_back(r.end_ms);
  }
  std::sort(g.bounds.begin(), g.bounds.end());
  g.bounds.erase(std::unique(g.bounds.begin(), g.bounds.end()), g.bounds.end());
  g.ref_spk = sorted_speakers(ref);
  g.hyp_spk = sorted_speakers(hyp);
  g.ref_on = activity(ref, g.ref_spk, g.bounds);
  g.hyp_on = activity(hyp, g.hyp_spk, g.bounds);
  g.scored = region_mask(regions, g.bounds);
  return g;
}

Eigen::MatrixXd overlap_matrix(const Grid& g) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g.hyp_spk.size()),
                                            static_cast<Eigen::Index>(g.ref_spk.size()));
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!g.scored[i]) continue;
    const auto d = static_cast<double>(g.length(i));
    for (std::size_t h = 0; h < g.hyp_spk.size(); ++h) {
      if (!g.hyp_on[h][i]) continue;
      for (std::size_t r = 0; r < g.ref_spk.size(); ++r)
        if (g.ref_on[r][i]) w(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(r)) += d;
    }
  }
  return w;
}

std::vector<int> grid_mapping(const Grid& g) {
  if (g.hyp_spk.empty() || g.ref_spk.empty())
    return std::vector<int>(g.hyp_spk.size(), -1);
  return max_weight_assignment(overlap_matrix(g));
}

void check_valid(const Timeline& t, const char* what) {
  try {
    t.validate();
  } catch (const Error& e) {
    detail::fail("invalid ", what, " timeline: ", e.what());
  }
}

}  // namespace

std::vector<Interval> scoring_regions(const Timeline& ref, double collar_s,
                                      bool ignore_overlap, double axis_end_s) {
  check_valid(ref, "reference");
  SPKDIAR_CHECK(collar_s >= 0.0, "collar must be non-negative, got ", collar_s);
  const std::int64_t end =
      std::max(to_ms(ref.end_s()), axis_end_s < 0.0 ? 0 : to_ms(axis_end_s));
  const std::int64_t c = to_ms(collar_s);

  std::vector<Interval> holes;
  if (c > 0) {
    for (const auto& e : ref.entries) {
      for (const double b : {e.onset_s, e.offset_s}) {
        const std::int64_t ms = to_ms(b);
        holes.push_back({ms - c, ms + c});
      }
    }
  }
  if (ignore_overlap) {
    const Timeline none;
    const Grid g = make_grid(ref, none, {{0, end}});
    for (std::size_t i = 0; i < g.size(); ++i) {
      int n = 0;
      for (const auto& on : g.ref_on) n += on[i];
      if (n >= 2) holes.push_back({g.bounds[i], g.bounds[i + 1]});
    }
  }
  return subtract({0, end}, holes);
}

std::vector<int> max_weight_assignment(const Eigen::MatrixXd& weight) {
  const auto rows = static_cast<int>(weight.rows());
  const auto cols = static_cast<int>(weight.cols());
  if (rows == 0) return {};
  if (cols == 0) return std::vector<int>(static_cast<std::size_t>(rows), -1);
  SPKDIAR_CHECK(weight.allFinite(), "assignment weights must be finite");

  // Square min-cost problem on cost = max - weight, zero-weight padding.
  const int n = std::max(rows, cols);
  const double top = weight.maxCoeff();
  auto cost = [&](int i, int j) {
    if (i >= rows || j >= cols) return top;
    return top - weight(i, j);
  };
  const double inf = std::numeric_limits<double>::infinity();
  // 1-indexed potentials; p[j] = row matched to column j.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> out(static_cast<std::size_t>(rows), -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] >= 1 && p[j] <= rows && j <= cols) out[static_cast<std::size_t>(p[j] - 1)] = j - 1;
  return out;
}

Mapping optimal_mapping(const Timeline& ref, const Timeline& hyp,
                        const std::vector<Interval>& regions) {
  check_valid(ref, "reference");
  check_valid(hyp, "hypothesis");
  const Grid g = make_grid(ref, hyp, regions);
  const auto assign = grid_mapping(g);
  Mapping m;
  for (std::size_t h = 0; h < assign.size(); ++h)
    if (assign[h] >= 0) m[g.hyp_spk[h]] = g.ref_spk[static_cast<std::size_t>(assign[h])];
  return m;
}

DerReport compute_der(const Timeline& ref, const Timeline& hyp, double collar_s,
                      bool ignore_overlap) {
  check_valid(ref, "reference");
  check_valid(hyp, "hypothesis");
  const double axis_end = std::max(ref.end_s(), hyp.end_s());
  const auto regions = scoring_regions(ref, collar_s, ignore_overlap, axis_end);
  const Grid g = make_grid(ref, hyp, regions);
  const auto assign = grid_mapping(g);

  std::int64_t total = 0, miss = 0, fa = 0, conf = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!g.scored[i]) continue;
    const std::int64_t d = g.length(i);
    std::int64_t n_ref = 0, n_hyp = 0, n_correct = 0;
    for (const auto& on : g.ref_on) n_ref += on[i];
    for (std::size_t h = 0; h < g.hyp_spk.size(); ++h) {
      if (!g.hyp_on[h][i]) continue;
      ++n_hyp;
      const int r = assign[h];
      if (r >= 0 && g.ref_on[static_cast<std::size_t>(r)][i]) ++n_correct;
    }
    total += d * n_ref;
    miss += d * std::max<std::int64_t>(0, n_ref - n_hyp);
    fa += d * std::max<std::int64_t>(0, n_hyp - n_ref);
    conf += d * (std::min(n_ref, n_hyp) - n_correct);
  }
  SPKDIAR_CHECK(total > 0, "no scored reference speech in '", ref.file_id,
                "' after collar and overlap removal");

  DerReport r;
  r.file_id = ref.file_id;
  r.collar_s = collar_s;
  r.scored_speech_s = static_cast<double>(total) / 1000.0;
  r.missed_s = static_cast<double>(miss) / 1000.0;
  r.false_alarm_s = static_cast<double>(fa) / 1000.0;
  r.confusion_s = static_cast<double>(conf) / 1000.0;
  const auto denom = static_cast<double>(total);
  r.ms = static_cast<double>(miss) / denom;
  r.fa = static_cast<double>(fa) / denom;
  r.ser = static_cast<double>(conf) / denom;
  r.der = r.ser + r.fa + r.ms;
  for (std::size_t h = 0; h < assign.size(); ++h)
    if (assign[h] >= 0) r.mapping[g.hyp_spk[h]] = g.ref_spk[static_cast<std::size_t>(assign[h])];
  return r;
}

DerReport aggregate(const std::vector<DerReport>& reports) {
  SPKDIAR_CHECK(!reports.empty(), "nothing to aggregate");
  // Re-derive integer milliseconds so the pooled fractions stay exact.
  std::int64_t total = 0, miss = 0, fa = 0, conf = 0;
  DerReport out;
  out.file_id = "*** OVERALL ***";
  out.collar_s = reports.front().collar_s;
  for (const auto& r : reports) {
    total += to_ms(r.scored_speech_s);
    miss += to_ms(r.missed_s);
    fa += to_ms(r.false_alarm_s);
    conf += to_ms(r.confusion_s);
  }
  out.scored_speech_s = static_cast<double>(total) / 1000.0;
  out.missed_s = static_cast<double>(miss) / 1000.0;
  out.false_alarm_s = static_cast<double>(fa) / 1000.0;
  out.confusion_s = static_cast<double>(conf) / 1000.0;
  const auto denom = static_cast<double>(total);
  out.ms = static_cast<double>(miss) / denom;
  out.fa = static_cast<double>(fa) / denom;
  out.ser = static_cast<double>(conf) / denom;
  out.der = out.ser + out.fa + out.ms;
  return out;
}

CorpusScore score_corpus(const std::vector<Timeline>& refs,
                         const std::vector<Timeline>& hyps, double collar_s,
                         bool ignore_overlap) {
  SPKDIAR_CHECK(!refs.empty(), "no reference recordings");
  CorpusScore s;
  for (const auto& ref : refs) {
    Timeline hyp;
    hyp.file_id = ref.file_id;
    for (const auto& h : hyps)
      if (h.file_id == ref.file_id) hyp.entries.insert(hyp.entries.end(), h.entries.begin(), h.entries.end());
    hyp.sort();
    s.files.push_back(compute_der(ref, hyp, collar_s, ignore_overlap));
  }
  s.total = aggregate(s.files);
  return s;
}

std::string format_table(const CorpusScore& s) {
  std::ostringstream o;
  o << std::left << std::setw(24) << "file" << std::right << std::setw(10) << "DER%"
    << std::setw(10) << "SER%" << std::setw(10) << "FA%" << std::setw(10) << "MS%"
    << std::setw(12) << "scored_s" << '\n';
  o << std::fixed;
  auto row = [&](const DerReport& r) {
    o << std::left << std::setw(24) << r.file_id << std::right << std::setprecision(2)
      << std::setw(10) << 100.0 * r.der << std::setw(10) << 100.0 * r.ser
      << std::setw(10) << 100.0 * r.fa << std::setw(10) << 100.0 * r.ms
      << std::setprecision(3) << std::setw(12) << r.scored_speech_s << '\n';
  };
  for (const auto& r : s.files) row(r);
  row(s.total);
  return o.str();
}

std::string format_key_values(const CorpusScore& s) {
  std::ostringstream o;
  o << std::setprecision(17);
  auto block = [&](const DerReport& r, const std::string& id) {
    o << "file=" << id << '\n'
      << "der=" << r.der << '\n'
      << "ser=" << r.ser << '\n'
      << "fa=" << r.fa << '\n'
      << "ms=" << r.ms << '\n'
      << "scored_speech_s=" << r.scored_speech_s << '\n'
      << "collar_s=" << r.collar_s << '\n';
    for (const auto& [h, ref] : r.mapping) o << "map." << h << '=' << ref << '\n';
  };
  for (const auto& r : s.files) block(r, r.file_id);
  block(s.total, "ALL");
  return o.str();
}

}  // namespace spkdiar::scoring
