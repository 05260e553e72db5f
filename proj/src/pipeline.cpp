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

#include "spkdiar/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "spkdiar/error.hpp"

namespace spkdiar::pipeline {

namespace {

constexpr double kEps = 1e-9;

std::string speaker_name(int label) { return "spk" + std::to_string(label); }

}  // namespace

void DiarizeConfig::validate() const {
  SPKDIAR_CHECK(win_s > 0.0, "window length must be positive, got ", win_s);
  SPKDIAR_CHECK(shift_s > 0.0 && shift_s <= win_s, "shift must lie in (0, win_s], got ",
                shift_s);
  SPKDIAR_CHECK(max_speakers >= 1, "max_speakers must be >= 1, got ", max_speakers);
  SPKDIAR_CHECK(prune_fraction >= 0.0 && prune_fraction < 1.0,
                "prune fraction must lie in [0, 1), got ", prune_fraction);
  if (oracle_k) SPKDIAR_CHECK(*oracle_k >= 1, "oracle k must be >= 1");
  SPKDIAR_CHECK(threads >= 0, "threads must be >= 0");
  features.validate();
}

std::vector<Window> speech_regions(const Timeline& vad) {
  vad.validate();
  std::vector<Window> segs;
  for (const auto& e : vad.entries) segs.push_back({e.onset_s, e.offset_s});
  std::sort(segs.begin(), segs.end(),
            [](const Window& a, const Window& b) { return a.onset_s < b.onset_s; });
  std::vector<Window> out;
  for (const auto& s : segs) {
    if (!out.empty() && s.onset_s <= out.back().offset_s + kEps)
      out.back().offset_s = std::max(out.back().offset_s, s.offset_s);
    else
      out.push_back(s);
  }
  return out;
}

std::vector<Window> slide_windows(const Timeline& vad, double win_s, double shift_s) {
  SPKDIAR_CHECK(win_s > 0.0 && shift_s > 0.0 && shift_s <= win_s,
                "need 0 < shift <= win (win = ", win_s, ", shift = ", shift_s, ")");
  std::vector<Window> out;
  for (const auto& r : speech_regions(vad)) {
    if (r.duration_s() <= win_s + kEps) {
      out.push_back(r);
      continue;
    }
    double last_end = r.onset_s;
    for (long i = 0;; ++i) {
      const double on = r.onset_s + static_cast<double>(i) * shift_s;
      if (on + win_s > r.offset_s + kEps) break;
      out.push_back({on, on + win_s});
      last_end = on + win_s;
    }
    if (r.offset_s - last_end > 0.5 * shift_s + kEps)
      out.push_back({r.offset_s - win_s, r.offset_s});
  }
  return out;
}

Timeline assign_labels(const std::vector<Window>& windows,
                       const std::vector<int>& labels,
                       const std::optional<Timeline>& vad) {
  SPKDIAR_CHECK(windows.size() == labels.size(), "got ", windows.size(),
                " windows but ", labels.size(), " labels");
  Timeline out;
  if (vad) out.file_id = vad->file_id;
  if (windows.empty()) return out;

  std::vector<Window> regions;
  if (vad) {
    regions = speech_regions(*vad);
  } else {
    Timeline t;
    for (const auto& w : windows) t.entries.push_back({"", w.onset_s, w.offset_s});
    regions = speech_regions(t);
  }

  std::vector<std::size_t> all(windows.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

  for (const auto& r : regions) {
    std::vector<std::size_t> local;
    for (std::size_t i = 0; i < windows.size(); ++i)
      if (windows[i].offset_s > r.onset_s && windows[i].onset_s < r.offset_s) local.push_back(i);
    const auto& pool = local.empty() ? all : local;

    std::vector<double> cuts = {r.onset_s, r.offset_s};
    std::vector<double> centers;
    for (const std::size_t i : pool) {
      cuts.push_back(windows[i].onset_s);
      cuts.push_back(windows[i].offset_s);
      centers.push_back(windows[i].center_s());
    }
    std::sort(centers.begin(), centers.end());
    for (std::size_t i = 1; i < centers.size(); ++i)
      cuts.push_back(0.5 * (centers[i - 1] + centers[i]));
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::remove_if(cuts.begin(), cuts.end(),
                              [&](double c) {
                                return c < r.onset_s - kEps || c > r.offset_s + kEps;
                              }),
               cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end(),
                           [](double a, double b) { return std::abs(a - b) <= kEps; }),
               cuts.end());

    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      const double a = cuts[c], b = cuts[c + 1];
      const double mid = 0.5 * (a + b);
      std::size_t best = pool.front();
      double best_d = std::numeric_limits<double>::infinity();
      bool best_covers = false;
      for (const std::size_t i : pool) {
        const bool covers = windows[i].onset_s <= mid && mid <= windows[i].offset_s;
        const double d = std::abs(windows[i].center_s() - mid);
        if ((covers && !best_covers) || (covers == best_covers && d < best_d)) {
          best = i;
          best_d = d;
          best_covers = covers;
        }
      }
      const std::string spk = speaker_name(labels[best]);
      if (!out.entries.empty() && out.entries.back().speaker == spk &&
          std::abs(out.entries.back().offset_s - a) <= kEps) {
        out.entries.back().offset_s = b;
      } else {
        out.entries.push_back({spk, a, b});
      }
    }
  }
  return out;
}

std::vector<Embedding> embed_windows(const Waveform& audio,
                                     const std::vector<Window>& windows,
                                     const ecapa::EcapaModel& model,
                                     const features::FeatureConfig& fc, int threads) {
  std::vector<Embedding> out(windows.size());
  auto work = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < windows.size(); i += step) {
      const auto& w = windows[i];
      const auto fs = static_cast<double>(audio.sample_rate_hz);
      const auto a = static_cast<std::size_t>(std::max(0.0, std::round(w.onset_s * fs)));
      const auto b = std::min(audio.size(),
                              static_cast<std::size_t>(std::round(w.offset_s * fs)));
      SPKDIAR_CHECK(b > a, "window [", w.onset_s, ", ", w.offset_s,
                    "] lies outside the audio");
      Waveform slice;
      slice.sample_rate_hz = audio.sample_rate_hz;
      slice.samples.assign(audio.samples.begin() + static_cast<std::ptrdiff_t>(a),
                           audio.samples.begin() + static_cast<std::ptrdiff_t>(b));
      out[i] = model.embed(features::extract(slice, fc));
    }
  };
  std::size_t n_threads =
      threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                   : static_cast<std::size_t>(threads);
  n_threads = std::min(n_threads, std::max<std::size_t>(1, windows.size()));
  if (n_threads <= 1) {
    work(0, 1);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        work(t, n_threads);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

DiarizeResult diarize_embeddings(std::vector<Window> windows,
                                 std::vector<Embedding> embeddings,
                                 const Timeline& vad, const DiarizeConfig& cfg) {
  cfg.validate();
  SPKDIAR_CHECK(windows.size() == embeddings.size(), "got ", windows.size(),
                " windows but ", embeddings.size(), " embeddings");
  DiarizeResult r;
  r.windows = std::move(windows);
  r.embeddings = std::move(embeddings);
  if (r.windows.size() < 2) {
    r.warnings.push_back("fewer than 2 windows in '" + vad.file_id +
                         "'; assigning all speech to one speaker");
    r.labels.assign(r.windows.size(), 0);
    r.num_speakers = r.windows.empty() ? 0 : 1;
    r.timeline.file_id = vad.file_id;
    for (const auto& s : speech_regions(vad))
      r.timeline.entries.push_back({speaker_name(0), s.onset_s, s.offset_s});
    return r;
  }

  cluster::ClusterConfig cc;
  cc.prune_fraction = cfg.prune_fraction;
  cc.max_speakers = cfg.max_speakers;
  cc.backend = cfg.backend;
  if (cfg.oracle_k) cc.oracle_k = std::min<int>(*cfg.oracle_k, static_cast<int>(r.windows.size()));
  cluster::Rng rng(cfg.seed);
  const auto cr = cluster::cluster_embeddings(r.embeddings, cc, rng);
  r.labels = cr.labels;
  r.num_speakers = cr.num_speakers;
  r.eigenvalues = cr.eigenvalues;
  r.timeline = assign_labels(r.windows, r.labels, vad);
  return r;
}

DiarizeResult diarize(const Waveform& audio, const Timeline& vad,
                      const ecapa::EcapaModel& model, const DiarizeConfig& cfg) {
  cfg.validate();
  std::vector<Window> windows;
  std::vector<std::string> dropped;
  for (const auto& w : slide_windows(vad, cfg.win_s, cfg.shift_s)) {
    const auto n = static_cast<std::size_t>(std::round(w.duration_s() * audio.sample_rate_hz));
    if (features::num_frames(n, cfg.features) < 1) {
      dropped.push_back("speech region [" + std::to_string(w.onset_s) + ", " +
                        std::to_string(w.offset_s) + "] is too short for one frame");
      continue;
    }
    windows.push_back(w);
  }
  auto embs = embed_windows(audio, windows, model, cfg.features, cfg.threads);
  DiarizeResult r = diarize_embeddings(std::move(windows), std::move(embs), vad, cfg);
  r.warnings.insert(r.warnings.begin(), dropped.begin(), dropped.end());
  return r;
}

DiarizeResult diarize(const Waveform& audio, const Timeline& vad,
                      const ecapa::ModelWeights& weights, const DiarizeConfig& cfg) {
  const ecapa::EcapaModel model(weights);
  return diarize(audio, vad, model, cfg);
}

}  // namespace spkdiar::pipeline
