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

#include "spkdiar/experiment.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "spkdiar/error.hpp"
#include "spkdiar/scorer.hpp"

namespace spkdiar::experiment {

double median(std::vector<double> v) {
  SPKDIAR_CHECK(!v.empty(), "median of an empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::vector<WindowEmbeddings> embed_meetings(const ecapa::EcapaModel& model,
                                             const std::vector<synth::Meeting>& meetings,
                                             const pipeline::DiarizeConfig& cfg) {
  std::vector<WindowEmbeddings> out;
  for (const auto& m : meetings) {
    WindowEmbeddings we;
    we.windows = pipeline::slide_windows(m.reference, cfg.win_s, cfg.shift_s);
    we.embeddings = pipeline::embed_windows(m.audio, we.windows, model, cfg.features, cfg.threads);
    out.push_back(std::move(we));
  }
  return out;
}

SplitResult score_split(const std::vector<synth::Meeting>& meetings,
                        const std::vector<WindowEmbeddings>& embs,
                        const EvalOptions& opt, cluster::Backend backend) {
  SPKDIAR_CHECK(meetings.size() == embs.size(), "embeddings missing for some meetings");
  SPKDIAR_CHECK(!meetings.empty(), "no meetings to score");
  SplitResult s;
  std::vector<scoring::DerReport> oracle_reports, est_reports;
  for (std::size_t i = 0; i < meetings.size(); ++i) {
    const auto& m = meetings[i];
    pipeline::DiarizeConfig cfg = opt.diarize;
    cfg.backend = backend;

    cfg.oracle_k = m.num_speakers;
    const auto oracle = pipeline::diarize_embeddings(embs[i].windows, embs[i].embeddings,
                                                     m.reference, cfg);
    cfg.oracle_k.reset();
    const auto est = pipeline::diarize_embeddings(embs[i].windows, embs[i].embeddings,
                                                  m.reference, cfg);

    oracle_reports.push_back(
        scoring::compute_der(m.reference, oracle.timeline, opt.collar_s, opt.ignore_overlap));
    est_reports.push_back(
        scoring::compute_der(m.reference, est.timeline, opt.collar_s, opt.ignore_overlap));
    MeetingResult r;
    r.id = m.id;
    r.true_k = m.num_speakers;
    r.estimated_k = est.num_speakers;
    r.der_oracle = oracle_reports.back().der;
    r.der_estimated = est_reports.back().der;
    if (r.estimated_k == r.true_k) ++s.k_correct;
    s.meetings.push_back(r);
  }
  s.der_oracle = scoring::aggregate(oracle_reports).der;
  s.der_estimated = scoring::aggregate(est_reports).der;
  return s;
}

SplitResult evaluate(const ecapa::EcapaModel& model,
                     const std::vector<synth::Meeting>& meetings,
                     const EvalOptions& opt) {
  return score_split(meetings, embed_meetings(model, meetings, opt.diarize), opt,
                     opt.diarize.backend);
}

namespace {

const char* row_name(train::AugmentMode m) {
  switch (m) {
    case train::AugmentMode::kNone:
      return "Without Aug.";
    case train::AugmentMode::kSingleView:
      return "Standard Aug.";
    case train::AugmentMode::kConcatViews:
      return "Proposed Aug.";
  }
  return "?";
}

std::string cell_text(const DerCell& c) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(2) << std::setw(12) << 100.0 * c.dev_oracle
    << std::setw(12) << 100.0 * c.dev_estimated << std::setw(12) << 100.0 * c.eval_oracle
    << std::setw(12) << 100.0 * c.eval_estimated;
  return o.str();
}

std::string header(const std::string& first) {
  std::ostringstream o;
  o << std::left << std::setw(16) << first << std::right << std::setw(12) << "Dev/oracle"
    << std::setw(12) << "Dev/est" << std::setw(12) << "Eval/oracle" << std::setw(12)
    << "Eval/est";
  return o.str();
}

}  // namespace

train::TrainConfig desk_training() {
  train::TrainConfig tc;
  tc.epochs = 10;
  tc.batch_size = 8;
  tc.lr = {1e-3, 5e-3, 40};
  return tc;
}

AblationReport ablation_harness(const AblationConfig& cfg, const Progress& progress) {
  SPKDIAR_CHECK(!cfg.seeds.empty(), "ablation needs at least one seed");
  AblationReport rep;
  rep.seeds = cfg.seeds;
  for (const auto mode : {train::AugmentMode::kNone, train::AugmentMode::kSingleView,
                          train::AugmentMode::kConcatViews}) {
    AblationRow row;
    row.name = row_name(mode);
    row.mode = mode;
    rep.rows.push_back(row);
  }

  for (const std::uint64_t seed : cfg.seeds) {
    synth::BenchmarkConfig bc = cfg.bench;
    bc.seed = seed;
    const synth::Benchmark bench = synth::make_benchmark(bc);
    synth::Rng rng(augment::derive_seed(seed, 0xC0, 0));
    std::vector<synth::Meeting> dev, eval;
    for (const auto& m : bench.dev)
      dev.push_back(synth::contaminate(m, bench.test_corpora, cfg.test_snr_db, rng));
    for (const auto& m : bench.eval)
      eval.push_back(synth::contaminate(m, bench.test_corpora, cfg.test_snr_db, rng));

    ecapa::EcapaConfig mc = cfg.model;
    mc.n_classes = bc.num_speakers;
    for (auto& row : rep.rows) {
      train::TrainConfig tc = cfg.train;
      tc.augment_mode = row.mode;
      tc.seed = seed;
      if (progress) progress("seed " + std::to_string(seed) + ": training " + row.name);
      const auto trained = train::train_toy(bench.train, bench.train_corpora, mc, tc);
      const ecapa::EcapaModel model(trained.weights);
      EvalOptions opt = cfg.eval;
      opt.diarize.seed = seed;
      const SplitResult d = evaluate(model, dev, opt);
      const SplitResult e = evaluate(model, eval, opt);
      row.per_seed.push_back({d.der_oracle, d.der_estimated, e.der_oracle, e.der_estimated});
      if (progress)
        progress("seed " + std::to_string(seed) + ": " + row.name + cell_text(row.per_seed.back()));
    }
  }

  for (auto& row : rep.rows) {
    auto med = [&](double DerCell::*f) {
      std::vector<double> v;
      for (const auto& c : row.per_seed) v.push_back(c.*f);
      return median(v);
    };
    row.median = {med(&DerCell::dev_oracle), med(&DerCell::dev_estimated),
                  med(&DerCell::eval_oracle), med(&DerCell::eval_estimated)};
  }
  return rep;
}

std::string format_ablation(const AblationReport& r) {
  std::ostringstream o;
  o << "DER % (median over " << r.seeds.size() << " seeds)\n" << header("Training") << '\n';
  for (const auto& row : r.rows)
    o << std::left << std::setw(16) << row.name << cell_text(row.median) << '\n';
  return o.str();
}

std::vector<ParityRow> backend_parity(const ecapa::EcapaModel& model,
                                      const std::vector<synth::Meeting>& dev,
                                      const std::vector<synth::Meeting>& eval,
                                      const EvalOptions& opt) {
  const auto dev_embs = embed_meetings(model, dev, opt.diarize);
  const auto eval_embs = embed_meetings(model, eval, opt.diarize);
  std::vector<ParityRow> rows;
  for (const auto backend : {cluster::Backend::kKMeans, cluster::Backend::kSpectral}) {
    const SplitResult d = score_split(dev, dev_embs, opt, backend);
    const SplitResult e = score_split(eval, eval_embs, opt, backend);
    ParityRow row;
    row.backend = backend == cluster::Backend::kSpectral ? "Spectral" : "k-means";
    row.der = {d.der_oracle, d.der_estimated, e.der_oracle, e.der_estimated};
    row.k_correct = d.k_correct + e.k_correct;
    row.meetings = static_cast<int>(dev.size() + eval.size());
    rows.push_back(row);
  }
  return rows;
}

std::string format_parity(const std::vector<ParityRow>& rows) {
  std::ostringstream o;
  o << "DER %\n" << header("Clustering") << '\n';
  for (const auto& r : rows) o << std::left << std::setw(16) << r.backend << cell_text(r.der) << '\n';
  return o.str();
}

}  // namespace spkdiar::experiment
