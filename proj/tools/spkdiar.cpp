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
#include "spkdiar/audio_io.hpp"

// spkdiar command-line front end. Every subcommand accepts --seed and reads
// defaults from a key=value file given by --config (flags win). Keys of a
// subcommand option are written as `<subcommand>.<option> = value`.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "spkdiar/audio_io.hpp"
#include "spkdiar/augment.hpp"
#include "spkdiar/ecapa.hpp"
#include "spkdiar/embedding.hpp"
#include "spkdiar/error.hpp"
#include "spkdiar/experiment.hpp"
#include "spkdiar/features.hpp"
#include "spkdiar/pipeline.hpp"
#include "spkdiar/scorer.hpp"
#include "spkdiar/synth.hpp"
#include "spkdiar/tensor_io.hpp"
#include "spkdiar/train.hpp"

namespace fs = std::filesystem;
using namespace spkdiar;

namespace {

void write_wav_safe(audio::Waveform w, const fs::path& path) {
  if (w.peak() > 1.0) w = audio::normalize_peak(std::move(w));
  audio::write_wav(w, path, audio::WavEncoding::kFloat32);
}

void add_feature_options(CLI::App* app, features::FeatureConfig& fc) {
  app->add_option("--n-mels", fc.n_mels, "Mel filters");
  app->add_option("--win-len", fc.win_len_s, "Analysis window (s)");
  app->add_option("--hop", fc.hop_s, "Frame hop (s)");
  app->add_option("--n-fft", fc.n_fft, "FFT size (0 = next power of two)");
  app->add_option("--f-min", fc.f_min_hz, "Lowest filter edge (Hz)");
  app->add_option("--f-max", fc.f_max_hz, "Highest filter edge (Hz, 0 = Nyquist)");
}

void add_augment_options(CLI::App* app, augment::AugmentConfig& ac) {
  app->add_option("--wav-drop-chunks", ac.wav_drop_chunks, "Zeroed chunks per utterance");
  app->add_option("--wav-drop-min", ac.wav_drop_len_s.first, "Shortest zeroed chunk (s)");
  app->add_option("--wav-drop-max", ac.wav_drop_len_s.second, "Longest zeroed chunk (s)");
  app->add_option("--freq-drop-bands", ac.freq_drop_bands, "Band-stop filters per utterance");
  app->add_option("--freq-drop-min", ac.freq_drop_width_hz.first, "Narrowest stop band (Hz)");
  app->add_option("--freq-drop-max", ac.freq_drop_width_hz.second, "Widest stop band (Hz)");
  app->add_option("--speed-factors", ac.speed_factors, "Speed factors")->delimiter(',');
  app->add_option("--speed-mode", ac.speed_mode, "Speed draw mode")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, augment::SpeedMode>{{"discrete", augment::SpeedMode::kDiscrete},
                                                    {"continuous", augment::SpeedMode::kContinuous}},
          CLI::ignore_case));
  app->add_option("--snr-min", ac.snr_db_range.first, "Lowest noise SNR (dB)");
  app->add_option("--snr-max", ac.snr_db_range.second, "Highest noise SNR (dB)");
  app->add_option("--rir-corpus", ac.rir_corpus, "RIR directory or manifest");
  app->add_option("--noise-corpus", ac.noise_corpus, "Noise directory or manifest");
  app->add_option_function<std::vector<std::string>>(
         "--views",
         [&ac](const std::vector<std::string>& names) {
           ac.view_list.clear();
           for (const auto& n : names) ac.view_list.push_back(augment::parse_strategy(n));
         },
         "Views built per utterance")
      ->delimiter(',');
}

void add_model_options(CLI::App* app, ecapa::EcapaConfig& mc) {
  app->add_option("--channels", mc.channels, "Frame-level channels C");
  app->add_option("--embed-dim", mc.embed_dim, "Embedding size D");
  app->add_option("--res2-scale", mc.res2_scale, "Res2Net scale s");
  app->add_option("--se-bottleneck", mc.se_bottleneck, "SE bottleneck");
  app->add_option("--attn-bottleneck", mc.attn_bottleneck, "Attention bottleneck");
}

void add_train_options(CLI::App* app, train::TrainConfig& tc) {
  app->add_option("--epochs", tc.epochs, "Training epochs");
  app->add_option("--batch", tc.batch_size, "Utterances per batch (before views)");
  app->add_option("--crop", tc.crop_s, "Random crop length (s)");
  app->add_option("--lr-min", tc.lr.lr_min, "Cyclic learning rate floor");
  app->add_option("--lr-max", tc.lr.lr_max, "Cyclic learning rate ceiling");
  app->add_option("--lr-cycle", tc.lr.cycle_steps, "Steps per learning-rate cycle");
  app->add_option("--weight-decay", tc.weight_decay, "Adam weight decay");
  app->add_option("--margin", tc.aam_margin, "AAM margin");
  app->add_option("--scale", tc.aam_scale, "AAM scale");
  app->add_option("--mode", tc.augment_mode, "Augmentation mode")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, train::AugmentMode>{{"none", train::AugmentMode::kNone},
                                                    {"single", train::AugmentMode::kSingleView},
                                                    {"concat", train::AugmentMode::kConcatViews}},
          CLI::ignore_case));
}

void add_diarize_options(CLI::App* app, pipeline::DiarizeConfig& dc) {
  app->add_option("--win", dc.win_s, "Window length (s)");
  app->add_option("--shift", dc.shift_s, "Window shift (s)");
  app->add_option("--max-speakers", dc.max_speakers, "Upper bound on the speaker count");
  app->add_option("--prune", dc.prune_fraction, "Affinity pruning fraction");
  app->add_option("--threads", dc.threads, "Embedding threads (0 = all cores)");
  app->add_option("--backend", dc.backend, "Clustering backend")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, cluster::Backend>{{"spectral", cluster::Backend::kSpectral},
                                                  {"kmeans", cluster::Backend::kKMeans}},
          CLI::ignore_case));
}

// "label path" per line; labels are renumbered in first-appearance order.
std::vector<augment::LabeledWaveform> read_train_list(const fs::path& list, int* classes) {
  std::ifstream in(list);
  SPKDIAR_CHECK(in, "cannot open training list ", list.string());
  std::map<std::string, int> ids;
  std::vector<augment::LabeledWaveform> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string label, path;
    SPKDIAR_CHECK(static_cast<bool>(ls >> label >> path), list.string(), " line ", n,
                  ": expected '<speaker> <wav>'");
    const auto [it, fresh] = ids.emplace(label, static_cast<int>(ids.size()));
    fs::path p(path);
    if (p.is_relative()) p = list.parent_path() / p;
    out.push_back({audio::read_wav(p), it->second});
  }
  SPKDIAR_CHECK(!out.empty(), "training list ", list.string(), " is empty");
  *classes = static_cast<int>(ids.size());
  return out;
}

audio::Timeline single_timeline(const std::vector<audio::Timeline>& ts, const fs::path& p) {
  SPKDIAR_CHECK(ts.size() == 1, p.string(), " holds ", ts.size(),
                " files; expected exactly one");
  return ts.front();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spkdiar: speaker diarization with ECAPA-TDNN embeddings and spectral clustering"};
  app.set_config("--config", "", "key=value configuration file");
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Master seed")->capture_default_str();

  // augment
  auto* aug = app.add_subcommand("augment", "Apply one augmentation strategy to a WAV file");
  augment::AugmentConfig aug_cfg;
  std::string aug_in, aug_out, aug_strategy = "noise";
  aug->add_option("--in", aug_in, "Input WAV")->required();
  aug->add_option("--out", aug_out, "Output WAV")->required();
  aug->add_option("--strategy", aug_strategy, "Strategy name")->capture_default_str();
  add_augment_options(aug, aug_cfg);
  aug->add_option("--seed", seed, "Seed");

  // extract
  auto* ext = app.add_subcommand("extract", "Write features or window embeddings as tensors");
  features::FeatureConfig ext_fc;
  pipeline::DiarizeConfig ext_dc;
  std::string ext_audio, ext_features, ext_weights, ext_vad, ext_embeddings;
  ext->add_option("--audio", ext_audio, "Input WAV")->required();
  ext->add_option("--features", ext_features, "Output T x n_mels feature tensor");
  ext->add_option("--weights", ext_weights, "Embedder weights (for --embeddings)");
  ext->add_option("--vad", ext_vad, "Speech regions RTTM (for --embeddings)");
  ext->add_option("--embeddings", ext_embeddings, "Output n x D window embeddings");
  ext->add_option("--win", ext_dc.win_s, "Window length (s)");
  ext->add_option("--shift", ext_dc.shift_s, "Window shift (s)");
  add_feature_options(ext, ext_fc);
  ext->add_option("--seed", seed, "Seed");

  // train-toy
  auto* trn = app.add_subcommand("train-toy", "Train a small embedder");
  ecapa::EcapaConfig trn_mc = ecapa::EcapaConfig::toy();
  train::TrainConfig trn_tc = experiment::desk_training();
  std::string trn_list, trn_out;
  int trn_synthetic = 0;
  trn->add_option("--list", trn_list, "Training list, '<speaker> <wav>' per line");
  trn->add_option("--synthetic", trn_synthetic,
                  "Train on N synthetic speakers instead of --list");
  trn->add_option("--out", trn_out, "Output weights")->required();
  add_model_options(trn, trn_mc);
  add_train_options(trn, trn_tc);
  add_augment_options(trn, trn_tc.augment);
  add_feature_options(trn, trn_tc.features);
  trn->add_option("--seed", seed, "Seed");

  // diarize
  auto* dia = app.add_subcommand("diarize", "Diarize one recording");
  pipeline::DiarizeConfig dia_dc;
  std::string dia_audio, dia_vad, dia_weights, dia_out;
  int dia_oracle_k = 0;
  dia->add_option("--audio", dia_audio, "Input WAV")->required();
  dia->add_option("--vad", dia_vad, "Speech regions RTTM")->required();
  dia->add_option("--weights", dia_weights, "Embedder weights")->required();
  dia->add_option("--out", dia_out, "Output RTTM")->required();
  dia->add_option("--oracle-k", dia_oracle_k, "Known speaker count (skips the eigengap)");
  add_diarize_options(dia, dia_dc);
  dia->add_option("--seed", seed, "Seed");

  // score
  auto* sco = app.add_subcommand("score", "Diarization error rate");
  std::string sco_ref, sco_hyp, sco_format = "both";
  double sco_collar = 0.25;
  bool sco_ignore = false;
  sco->add_option("--ref", sco_ref, "Reference RTTM")->required();
  sco->add_option("--hyp", sco_hyp, "Hypothesis RTTM")->required();
  sco->add_option("--collar", sco_collar, "Forgiveness collar (s)")->capture_default_str();
  sco->add_flag("--ignore-overlap", sco_ignore, "Exclude overlapped reference speech");
  sco->add_option("--format", sco_format, "table, kv or both")
      ->check(CLI::IsMember({"table", "kv", "both"}));
  sco->add_option("--seed", seed, "Seed");

  // ablate
  auto* abl = app.add_subcommand("ablate", "Augmentation ablation on the synthetic benchmark");
  experiment::AblationConfig abl_cfg;
  bool abl_parity = false;
  abl->add_option("--seeds", abl_cfg.seeds, "Benchmark and training seeds")->delimiter(',');
  abl->add_option("--speakers", abl_cfg.bench.num_speakers, "Synthetic speakers");
  abl->add_option("--utts", abl_cfg.bench.train_utts_per_speaker, "Training utterances per speaker");
  abl->add_option("--meetings", abl_cfg.bench.eval_meetings, "Meetings per split");
  abl->add_option("--meeting-s", abl_cfg.bench.meeting.duration_s, "Meeting length (s)");
  abl->add_option("--test-snr-min", abl_cfg.test_snr_db.first, "Test contamination SNR floor");
  abl->add_option("--test-snr-max", abl_cfg.test_snr_db.second, "Test contamination SNR ceiling");
  abl->add_flag("--parity", abl_parity, "Also print the backend parity table (first seed)");
  add_model_options(abl, abl_cfg.model);
  add_train_options(abl, abl_cfg.train);
  abl->add_option("--seed", seed, "Unused; seeds come from --seeds");

  // synth
  auto* syn = app.add_subcommand("synth", "Write a synthetic benchmark to disk");
  synth::BenchmarkConfig syn_cfg;
  std::string syn_dir;
  syn->add_option("--out-dir", syn_dir, "Output directory")->required();
  syn->add_option("--speakers", syn_cfg.num_speakers, "Speakers");
  syn->add_option("--utts", syn_cfg.train_utts_per_speaker, "Training utterances per speaker");
  syn->add_option("--meetings", syn_cfg.eval_meetings, "Meetings per split");
  syn->add_option("--meeting-s", syn_cfg.meeting.duration_s, "Meeting length (s)");
  syn->add_option("--seed", seed, "Seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (aug->parsed()) {
      aug_cfg.validate();
      const auto corpora = augment::Corpora::load(aug_cfg);
      augment::Rng rng(seed);
      double snr = 0.0;
      const auto out = augment::apply_strategy(augment::parse_strategy(aug_strategy),
                                               audio::read_wav(aug_in), aug_cfg, corpora, rng,
                                               &snr);
      write_wav_safe(out, aug_out);
      std::cout << "strategy=" << aug_strategy;
      if (snr == snr) std::cout << " snr_db=" << snr;
      std::cout << '\n';
    } else if (ext->parsed()) {
      SPKDIAR_CHECK(!ext_features.empty() || !ext_embeddings.empty(),
                    "extract needs --features and/or --embeddings");
      const auto wave = audio::read_wav(ext_audio);
      if (!ext_features.empty()) {
        const auto f = features::extract(wave, ext_fc);
        tensor_io::write_tensor_file(ext_features, tensor_io::from_matrix(f.frames));
        std::cout << "features " << f.num_frames() << " x " << f.num_mels() << '\n';
      }
      if (!ext_embeddings.empty()) {
        SPKDIAR_CHECK(!ext_weights.empty() && !ext_vad.empty(),
                      "--embeddings needs --weights and --vad");
        const ecapa::EcapaModel model(ecapa::load_weights(ext_weights));
        const auto vad = single_timeline(audio::parse_rttm_file(ext_vad), ext_vad);
        const auto windows = pipeline::slide_windows(vad, ext_dc.win_s, ext_dc.shift_s);
        const auto embs = pipeline::embed_windows(wave, windows, model, ext_fc);
        write_embeddings(ext_embeddings, embs);
        std::cout << "embeddings " << embs.size() << " x " << model.config().embed_dim << '\n';
      }
    } else if (trn->parsed()) {
      trn_tc.seed = seed;
      std::vector<augment::LabeledWaveform> data;
      augment::Corpora corpora;
      if (trn_synthetic > 0) {
        synth::BenchmarkConfig bc;
        bc.num_speakers = trn_synthetic;
        bc.dev_meetings = bc.eval_meetings = 0;
        bc.seed = seed;
        auto bench = synth::make_benchmark(bc);
        data = std::move(bench.train);
        corpora = std::move(bench.train_corpora);
        trn_mc.n_classes = trn_synthetic;
      } else {
        SPKDIAR_CHECK(!trn_list.empty(), "train-toy needs --list or --synthetic");
        data = read_train_list(trn_list, &trn_mc.n_classes);
        corpora = augment::Corpora::load(trn_tc.augment);
      }
      const auto r = train::train_toy(data, corpora, trn_mc, trn_tc);
      for (std::size_t e = 0; e < r.epoch_loss.size(); ++e)
        std::cout << "epoch=" << e + 1 << " loss=" << r.epoch_loss[e]
                  << " accuracy=" << r.epoch_accuracy[e] << '\n';
      ecapa::save_weights(trn_out, r.weights);
    } else if (dia->parsed()) {
      dia_dc.seed = seed;
      if (dia_oracle_k > 0) dia_dc.oracle_k = dia_oracle_k;
      dia_dc.weights_path = dia_weights;
      const auto wave = audio::read_wav(dia_audio);
      const auto vad = single_timeline(audio::parse_rttm_file(dia_vad), dia_vad);
      auto r = pipeline::diarize(wave, vad, ecapa::load_weights(dia_weights), dia_dc);
      r.timeline.file_id = vad.file_id;
      audio::write_rttm_file(std::vector<audio::Timeline>{r.timeline}, dia_out);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
      std::cout << "speakers=" << r.num_speakers << " windows=" << r.windows.size()
                << " segments=" << r.timeline.entries.size() << '\n';
    } else if (sco->parsed()) {
      const auto s = scoring::score_corpus(audio::parse_rttm_file(sco_ref),
                                           audio::parse_rttm_file(sco_hyp), sco_collar,
                                           sco_ignore);
      if (sco_format != "kv") std::cout << scoring::format_table(s);
      if (sco_format == "both") std::cout << '\n';
      if (sco_format != "table") std::cout << scoring::format_key_values(s);
    } else if (abl->parsed()) {
      abl_cfg.bench.dev_meetings = abl_cfg.bench.eval_meetings;
      const auto rep = experiment::ablation_harness(
          abl_cfg, [](const std::string& line) { std::cerr << line << '\n'; });
      std::cout << experiment::format_ablation(rep);
      if (abl_parity) {
        synth::BenchmarkConfig bc = abl_cfg.bench;
        bc.seed = abl_cfg.seeds.front();
        const auto bench = synth::make_benchmark(bc);
        ecapa::EcapaConfig mc = abl_cfg.model;
        mc.n_classes = bc.num_speakers;
        train::TrainConfig tc = abl_cfg.train;
        tc.seed = bc.seed;
        const ecapa::EcapaModel model(
            train::train_toy(bench.train, bench.train_corpora, mc, tc).weights);
        std::cout << '\n'
                  << experiment::format_parity(
                         experiment::backend_parity(model, bench.dev, bench.eval, abl_cfg.eval));
      }
    } else if (syn->parsed()) {
      syn_cfg.seed = seed;
      syn_cfg.dev_meetings = syn_cfg.eval_meetings;
      const auto bench = synth::make_benchmark(syn_cfg);
      fs::create_directories(fs::path(syn_dir) / "train");
      std::ofstream list(fs::path(syn_dir) / "train.list");
      for (std::size_t i = 0; i < bench.train.size(); ++i) {
        const std::string name = "train/utt" + std::to_string(i) + ".wav";
        write_wav_safe(bench.train[i].wave, fs::path(syn_dir) / name);
        list << bench.speakers[static_cast<std::size_t>(bench.train[i].label)].name << ' '
             << name << '\n';
      }
      fs::create_directories(fs::path(syn_dir) / "noise");
      fs::create_directories(fs::path(syn_dir) / "rir");
      for (std::size_t i = 0; i < bench.train_corpora.noises.size(); ++i)
        write_wav_safe(bench.train_corpora.noises[i],
                       fs::path(syn_dir) / "noise" / ("n" + std::to_string(i) + ".wav"));
      for (std::size_t i = 0; i < bench.train_corpora.rirs.size(); ++i)
        write_wav_safe(bench.train_corpora.rirs[i],
                       fs::path(syn_dir) / "rir" / ("r" + std::to_string(i) + ".wav"));
      for (const auto* split : {&bench.dev, &bench.eval}) {
        for (const auto& m : *split) {
          write_wav_safe(m.audio, fs::path(syn_dir) / (m.id + ".wav"));
          audio::write_rttm_file(std::vector<audio::Timeline>{m.reference}, fs::path(syn_dir) / (m.id + ".rttm"));
        }
      }
      std::cout << "train=" << bench.train.size() << " dev=" << bench.dev.size()
                << " eval=" << bench.eval.size() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
