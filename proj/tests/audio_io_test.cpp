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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "spkdiar/error.hpp"
#include "support/signals.hpp"

namespace spkdiar::audio {
namespace {

namespace fs = std::filesystem;
using testing::peak_frequency;
using testing::sine;
using testing::white_noise;

void put16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}

void put32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

// Hand-assembled PCM16 file so the reader is not only checked against the
// writer.
std::string pcm16_file(const std::vector<std::int16_t>& interleaved,
                       int channels, int rate) {
  std::string s = "RIFF";
  const auto data_bytes = static_cast<std::uint32_t>(interleaved.size() * 2);
  put32(s, 36 + data_bytes);
  s += "WAVEfmt ";
  put32(s, 16);
  put16(s, 1);
  put16(s, static_cast<std::uint16_t>(channels));
  put32(s, static_cast<std::uint32_t>(rate));
  put32(s, static_cast<std::uint32_t>(rate * channels * 2));
  put16(s, static_cast<std::uint16_t>(channels * 2));
  put16(s, 16);
  s += "data";
  put32(s, data_bytes);
  for (auto v : interleaved) put16(s, static_cast<std::uint16_t>(v));
  return s;
}

Waveform read_string(const std::string& bytes, int channel = 0) {
  std::istringstream in(bytes);
  return read_wav(in, channel);
}

TEST(ReadWav, Pcm16FullScaleMapsToScaledSample) {
  const auto w = read_string(pcm16_file({32767, -32768, 0}, 1, 16000));
  ASSERT_EQ(w.size(), 3u);
  EXPECT_DOUBLE_EQ(w.samples[0], 32767.0 / 32768.0);
  EXPECT_DOUBLE_EQ(w.samples[1], -1.0);
  EXPECT_DOUBLE_EQ(w.samples[2], 0.0);
  EXPECT_EQ(w.sample_rate_hz, 16000);
}

TEST(ReadWav, OneSecondOfSilence) {
  const auto w = read_string(pcm16_file(std::vector<std::int16_t>(16000, 0), 1, 16000));
  ASSERT_EQ(w.size(), 16000u);
  for (double s : w.samples) ASSERT_EQ(s, 0.0);
}

TEST(ReadWav, SelectsRequestedChannel) {
  const std::string bytes = pcm16_file({100, -200, 300, -400}, 2, 8000);
  const auto left = read_string(bytes, 0);
  const auto right = read_string(bytes, 1);
  ASSERT_EQ(left.size(), 2u);
  EXPECT_DOUBLE_EQ(left.samples[1], 300.0 / 32768.0);
  EXPECT_DOUBLE_EQ(right.samples[0], -200.0 / 32768.0);
  EXPECT_EQ(left.sample_rate_hz, 8000);
  EXPECT_THROW(read_string(bytes, 2), Error);
}

TEST(ReadWav, TruncatedHeaderIsRejected) {
  const std::string bytes = pcm16_file({1, 2, 3}, 1, 16000).substr(0, 10);
  try {
    read_string(bytes);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("unsupported/corrupt container"),
              std::string::npos);
  }
}

TEST(ReadWav, EmptyDataChunkIsRejected) {
  EXPECT_THROW(read_string(pcm16_file({}, 1, 16000)), Error);
}

TEST(ReadWav, MissingFileIsRejected) {
  EXPECT_THROW(read_wav(fs::path("/nonexistent/dir/x.wav")), Error);
}

TEST(WriteWav, FloatRoundTripIsBitIdentical) {
  auto w = white_noise(4000, 3, 22050, 0.3);
  // Float mode stores float32, so start from float-representable values.
  for (auto& s : w.samples) s = static_cast<double>(static_cast<float>(s));
  std::stringstream buf;
  write_wav(w, buf, WavEncoding::kFloat32);
  const auto r = read_wav(buf);
  EXPECT_EQ(r.sample_rate_hz, 22050);
  EXPECT_EQ(r.samples, w.samples);
}

TEST(WriteWav, Pcm16RoundTripWithinOneLsb) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto w = white_noise(5000, seed, 16000, 0.4);
    std::stringstream buf;
    write_wav(w, buf, WavEncoding::kPcm16);
    const auto r = read_wav(buf);
    ASSERT_EQ(r.size(), w.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
      worst = std::max(worst, std::abs(r.samples[i] - w.samples[i]));
    EXPECT_LE(worst, 1.0 / 32768.0) << "seed " << seed;
  }
}

TEST(WriteWav, OutOfRangeSampleRequiresClipping) {
  Waveform w;
  w.samples = {0.1, 1.5, -0.2};
  std::stringstream buf;
  try {
    write_wav(w, buf);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("clipping required"), std::string::npos);
  }
  const auto c = clip(w);
  EXPECT_EQ(c.samples[1], 1.0);
  EXPECT_NO_THROW(write_wav(c, buf));
}

TEST(WriteWav, UnwritablePathIsRejected) {
  Waveform w;
  w.samples = {0.0, 0.1};
  EXPECT_THROW(write_wav(w, fs::path("/nonexistent/dir/out.wav")), Error);
}

TEST(WriteWav, FileRoundTrip) {
  const auto dir = fs::temp_directory_path() / "spkdiar_audio_io_test";
  fs::create_directories(dir);
  const auto w = sine(300.0, 0.2);
  write_wav(w, dir / "a.wav", WavEncoding::kFloat32);
  const auto r = read_wav(dir / "a.wav");
  ASSERT_EQ(r.size(), w.size());
  for (std::size_t i = 0; i < w.size(); ++i)
    EXPECT_EQ(r.samples[i], static_cast<double>(static_cast<float>(w.samples[i])));
  fs::remove_all(dir);
}

TEST(Resample, HalvesLength) {
  const auto w = white_noise(16000, 1);
  const auto r = resample(w, 8000);
  EXPECT_EQ(r.size(), 8000u);
  EXPECT_EQ(r.sample_rate_hz, 8000);
}

TEST(Resample, SameRateIsIdentity) {
  const auto w = white_noise(1234, 2);
  const auto r = resample(w, 16000);
  EXPECT_EQ(r.samples, w.samples);
}

TEST(Resample, OutputLengthIsRoundedRatio) {
  const auto w = white_noise(1001, 4);
  EXPECT_EQ(resample(w, 44100).size(),
            static_cast<std::size_t>(std::llround(1001.0 * 44100 / 16000)));
  EXPECT_EQ(resample(w, 7000).size(),
            static_cast<std::size_t>(std::llround(1001.0 * 7000 / 16000)));
  EXPECT_THROW(resample(w, 0), Error);
}

TEST(Resample, ToneKeepsItsFrequency) {
  const auto r = resample(sine(440.0, 1.0), 48000);
  ASSERT_EQ(r.sample_rate_hz, 48000);
  // 48000-point DFT: 1 Hz bins.
  const std::size_t n = 48000;
  EXPECT_NEAR(peak_frequency(r, n), 440.0, 1.0);
}

TEST(Resample, UpDownRoundTripOfBandLimitedSignal) {
  const int r = 16000;
  Waveform w;
  w.sample_rate_hz = r;
  w.samples.assign(8000, 0.0);
  // All energy below 0.4 * r.
  const std::vector<double> freqs = {210.0, 950.0, 2600.0, 4400.0, 6100.0};
  for (std::size_t k = 0; k < freqs.size(); ++k) {
    const auto s = sine(freqs[k], 0.5, r, 0.15, 0.3 * static_cast<double>(k));
    for (std::size_t i = 0; i < w.size(); ++i) w.samples[i] += s.samples[i];
  }
  const auto back = resample(resample(w, 2 * r), r);
  ASSERT_EQ(back.size(), w.size());
  // Skip the filter's edge transients.
  double num = 0.0, den = 0.0;
  for (std::size_t i = 200; i + 200 < w.size(); ++i) {
    num += std::pow(back.samples[i] - w.samples[i], 2);
    den += w.samples[i] * w.samples[i];
  }
  EXPECT_LE(std::sqrt(num / den), 1e-3);
}

TEST(ParseRttm, FieldMapping) {
  std::istringstream in("SPEAKER f1 1 0.50 2.00 <NA> <NA> spkA <NA> <NA>\n");
  const auto ts = parse_rttm(in);
  ASSERT_EQ(ts.size(), 1u);
  EXPECT_EQ(ts[0].file_id, "f1");
  ASSERT_EQ(ts[0].entries.size(), 1u);
  EXPECT_EQ(ts[0].entries[0].speaker, "spkA");
  EXPECT_DOUBLE_EQ(ts[0].entries[0].onset_s, 0.5);
  EXPECT_DOUBLE_EQ(ts[0].entries[0].offset_s, 2.5);
}

TEST(ParseRttm, EmptyInputGivesNoTimelines) {
  std::istringstream in("");
  EXPECT_TRUE(parse_rttm(in).empty());
}

TEST(ParseRttm, CommentsSkippedAndFilesSeparated) {
  std::istringstream in(
      "# header\n"
      "SPEAKER b 1 3.0 1.0 <NA> <NA> x <NA> <NA>\n"
      "\n"
      "SPEAKER a 1 0.0 1.0 <NA> <NA> y <NA> <NA>\n"
      "SPEAKER b 1 1.0 1.0 <NA> <NA> z <NA> <NA>\n");
  const auto ts = parse_rttm(in);
  ASSERT_EQ(ts.size(), 2u);
  EXPECT_EQ(ts[0].file_id, "b");
  ASSERT_EQ(ts[0].entries.size(), 2u);
  // Entries come back sorted by onset.
  EXPECT_EQ(ts[0].entries[0].speaker, "z");
  EXPECT_EQ(ts[1].file_id, "a");
}

TEST(ParseRttm, NegativeDurationReportsLineNumber) {
  std::istringstream in(
      "SPEAKER f 1 0.0 1.0 <NA> <NA> a <NA> <NA>\n"
      "SPEAKER f 1 0.5 -1.0 <NA> <NA> b <NA> <NA>\n");
  try {
    parse_rttm(in);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(ParseRttm, MalformedLineReportsLineNumber) {
  std::istringstream in("SPEAKER f 1 0.0\n");
  try {
    parse_rttm(in);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
  }
  std::istringstream bad("SPEAKER f 1 abc 1.0 <NA> <NA> a <NA> <NA>\n");
  EXPECT_THROW(parse_rttm(bad), Error);
}

TEST(EmitRttm, ThreeEntryRoundTrip) {
  Timeline t{"meet", {{"A", 0.0, 1.5}, {"B", 1.25, 4.0}, {"A", 4.5, 7.125}}};
  std::istringstream in(emit_rttm(t));
  const auto ts = parse_rttm(in);
  ASSERT_EQ(ts.size(), 1u);
  EXPECT_EQ(ts[0].file_id, "meet");
  ASSERT_EQ(ts[0].entries.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(ts[0].entries[i].speaker, t.entries[i].speaker);
    EXPECT_NEAR(ts[0].entries[i].onset_s, t.entries[i].onset_s, 1e-9);
    EXPECT_NEAR(ts[0].entries[i].offset_s, t.entries[i].offset_s, 1e-9);
  }
}

TEST(EmitRttm, MillisecondPrecision) {
  Timeline t{"f", {{"A", 0.0, 1.2345}}};
  const std::string text = emit_rttm(t);
  EXPECT_TRUE(text.find(" 1.234 ") != std::string::npos ||
              text.find(" 1.235 ") != std::string::npos)
      << text;
  std::istringstream in(text);
  const auto ts = parse_rttm(in);
  EXPECT_NEAR(ts[0].entries[0].offset_s, 1.2345, 1e-3);
  EXPECT_NE(emit_rttm(t, 4).find(" 1.2345 "), std::string::npos);
}

TEST(EmitRttm, EmptyTimelineGivesEmptyOutput) {
  EXPECT_EQ(emit_rttm(Timeline{"f", {}}), "");
}

TEST(EmitRttm, RandomTimelinesRoundTrip) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> on(0.0, 100.0), len(0.01, 10.0);
  std::uniform_int_distribution<int> spk(0, 4), count(1, 30);
  for (int trial = 0; trial < 100; ++trial) {
    Timeline t{"rec" + std::to_string(trial), {}};
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      // Millisecond-aligned times round-trip exactly at 3 decimals.
      const double a = std::round(on(rng) * 1000.0) / 1000.0;
      const double b = a + std::round(len(rng) * 1000.0) / 1000.0;
      t.entries.push_back({"s" + std::to_string(spk(rng)), a, b});
    }
    t.sort();
    std::istringstream in(emit_rttm(t));
    const auto ts = parse_rttm(in);
    ASSERT_EQ(ts.size(), 1u);
    ASSERT_EQ(ts[0].entries.size(), t.entries.size());
    for (std::size_t i = 0; i < t.entries.size(); ++i) {
      EXPECT_EQ(ts[0].entries[i].speaker, t.entries[i].speaker);
      EXPECT_NEAR(ts[0].entries[i].onset_s, t.entries[i].onset_s, 1e-9);
      EXPECT_NEAR(ts[0].entries[i].offset_s, t.entries[i].offset_s, 1e-9);
    }
  }
}

TEST(Timeline, ValidateRejectsEmptyEntries) {
  Timeline t{"f", {{"A", 2.0, 2.0}}};
  EXPECT_THROW(t.validate(), Error);
  t.entries[0].offset_s = 3.0;
  EXPECT_NO_THROW(t.validate());
}

}  // namespace
}  // namespace spkdiar::audio
