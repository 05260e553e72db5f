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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <sstream>

#include "spkdiar/error.hpp"

namespace spkdiar::audio {

double Waveform::peak() const {
  double p = 0.0;
  for (double s : samples) p = std::max(p, std::abs(s));
  return p;
}

double Waveform::power() const {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (double s : samples) acc += s * s;
  return acc / static_cast<double>(samples.size());
}

Waveform clip(Waveform w) {
  for (double& s : w.samples) s = std::clamp(s, -1.0, 1.0);
  return w;
}

Waveform normalize_peak(Waveform w, double target_peak) {
  const double p = w.peak();
  if (p > 0.0) {
    const double g = target_peak / p;
    for (double& s : w.samples) s *= g;
  }
  return w;
}

// ---------------------------------------------------------------------------
// WAV

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

[[noreturn]] void corrupt(const std::string& what) {
  detail::fail("unsupported/corrupt container: ", what);
}

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b = {static_cast<char>(v & 0xFF),
                                 static_cast<char>((v >> 8) & 0xFF),
                                 static_cast<char>((v >> 16) & 0xFF),
                                 static_cast<char>((v >> 24) & 0xFF)};
  out.write(b.data(), 4);
}

void put16(std::ostream& out, std::uint16_t v) {
  const std::array<char, 2> b = {static_cast<char>(v & 0xFF),
                                 static_cast<char>((v >> 8) & 0xFF)};
  out.write(b.data(), 2);
}

bool read_exact(std::istream& in, unsigned char* dst, std::size_t n) {
  in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(in.gcount()) == n;
}

}  // namespace

Waveform read_wav(std::istream& in, int channel) {
  unsigned char riff[12];
  if (!read_exact(in, riff, 12)) corrupt("truncated RIFF header");
  if (std::memcmp(riff, "RIFF", 4) != 0 || std::memcmp(riff + 8, "WAVE", 4) != 0)
    corrupt("missing RIFF/WAVE signature");

  std::uint16_t format = 0, n_channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::vector<unsigned char> data;
  bool have_data = false;

  unsigned char hdr[8];
  while (read_exact(in, hdr, 8)) {
    const std::uint32_t size = le32(hdr + 4);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (size < 16) corrupt("fmt chunk too small");
      std::vector<unsigned char> fmt(size);
      if (!read_exact(in, fmt.data(), size)) corrupt("truncated fmt chunk");
      format = le16(fmt.data());
      n_channels = le16(fmt.data() + 2);
      rate = le32(fmt.data() + 4);
      bits = le16(fmt.data() + 14);
      if (format == kFormatExtensible) {
        if (size < 26) corrupt("truncated WAVE_FORMAT_EXTENSIBLE");
        format = le16(fmt.data() + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data.resize(size);
      if (!read_exact(in, data.data(), size)) {
        // Tolerate a data chunk cut short only at a whole-frame boundary.
        data.resize(static_cast<std::size_t>(in.gcount()));
      }
      have_data = true;
      break;
    } else {
      in.ignore(size + (size & 1U));
      if (!in) corrupt("truncated chunk");
    }
    if (size & 1U) in.ignore(1);
  }
  if (!have_fmt) corrupt("no fmt chunk");
  if (!have_data) corrupt("no data chunk");
  if (n_channels == 0 || rate == 0) corrupt("invalid channel count or rate");
  if (!((format == kFormatPcm && bits == 16) ||
        (format == kFormatFloat && bits == 32)))
    corrupt("only PCM16 and float32 are supported (format " +
            std::to_string(format) + ", " + std::to_string(bits) + " bits)");
  SPKDIAR_CHECK(channel >= 0 && channel < n_channels, "channel index ", channel,
                " out of range for ", n_channels, "-channel file");

  const std::size_t bytes_per = bits / 8;
  const std::size_t frame = bytes_per * n_channels;
  const std::size_t n_frames = data.size() / frame;
  SPKDIAR_CHECK(n_frames > 0, "zero-length data chunk");

  Waveform w;
  w.sample_rate_hz = static_cast<int>(rate);
  w.samples.resize(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    const unsigned char* p = data.data() + i * frame + channel * bytes_per;
    if (format == kFormatPcm) {
      const auto v = static_cast<std::int16_t>(le16(p));
      w.samples[i] = static_cast<double>(v) / 32768.0;
    } else {
      const std::uint32_t bitsv = le32(p);
      float f;
      std::memcpy(&f, &bitsv, 4);
      w.samples[i] = static_cast<double>(f);
    }
  }
  return w;
}

Waveform read_wav(const std::filesystem::path& path, int channel) {
  std::ifstream in(path, std::ios::binary);
  SPKDIAR_CHECK(in.good(), "cannot open WAV file '", path.string(), "'");
  return read_wav(in, channel);
}

void write_wav(const Waveform& w, std::ostream& out, WavEncoding encoding) {
  SPKDIAR_CHECK(!w.empty(), "cannot write an empty waveform");
  SPKDIAR_CHECK(w.sample_rate_hz > 0, "sample rate must be positive");
  for (std::size_t i = 0; i < w.size(); ++i) {
    SPKDIAR_CHECK(std::abs(w.samples[i]) <= 1.0, "clipping required: sample ",
                  i, " has magnitude ", std::abs(w.samples[i]));
  }
  const bool pcm = encoding == WavEncoding::kPcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint32_t data_bytes =
      static_cast<std::uint32_t>(w.size() * (bits / 8));

  out.write("RIFF", 4);
  put32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put32(out, 16);
  put16(out, pcm ? kFormatPcm : kFormatFloat);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(w.sample_rate_hz));
  put32(out, static_cast<std::uint32_t>(w.sample_rate_hz) * (bits / 8));
  put16(out, bits / 8);
  put16(out, bits);
  out.write("data", 4);
  put32(out, data_bytes);
  for (double s : w.samples) {
    if (pcm) {
      const double q = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
      put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    } else {
      const float f = static_cast<float>(s);
      std::uint32_t v;
      std::memcpy(&v, &f, 4);
      put32(out, v);
    }
  }
}

void write_wav(const Waveform& w, const std::filesystem::path& path,
               WavEncoding encoding) {
  std::ofstream out(path, std::ios::binary);
  SPKDIAR_CHECK(out.good(), "cannot open '", path.string(), "' for writing");
  write_wav(w, out, encoding);
  SPKDIAR_CHECK(out.good(), "write to '", path.string(), "' failed");
}

// ---------------------------------------------------------------------------
// Resampling

namespace {

constexpr int kHalfTapsAtLowRate = 32;
constexpr double kKaiserBeta = 7.857;  // ~80 dB stop band
constexpr double kCutoffFraction = 0.46;  // of the lower sample rate

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = M_PI * x;
  return std::sin(px) / px;
}

// Modified Bessel function I0 by its power series; converges to double
// precision well within 40 terms for the arguments used here.
double bessel_i0(double x) {
  const double q = 0.25 * x * x;
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 40; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

double kaiser(double x, double half_width) {
  const double r = x / half_width;
  if (std::abs(r) >= 1.0) return 0.0;
  return bessel_i0(kKaiserBeta * std::sqrt(1.0 - r * r)) / bessel_i0(kKaiserBeta);
}

struct PolyphaseTable {
  int half = 0;
  int taps = 0;
  // weights[phase * taps + j] multiplies input sample (base - half + 1 + j).
  std::vector<double> weights;
};

PolyphaseTable design_polyphase(std::int64_t fs_in, std::int64_t fs_out,
                                std::int64_t up) {
  PolyphaseTable t;
  const double ratio_in_per_out = static_cast<double>(fs_in) / fs_out;
  t.half = static_cast<int>(
      std::ceil(kHalfTapsAtLowRate * std::max(1.0, ratio_in_per_out)));
  t.taps = 2 * t.half;
  const double nu =
      kCutoffFraction * static_cast<double>(std::min(fs_in, fs_out)) / fs_in;
  t.weights.resize(static_cast<std::size_t>(up) * t.taps);
  for (std::int64_t phase = 0; phase < up; ++phase) {
    const double frac = static_cast<double>(phase) / up;
    double* row = t.weights.data() + phase * t.taps;
    double sum = 0.0;
    for (int j = 0; j < t.taps; ++j) {
      const double x = frac + (t.half - 1 - j);
      row[j] = 2.0 * nu * sinc(2.0 * nu * x) * kaiser(x, t.half);
      sum += row[j];
    }
    for (int j = 0; j < t.taps; ++j) row[j] /= sum;
  }
  return t;
}

// Designs are reused across calls; speed perturbation hits the same few
// rate pairs over and over.
std::shared_ptr<const PolyphaseTable> polyphase_table(std::int64_t fs_in,
                                                      std::int64_t fs_out,
                                                      std::int64_t up) {
  static std::mutex mu;
  static std::map<std::pair<std::int64_t, std::int64_t>,
                  std::shared_ptr<const PolyphaseTable>>
      cache;
  constexpr std::size_t kMaxEntries = 32;
  const auto key = std::make_pair(fs_in, fs_out);
  {
    std::lock_guard<std::mutex> lock(mu);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  auto t = std::make_shared<const PolyphaseTable>(design_polyphase(fs_in, fs_out, up));
  std::lock_guard<std::mutex> lock(mu);
  if (cache.size() >= kMaxEntries) cache.clear();
  cache.emplace(key, t);
  return t;
}

}  // namespace

Waveform resample(const Waveform& w, int target_rate_hz) {
  SPKDIAR_CHECK(target_rate_hz > 0, "target sample rate must be positive");
  SPKDIAR_CHECK(w.sample_rate_hz > 0, "source sample rate must be positive");
  if (target_rate_hz == w.sample_rate_hz) return w;

  const std::int64_t fs_in = w.sample_rate_hz;
  const std::int64_t fs_out = target_rate_hz;
  const std::int64_t g = std::gcd(fs_in, fs_out);
  const std::int64_t up = fs_out / g;
  const std::int64_t down = fs_in / g;

  const auto table = polyphase_table(fs_in, fs_out, up);
  const int half = table->half;
  const int taps = table->taps;

  const auto n_in = static_cast<std::int64_t>(w.size());
  const std::int64_t n_out = (n_in * fs_out + fs_in / 2) / fs_in;
  Waveform out;
  out.sample_rate_hz = target_rate_hz;
  out.samples.assign(static_cast<std::size_t>(n_out), 0.0);
  for (std::int64_t n = 0; n < n_out; ++n) {
    const std::int64_t num = n * down;
    const std::int64_t base = num / up;
    const std::int64_t phase = num % up;
    const double* row = table->weights.data() + phase * taps;
    const std::int64_t first = base - half + 1;
    const int j0 = static_cast<int>(std::max<std::int64_t>(0, -first));
    const int j1 =
        static_cast<int>(std::min<std::int64_t>(taps, n_in - first));
    double acc = 0.0;
    for (int j = j0; j < j1; ++j) acc += row[j] * w.samples[first + j];
    out.samples[n] = acc;
  }
  return out;
}

std::vector<std::filesystem::path> list_wav_corpus(
    const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  std::vector<fs::path> out;
  SPKDIAR_CHECK(fs::exists(root), "corpus path '", root.string(),
                "' does not exist");
  if (fs::is_regular_file(root)) {
    std::ifstream in(root);
    std::string line;
    while (std::getline(in, line)) {
      const auto b = line.find_first_not_of(" \t\r");
      if (b == std::string::npos || line[b] == '#') continue;
      const auto e = line.find_last_not_of(" \t\r");
      fs::path p = line.substr(b, e - b + 1);
      if (p.is_relative()) p = root.parent_path() / p;
      out.push_back(p);
    }
    return out;
  }
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".wav") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Timelines / RTTM

void Timeline::sort() {
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Segment& a, const Segment& b) {
                     return a.onset_s < b.onset_s;
                   });
}

void Timeline::validate() const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    SPKDIAR_CHECK(e.onset_s >= 0.0, "timeline '", file_id, "' entry ", i,
                  " has negative onset");
    SPKDIAR_CHECK(e.offset_s > e.onset_s, "timeline '", file_id, "' entry ",
                  i, " has offset <= onset");
  }
}

std::vector<std::string> Timeline::speakers() const {
  std::vector<std::string> out;
  for (const auto& e : entries) {
    if (std::find(out.begin(), out.end(), e.speaker) == out.end())
      out.push_back(e.speaker);
  }
  return out;
}

double Timeline::end_s() const {
  double end = 0.0;
  for (const auto& e : entries) end = std::max(end, e.offset_s);
  return end;
}

std::vector<Timeline> parse_rttm(std::istream& in) {
  std::vector<Timeline> out;
  std::map<std::string, std::size_t> index;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    std::istringstream ss(line);
    std::vector<std::string> fields;
    for (std::string f; ss >> f;) fields.push_back(f);
    SPKDIAR_CHECK(fields.size() >= 9 && fields[0] == "SPEAKER",
                  "malformed RTTM line ", lineno,
                  ": expected >= 9 fields starting with SPEAKER");
    double onset = 0.0, dur = 0.0;
    try {
      std::size_t used = 0;
      onset = std::stod(fields[3], &used);
      SPKDIAR_CHECK(used == fields[3].size(), "trailing characters");
      dur = std::stod(fields[4], &used);
      SPKDIAR_CHECK(used == fields[4].size(), "trailing characters");
    } catch (const std::exception&) {
      detail::fail("malformed RTTM line ", lineno, ": bad onset/duration");
    }
    SPKDIAR_CHECK(dur >= 0.0, "negative duration on RTTM line ", lineno);
    SPKDIAR_CHECK(dur > 0.0, "zero duration on RTTM line ", lineno);
    SPKDIAR_CHECK(onset >= 0.0, "negative onset on RTTM line ", lineno);
    auto [it, inserted] = index.emplace(fields[1], out.size());
    if (inserted) out.push_back(Timeline{fields[1], {}});
    out[it->second].entries.push_back(Segment{fields[7], onset, onset + dur});
  }
  for (auto& t : out) t.sort();
  return out;
}

std::vector<Timeline> parse_rttm_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  SPKDIAR_CHECK(in.good(), "cannot open RTTM file '", path.string(), "'");
  return parse_rttm(in);
}

std::string emit_rttm(const Timeline& t, int precision) {
  t.validate();
  const double scale = std::pow(10.0, precision);
  const std::string file = t.file_id.empty() ? "rec" : t.file_id;
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(precision);
  for (const auto& e : t.entries) {
    // Quantize both ends first so re-parsed offsets carry no extra drift.
    const double on = std::round(e.onset_s * scale) / scale;
    double off = std::round(e.offset_s * scale) / scale;
    if (off <= on) off = on + 1.0 / scale;
    ss << "SPEAKER " << file << " 1 " << on << ' ' << (off - on)
       << " <NA> <NA> " << e.speaker << " <NA> <NA>\n";
  }
  return ss.str();
}

void write_rttm_file(const std::vector<Timeline>& ts,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  SPKDIAR_CHECK(out.good(), "cannot open '", path.string(), "' for writing");
  for (const auto& t : ts) out << emit_rttm(t);
}

}  // namespace spkdiar::audio
