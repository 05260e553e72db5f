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

#include <complex>
#include <memory>
#include <span>
#include <vector>

namespace spkdiar::dsp {

/// Real-to-complex FFT of a fixed size (FFTW plan owned by the object).
/// Not thread-safe; create one per thread.
class RealFft {
 public:
  explicit RealFft(int n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  RealFft(RealFft&&) noexcept;
  RealFft& operator=(RealFft&&) noexcept;

  int size() const { return n_; }
  int num_bins() const { return n_ / 2 + 1; }

  /// Zero-pads (or truncates) `in` to size() and transforms.
  std::span<const std::complex<double>> forward(std::span<const double> in);
  /// |X[k]|^2 for k in [0, n/2].
  void power(std::span<const double> in, std::span<double> out);

 private:
  struct Impl;
  int n_;
  std::unique_ptr<Impl> impl_;
};

/// Full linear convolution (length |a| + |b| - 1). Direct for short
/// kernels, FFT-based otherwise.
std::vector<double> convolve(std::span<const double> a,
                             std::span<const double> b);

/// Smallest power of two >= n.
int next_pow2(int n);

/// Index of the largest-magnitude DFT bin of `x` (zero-padded to n_fft),
/// excluding DC.
int dominant_bin(std::span<const double> x, int n_fft);

}  // namespace spkdiar::dsp
