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

#include "spkdiar/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstring>
#include <mutex>

#include "spkdiar/error.hpp"

namespace spkdiar::dsp {

namespace {

// The FFTW planner is not thread-safe; plan execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

struct RealFft::Impl {
  double* in = nullptr;
  fftw_complex* out = nullptr;
  fftw_plan plan = nullptr;
  std::vector<std::complex<double>> result;

  ~Impl() {
    if (plan) {
      std::lock_guard<std::mutex> lock(planner_mutex());
      fftw_destroy_plan(plan);
    }
    if (in) fftw_free(in);
    if (out) fftw_free(out);
  }
};

RealFft::RealFft(int n) : n_(n), impl_(std::make_unique<Impl>()) {
  SPKDIAR_CHECK(n >= 2, "FFT size must be >= 2");
  impl_->in = fftw_alloc_real(n);
  impl_->out = fftw_alloc_complex(n / 2 + 1);
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    impl_->plan = fftw_plan_dft_r2c_1d(n, impl_->in, impl_->out, FFTW_ESTIMATE);
  }
  impl_->result.resize(n / 2 + 1);
}

RealFft::~RealFft() = default;
RealFft::RealFft(RealFft&&) noexcept = default;
RealFft& RealFft::operator=(RealFft&&) noexcept = default;

std::span<const std::complex<double>> RealFft::forward(
    std::span<const double> in) {
  const std::size_t m = std::min<std::size_t>(in.size(), n_);
  std::copy_n(in.begin(), m, impl_->in);
  std::fill(impl_->in + m, impl_->in + n_, 0.0);
  fftw_execute(impl_->plan);
  for (int k = 0; k <= n_ / 2; ++k)
    impl_->result[k] = {impl_->out[k][0], impl_->out[k][1]};
  return impl_->result;
}

void RealFft::power(std::span<const double> in, std::span<double> out) {
  SPKDIAR_CHECK(static_cast<int>(out.size()) == num_bins(),
                "power spectrum buffer has wrong size");
  const std::size_t m = std::min<std::size_t>(in.size(), n_);
  std::copy_n(in.begin(), m, impl_->in);
  std::fill(impl_->in + m, impl_->in + n_, 0.0);
  fftw_execute(impl_->plan);
  for (int k = 0; k <= n_ / 2; ++k) {
    const double re = impl_->out[k][0], im = impl_->out[k][1];
    out[k] = re * re + im * im;
  }
}

int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<double> convolve(std::span<const double> a,
                             std::span<const double> b) {
  if (a.empty() || b.empty()) return {};
  const std::size_t n_out = a.size() + b.size() - 1;
  std::vector<double> out(n_out, 0.0);
  if (std::min(a.size(), b.size()) <= 64) {
    const auto& lng = a.size() >= b.size() ? a : b;
    const auto& sht = a.size() >= b.size() ? b : a;
    for (std::size_t j = 0; j < sht.size(); ++j) {
      const double k = sht[j];
      if (k == 0.0) continue;
      for (std::size_t i = 0; i < lng.size(); ++i) out[i + j] += k * lng[i];
    }
    return out;
  }

  const int n = next_pow2(static_cast<int>(n_out));
  double* buf = fftw_alloc_real(n);
  fftw_complex* fa = fftw_alloc_complex(n / 2 + 1);
  fftw_complex* fb = fftw_alloc_complex(n / 2 + 1);
  fftw_plan pa, pb, inv;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    pa = fftw_plan_dft_r2c_1d(n, buf, fa, FFTW_ESTIMATE);
    pb = fftw_plan_dft_r2c_1d(n, buf, fb, FFTW_ESTIMATE);
    inv = fftw_plan_dft_c2r_1d(n, fa, buf, FFTW_ESTIMATE);
  }

  std::fill(buf, buf + n, 0.0);
  std::copy(a.begin(), a.end(), buf);
  fftw_execute(pa);
  std::fill(buf, buf + n, 0.0);
  std::copy(b.begin(), b.end(), buf);
  fftw_execute(pb);
  for (int k = 0; k <= n / 2; ++k) {
    const double re = fa[k][0] * fb[k][0] - fa[k][1] * fb[k][1];
    const double im = fa[k][0] * fb[k][1] + fa[k][1] * fb[k][0];
    fa[k][0] = re;
    fa[k][1] = im;
  }
  fftw_execute(inv);
  for (std::size_t i = 0; i < n_out; ++i) out[i] = buf[i] / n;

  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(pa);
    fftw_destroy_plan(pb);
    fftw_destroy_plan(inv);
  }
  fftw_free(buf);
  fftw_free(fa);
  fftw_free(fb);
  return out;
}

int dominant_bin(std::span<const double> x, int n_fft) {
  RealFft fft(n_fft);
  std::vector<double> p(fft.num_bins());
  fft.power(x, p);
  return static_cast<int>(std::max_element(p.begin() + 1, p.end()) -
                          p.begin());
}

}  // namespace spkdiar::dsp
