#include "tmd/dsp/fft.hpp"

#include <numbers>

#include "tmd/errors.hpp"

namespace tmd::dsp {

namespace {

constexpr std::size_t kMaxDirectRadix = 64;

std::vector<std::size_t> factorize(std::size_t n) {
  std::vector<std::size_t> out;
  // Radix 4 first keeps the recursion shallow for powers of two.
  while (n % 4 == 0) {
    out.push_back(4);
    n /= 4;
  }
  for (std::size_t p = 2; p * p <= n; ++p) {
    while (n % p == 0) {
      out.push_back(p);
      n /= p;
    }
  }
  if (n > 1) out.push_back(n);
  return out;
}

Complex unit_root(std::size_t j, std::size_t n) {
  const double angle = -2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
  return {std::cos(angle), std::sin(angle)};
}

// Plain complex product; std::complex's operator* takes a slow path to
// handle infinities, which the inputs here never contain.
inline Complex cmul(const Complex& a, const Complex& b) {
  return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

}  // namespace

FftPlan::FftPlan(std::size_t n) : n_(n) {
  if (n == 0) throw ConfigError("FftPlan: length must be positive");
  factors_ = factorize(n);
  std::size_t largest = 1;
  for (auto f : factors_) largest = std::max(largest, f);
  use_bluestein_ = largest > kMaxDirectRadix;

  if (!use_bluestein_) {
    twiddles_.resize(n);
    for (std::size_t j = 0; j < n; ++j) twiddles_[j] = unit_root(j, n);
    return;
  }

  std::size_t m = 1;
  while (m < 2 * n - 1) m <<= 1;
  inner_ = std::make_unique<FftPlan>(m);
  chirp_.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 mod 2N keeps the angle small and exact for large k.
    const std::size_t k2 = (k * k) % (2 * n);
    const double angle = -std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n);
    chirp_[k] = {std::cos(angle), std::sin(angle)};
  }
  std::vector<Complex> kernel(m, Complex{});
  kernel[0] = std::conj(chirp_[0]);
  for (std::size_t k = 1; k < n; ++k) {
    kernel[k] = std::conj(chirp_[k]);
    kernel[m - k] = std::conj(chirp_[k]);
  }
  kernel_spectrum_ = inner_->forward(kernel);
}

FftPlan::~FftPlan() = default;
FftPlan::FftPlan(FftPlan&&) noexcept = default;
FftPlan& FftPlan::operator=(FftPlan&&) noexcept = default;

void FftPlan::forward(std::span<const Complex> in, std::span<Complex> out) const {
  if (in.size() != n_ || out.size() != n_) {
    throw ConfigError("FftPlan: plan length " + std::to_string(n_) + " but got " + std::to_string(in.size()) +
                      " inputs / " + std::to_string(out.size()) + " outputs");
  }
  if (use_bluestein_) {
    bluestein(in, out);
  } else {
    recurse(in.data(), 1, out.data(), n_, 0);
  }
}

std::vector<Complex> FftPlan::forward(std::span<const Complex> in) const {
  std::vector<Complex> out(n_);
  forward(in, out);
  return out;
}

void FftPlan::recurse(const Complex* in, std::size_t stride, Complex* out, std::size_t n, std::size_t level) const {
  if (n == 1) {
    out[0] = in[0];
    return;
  }
  const std::size_t p = factors_[level];
  const std::size_t m = n / p;
  for (std::size_t r = 0; r < p; ++r) recurse(in + r * stride, stride * p, out + r * m, m, level + 1);

  const std::size_t step = n_ / n;  // W_n^j == W_N^(j * step)
  Complex roots[kMaxDirectRadix];     // W_p^j
  for (std::size_t j = 0; j < p; ++j) roots[j] = twiddles_[j * (n_ / p)];
  Complex scratch[kMaxDirectRadix];
  for (std::size_t k = 0; k < m; ++k) {
    scratch[0] = out[k];
    for (std::size_t r = 1; r < p; ++r) scratch[r] = cmul(out[r * m + k], twiddles_[r * k * step]);
    for (std::size_t q = 0; q < p; ++q) {
      Complex acc = scratch[0];
      std::size_t idx = 0;  // (r * q) mod p
      for (std::size_t r = 1; r < p; ++r) {
        idx += q;
        if (idx >= p) idx -= p;
        acc += cmul(scratch[r], roots[idx]);
      }
      out[k + q * m] = acc;
    }
  }
}

void FftPlan::bluestein(std::span<const Complex> in, std::span<Complex> out) const {
  const std::size_t m = inner_->size();
  std::vector<Complex> a(m, Complex{});
  for (std::size_t k = 0; k < n_; ++k) a[k] = cmul(in[k], chirp_[k]);
  std::vector<Complex> spectrum = inner_->forward(a);
  for (std::size_t i = 0; i < m; ++i) spectrum[i] = std::conj(cmul(spectrum[i], kernel_spectrum_[i]));
  // Inverse transform via conj(FFT(conj(x))) / M.
  std::vector<Complex> conv = inner_->forward(spectrum);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n_; ++k) out[k] = cmul(std::conj(conv[k]) * inv_m, chirp_[k]);
}

std::vector<Complex> fft(std::span<const Complex> in) { return FftPlan(in.size()).forward(in); }

std::vector<Complex> fft(std::span<const float> real_in) {
  std::vector<Complex> in(real_in.begin(), real_in.end());
  return fft(in);
}

}  // namespace tmd::dsp
