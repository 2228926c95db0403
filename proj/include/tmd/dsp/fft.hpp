#pragma once

#include <complex>
#include <memory>
#include <span>
#include <vector>

namespace tmd::dsp {

using Complex = std::complex<double>;

// Forward DFT of a fixed length, X[k] = sum_n x[n] exp(-2 pi i k n / N).
// Mixed-radix Cooley-Tukey over the prime factors of N; lengths with a
// prime factor above 64 go through Bluestein's chirp-z convolution.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n);
  ~FftPlan();
  FftPlan(FftPlan&&) noexcept;
  FftPlan& operator=(FftPlan&&) noexcept;

  std::size_t size() const { return n_; }
  void forward(std::span<const Complex> in, std::span<Complex> out) const;
  std::vector<Complex> forward(std::span<const Complex> in) const;

 private:
  void recurse(const Complex* in, std::size_t stride, Complex* out, std::size_t n, std::size_t level) const;
  void bluestein(std::span<const Complex> in, std::span<Complex> out) const;

  std::size_t n_;
  std::vector<std::size_t> factors_;
  std::vector<Complex> twiddles_;  // exp(-2 pi i j / N), j in [0, N)

  // Bluestein state (only when use_bluestein_).
  bool use_bluestein_ = false;
  std::vector<Complex> chirp_;           // exp(-pi i k^2 / N)
  std::vector<Complex> kernel_spectrum_;  // FFT of the conjugate chirp, length M
  std::unique_ptr<FftPlan> inner_;        // power-of-two plan of length M
};

std::vector<Complex> fft(std::span<const Complex> in);
std::vector<Complex> fft(std::span<const float> real_in);

}  // namespace tmd::dsp
