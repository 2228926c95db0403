#include "tmd/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "tmd/errors.hpp"

namespace tmd::nn {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

detail::Node& parent(detail::Node& self, std::size_t i) { return *self.parents[i]; }

// Eigen's matrix-vector and reduction kernels peel to the SIMD boundary of
// the runtime pointer, so their rounding depends on where the heap placed a
// buffer. Everything below either goes through the packed GEMM path or sums
// in an order fixed by the index alone.

// Eight interleaved partial sums in a fixed grouping.
float dot(const float* a, const float* b, std::size_t n) {
  float lane[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t l = 0; l < 8; ++l) lane[l] += a[i + l] * b[i + l];
  }
  for (; i < n; ++i) lane[i % 8] += a[i] * b[i];
  return ((lane[0] + lane[1]) + (lane[2] + lane[3])) + ((lane[4] + lane[5]) + (lane[6] + lane[7]));
}

float sum(const float* a, std::size_t n) {
  float lane[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t l = 0; l < 8; ++l) lane[l] += a[i + l];
  }
  for (; i < n; ++i) lane[i % 8] += a[i];
  return ((lane[0] + lane[1]) + (lane[2] + lane[3])) + ((lane[4] + lane[5]) + (lane[6] + lane[7]));
}

// dst (+)= lhs * rhs. Eigen dispatches vector-shaped and tiny products to
// gemv or coefficient kernels; only the packed GEMM path is used here.
template <typename Dst, typename Lhs, typename Rhs>
void product(Dst&& dst, const Lhs& lhs, const Rhs& rhs, bool accumulate) {
  const Eigen::Index m = dst.rows(), n = dst.cols(), k = lhs.cols();
  if (m > 1 && n > 1 && m + n + k >= 20) {
    if (accumulate) {
      dst.noalias() += lhs * rhs;
    } else {
      dst.noalias() = lhs * rhs;
    }
    return;
  }
  if (!accumulate) dst.setZero();
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index p = 0; p < k; ++p) {
      const float a = lhs.coeff(i, p);
      for (Eigen::Index j = 0; j < n; ++j) dst.coeffRef(i, j) += a * rhs.coeff(p, j);
    }
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* what) {
  if (t.rank() != rank) {
    throw ConfigError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                      ", got " + shape_string(t.shape()));
  }
}

void require_finite(const Tensor& t, const char* op) {
  if (!t.all_finite()) throw NumericError(std::string(op) + ": non-finite input");
}

// Builds the [C*kh*kw, Ho*Wo] patch matrix of a zero-padded [C,H,W] image.
void im2col(const float* x, std::size_t C, std::size_t H, std::size_t W, std::size_t kh,
            std::size_t kw, std::size_t stride, std::size_t ph, std::size_t pw, std::size_t Ho,
            std::size_t Wo, float* col) {
  const std::size_t cols = Ho * Wo;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < kh; ++i) {
      for (std::size_t j = 0; j < kw; ++j) {
        float* row = col + ((c * kh + i) * kw + j) * cols;
        for (std::size_t oh = 0; oh < Ho; ++oh) {
          const long ih = static_cast<long>(oh * stride + i) - static_cast<long>(ph);
          float* dst = row + oh * Wo;
          if (ih < 0 || ih >= static_cast<long>(H)) {
            std::fill(dst, dst + Wo, 0.0f);
            continue;
          }
          const float* src = x + (c * H + static_cast<std::size_t>(ih)) * W;
          for (std::size_t ow = 0; ow < Wo; ++ow) {
            const long iw = static_cast<long>(ow * stride + j) - static_cast<long>(pw);
            dst[ow] = (iw < 0 || iw >= static_cast<long>(W)) ? 0.0f : src[iw];
          }
        }
      }
    }
  }
}

void col2im_add(const float* col, std::size_t C, std::size_t H, std::size_t W, std::size_t kh,
                std::size_t kw, std::size_t stride, std::size_t ph, std::size_t pw, std::size_t Ho,
                std::size_t Wo, float* dx) {
  const std::size_t cols = Ho * Wo;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < kh; ++i) {
      for (std::size_t j = 0; j < kw; ++j) {
        const float* row = col + ((c * kh + i) * kw + j) * cols;
        for (std::size_t oh = 0; oh < Ho; ++oh) {
          const long ih = static_cast<long>(oh * stride + i) - static_cast<long>(ph);
          if (ih < 0 || ih >= static_cast<long>(H)) continue;
          float* dst = dx + (c * H + static_cast<std::size_t>(ih)) * W;
          for (std::size_t ow = 0; ow < Wo; ++ow) {
            const long iw = static_cast<long>(ow * stride + j) - static_cast<long>(pw);
            if (iw >= 0 && iw < static_cast<long>(W)) dst[iw] += row[oh * Wo + ow];
          }
        }
      }
    }
  }
}

struct ConvGeometry {
  std::size_t C, H, W, F, kh, kw, stride, ph, pw, Ho, Wo;
};

Tensor conv_impl(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                 const ConvGeometry& g, Shape out_shape) {
  const std::size_t patch = g.C * g.kh * g.kw;
  const std::size_t cols = g.Ho * g.Wo;
  const bool direct = g.kh == 1 && g.kw == 1 && g.stride == 1 && g.ph == 0 && g.pw == 0;

  std::vector<float> col;
  if (!direct) {
    col.resize(patch * cols);
    im2col(input.data().data(), g.C, g.H, g.W, g.kh, g.kw, g.stride, g.ph, g.pw, g.Ho, g.Wo,
           col.data());
  }
  const float* col_ptr = direct ? input.data().data() : col.data();

  std::vector<float> out(g.F * cols);
  MatMap out_m(out.data(), g.F, cols);
  ConstMatMap k_m(kernels.data().data(), g.F, patch);
  ConstMatMap col_m(col_ptr, patch, cols);
  product(out_m, k_m, col_m, false);
  const auto b = bias.data();
  for (std::size_t f = 0; f < g.F; ++f) out_m.row(f).array() += b[f];

  return Tensor::make_result(
      std::move(out_shape), std::move(out), {input, kernels, bias},
      [g, patch, cols, direct, col = std::move(col)](detail::Node& self) {
        auto& in = parent(self, 0);
        auto& ker = parent(self, 1);
        auto& bi = parent(self, 2);
        ConstMatMap dout(self.grad.data(), g.F, cols);
        const float* col_ptr = direct ? in.data.data() : col.data();
        ConstMatMap col_m(col_ptr, patch, cols);
        if (ker.requires_grad) {
          MatMap dk(ker.grad_buffer().data(), g.F, patch);
          product(dk, dout, col_m.transpose(), true);
        }
        if (bi.requires_grad) {
          auto db = bi.grad_buffer();
          for (std::size_t f = 0; f < g.F; ++f) db[f] += sum(self.grad.data() + f * cols, cols);
        }
        if (in.requires_grad) {
          ConstMatMap k_m(ker.data.data(), g.F, patch);
          if (direct) {
            MatMap dx(in.grad_buffer().data(), patch, cols);
            product(dx, k_m.transpose(), dout, true);
          } else {
            RowMat dcol(patch, cols);
            product(dcol, k_m.transpose(), dout, false);
            col2im_add(dcol.data(), g.C, g.H, g.W, g.kh, g.kw, g.stride, g.ph, g.pw, g.Ho, g.Wo,
                       in.grad_buffer().data());
          }
        }
      });
}

std::size_t conv_out(std::size_t n, std::size_t pad, std::size_t k, std::size_t stride,
                     const char* op, const char* axis) {
  if (k > n + 2 * pad) {
    throw ConfigError(std::string(op) + ": kernel " + axis + "=" + std::to_string(k) +
                      " exceeds padded input " + axis + "=" + std::to_string(n + 2 * pad));
  }
  return (n + 2 * pad - k) / stride + 1;
}

void check_bias(const Tensor& bias, std::size_t F, const char* op) {
  if (bias.size() != F) {
    throw ConfigError(std::string(op) + ": bias has " + std::to_string(bias.size()) +
                      " values, expected " + std::to_string(F));
  }
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  const auto in = x.data();
  std::vector<float> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  return Tensor::make_result(x.shape(), std::move(out), {x}, [deriv](detail::Node& self) {
    auto& p = parent(self, 0);
    auto dx = p.grad_buffer();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i] * deriv(p.data[i], self.data[i]);
  });
}

void require_same_shapes(std::span<const Tensor> inputs, const char* op) {
  if (inputs.empty()) throw ConfigError(std::string(op) + ": no inputs");
  for (const auto& t : inputs) {
    if (t.shape() != inputs[0].shape()) {
      throw ConfigError(std::string(op) + ": heterogeneous shapes " + shape_string(inputs[0].shape()) +
                        " vs " + shape_string(t.shape()));
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  require_rank(input, 3, "conv2d", "input");
  require_rank(kernels, 4, "conv2d", "kernels");
  if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
  ConvGeometry g{};
  g.C = input.dim(0);
  g.H = input.dim(1);
  g.W = input.dim(2);
  g.F = kernels.dim(0);
  g.kh = kernels.dim(2);
  g.kw = kernels.dim(3);
  if (kernels.dim(1) != g.C) {
    throw ConfigError("conv2d: kernels expect " + std::to_string(kernels.dim(1)) +
                      " input channels, input " + shape_string(input.shape()) + " has " +
                      std::to_string(g.C));
  }
  check_bias(bias, g.F, "conv2d");
  g.stride = stride;
  g.ph = g.pw = padding;
  g.Ho = conv_out(g.H, padding, g.kh, stride, "conv2d", "height");
  g.Wo = conv_out(g.W, padding, g.kw, stride, "conv2d", "width");
  return conv_impl(input, kernels, bias, g, {g.F, g.Ho, g.Wo});
}

Tensor conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  require_rank(input, 2, "conv1d", "input");
  require_rank(kernels, 3, "conv1d", "kernels");
  if (stride < 1) throw ConfigError("conv1d: stride must be >= 1");
  ConvGeometry g{};
  g.C = input.dim(0);
  g.H = 1;
  g.W = input.dim(1);
  g.F = kernels.dim(0);
  g.kh = 1;
  g.kw = kernels.dim(2);
  if (kernels.dim(1) != g.C) {
    throw ConfigError("conv1d: kernels expect " + std::to_string(kernels.dim(1)) +
                      " input channels, input " + shape_string(input.shape()) + " has " +
                      std::to_string(g.C));
  }
  check_bias(bias, g.F, "conv1d");
  g.stride = stride;
  g.ph = 0;
  g.pw = padding;
  g.Ho = 1;
  g.Wo = conv_out(g.W, padding, g.kw, stride, "conv1d", "length");
  return conv_impl(input, kernels, bias, g, {g.F, g.Wo});
}

Tensor maxpool2d(const Tensor& input, std::size_t k) {
  require_rank(input, 3, "maxpool2d", "input");
  const std::size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
  if (k < 1 || H % k != 0 || W % k != 0) {
    throw ConfigError("maxpool2d: input " + shape_string(input.shape()) +
                      " not divisible by pool " + std::to_string(k));
  }
  const std::size_t Ho = H / k, Wo = W / k;
  const auto x = input.data();
  std::vector<float> out(C * Ho * Wo);
  std::vector<std::uint32_t> argmax(out.size());
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t oh = 0; oh < Ho; ++oh) {
      for (std::size_t ow = 0; ow < Wo; ++ow) {
        std::size_t best = (c * H + oh * k) * W + ow * k;
        for (std::size_t i = 0; i < k; ++i) {
          for (std::size_t j = 0; j < k; ++j) {
            const std::size_t idx = (c * H + oh * k + i) * W + ow * k + j;
            if (x[idx] > x[best]) best = idx;
          }
        }
        const std::size_t o = (c * Ho + oh) * Wo + ow;
        out[o] = x[best];
        argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return Tensor::make_result({C, Ho, Wo}, std::move(out), {input},
                             [argmax = std::move(argmax)](detail::Node& self) {
                               auto dx = parent(self, 0).grad_buffer();
                               for (std::size_t o = 0; o < argmax.size(); ++o) dx[argmax[o]] += self.grad[o];
                             });
}

Tensor maxpool1d(const Tensor& input, std::size_t k) {
  require_rank(input, 2, "maxpool1d", "input");
  const std::size_t C = input.dim(0), L = input.dim(1);
  if (k < 1 || L % k != 0) {
    throw ConfigError("maxpool1d: input " + shape_string(input.shape()) +
                      " not divisible by pool " + std::to_string(k));
  }
  const std::size_t Lo = L / k;
  const auto x = input.data();
  std::vector<float> out(C * Lo);
  std::vector<std::uint32_t> argmax(out.size());
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t o = 0; o < Lo; ++o) {
      const std::size_t base = c * L + o * k;
      std::size_t best = base;
      for (std::size_t j = 1; j < k; ++j) {
        if (x[base + j] > x[best]) best = base + j;
      }
      out[c * Lo + o] = x[best];
      argmax[c * Lo + o] = static_cast<std::uint32_t>(best);
    }
  }
  return Tensor::make_result({C, Lo}, std::move(out), {input},
                             [argmax = std::move(argmax)](detail::Node& self) {
                               auto dx = parent(self, 0).grad_buffer();
                               for (std::size_t o = 0; o < argmax.size(); ++o) dx[argmax[o]] += self.grad[o];
                             });
}

Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_rank(weight, 2, "dense", "weight");
  const std::size_t m = weight.dim(0), n = weight.dim(1);
  if (input.size() != n) {
    throw ConfigError("dense: weight " + shape_string(weight.shape()) + " expects " +
                      std::to_string(n) + " inputs, got " + shape_string(input.shape()));
  }
  check_bias(bias, m, "dense");
  std::vector<float> out(m);
  const float* w = weight.data().data();
  const float* x = input.data().data();
  const auto b = bias.data();
  for (std::size_t i = 0; i < m; ++i) out[i] = dot(w + i * n, x, n) + b[i];
  return Tensor::make_result({m}, std::move(out), {input, weight, bias}, [m, n](detail::Node& self) {
    auto& in = parent(self, 0);
    auto& wt = parent(self, 1);
    auto& bi = parent(self, 2);
    const float* dy = self.grad.data();
    if (wt.requires_grad) {
      float* dw = wt.grad_buffer().data();
      const float* x = in.data.data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) dw[i * n + j] += dy[i] * x[j];
      }
    }
    if (bi.requires_grad) {
      auto db = bi.grad_buffer();
      for (std::size_t i = 0; i < m; ++i) db[i] += dy[i];
    }
    if (in.requires_grad) {
      float* dx = in.grad_buffer().data();
      const float* w = wt.data.data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) dx[j] += w[i * n + j] * dy[i];
      }
    }
  });
}

Tensor relu(const Tensor& input) {
  return unary(
      input, [](float v) { return v > 0.0f ? v : 0.0f; },
      [](float x, float) { return x > 0.0f ? 1.0f : 0.0f; });
}

Tensor sigmoid(const Tensor& input) {
  return unary(
      input,
      [](float v) {
        // Split on sign so exp never overflows.
        if (v >= 0.0f) return 1.0f / (1.0f + std::exp(-v));
        const float e = std::exp(v);
        return e / (1.0f + e);
      },
      [](float, float y) { return y * (1.0f - y); });
}

Tensor exp(const Tensor& input) {
  return unary(
      input, [](float v) { return std::exp(v); }, [](float, float y) { return y; });
}

Tensor softmax(const Tensor& scores) {
  require_finite(scores, "softmax");
  const auto s = scores.data();
  const float m = *std::max_element(s.begin(), s.end());
  std::vector<float> out(s.size());
  float total = 0.0f;
  for (std::size_t i = 0; i < s.size(); ++i) {
    out[i] = std::exp(s[i] - m);
    total += out[i];
  }
  for (auto& v : out) v /= total;
  return Tensor::make_result(scores.shape(), std::move(out), {scores}, [](detail::Node& self) {
    float dot = 0.0f;
    for (std::size_t i = 0; i < self.data.size(); ++i) dot += self.grad[i] * self.data[i];
    auto dx = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.data[i] * (self.grad[i] - dot);
  });
}

Tensor log_softmax(const Tensor& scores) {
  require_finite(scores, "log_softmax");
  const auto s = scores.data();
  const float m = *std::max_element(s.begin(), s.end());
  float total = 0.0f;
  for (float v : s) total += std::exp(v - m);
  const float lse = m + std::log(total);
  std::vector<float> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i] - lse;
  return Tensor::make_result(scores.shape(), std::move(out), {scores}, [](detail::Node& self) {
    float gsum = 0.0f;
    for (float g : self.grad) gsum += g;
    auto dx = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i] - std::exp(self.data[i]) * gsum;
  });
}

Tensor cross_entropy(const Tensor& probs, std::size_t label) {
  if (label >= probs.size()) {
    throw ConfigError("cross_entropy: label " + std::to_string(label) + " outside [0," +
                      std::to_string(probs.size()) + ")");
  }
  const float p = probs.data()[label];
  const float loss = -std::log(p);
  if (!std::isfinite(loss)) throw NumericError("cross_entropy: non-finite loss (p=" + std::to_string(p) + ")");
  return Tensor::make_result({1}, {loss}, {probs}, [label](detail::Node& self) {
    auto& in = parent(self, 0);
    in.grad_buffer()[label] += -self.grad[0] / in.data[label];
  });
}

Tensor nll_loss(const Tensor& log_probs, std::size_t label) {
  if (label >= log_probs.size()) {
    throw ConfigError("nll_loss: label " + std::to_string(label) + " outside [0," +
                      std::to_string(log_probs.size()) + ")");
  }
  const float loss = -log_probs.data()[label];
  if (!std::isfinite(loss)) throw NumericError("nll_loss: non-finite loss");
  return Tensor::make_result({1}, {loss}, {log_probs}, [label](detail::Node& self) {
    parent(self, 0).grad_buffer()[label] -= self.grad[0];
  });
}

Tensor sum(const Tensor& input) {
  float total = 0.0f;
  for (float v : input.data()) total += v;
  return Tensor::make_result({1}, {total}, {input}, [](detail::Node& self) {
    for (auto& g : parent(self, 0).grad_buffer()) g += self.grad[0];
  });
}

Tensor max(const Tensor& input) {
  const auto x = input.data();
  const std::size_t best = static_cast<std::size_t>(std::max_element(x.begin(), x.end()) - x.begin());
  return Tensor::make_result({1}, {x[best]}, {input}, [best](detail::Node& self) {
    parent(self, 0).grad_buffer()[best] += self.grad[0];
  });
}

Tensor select(const Tensor& input, std::size_t index) {
  if (index >= input.size()) throw ConfigError("select: index out of range");
  return Tensor::make_result({1}, {input.data()[index]}, {input}, [index](detail::Node& self) {
    parent(self, 0).grad_buffer()[index] += self.grad[0];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ConfigError("add: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  std::vector<float> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      auto& p = parent(self, k);
      if (!p.requires_grad) continue;
      auto dx = p.grad_buffer();
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ConfigError("mul: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  std::vector<float> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    if (pa.requires_grad) {
      auto dx = pa.grad_buffer();
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i] * pb.data[i];
    }
    if (pb.requires_grad) {
      auto dx = pb.grad_buffer();
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i] * pa.data[i];
    }
  });
}

Tensor scale(const Tensor& input, float factor) {
  return unary(
      input, [factor](float v) { return v * factor; }, [factor](float, float) { return factor; });
}

Tensor reshape(const Tensor& input, Shape shape) {
  if (shape_size(shape) != input.size()) {
    throw ConfigError("reshape: cannot view " + shape_string(input.shape()) + " as " + shape_string(shape));
  }
  std::vector<float> out(input.data().begin(), input.data().end());
  return Tensor::make_result(std::move(shape), std::move(out), {input}, [](detail::Node& self) {
    auto dx = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i];
  });
}

Tensor flatten(const Tensor& input) { return reshape(input, {input.size()}); }

Tensor concat(std::span<const Tensor> inputs, std::size_t axis) {
  if (inputs.empty()) throw ConfigError("concat: no inputs");
  const Shape& first = inputs[0].shape();
  if (axis >= first.size()) throw ConfigError("concat: axis out of range for " + shape_string(first));
  std::size_t total_axis = 0;
  for (const auto& t : inputs) {
    const Shape& s = t.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == first[d];
    if (!ok) {
      throw ConfigError("concat: heterogeneous input shapes " + shape_string(first) + " vs " +
                        shape_string(s));
    }
    total_axis += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];

  Shape out_shape = first;
  out_shape[axis] = total_axis;
  std::vector<float> out(shape_size(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& t : inputs) {
    offsets.push_back(offset);
    const std::size_t chunk = t.dim(axis) * inner;
    const auto src = t.data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(src.data() + o * chunk, chunk, out.data() + o * total_axis * inner + offset * inner);
    }
    offset += t.dim(axis);
  }
  std::vector<Tensor> parents(inputs.begin(), inputs.end());
  return Tensor::make_result(
      std::move(out_shape), std::move(out), std::move(parents),
      [axis, outer, inner, total_axis, offsets](detail::Node& self) {
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
          auto& p = parent(self, k);
          if (!p.requires_grad) continue;
          const std::size_t chunk = p.shape[axis] * inner;
          auto dx = p.grad_buffer();
          for (std::size_t o = 0; o < outer; ++o) {
            const float* g = self.grad.data() + o * total_axis * inner + offsets[k] * inner;
            for (std::size_t i = 0; i < chunk; ++i) dx[o * chunk + i] += g[i];
          }
        }
      });
}

Tensor mean(std::span<const Tensor> inputs) {
  require_same_shapes(inputs, "mean");
  const float n = static_cast<float>(inputs.size());
  std::vector<float> out(inputs[0].data().begin(), inputs[0].data().end());
  for (std::size_t k = 1; k < inputs.size(); ++k) {
    const auto d = inputs[k].data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += d[i];
  }
  for (auto& v : out) v /= n;
  std::vector<Tensor> parents(inputs.begin(), inputs.end());
  return Tensor::make_result(inputs[0].shape(), std::move(out), std::move(parents), [n](detail::Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      auto& p = parent(self, k);
      if (!p.requires_grad) continue;
      auto dx = p.grad_buffer();
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i] / n;
    }
  });
}

Tensor weighted_sum(std::span<const Tensor> inputs, const Tensor& weights) {
  require_same_shapes(inputs, "weighted_sum");
  if (weights.size() != inputs.size()) {
    throw ConfigError("weighted_sum: " + std::to_string(inputs.size()) + " inputs but " +
                      std::to_string(weights.size()) + " weights");
  }
  const auto w = weights.data();
  std::vector<float> out(inputs[0].size(), 0.0f);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const auto d = inputs[k].data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += w[k] * d[i];
  }
  std::vector<Tensor> parents(inputs.begin(), inputs.end());
  parents.push_back(weights);
  return Tensor::make_result(inputs[0].shape(), std::move(out), std::move(parents), [](detail::Node& self) {
    const std::size_t n = self.parents.size() - 1;
    auto& wn = parent(self, n);
    for (std::size_t k = 0; k < n; ++k) {
      auto& p = parent(self, k);
      if (p.requires_grad) {
        auto dx = p.grad_buffer();
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i] * wn.data[k];
      }
      if (wn.requires_grad) {
        float acc = 0.0f;
        for (std::size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * p.data[i];
        wn.grad_buffer()[k] += acc;
      }
    }
  });
}

Tensor log_mixture(std::span<const Tensor> log_probs, const Tensor& log_weights) {
  require_same_shapes(log_probs, "log_mixture");
  const std::size_t n = log_probs.size();
  if (log_weights.size() != n) {
    throw ConfigError("log_mixture: " + std::to_string(n) + " components but " +
                      std::to_string(log_weights.size()) + " weights");
  }
  const std::size_t K = log_probs[0].size();
  const auto lw = log_weights.data();
  std::vector<float> out(K);
  for (std::size_t c = 0; c < K; ++c) {
    float m = -std::numeric_limits<float>::infinity();
    for (std::size_t k = 0; k < n; ++k) m = std::max(m, lw[k] + log_probs[k].data()[c]);
    if (std::isnan(m)) throw NumericError("log_mixture: NaN component");
    // Every component gives the class zero probability.
    if (m == -std::numeric_limits<float>::infinity()) {
      out[c] = m;
      continue;
    }
    float total = 0.0f;
    for (std::size_t k = 0; k < n; ++k) total += std::exp(lw[k] + log_probs[k].data()[c] - m);
    out[c] = m + std::log(total);
  }
  std::vector<Tensor> parents(log_probs.begin(), log_probs.end());
  parents.push_back(log_weights);
  return Tensor::make_result(log_probs[0].shape(), std::move(out), std::move(parents),
                             [n, K](detail::Node& self) {
                               auto& wn = parent(self, n);
                               for (std::size_t k = 0; k < n; ++k) {
                                 auto& p = parent(self, k);
                                 float wgrad = 0.0f;
                                 for (std::size_t c = 0; c < K; ++c) {
                                   if (std::isinf(self.data[c])) continue;
                                   const float r = std::exp(wn.data[k] + p.data[c] - self.data[c]);
                                   const float g = self.grad[c] * r;
                                   if (p.requires_grad) p.grad_buffer()[c] += g;
                                   wgrad += g;
                                 }
                                 if (wn.requires_grad) wn.grad_buffer()[k] += wgrad;
                               }
                             });
}

Tensor global_avg_pool(const Tensor& input) {
  if (input.rank() < 2) throw ConfigError("global_avg_pool: need [C, ...], got " + shape_string(input.shape()));
  const std::size_t C = input.dim(0);
  const std::size_t inner = input.size() / C;
  const auto x = input.data();
  std::vector<float> out(C);
  for (std::size_t c = 0; c < C; ++c) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < inner; ++i) acc += x[c * inner + i];
    out[c] = acc / static_cast<float>(inner);
  }
  return Tensor::make_result({C}, std::move(out), {input}, [C, inner](detail::Node& self) {
    auto dx = parent(self, 0).grad_buffer();
    for (std::size_t c = 0; c < C; ++c) {
      const float g = self.grad[c] / static_cast<float>(inner);
      for (std::size_t i = 0; i < inner; ++i) dx[c * inner + i] += g;
    }
  });
}

Tensor channel_scale(const Tensor& input, const Tensor& gains) {
  if (input.rank() < 2) throw ConfigError("channel_scale: need [C, ...], got " + shape_string(input.shape()));
  const std::size_t C = input.dim(0);
  if (gains.size() != C) {
    throw ConfigError("channel_scale: " + std::to_string(gains.size()) + " gains for " +
                      std::to_string(C) + " channels");
  }
  const std::size_t inner = input.size() / C;
  const auto x = input.data();
  const auto g = gains.data();
  std::vector<float> out(x.size());
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < inner; ++i) out[c * inner + i] = x[c * inner + i] * g[c];
  }
  return Tensor::make_result(input.shape(), std::move(out), {input, gains}, [C, inner](detail::Node& self) {
    auto& in = parent(self, 0);
    auto& gn = parent(self, 1);
    for (std::size_t c = 0; c < C; ++c) {
      if (in.requires_grad) {
        auto dx = in.grad_buffer();
        for (std::size_t i = 0; i < inner; ++i) dx[c * inner + i] += self.grad[c * inner + i] * gn.data[c];
      }
      if (gn.requires_grad) {
        float acc = 0.0f;
        for (std::size_t i = 0; i < inner; ++i) acc += self.grad[c * inner + i] * in.data[c * inner + i];
        gn.grad_buffer()[c] += acc;
      }
    }
  });
}

}  // namespace tmd::nn
