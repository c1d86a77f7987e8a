#include "dtpa/numkernel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "dtpa/errors.hpp"
#include "dtpa/kernels.hpp"

namespace dtpa::num {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw DomainError("tensor data length " + std::to_string(data_.size()) +
                      " does not match shape product " +
                      std::to_string(shape_size(shape_)));
  }
}

std::span<double> Tensor::row(std::size_t i) {
  const std::size_t stride = data_.size() / shape_.at(0);
  return std::span<double>(data_).subspan(i * stride, stride);
}

std::span<const double> Tensor::row(std::size_t i) const {
  const std::size_t stride = data_.size() / shape_.at(0);
  return std::span<const double>(data_).subspan(i * stride, stride);
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) throw DomainError("tensor rank mismatch");
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= shape_[axis]) throw DomainError("tensor index out of range");
    flat = flat * shape_[axis] + i;
    ++axis;
  }
  return flat;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void softmax_inplace(std::span<double> v) {
  if (v.empty()) throw DomainError("softmax of empty sequence");
  const double mx = *std::max_element(v.begin(), v.end());
  if (is_masked(mx)) throw DomainError("softmax with every entry masked");
  double total = 0.0;
  for (double& x : v) {
    x = is_masked(x) ? 0.0 : std::exp(x - mx);
    total += x;
  }
  const double inv = 1.0 / total;
  for (double& x : v) x *= inv;
}

std::vector<double> softmax(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  softmax_inplace(out);
  return out;
}

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) throw DomainError("log_sum_exp of empty sequence");
  const double mx = *std::max_element(v.begin(), v.end());
  if (is_masked(mx)) return kMasked;
  if (std::isinf(mx)) return mx;
  double total = 0.0;
  for (double x : v) total += is_masked(x) ? 0.0 : std::exp(x - mx);
  return mx + std::log(total);
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DomainError("dot: length mismatch");
  return kernels::active().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw DomainError("axpy: length mismatch");
  kernels::active().axpy(alpha, x.data(), y.data(), x.size());
}

void matvec(const Tensor& w, std::span<const double> x,
            std::span<const double> bias, std::span<double> out) {
  const std::size_t rows = w.dim(0);
  const std::size_t cols = w.dim(1);
  if (x.size() != cols || out.size() != rows ||
      (!bias.empty() && bias.size() != rows)) {
    throw DomainError("matvec: shape mismatch");
  }
  kernels::active().matvec(w.raw(), x.data(), bias.empty() ? nullptr : bias.data(),
                           out.data(), rows, cols);
}

void matvec_t_acc(const Tensor& w, std::span<const double> x,
                  std::span<double> out) {
  const std::size_t rows = w.dim(0);
  const std::size_t cols = w.dim(1);
  if (x.size() != rows || out.size() != cols) {
    throw DomainError("matvec_t_acc: shape mismatch");
  }
  kernels::active().matvec_t_acc(w.raw(), x.data(), out.data(), rows, cols);
}

NormStats layer_norm(std::span<const double> x, std::span<const double> gamma,
                     std::span<const double> beta, std::span<double> out) {
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= n;
  const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = (x[i] - mean) * rstd * gamma[i] + beta[i];
  }
  return {mean, rstd};
}

void layer_norm_backward(std::span<const double> x, const NormStats& stats,
                         std::span<const double> gamma,
                         std::span<const double> dout, std::span<double> dx) {
  const std::size_t n = x.size();
  // With xhat = (x - mean) * rstd and g = dout * gamma:
  // dx = rstd * (g - mean(g) - xhat * mean(g * xhat))
  double mean_g = 0.0;
  double mean_gx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = dout[i] * gamma[i];
    const double xhat = (x[i] - stats.mean) * stats.rstd;
    mean_g += g;
    mean_gx += g * xhat;
  }
  mean_g /= static_cast<double>(n);
  mean_gx /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = dout[i] * gamma[i];
    const double xhat = (x[i] - stats.mean) * stats.rstd;
    dx[i] = stats.rstd * (g - mean_g - xhat * mean_gx);
  }
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

double gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

double gelu_grad(double x) {
  const double u = kGeluC * (x + kGeluA * x * x * x);
  const double t = std::tanh(u);
  const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

}  // namespace dtpa::num
