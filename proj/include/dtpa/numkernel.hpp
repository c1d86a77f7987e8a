#pragma once

#include <cstddef>
#include <initializer_list>
#include <limits>
#include <span>
#include <vector>

namespace dtpa::num {

// Mask sentinel. softmax maps it to exactly 0.
inline constexpr double kMasked = -std::numeric_limits<double>::infinity();

inline bool is_masked(double v) { return v == kMasked; }

// Row-major dense tensor of f64.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* raw() { return data_.data(); }
  const double* raw() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Contiguous slice along the leading axis.
  std::span<double> row(std::size_t i);
  std::span<const double> row(std::size_t i) const;

  // Flat index of a multi-index; bounds-checked.
  std::size_t offset(std::initializer_list<std::size_t> index) const;

  void fill(double v);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::size_t shape_size(const std::vector<std::size_t>& shape);

// Numerically stable softmax. Masked entries become exactly 0.
// Throws DomainError on empty input or when every entry is masked.
std::vector<double> softmax(std::span<const double> v);
void softmax_inplace(std::span<double> v);

// ln(sum exp v_i) with max shift. Returns kMasked if every entry is masked.
double log_sum_exp(std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);

// out = w * x + bias, w of shape [rows, cols]. bias may be empty.
void matvec(const Tensor& w, std::span<const double> x,
            std::span<const double> bias, std::span<double> out);
// out += w^T * x
void matvec_t_acc(const Tensor& w, std::span<const double> x,
                  std::span<double> out);

struct NormStats {
  double mean = 0.0;
  double rstd = 0.0;
};

inline constexpr double kLayerNormEps = 1e-5;

NormStats layer_norm(std::span<const double> x, std::span<const double> gamma,
                     std::span<const double> beta, std::span<double> out);

// Given dL/dout, the forward input and its stats, writes dL/dx (overwrites).
void layer_norm_backward(std::span<const double> x, const NormStats& stats,
                         std::span<const double> gamma,
                         std::span<const double> dout, std::span<double> dx);

// tanh-approximated GELU, as in GPT-2.
double gelu(double x);
double gelu_grad(double x);

}  // namespace dtpa::num
