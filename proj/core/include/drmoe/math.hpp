#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace drmoe {

using Vec = std::vector<double>;

/// Dense row-major matrix of doubles.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0);
  Mat(std::size_t rows, std::size_t cols, Vec values);

  static Mat identity(std::size_t n);
  static Mat from_rows(const std::vector<Vec>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  std::string shape() const;

  bool operator==(const Mat&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vec values_;
};

/// y = m * x. Throws ValidationError naming both shapes on mismatch.
Vec matvec(const Mat& m, std::span<const double> x);
/// y = m^T * x.
Vec matvec_transposed(const Mat& m, std::span<const double> x);
/// m += scale * u v^T
void add_outer(Mat& m, std::span<const double> u, std::span<const double> v, double scale = 1.0);
Mat matmul(const Mat& a, const Mat& b);
Mat transpose(const Mat& m);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
/// y += scale * x
void axpy(double scale, std::span<const double> x, std::span<double> y);
bool all_finite(std::span<const double> a);

/// Logistic function, overflow-free for any finite input.
double sigmoid(double x);
/// log(1 + e^x) without overflow.
double softplus(double x);
double logsumexp(std::span<const double> z);
Vec log_softmax(std::span<const double> z);
Vec softmax(std::span<const double> z);

using ScalarFn = std::function<double(std::span<const double>)>;

/// Central-difference gradient of f at x with step h.
/// Throws RuntimeError naming the coordinate if f is non-finite at a probe.
Vec finite_diff_grad(const ScalarFn& f, std::span<const double> x, double h = 1e-5);

/// ||a - b||_2 / max(||a||_2, ||b||_2). Zero when both vectors are zero.
double relative_error(std::span<const double> a, std::span<const double> b);

}  // namespace drmoe
