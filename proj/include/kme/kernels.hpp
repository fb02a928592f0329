#pragma once

#include <Eigen/Core>
#include <cmath>
#include <span>
#include <string>

namespace kme {

using RowMatrixXd =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class KernelFamily { gaussian, laplace, matern32 };

KernelFamily kernel_family_from_string(const std::string& name);
std::string to_string(KernelFamily family);

/// Stationary positive-definite kernel, normalized so k(a, a) = 1.
struct KernelSpec {
  KernelFamily family = KernelFamily::gaussian;
  double length_scale = 1.0;

  /// Throws std::invalid_argument unless length_scale is finite and > 0.
  void validate() const;
};

/// Kernel value as a function of squared distance. Unchecked hot path.
inline double kernel_value_d2(const KernelSpec& spec, double d2) {
  const double h = spec.length_scale;
  switch (spec.family) {
    case KernelFamily::gaussian:
      return std::exp(-d2 / (2.0 * h * h));
    case KernelFamily::laplace:
      return std::exp(-std::sqrt(d2) / h);
    case KernelFamily::matern32: {
      const double s = 1.7320508075688772 * std::sqrt(d2) / h;
      return (1.0 + s) * std::exp(-s);
    }
  }
  return 0.0;
}

/// Radial gradient coefficient c with grad_a k(a, b) = c * (a - b).
/// Laplace is non-differentiable at a = b; the coefficient is taken as 0
/// there (symmetric sub-gradient limit). Matern-3/2 has a true zero slope.
inline double kernel_grad_coef_d2(const KernelSpec& spec, double d2) {
  const double h = spec.length_scale;
  switch (spec.family) {
    case KernelFamily::gaussian:
      return -std::exp(-d2 / (2.0 * h * h)) / (h * h);
    case KernelFamily::laplace: {
      if (d2 <= 0.0) return 0.0;
      const double d = std::sqrt(d2);
      return -std::exp(-d / h) / (h * d);
    }
    case KernelFamily::matern32: {
      const double s = 1.7320508075688772 * std::sqrt(d2) / h;
      return -3.0 * std::exp(-s) / (h * h);
    }
  }
  return 0.0;
}

inline double squared_distance(const double* a, const double* b, int n) {
  double d2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double diff = a[i] - b[i];
    d2 += diff * diff;
  }
  return d2;
}

/// Checked evaluation; throws on dimension mismatch or non-finite input.
double kernel_eval(const KernelSpec& spec, std::span<const double> a,
                   std::span<const double> b);

/// Gradient with respect to the first argument.
Eigen::VectorXd kernel_grad(const KernelSpec& spec, std::span<const double> a,
                            std::span<const double> b);

double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& a,
                   const Eigen::VectorXd& b);
Eigen::VectorXd kernel_grad(const KernelSpec& spec, const Eigen::VectorXd& a,
                            const Eigen::VectorXd& b);

}  // namespace kme
