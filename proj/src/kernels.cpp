#include "kme/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace kme {

KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "gaussian") return KernelFamily::gaussian;
  if (name == "laplace") return KernelFamily::laplace;
  if (name == "matern32") return KernelFamily::matern32;
  throw std::invalid_argument("unknown kernel family '" + name +
                              "' (expected gaussian|laplace|matern32)");
}

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::gaussian:
      return "gaussian";
    case KernelFamily::laplace:
      return "laplace";
    case KernelFamily::matern32:
      return "matern32";
  }
  return "?";
}

void KernelSpec::validate() const {
  if (!std::isfinite(length_scale) || length_scale <= 0.0) {
    throw std::invalid_argument("kernel length_scale must be finite and > 0");
  }
}

namespace {

void check_pair(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) {
    throw std::invalid_argument("kernel arguments must share a nonzero dimension");
  }
  for (double v : a) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite kernel input");
  }
  for (double v : b) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite kernel input");
  }
}

}  // namespace

double kernel_eval(const KernelSpec& spec, std::span<const double> a,
                   std::span<const double> b) {
  spec.validate();
  check_pair(a, b);
  const double d2 = squared_distance(a.data(), b.data(), static_cast<int>(a.size()));
  return kernel_value_d2(spec, d2);
}

Eigen::VectorXd kernel_grad(const KernelSpec& spec, std::span<const double> a,
                            std::span<const double> b) {
  spec.validate();
  check_pair(a, b);
  const int n = static_cast<int>(a.size());
  const double d2 = squared_distance(a.data(), b.data(), n);
  const double c = kernel_grad_coef_d2(spec, d2);
  Eigen::VectorXd g(n);
  for (int i = 0; i < n; ++i) g[i] = c * (a[i] - b[i]);
  return g;
}

double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& a,
                   const Eigen::VectorXd& b) {
  return kernel_eval(spec, std::span<const double>(a.data(), a.size()),
                     std::span<const double>(b.data(), b.size()));
}

Eigen::VectorXd kernel_grad(const KernelSpec& spec, const Eigen::VectorXd& a,
                            const Eigen::VectorXd& b) {
  return kernel_grad(spec, std::span<const double>(a.data(), a.size()),
                     std::span<const double>(b.data(), b.size()));
}

}  // namespace kme
