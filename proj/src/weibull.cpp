#include "nspvi/weibull.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "nspvi/error.hpp"

namespace nspvi {

namespace {

// Gradient of the survival weight * exp(-(x/scale)^shape) for x > 0.
WeibullGrad survival_grad(const WeibullKernel& k, double x) {
  if (x <= 0.0) {
    return {1.0, 0.0, 0.0};
  }
  if (std::isinf(x)) {
    return {};
  }
  const double z = x / k.scale;
  const double log_z = std::log(z);
  const double u = std::exp(k.shape * log_z);
  const double e = std::exp(-u);
  return {e, -k.weight * e * u * log_z, k.weight * e * u * k.shape / k.scale};
}

}  // namespace

double weibull_eval(const WeibullKernel& k, double x) {
  if (x < 0.0 || k.weight == 0.0) {
    return 0.0;
  }
  if (x == 0.0) {
    if (k.shape < 1.0) {
      throw SingularityError("weibull_eval: density is singular at x = 0 for shape " +
                             std::to_string(k.shape));
    }
    return 0.0;
  }
  const double z = x / k.scale;
  const double log_z = std::log(z);
  const double u = std::exp(k.shape * log_z);
  const double v = k.weight * (k.shape / k.scale) * std::exp((k.shape - 1.0) * log_z - u);
  if (!std::isfinite(v)) {
    throw NumericError("weibull_eval: non-finite density at x = " + std::to_string(x));
  }
  return v;
}

double weibull_survival(const WeibullKernel& k, double x) {
  if (x <= 0.0) {
    return k.weight;
  }
  if (std::isinf(x)) {
    return 0.0;
  }
  return k.weight * std::exp(-std::pow(x / k.scale, k.shape));
}

double weibull_integral(const WeibullKernel& k, double a, double b) {
  if (a > b) {
    throw ArgumentError("weibull_integral: lower limit exceeds upper limit");
  }
  if (b <= 0.0 || k.weight == 0.0) {
    return 0.0;
  }
  const double ua = a > 0.0 ? std::pow(a / k.scale, k.shape) : 0.0;
  if (std::isinf(b)) {
    return k.weight * std::exp(-ua);
  }
  const double ub = std::pow(b / k.scale, k.shape);
  // w * (e^-ua - e^-ub) without cancellation when the two are close.
  return -k.weight * std::exp(-ua) * std::expm1(ua - ub);
}

WeibullGrads weibull_grads(const WeibullKernel& k, double x) {
  WeibullGrads g;
  if (x <= 0.0) {
    return g;
  }
  const double z = x / k.scale;
  const double log_z = std::log(z);
  const double u = std::exp(k.shape * log_z);
  const double density = (k.shape / k.scale) * std::exp((k.shape - 1.0) * log_z - u);
  const double v = k.weight * density;
  g.eval.weight = density;
  g.eval.shape = v * (1.0 / k.shape + log_z - u * log_z);
  g.eval.scale = v * (k.shape / k.scale) * (u - 1.0);

  const double e = std::exp(-u);
  g.integral.weight = -std::expm1(-u);
  g.integral.shape = k.weight * e * u * log_z;
  g.integral.scale = -k.weight * e * u * k.shape / k.scale;
  return g;
}

WeibullGrad weibull_integral_grad(const WeibullKernel& k, double a, double b) {
  if (a > b) {
    throw ArgumentError("weibull_integral_grad: lower limit exceeds upper limit");
  }
  if (b <= 0.0) {
    return {};
  }
  WeibullGrad g = survival_grad(k, a);
  g -= survival_grad(k, b);
  return g;
}

}  // namespace nspvi
