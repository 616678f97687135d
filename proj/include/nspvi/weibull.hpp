#ifndef NSPVI_WEIBULL_HPP
#define NSPVI_WEIBULL_HPP

namespace nspvi {

// phi(x) = weight * (shape/scale) * (x/scale)^(shape-1) * exp(-(x/scale)^shape)
// for x > 0, zero otherwise. The total mass over (0, inf) is `weight`.
struct WeibullKernel {
  double weight = 1.0;
  double shape = 1.0;
  double scale = 1.0;

  friend bool operator==(const WeibullKernel&, const WeibullKernel&) = default;
};

// Partial derivatives with respect to (weight, shape, scale).
struct WeibullGrad {
  double weight = 0.0;
  double shape = 0.0;
  double scale = 0.0;

  WeibullGrad& operator+=(const WeibullGrad& o) {
    weight += o.weight;
    shape += o.shape;
    scale += o.scale;
    return *this;
  }
  WeibullGrad& operator-=(const WeibullGrad& o) {
    weight -= o.weight;
    shape -= o.shape;
    scale -= o.scale;
    return *this;
  }
  WeibullGrad& operator*=(double s) {
    weight *= s;
    shape *= s;
    scale *= s;
    return *this;
  }
};

struct WeibullGrads {
  WeibullGrad eval;      // of phi(x)
  WeibullGrad integral;  // of the integral of phi over (0, x]
};

// Throws SingularityError for x == 0 with shape < 1 and NumericError when the
// density overflows.
double weibull_eval(const WeibullKernel& kernel, double x);

// Closed-form integral of phi over (a, b]; b may be +inf. Throws ArgumentError
// when a > b.
double weibull_integral(const WeibullKernel& kernel, double a, double b);

// weight * exp(-(max(x,0)/scale)^shape): the mass of phi beyond x.
double weibull_survival(const WeibullKernel& kernel, double x);

// Zero for x <= 0.
WeibullGrads weibull_grads(const WeibullKernel& kernel, double x);

// Gradient of weibull_integral(kernel, a, b).
WeibullGrad weibull_integral_grad(const WeibullKernel& kernel, double a, double b);

}  // namespace nspvi

#endif  // NSPVI_WEIBULL_HPP
