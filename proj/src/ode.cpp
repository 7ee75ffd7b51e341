#include "rfm/ode/integrators.hpp"

#include <algorithm>
#include <cmath>

#include "rfm/core/error.hpp"

namespace rfm::ode {

namespace {

/* Dormand-Prince 5(4) tableau */
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
/* embedded 4th-order weights */
constexpr double e1 = 5179.0 / 57600, e3 = 7571.0 / 16695, e4 = 393.0 / 640,
                 e5 = -92097.0 / 339200, e6 = 187.0 / 2100, e7 = 1.0 / 40;

}  // namespace

DopriResult integrate_dopri5(const Field& f, double t0, double t1, const Eigen::VectorXd& y0,
                             const DopriOptions& opts) {
  DopriResult res;
  res.y = y0;
  if (t0 == t1) return res;
  const double dir = (t1 > t0) ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);
  double t = t0;
  double h = dir * std::min({opts.initial_step, opts.max_step, span});

  Eigen::VectorXd k1 = f(t, res.y);
  ++res.evaluations;
  double err_prev = 1.0;

  while (dir * (t1 - t) > 0.0) {
    /* land exactly on t1 */
    if (dir * (t + h - t1) > 0.0) h = t1 - t;

    const Eigen::VectorXd& y = res.y;
    Eigen::VectorXd k2 = f(t + c2 * h, y + h * (a21 * k1));
    Eigen::VectorXd k3 = f(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
    Eigen::VectorXd k4 = f(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    Eigen::VectorXd k5 = f(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    Eigen::VectorXd k6 =
        f(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    Eigen::VectorXd y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    Eigen::VectorXd k7 = f(t + h, y5); /* FSAL */
    res.evaluations += 6;

    Eigen::VectorXd y4 =
        y + h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    /* weighted RMS error against the mixed tolerance */
    double err2 = 0.0;
    for (int i = 0; i < y.size(); ++i) {
      double sc = opts.atol + opts.rtol * std::max(std::abs(y(i)), std::abs(y5(i)));
      double e = (y5(i) - y4(i)) / sc;
      err2 += e * e;
    }
    double err = std::sqrt(err2 / static_cast<double>(y.size()));

    if (err <= 1.0) {
      t += h;
      res.y = y5;
      k1 = k7;
      ++res.accepted;
      err_prev = std::max(err, 1e-10);
    } else {
      ++res.rejected;
    }
    RFM_REQUIRE(res.accepted + res.rejected < opts.max_steps, SolverError,
                "dopri5: step limit exhausted");

    /* PI controller (order 5: exponents 0.7/5 and 0.4/5) */
    double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.14) * std::pow(err_prev, 0.08);
    fac = std::clamp(fac, 0.2, 5.0);
    double hn = std::abs(h) * fac;
    hn = std::min(hn, opts.max_step);
    RFM_REQUIRE(hn >= opts.min_step, SolverError, "dopri5: step size underflow");
    h = dir * hn;
  }
  return res;
}

Eigen::VectorXd integrate_euler(const Field& f, double t0, double t1, const Eigen::VectorXd& y0,
                                int steps, const PostStep& post) {
  RFM_REQUIRE(steps >= 1, ContractViolation, "integrate_euler: steps must be >= 1");
  Eigen::VectorXd y = y0;
  const double h = (t1 - t0) / steps;
  for (int i = 0; i < steps; ++i) {
    double t = t0 + i * h;
    y += h * f(t, y);
    if (post) post(t + h, y);
  }
  return y;
}

}  // namespace rfm::ode
