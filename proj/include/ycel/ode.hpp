#pragma once

// Small explicit integrators for linear moment systems. State types are Eigen
// vectors or matrices; anything supporting +, scalar * and cwiseAbs() works.

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ycel::ode {

struct Tolerances {
  double rtol = 1e-12;
  double atol = 1e-14;
  double initial_step = 0.0;  // 0: pick from the problem scale
  long max_steps = 50'000'000;
};

/// Classic fourth-order Runge-Kutta step for an autonomous system y' = f(y).
template <class State, class Rhs>
State rk4_step(const Rhs& f, const State& y, double h) {
  const State k1 = f(y);
  const State k2 = f(State(y + (0.5 * h) * k1));
  const State k3 = f(State(y + (0.5 * h) * k2));
  const State k4 = f(State(y + h * k3));
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Dormand-Prince 5(4) with embedded error control, integrating the
/// autonomous system y' = f(y) from 0 to `t`.
template <class State, class Rhs>
State dopri5(const Rhs& f, State y, double t, const Tolerances& tol = {}) {
  if (t < 0) throw std::invalid_argument("dopri5: negative horizon");
  if (t == 0) return y;

  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                   a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                   a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                   b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  // b - b_hat
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                   e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  (void)c2, (void)c3, (void)c4, (void)c5;

  auto error_norm = [&](const State& err, const State& y0, const State& y1) {
    const auto scale = (tol.atol + tol.rtol * y0.cwiseAbs().cwiseMax(y1.cwiseAbs()).array());
    return (err.cwiseAbs().array() / scale).maxCoeff();
  };

  double h = tol.initial_step;
  State k1 = f(y);
  if (h <= 0) {
    const double d0 = y.cwiseAbs().maxCoeff();
    const double d1 = k1.cwiseAbs().maxCoeff();
    h = (d0 > 1e-10 && d1 > 1e-10) ? 0.01 * d0 / d1 : 1e-4 * std::max(1.0, t);
    h = std::min(h, t);
  }

  double now = 0;
  long steps = 0;
  while (now < t) {
    if (++steps > tol.max_steps) throw std::runtime_error("dopri5: step budget exhausted");
    const bool last = now + h >= t;
    if (last) h = t - now;

    const State k2 = f(State(y + h * (a21 * k1)));
    const State k3 = f(State(y + h * (a31 * k1 + a32 * k2)));
    const State k4 = f(State(y + h * (a41 * k1 + a42 * k2 + a43 * k3)));
    const State k5 = f(State(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)));
    const State k6 = f(State(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)));
    const State y1 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const State k7 = f(y1);
    const State err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    const double en = error_norm(err, y, y1);
    if (en <= 1.0 || h < 1e-14 * std::max(1.0, t)) {
      now = last ? t : now + h;
      y = y1;
      k1 = k7;  // first-same-as-last
    }
    const double factor = en == 0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
    h *= factor;
  }
  return y;
}

}  // namespace ycel::ode
