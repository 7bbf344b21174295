#pragma once

// Linear moment dynamics of the three cavity modes.
//
// The mode vector is R = (a1^dagger, a2, a3). Its mean obeys dR/dt = -M R, and
// the normally ordered second-moment matrix S = <R R^dagger> obeys
//
//     dS/dt = -M S - S M^T + Q,
//
// with M the drift matrix and Q the diffusion matrix. S is real symmetric when
// the prefactors are real and the field starts in vacuum:
//
//     S = [[n1,  c21, c31],
//          [c21, n2,  c32],
//          [c31, c32, n3 ]]
//
// with c21 = <a2 a1>, c31 = <a3 a1>, c32 = <a3^dagger a2>.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ycel/errors.hpp"
#include "ycel/model.hpp"
#include "ycel/ode.hpp"

namespace ycel {

enum class Backend { ehrenfest, paper_literal };
enum class Route { closed_form, ode };
enum class RouteChoice { automatic, closed_form, ode };

template <typename S>
using Matrix3 = Eigen::Matrix<S, 3, 3>;
template <typename S>
using Matrix3c = Eigen::Matrix<std::complex<S>, 3, 3>;
template <typename S>
using Vector3c = Eigen::Matrix<std::complex<S>, 3, 1>;
template <typename S>
using Vector6 = Eigen::Matrix<S, 6, 1>;

inline const char* to_string(Backend b) {
  return b == Backend::ehrenfest ? "ehrenfest" : "paper-literal";
}
inline const char* to_string(Route r) { return r == Route::closed_form ? "closed-form" : "ode"; }

template <typename S>
struct DriftMatrix {
  Matrix3<S> m;
};

template <typename S>
struct DiffusionMatrix {
  Matrix3<S> q;
};

template <typename S>
struct LinearSystem {
  DriftMatrix<S> drift;
  DiffusionMatrix<S> diffusion;
};

template <typename S = double>
struct SecondMoments {
  S n1{}, n2{}, n3{};
  S c32{}, c31{}, c21{};

  Matrix3<S> matrix() const {
    Matrix3<S> s;
    s << n1, c21, c31,
         c21, n2, c32,
         c31, c32, n3;
    return s;
  }

  /// Symmetrizes the off-diagonal pairs.
  static SecondMoments from_matrix(const Matrix3<S>& s) {
    SecondMoments out;
    out.n1 = s(0, 0);
    out.n2 = s(1, 1);
    out.n3 = s(2, 2);
    out.c21 = (s(0, 1) + s(1, 0)) / 2;
    out.c31 = (s(0, 2) + s(2, 0)) / 2;
    out.c32 = (s(1, 2) + s(2, 1)) / 2;
    return out;
  }

  /// Column order used by every CSV writer: n1, n2, n3, c32, c31, c21.
  std::array<S, 6> values() const { return {n1, n2, n3, c32, c31, c21}; }

  Vector6<S> packed() const {
    Vector6<S> v;
    v << n1, n2, n3, c32, c31, c21;
    return v;
  }

  static SecondMoments unpack(const Vector6<S>& v) {
    return {v(0), v(1), v(2), v(3), v(4), v(5)};
  }
};

template <typename S>
struct EigenSystem {
  Vector3c<S> eigenvalues;  // sorted by real part, then imaginary part
  Matrix3c<S> v;
  Matrix3c<S> v_inv;
  S condition = std::numeric_limits<S>::infinity();
  S reconstruction_error = std::numeric_limits<S>::infinity();  // relative, Frobenius
  bool reliable = false;
};

template <typename S>
struct StabilityVerdict {
  bool stable = false;
  bool marginal = false;
  S margin{};  // min Re(lambda)
  Vector3c<S> eigenvalues;
};

inline constexpr double kDefaultConditionLimit = 1e10;
inline constexpr double kReconstructionTolerance = 1e-10;
inline constexpr double kMarginalTolerance = 1e-12;
// exp(-2 margin t) beyond e^80 is treated as an overflow for unstable drift.
inline constexpr double kMaxGrowthExponent = 80.0;

template <typename S>
DriftMatrix<S> drift_matrix(const Prefactors<S>& f, S kappa) {
  const S h = kappa / 2;
  DriftMatrix<S> d;
  d.m << h + f.A * f.D, -f.A * f.G, -f.A * f.F,
         f.A * f.G, h - f.A * f.C, -f.A * f.E,
         f.A * f.F, -f.A * f.E, h - f.A * f.B;
  return d;
}

/// paper_literal: A [[-2D, G, F], [G, 2C, 2E], [F, 2E, 2B]] as printed.
///
/// ehrenfest: derived from the master equation. With T = <R R^dagger> taken
/// in operator order (a1^dagger a1, a2 a2^dagger, a3 a3^dagger on the
/// diagonal), the adjoint master equation closes as
/// dT/dt = -M T - T M^T + kappa P with P = diag(0, 1, 1). Normal ordering
/// shifts S = T - P, hence Q = kappa P - M P - P M^T. The (1,1) entry is zero
/// because mode 1 only sees loss channels.
template <typename S>
DiffusionMatrix<S> diffusion_matrix(const Prefactors<S>& f, S kappa, Backend backend) {
  DiffusionMatrix<S> d;
  if (backend == Backend::paper_literal) {
    d.q << -2 * f.D, f.G, f.F,
           f.G, 2 * f.C, 2 * f.E,
           f.F, 2 * f.E, 2 * f.B;
    d.q *= f.A;
    return d;
  }
  const Matrix3<S> m = drift_matrix(f, kappa).m;
  const Matrix3<S> p = Eigen::Vector3<S>(0, 1, 1).asDiagonal();
  d.q = kappa * p - m * p - p * m.transpose();
  return d;
}

template <typename S>
LinearSystem<S> linear_system(const Prefactors<S>& f, S kappa, Backend backend) {
  return {drift_matrix(f, kappa), diffusion_matrix(f, kappa, backend)};
}

template <typename S>
Matrix3<S> moment_derivative(const LinearSystem<S>& sys, const Matrix3<S>& s) {
  const Matrix3<S>& m = sys.drift.m;
  return -m * s - s * m.transpose() + sys.diffusion.q;
}

namespace detail {

template <typename S>
Vector3c<S> sorted_eigenvalues(Vector3c<S> ev) {
  std::sort(ev.data(), ev.data() + 3, [](const std::complex<S>& a, const std::complex<S>& b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  return ev;
}

template <typename S>
std::string describe(const Vector3c<S>& ev) {
  std::ostringstream os;
  os.precision(12);
  os << "eigenvalues {";
  for (int i = 0; i < 3; ++i) {
    if (i) os << ", ";
    os << ev(i).real();
    if (ev(i).imag() != 0) os << (ev(i).imag() > 0 ? "+" : "-") << std::abs(ev(i).imag()) << "i";
  }
  os << "}";
  return os.str();
}

/// (1 - exp(-x t)) / x, with the limit t at x -> 0.
template <typename S>
std::complex<S> relaxation_integral(std::complex<S> x, S t, S degenerate_scale) {
  if (std::abs(x) < S(1e-12) * degenerate_scale) return {t, 0};
  const std::complex<S> xt = x * t;
  if (std::abs(xt) < S(1e-5))
    return t * (S(1) - xt / S(2) + xt * xt / S(6) - xt * xt * xt / S(24));
  return (S(1) - std::exp(-xt)) / x;
}

template <typename S>
S rate_scale(const Matrix3<S>& m) {
  return std::max(S(1), m.cwiseAbs().maxCoeff());
}

}  // namespace detail

template <typename S>
StabilityVerdict<S> is_stable(const DriftMatrix<S>& drift) {
  Eigen::EigenSolver<Matrix3<S>> solver(drift.m, false);
  StabilityVerdict<S> out;
  out.eigenvalues = detail::sorted_eigenvalues<S>(solver.eigenvalues());
  out.margin = out.eigenvalues(0).real();
  const S tol = S(kMarginalTolerance) * std::max(S(1), out.eigenvalues.cwiseAbs().maxCoeff());
  out.marginal = std::abs(out.margin) <= tol;
  out.stable = out.margin > tol;
  return out;
}

template <typename S>
EigenSystem<S> eigendecompose(const DriftMatrix<S>& drift,
                              S condition_limit = S(kDefaultConditionLimit)) {
  Eigen::EigenSolver<Matrix3<S>> solver(drift.m, true);
  const Vector3c<S> raw = solver.eigenvalues();
  const Matrix3c<S> vecs = solver.eigenvectors();

  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return raw(a).real() != raw(b).real() ? raw(a).real() < raw(b).real()
                                          : raw(a).imag() < raw(b).imag();
  });

  EigenSystem<S> es;
  for (int i = 0; i < 3; ++i) {
    es.eigenvalues(i) = raw(order[i]);
    es.v.col(i) = vecs.col(order[i]);
  }

  Eigen::JacobiSVD<Matrix3c<S>> svd(es.v);
  const auto sv = svd.singularValues();
  es.condition = sv(2) > 0 ? sv(0) / sv(2) : std::numeric_limits<S>::infinity();
  if (std::isfinite(es.condition)) {
    es.v_inv = es.v.inverse();
    const Matrix3c<S> rebuilt = es.v * es.eigenvalues.asDiagonal() * es.v_inv;
    const S norm = std::max(drift.m.norm(), std::numeric_limits<S>::min());
    es.reconstruction_error = (rebuilt - drift.m.template cast<std::complex<S>>()).norm() / norm;
  } else {
    es.v_inv.setConstant(std::complex<S>(std::numeric_limits<S>::quiet_NaN(), 0));
  }
  es.reliable = es.condition <= condition_limit &&
                es.reconstruction_error <= S(kReconstructionTolerance);
  return es;
}

/// V exp(-Lambda t) V^{-1}; real for a real drift matrix.
template <typename S>
Matrix3<S> propagator(const EigenSystem<S>& es, S t) {
  Vector3c<S> decay;
  for (int i = 0; i < 3; ++i) decay(i) = std::exp(-es.eigenvalues(i) * t);
  return (es.v * decay.asDiagonal() * es.v_inv).real();
}

template <typename S>
struct FirstMomentResult {
  Vector3c<S> value;
  Route route = Route::closed_form;
};

template <typename S>
struct MomentResult {
  SecondMoments<S> moments;
  Route route = Route::closed_form;
};

template <typename S>
struct TrajectoryPoint {
  S t{};
  SecondMoments<S> moments;
};

template <typename S>
struct Trajectory {
  std::vector<TrajectoryPoint<S>> points;
  Route route = Route::closed_form;
};

template <typename S = double>
struct EvolveOptions {
  RouteChoice route = RouteChoice::automatic;
  SecondMoments<S> initial{};  // vacuum by default
  S condition_limit = S(kDefaultConditionLimit);
  ode::Tolerances tolerances{};
};

namespace detail {

template <typename S>
void guard_growth(const DriftMatrix<S>& drift, S t) {
  const auto verdict = is_stable(drift);
  if (verdict.margin < 0 && -2 * verdict.margin * t > S(kMaxGrowthExponent)) {
    std::ostringstream os;
    os.precision(6);
    os << "drift is unstable (" << describe(verdict.eigenvalues) << "); horizon t=" << t
       << " exceeds the overflow guard t<=" << S(kMaxGrowthExponent) / (-2 * verdict.margin)
       << ". Moments grow without bound and no steady state exists.";
    throw InstabilityError(os.str());
  }
}

template <typename S>
bool use_closed_form(RouteChoice choice, const EigenSystem<S>& es) {
  switch (choice) {
    case RouteChoice::closed_form:
      if (!es.reliable) {
        std::ostringstream os;
        os << "closed-form route requested but the drift eigenbasis is unreliable (condition "
           << es.condition << ")";
        throw DegeneracyError(os.str());
      }
      return true;
    case RouteChoice::ode:
      return false;
    case RouteChoice::automatic:
    default:
      return es.reliable;
  }
}

/// Closed-form second moments: S(t) = P S0 P^T + int_0^t P(u) Q P(u)^T du,
/// evaluated in the drift eigenbasis.
template <typename S>
SecondMoments<S> closed_form_moments(const LinearSystem<S>& sys, const EigenSystem<S>& es, S t,
                                     const Matrix3<S>& initial) {
  const Matrix3<S> p = propagator(es, t);
  const Matrix3c<S> w =
      es.v_inv * sys.diffusion.q.template cast<std::complex<S>>() * es.v_inv.transpose();
  const S scale = rate_scale(sys.drift.m);
  Matrix3c<S> integrated;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      integrated(i, j) =
          w(i, j) * relaxation_integral(es.eigenvalues(i) + es.eigenvalues(j), t, scale);
  const Matrix3<S> noise = (es.v * integrated * es.v.transpose()).real();
  return SecondMoments<S>::from_matrix(p * initial * p.transpose() + noise);
}

template <typename S>
Vector6<S> packed_derivative(const LinearSystem<S>& sys, const Vector6<S>& y) {
  const Matrix3<S> s = SecondMoments<S>::unpack(y).matrix();
  return SecondMoments<S>::from_matrix(moment_derivative(sys, s)).packed();
}

}  // namespace detail

template <typename S>
FirstMomentResult<S> evolve_first_moments(const DriftMatrix<S>& drift, const Vector3c<S>& r0, S t,
                                          const EvolveOptions<S>& opts = {}) {
  if (!(t >= 0)) throw DomainError("evolution time must be nonnegative");
  FirstMomentResult<S> out;
  out.value = r0;
  if (t == 0) return out;
  detail::guard_growth(drift, t);
  const auto es = eigendecompose(drift, opts.condition_limit);
  if (detail::use_closed_form(opts.route, es)) {
    Vector3c<S> decay;
    for (int i = 0; i < 3; ++i) decay(i) = std::exp(-es.eigenvalues(i) * t);
    out.value = es.v * decay.asDiagonal() * es.v_inv * r0;
    out.route = Route::closed_form;
  } else {
    const Matrix3c<S> m = drift.m.template cast<std::complex<S>>();
    out.value = ode::dopri5([&](const Vector3c<S>& r) -> Vector3c<S> { return -m * r; }, r0, t,
                            opts.tolerances);
    out.route = Route::ode;
  }
  return out;
}

template <typename S>
Trajectory<S> second_moment_trajectory(const LinearSystem<S>& sys, const std::vector<S>& times,
                                       const EvolveOptions<S>& opts = {}) {
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] >= 0)) throw DomainError("sample times must be nonnegative");
    if (i && times[i] < times[i - 1]) throw DomainError("sample times must be nondecreasing");
  }
  Trajectory<S> out;
  if (times.empty()) return out;
  detail::guard_growth(sys.drift, times.back());

  const auto es = eigendecompose(sys.drift, opts.condition_limit);
  const Matrix3<S> s0 = opts.initial.matrix();
  if (detail::use_closed_form(opts.route, es)) {
    out.route = Route::closed_form;
    for (S t : times)
      out.points.push_back(
          {t, t == 0 ? opts.initial : detail::closed_form_moments(sys, es, t, s0)});
    return out;
  }

  out.route = Route::ode;
  Vector6<S> y = opts.initial.packed();
  S now = 0;
  auto rhs = [&](const Vector6<S>& v) -> Vector6<S> { return detail::packed_derivative(sys, v); };
  for (S t : times) {
    if (t > now) {
      y = ode::dopri5(rhs, y, t - now, opts.tolerances);
      now = t;
    }
    out.points.push_back({t, SecondMoments<S>::unpack(y)});
  }
  return out;
}

template <typename S>
MomentResult<S> evolve_second_moments(const LinearSystem<S>& sys, S t,
                                      const EvolveOptions<S>& opts = {}) {
  if (!(t >= 0)) throw DomainError("evolution time must be nonnegative");
  const auto traj = second_moment_trajectory(sys, std::vector<S>{t}, opts);
  return {traj.points.front().moments, traj.route};
}

template <typename S>
MomentResult<S> evolve_second_moments(const Prefactors<S>& f, S kappa, S t, Backend backend,
                                      const EvolveOptions<S>& opts = {}) {
  return evolve_second_moments(linear_system(f, kappa, backend), t, opts);
}

/// Solves M S + S M^T = Q through the 9x9 Kronecker system.
template <typename S>
SecondMoments<S> steady_state_moments(const LinearSystem<S>& sys) {
  const auto verdict = is_stable(sys.drift);
  if (!verdict.stable) {
    std::ostringstream os;
    os << "no steady state: drift is " << (verdict.marginal ? "marginally stable" : "unstable")
       << " with " << detail::describe(verdict.eigenvalues);
    throw InstabilityError(os.str());
  }
  const Matrix3<S>& m = sys.drift.m;
  const Matrix3<S> id = Matrix3<S>::Identity();
  Eigen::Matrix<S, 9, 9> kron;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      kron.template block<3, 3>(3 * i, 3 * j) = id(i, j) * m + m(i, j) * id;

  Eigen::FullPivLU<Eigen::Matrix<S, 9, 9>> lu(kron);
  lu.setThreshold(S(1e-13));
  if (!lu.isInvertible())
    throw DegeneracyError("Lyapunov system is singular (rank " + std::to_string(lu.rank()) +
                          " of 9)");
  const Eigen::Matrix<S, 9, 1> rhs = Eigen::Map<const Eigen::Matrix<S, 9, 1>>(sys.diffusion.q.data());
  const Eigen::Matrix<S, 9, 1> sol = lu.solve(rhs);
  const Matrix3<S> s = Eigen::Map<const Matrix3<S>>(sol.data());

  const S asym = (s - s.transpose()).cwiseAbs().maxCoeff();
  if (asym > S(1e-10) * std::max(S(1), s.cwiseAbs().maxCoeff()))
    throw ConsistencyError("Lyapunov solution is not symmetric (residue " + std::to_string(asym) +
                           ")");
  return SecondMoments<S>::from_matrix(s);
}

template <typename S>
SecondMoments<S> steady_state_moments(const Prefactors<S>& f, S kappa, Backend backend) {
  return steady_state_moments(linear_system(f, kappa, backend));
}

/// Largest |a - b| / max(|a|, |b|, floor) over the six moments.
template <typename S>
S max_relative_difference(const SecondMoments<S>& a, const SecondMoments<S>& b, S floor = S(0)) {
  const auto va = a.values();
  const auto vb = b.values();
  S worst = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    const S diff = std::abs(va[i] - vb[i]);
    if (diff == 0) continue;
    const S denom = std::max({std::abs(va[i]), std::abs(vb[i]), floor});
    worst = std::max(worst, denom > 0 ? diff / denom : std::numeric_limits<S>::infinity());
  }
  return worst;
}

/// Exchanges the roles of modes 2 and 3 (eta1 <-> eta2).
template <typename S>
SecondMoments<S> swap_upper_modes(const SecondMoments<S>& m) {
  return {m.n1, m.n3, m.n2, m.c32, m.c21, m.c31};
}

}  // namespace ycel
