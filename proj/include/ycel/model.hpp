#pragma once

// Physical parameters of the Y-shaped four-level correlated emission laser and
// the map from the initial atomic preparation to master-equation coefficients.
//
// Levels: |0> lower, |1> intermediate (initially empty), |2>,|3> upper.
// Mode a3 is emitted on 3->1, a2 on 2->1, a1 on 1->0.

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "ycel/errors.hpp"

namespace ycel {

template <typename Scalar = double>
struct ModelParams {
  Scalar r_a{};    // atom injection rate
  Scalar g{};      // atom-field coupling, equal on all three transitions
  Scalar gamma{};  // atomic decay rate, equal on all transitions
  Scalar kappa{};  // cavity damping, equal for all modes
  Scalar eta1{};   // rho00 - rho33
  Scalar eta2{};   // rho00 - rho22
};

template <typename Scalar = double>
struct AtomPreparation {
  Scalar rho33{}, rho22{}, rho00{};
  Scalar rho32{}, rho30{}, rho20{};
};

template <typename Scalar = double>
struct Prefactors {
  Scalar A{};  // 2 r_a g^2 / gamma^2
  Scalar B{}, C{}, D{}, E{}, F{}, G{};
};

/// Outcome of the triangle test. `populations` is (rho00, rho22, rho33) as
/// computed from the inversions, before any clamping.
template <typename Scalar = double>
struct PhysicalCheck {
  bool valid = false;
  std::array<Scalar, 3> populations{};
  std::string violated;  // "rho00", "rho22", "rho33"; empty when valid
  std::string message;
};

inline constexpr double kTriangleTolerance = 1e-12;
inline constexpr double kRadicandTolerance = 1e-12;
inline constexpr double kRadicandFloor = 1e-14;
inline constexpr double kPopulationFloor = 1e-15;
inline constexpr double kDefaultGoodCavityFactor = 10.0;

template <typename Scalar>
PhysicalCheck<Scalar> validate_physical(Scalar eta1, Scalar eta2) {
  PhysicalCheck<Scalar> out;
  const Scalar rho00 = (1 + eta1 + eta2) / 3;
  const Scalar rho22 = (1 + eta1 - 2 * eta2) / 3;
  const Scalar rho33 = (1 + eta2 - 2 * eta1) / 3;
  out.populations = {rho00, rho22, rho33};
  if (!std::isfinite(eta1) || !std::isfinite(eta2)) {
    out.violated = "eta";
    out.message = "inversions must be finite";
    return out;
  }
  const std::array<const char*, 3> names{"rho00", "rho22", "rho33"};
  const std::array<const char*, 3> forms{"(1+eta1+eta2)/3", "(1+eta1-2*eta2)/3",
                                         "(1+eta2-2*eta1)/3"};
  for (std::size_t i = 0; i < 3; ++i) {
    if (out.populations[i] < -Scalar(kTriangleTolerance)) {
      std::ostringstream os;
      os.precision(12);
      os << "inversions (eta1=" << eta1 << ", eta2=" << eta2 << ") give " << names[i]
         << " = " << forms[i] << " = " << out.populations[i] << " < 0";
      out.violated = names[i];
      out.message = os.str();
      return out;
    }
  }
  out.valid = true;
  return out;
}

/// Square root of a radicand that is only known to rounding accuracy.
/// Values in [-kRadicandTolerance, kRadicandFloor) are treated as zero.
template <typename Scalar>
Scalar clamped_sqrt(Scalar radicand, const char* what) {
  if (radicand < -Scalar(kRadicandTolerance)) {
    std::ostringstream os;
    os.precision(17);
    os << what << " radicand " << radicand << " is negative beyond rounding";
    throw ConsistencyError(os.str());
  }
  if (radicand < Scalar(kRadicandFloor)) return Scalar(0);
  return std::sqrt(radicand);
}

/// Population-like quantities within rounding of zero are snapped to zero so
/// boundary points of the triangle give exact zeros.
template <typename Scalar>
Scalar snap_nonnegative(Scalar x) {
  return x < Scalar(kPopulationFloor) ? Scalar(0) : x;
}

template <typename Scalar>
AtomPreparation<Scalar> populations_from_inversions(Scalar eta1, Scalar eta2) {
  const auto check = validate_physical(eta1, eta2);
  if (!check.valid) throw DomainError(check.message);
  AtomPreparation<Scalar> prep;
  prep.rho00 = snap_nonnegative(check.populations[0]);
  prep.rho22 = snap_nonnegative(check.populations[1]);
  prep.rho33 = snap_nonnegative(check.populations[2]);
  // Pure initial state with real nonnegative amplitudes.
  prep.rho30 = std::sqrt(prep.rho33 * prep.rho00);
  prep.rho20 = std::sqrt(prep.rho22 * prep.rho00);
  prep.rho32 = std::sqrt(prep.rho33 * prep.rho22);
  return prep;
}

template <typename Scalar>
std::array<Scalar, 2> inversions_from_populations(const AtomPreparation<Scalar>& prep) {
  return {prep.rho00 - prep.rho33, prep.rho00 - prep.rho22};
}

/// Throws DomainError for nonpositive or non-finite rates or an unphysical
/// inversion pair.
template <typename Scalar>
void validate(const ModelParams<Scalar>& p) {
  auto positive = [](Scalar v, const char* name) {
    if (!(std::isfinite(v) && v > 0))
      throw DomainError(std::string(name) + " must be a positive finite rate");
  };
  positive(p.r_a, "r_a");
  positive(p.g, "g");
  positive(p.gamma, "gamma");
  positive(p.kappa, "kappa");
  const auto check = validate_physical(p.eta1, p.eta2);
  if (!check.valid) throw DomainError(check.message);
}

/// Advisories that do not invalidate a run (currently only the good-cavity
/// condition gamma >> kappa behind the adiabatic elimination).
template <typename Scalar>
std::vector<std::string> advisories(const ModelParams<Scalar>& p,
                                    double good_cavity_factor = kDefaultGoodCavityFactor) {
  std::vector<std::string> out;
  if (p.kappa > 0 && p.gamma / p.kappa < Scalar(good_cavity_factor)) {
    std::ostringstream os;
    os << "gamma/kappa = " << p.gamma / p.kappa << " is below the good-cavity factor "
       << good_cavity_factor << "; adiabatic elimination of the atoms is questionable";
    out.push_back(os.str());
  }
  return out;
}

template <typename Scalar>
Scalar gain_scale(Scalar r_a, Scalar g, Scalar gamma) {
  return 2 * r_a * g * g / (gamma * gamma);
}

/// Coefficients B..G from the inversions alone. E, F, G use the closed
/// radicals in (eta1, eta2) and are cross-checked against sqrt(BC),
/// sqrt(BD), sqrt(CD).
template <typename Scalar>
Prefactors<Scalar> prefactors_from_inversions(Scalar A, Scalar eta1, Scalar eta2) {
  const auto check = validate_physical(eta1, eta2);
  if (!check.valid) throw DomainError(check.message);

  Prefactors<Scalar> f;
  f.A = A;
  f.B = snap_nonnegative((1 + eta2 - 2 * eta1) / 6);
  f.C = snap_nonnegative((1 + eta1 - 2 * eta2) / 6);
  f.D = snap_nonnegative((1 + eta1 + eta2) / 6);

  const Scalar e1 = eta1, e2 = eta2;
  const Scalar rad_e = 1 - e1 - e2 + 5 * e1 * e2 - 2 * (e1 * e1 + e2 * e2);
  const Scalar rad_f = 1 - e1 + 2 * e2 - e1 * e2 - 2 * e1 * e1 + e2 * e2;
  const Scalar rad_g = 1 - e2 + 2 * e1 - e1 * e2 + e1 * e1 - 2 * e2 * e2;
  // The radicands are 36BC, 36BD, 36CD expanded; compare before the square
  // root, where the comparison is well conditioned.
  auto agree = [](Scalar radicand, Scalar product, const char* name) {
    if (std::abs(radicand - 36 * product) > Scalar(kRadicandTolerance)) {
      std::ostringstream os;
      os.precision(17);
      os << name << " radicand " << radicand << " disagrees with 36x product " << 36 * product;
      throw ConsistencyError(os.str());
    }
  };
  agree(rad_e, f.B * f.C, "E");
  agree(rad_f, f.B * f.D, "F");
  agree(rad_g, f.C * f.D, "G");
  f.E = clamped_sqrt(rad_e, "E") / 6;
  f.F = clamped_sqrt(rad_f, "F") / 6;
  f.G = clamped_sqrt(rad_g, "G") / 6;
  return f;
}

template <typename Scalar>
Prefactors<Scalar> prefactors(const ModelParams<Scalar>& p) {
  validate(p);
  return prefactors_from_inversions(gain_scale(p.r_a, p.g, p.gamma), p.eta1, p.eta2);
}

/// Largest deviation from E=sqrt(BC), F=sqrt(BD), G=sqrt(CD), B+C+D=1/2.
template <typename Scalar>
Scalar identity_residue(const Prefactors<Scalar>& f) {
  using std::abs;
  Scalar r = abs(f.E - std::sqrt(f.B * f.C));
  r = std::max(r, abs(f.F - std::sqrt(f.B * f.D)));
  r = std::max(r, abs(f.G - std::sqrt(f.C * f.D)));
  r = std::max(r, abs(f.B + f.C + f.D - Scalar(0.5)));
  return r;
}

}  // namespace ycel
