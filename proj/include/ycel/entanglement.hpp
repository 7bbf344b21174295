#pragma once

// Quadrature covariance of the three modes and van Loock-Furusawa style
// variance-sum witnesses.
//
// Convention: x = a + a^dagger, p = -i (a - a^dagger), [x, p] = 2i, vacuum
// variance 1. Covariance ordering (x1, p1, x2, p2, x3, p3).

#include <array>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ycel/dynamics.hpp"
#include "ycel/fock_oracle.hpp"
#include "ycel/model.hpp"

namespace ycel {

using Matrix6 = Eigen::Matrix<double, 6, 6>;

struct CovarianceMatrix {
  Matrix6 sigma = Matrix6::Identity();

  /// Real closure moments; all x-p cross terms vanish.
  static CovarianceMatrix from_moments(const SecondMoments<double>& m);
  /// Full symmetrized covariance, first moments subtracted.
  static CovarianceMatrix from_table(const fock::MomentTable& t);

  Eigen::Matrix3d xx() const;  // <x_i x_j>
  Eigen::Matrix3d pp() const;  // <p_i p_j>
  double symmetry_residue() const { return (sigma - sigma.transpose()).cwiseAbs().maxCoeff(); }
};

/// (m | k l): mode m against the pair.
enum class Bipartition { one_23 = 0, two_13 = 1, three_12 = 2 };
inline constexpr std::array<Bipartition, 3> kBipartitions{Bipartition::one_23, Bipartition::two_13,
                                                          Bipartition::three_12};

const char* to_string(Bipartition b);
/// Single mode m (0-based) and the pair (k, l).
std::array<int, 3> modes_of(Bipartition b);

/// u = sum h_j x_j, v = sum g_j p_j
struct Gains {
  Eigen::Vector3d h = Eigen::Vector3d::Zero();
  Eigen::Vector3d g = Eigen::Vector3d::Zero();
};

struct WitnessRecord {
  Bipartition grouping = Bipartition::one_23;
  double lhs = 0;
  double bound = 0;
  double ratio = 0;  // lhs / bound
  Gains gains;
  bool violated = false;
};

struct VlfReport {
  std::array<WitnessRecord, 3> records;
  /// all three bipartitions violated
  bool fully_inseparable = false;

  const WitnessRecord& operator[](Bipartition b) const { return records[int(b)]; }
};

inline constexpr double kViolationMargin = 1e-12;

/// x-difference / p-sum patterns matched to the sign of the model's
/// correlations: (1|23) h=(1,-1,-1) g=(1,1,1); (2|13) h=(1,-1,0) g=(1,1,0);
/// (3|12) h=(1,0,-1) g=(1,0,1).
Gains default_gains(Bipartition b);
std::array<Gains, 3> default_gains();

double witness_bound(Bipartition b, const Gains& gains);
/// Throws DegenerateWitnessError for all-zero gains or a zero bound.
WitnessRecord vlf_evaluate(const CovarianceMatrix& cov, Bipartition b, const Gains& gains);
VlfReport vlf_evaluate(const CovarianceMatrix& cov, const std::array<Gains, 3>& gains);
inline VlfReport vlf_evaluate(const CovarianceMatrix& cov) {
  return vlf_evaluate(cov, default_gains());
}

/// Smallest lhs/bound over rescalings h -> s h, g -> g / s.
double balanced_ratio(const CovarianceMatrix& cov, Bipartition b, const Gains& gains);

/// Coordinate descent on the four pair gains (single-mode gains held at the
/// defaults), grid scan plus golden-section refinement. Starts from the defaults and keeps only
/// strict improvements, so the result never does worse than the defaults.
Gains optimize_gains(const CovarianceMatrix& cov, Bipartition b);
std::array<Gains, 3> optimize_gains(const CovarianceMatrix& cov);

// ---------------------------------------------------------------------------
// Sweeps over the preparation triangle

enum class SweepMode { steady, fixed_time };

struct SweepOptions {
  double A = 0.5;
  double kappa = 1.0;
  SweepMode mode = SweepMode::steady;
  double t = 10.0;  // fixed_time only
  Backend backend = Backend::ehrenfest;
  bool optimize = true;
  unsigned threads = 0;  // 0: YCEL_THREADS or hardware concurrency
};

struct SweepPoint {
  double eta1 = 0, eta2 = 0;
};

/// n1 x n2 grid over [lo, hi]^2, eta1 major.
std::vector<SweepPoint> eta_grid(int n1, int n2, double lo = -1.0, double hi = 1.0);

struct SweepRow {
  SweepPoint point;
  bool valid = false;   // inside the triangle
  bool stable = false;  // drift stable (steady mode) or evolution succeeded
  double margin = std::numeric_limits<double>::quiet_NaN();
  std::array<double, 3> populations{};  // rho00, rho22, rho33
  Prefactors<double> prefactors;
  std::optional<SecondMoments<double>> moments;
  std::optional<VlfReport> report;
  std::string note;  // reason when valid && !stable, or validation message
};

unsigned resolve_threads(unsigned requested);
std::vector<SweepRow> sweep(const std::vector<SweepPoint>& grid, const SweepOptions& opts);

}  // namespace ycel
