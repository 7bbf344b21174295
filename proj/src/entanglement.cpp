#include "ycel/entanglement.hpp"

#include <cmath>
#include <complex>
#include <sstream>

#include "ycel/errors.hpp"

namespace ycel {

CovarianceMatrix CovarianceMatrix::from_moments(const SecondMoments<double>& m) {
  CovarianceMatrix c;
  const std::array<double, 3> n{m.n1, m.n2, m.n3};
  for (int i = 0; i < 3; ++i) {
    c.sigma(2 * i, 2 * i) = 1 + 2 * n[i];
    c.sigma(2 * i + 1, 2 * i + 1) = 1 + 2 * n[i];
  }
  auto cross = [&](int i, int j, double xx, double pp) {
    c.sigma(2 * i, 2 * j) = c.sigma(2 * j, 2 * i) = xx;
    c.sigma(2 * i + 1, 2 * j + 1) = c.sigma(2 * j + 1, 2 * i + 1) = pp;
  };
  cross(2, 1, 2 * m.c32, 2 * m.c32);
  cross(2, 0, 2 * m.c31, -2 * m.c31);
  cross(1, 0, 2 * m.c21, -2 * m.c21);
  return c;
}

CovarianceMatrix CovarianceMatrix::from_table(const fock::MomentTable& t) {
  using cd = std::complex<double>;
  // X = u a + conj(u) a^dagger; u = 1 for x, -i for p
  const std::array<cd, 2> u{cd(1, 0), cd(0, -1)};
  CovarianceMatrix c;
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b) {
      const int i = a / 2, j = b / 2;
      const cd ua = u[a % 2], ub = u[b % 2];
      double v = 2 * (ua * ub * t.pair(i, j)).real() + 2 * (std::conj(ua) * ub * t.normal(i, j)).real();
      if (i == j) v += (std::conj(ua) * ub).real();
      const double mean_a = 2 * (ua * t.mean(i)).real();
      const double mean_b = 2 * (ub * t.mean(j)).real();
      c.sigma(a, b) = v - mean_a * mean_b;
    }
  c.sigma = (c.sigma + c.sigma.transpose()) / 2;
  return c;
}

Eigen::Matrix3d CovarianceMatrix::xx() const {
  Eigen::Matrix3d m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = sigma(2 * i, 2 * j);
  return m;
}

Eigen::Matrix3d CovarianceMatrix::pp() const {
  Eigen::Matrix3d m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = sigma(2 * i + 1, 2 * j + 1);
  return m;
}

const char* to_string(Bipartition b) {
  switch (b) {
    case Bipartition::one_23: return "1|23";
    case Bipartition::two_13: return "2|13";
    case Bipartition::three_12: return "3|12";
  }
  return "?";
}

std::array<int, 3> modes_of(Bipartition b) {
  switch (b) {
    case Bipartition::one_23: return {0, 1, 2};
    case Bipartition::two_13: return {1, 0, 2};
    case Bipartition::three_12: return {2, 0, 1};
  }
  return {0, 1, 2};
}

Gains default_gains(Bipartition b) {
  Gains out;
  switch (b) {
    case Bipartition::one_23:
      out.h << 1, -1, -1;
      out.g << 1, 1, 1;
      break;
    case Bipartition::two_13:
      out.h << 1, -1, 0;
      out.g << 1, 1, 0;
      break;
    case Bipartition::three_12:
      out.h << 1, 0, -1;
      out.g << 1, 0, 1;
      break;
  }
  return out;
}

std::array<Gains, 3> default_gains() {
  return {default_gains(Bipartition::one_23), default_gains(Bipartition::two_13),
          default_gains(Bipartition::three_12)};
}

double witness_bound(Bipartition b, const Gains& gains) {
  const auto [m, k, l] = modes_of(b);
  return 2 * (std::abs(gains.h(m) * gains.g(m)) +
              std::abs(gains.h(k) * gains.g(k) + gains.h(l) * gains.g(l)));
}

WitnessRecord vlf_evaluate(const CovarianceMatrix& cov, Bipartition b, const Gains& gains) {
  if (gains.h.isZero(0) && gains.g.isZero(0))
    throw DegenerateWitnessError(std::string("all-zero gains for bipartition ") + to_string(b));
  WitnessRecord r;
  r.grouping = b;
  r.gains = gains;
  r.bound = witness_bound(b, gains);
  if (!(r.bound > 0))
    throw DegenerateWitnessError(std::string("gains give a zero bound for bipartition ") +
                                 to_string(b));
  r.lhs = gains.h.dot(cov.xx() * gains.h) + gains.g.dot(cov.pp() * gains.g);
  r.ratio = r.lhs / r.bound;
  r.violated = r.lhs < r.bound - kViolationMargin;
  return r;
}

VlfReport vlf_evaluate(const CovarianceMatrix& cov, const std::array<Gains, 3>& gains) {
  VlfReport rep;
  rep.fully_inseparable = true;
  for (auto b : kBipartitions) {
    rep.records[int(b)] = vlf_evaluate(cov, b, gains[int(b)]);
    rep.fully_inseparable = rep.fully_inseparable && rep.records[int(b)].violated;
  }
  return rep;
}

namespace {

struct Objective {
  Eigen::Matrix3d x, p;
  Bipartition b;

  double operator()(const Gains& gains) const {
    const double bound = witness_bound(b, gains);
    if (!(bound > 0)) return std::numeric_limits<double>::infinity();
    const double vx = gains.h.dot(x * gains.h);
    const double vp = gains.g.dot(p * gains.g);
    return 2 * std::sqrt(std::max(0.0, vx) * std::max(0.0, vp)) / bound;
  }
};

/// Shifts h -> s h, g -> g / s so that both variances are equal.
Gains balance(const Objective& obj, Gains gains) {
  const double vx = gains.h.dot(obj.x * gains.h);
  const double vp = gains.g.dot(obj.p * gains.g);
  if (vx > 0 && vp > 0) {
    const double s = std::pow(vp / vx, 0.25);
    gains.h *= s;
    gains.g /= s;
  }
  return gains;
}

double& coordinate(Gains& gains, int which, int k, int l) {
  switch (which) {
    case 0: return gains.h(k);
    case 1: return gains.h(l);
    case 2: return gains.g(k);
    default: return gains.g(l);
  }
}

constexpr double kScanHalfWidth = 4.0;
constexpr int kScanPoints = 161;
constexpr int kMaxPasses = 200;

}  // namespace

double balanced_ratio(const CovarianceMatrix& cov, Bipartition b, const Gains& gains) {
  return Objective{cov.xx(), cov.pp(), b}(gains);
}

Gains optimize_gains(const CovarianceMatrix& cov, Bipartition b) {
  const Objective obj{cov.xx(), cov.pp(), b};
  const auto [m, k, l] = modes_of(b);
  (void)m;
  Gains best = default_gains(b);
  double best_val = obj(best);
  const Gains start = best;
  const double start_val = best_val;

  const double step = 2 * kScanHalfWidth / (kScanPoints - 1);
  const double phi = (std::sqrt(5.0) - 1) / 2;
  for (int pass = 0; pass < kMaxPasses; ++pass) {
    const double pass_start = best_val;
    for (int c = 0; c < 4; ++c) {
      Gains trial = best;
      double& z = coordinate(trial, c, k, l);
      auto eval = [&](double v) {
        z = v;
        return obj(trial);
      };
      double arg = coordinate(best, c, k, l);
      double val = best_val;
      for (int i = 0; i < kScanPoints; ++i) {
        const double v = -kScanHalfWidth + i * step;
        const double f = eval(v);
        if (f < val) {
          val = f;
          arg = v;
        }
      }
      double lo = arg - step, hi = arg + step;
      double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
      double f1 = eval(x1), f2 = eval(x2);
      for (int it = 0; it < 80 && hi - lo > 1e-13; ++it) {
        if (f1 < f2) {
          hi = x2;
          x2 = x1;
          f2 = f1;
          x1 = hi - phi * (hi - lo);
          f1 = eval(x1);
        } else {
          lo = x1;
          x1 = x2;
          f1 = f2;
          x2 = lo + phi * (hi - lo);
          f2 = eval(x2);
        }
      }
      const double mid = (lo + hi) / 2;
      const double fm = eval(mid);
      if (fm < val) {
        val = fm;
        arg = mid;
      }
      if (val < best_val) {
        coordinate(best, c, k, l) = arg;
        best_val = val;
      }
    }
    if (pass_start - best_val <= 1e-14 * std::max(1.0, best_val)) break;
  }
  if (!(best_val < start_val)) return balance(obj, start);
  return balance(obj, best);
}

std::array<Gains, 3> optimize_gains(const CovarianceMatrix& cov) {
  return {optimize_gains(cov, Bipartition::one_23), optimize_gains(cov, Bipartition::two_13),
          optimize_gains(cov, Bipartition::three_12)};
}

}  // namespace ycel
