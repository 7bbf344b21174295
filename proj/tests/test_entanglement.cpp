#include <doctest.h>

#include <cmath>
#include <random>

#include "dense_reference.hpp"
#include "ycel/entanglement.hpp"
#include "ycel/errors.hpp"

using namespace ycel;

namespace {

Prefactors<double> pref(double A, double e1, double e2) { return prefactors_from_inversions(A, e1, e2); }

CovarianceMatrix steady_cov(double e1, double e2, double A = 0.5) {
  return CovarianceMatrix::from_moments(steady_state_moments(pref(A, e1, e2), 1.0, Backend::ehrenfest));
}

/// Symmetrized quadrature covariance computed directly from a density matrix.
Matrix6 brute_force_covariance(const ref::Modes& m, const ref::Mat& rho) {
  const std::complex<double> I(0, 1);
  std::array<ref::Mat, 6> q;
  for (int k = 0; k < 3; ++k) {
    q[2 * k] = m.a[k] + m.ad(k);
    q[2 * k + 1] = -I * (m.a[k] - m.ad(k));
  }
  Matrix6 s;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      const ref::Mat sym = (q[i] * q[j] + q[j] * q[i]) / 2.0;
      s(i, j) = (ref::expect(sym, rho) - ref::expect(q[i], rho) * ref::expect(q[j], rho)).real();
    }
  return s;
}

}  // namespace

TEST_CASE("covariance from closure moments") {
  CHECK(CovarianceMatrix::from_moments({}).sigma == Matrix6::Identity());

  SecondMoments<double> m;
  m.n3 = 1;
  Matrix6 expect = Matrix6::Identity();
  expect(4, 4) = expect(5, 5) = 3;
  CHECK(CovarianceMatrix::from_moments(m).sigma == expect);

  m = {};
  m.c31 = 0.5;
  const auto c = CovarianceMatrix::from_moments(m);
  CHECK(c.sigma(4, 0) == 1.0);
  CHECK(c.sigma(0, 4) == 1.0);
  CHECK(c.sigma(5, 1) == -1.0);
  CHECK(c.symmetry_residue() == 0.0);
  // no x-p cross terms
  for (int i = 0; i < 6; i += 2)
    for (int j = 1; j < 6; j += 2) CHECK(c.sigma(i, j) == 0.0);
}

TEST_CASE("covariance from a moment table matches brute-force quadrature algebra") {
  const ref::Modes modes({3, 3, 3});
  const fock::FockSpace space({3, 3, 3});
  std::mt19937 rng(9);
  for (int trial = 0; trial < 3; ++trial) {
    const ref::Mat rho = ref::random_state(modes, 2, rng);
    const auto c = CovarianceMatrix::from_table(fock::moments_from_state({space, rho}));
    CHECK((c.sigma - brute_force_covariance(modes, rho)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("both covariance routes agree on closure-only states") {
  // vacuum-started dynamics keep only closure moments, so the routes coincide
  const fock::FockSpace space({4, 6, 6});
  fock::FockConfig cfg;
  cfg.n_max = space.cutoffs();
  cfg.t_final = 2.0;
  cfg.edge_tol = 0.05;
  cfg.verify_step_halving = false;
  const auto run = fock::integrate(fock::DensityState::vacuum(space), cfg, pref(0.5, 0.1, 0.0), 1.0);
  const auto& t = run.samples.back().moments;
  const auto a = CovarianceMatrix::from_table(t);
  const auto b = CovarianceMatrix::from_moments(t.closure());
  CHECK((a.sigma - b.sigma).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("witness on vacuum") {
  const CovarianceMatrix vac;
  Gains g;
  g.h << 1, -1, 0;
  g.g << 1, 1, 0;
  const auto r = vlf_evaluate(vac, Bipartition::two_13, g);
  CHECK(r.lhs == doctest::Approx(4.0));
  CHECK(r.bound == doctest::Approx(4.0));
  CHECK_FALSE(r.violated);

  const auto rep = vlf_evaluate(vac);
  for (const auto& rec : rep.records) {
    CHECK(rec.lhs == doctest::Approx(rec.bound));
    CHECK_FALSE(rec.violated);
  }
  CHECK_FALSE(rep.fully_inseparable);
}

TEST_CASE("two-mode correlation lowers the variance sum") {
  // V(x1 - x2) + V(p1 + p2) = 4 + 4 n1 + 4 n2 - 8 c21
  Gains g;
  g.h << 1, -1, 0;
  g.g << 1, 1, 0;
  double last = std::numeric_limits<double>::infinity();
  for (double c : {0.0, 0.05, 0.1, 0.2}) {
    SecondMoments<double> m;
    m.n1 = 0.2;
    m.n2 = 0.3;
    m.c21 = c;
    const auto r = vlf_evaluate(CovarianceMatrix::from_moments(m), Bipartition::two_13, g);
    CHECK(r.lhs == doctest::Approx(4 + 4 * 0.2 + 4 * 0.3 - 8 * c).epsilon(1e-14));
    CHECK(r.lhs < last);
    last = r.lhs;
  }
}

TEST_CASE("degenerate gains") {
  const CovarianceMatrix vac;
  CHECK_THROWS_AS(vlf_evaluate(vac, Bipartition::one_23, Gains{}), DegenerateWitnessError);
  Gains g;
  g.h << 1, -1, 0;
  g.g << 1, 1, 0;
  // h1 g1 + h2 g2 = 0 and h3 g3 = 0
  CHECK_THROWS_AS(vlf_evaluate(vac, Bipartition::three_12, g), DegenerateWitnessError);
}

TEST_CASE("no violation in the vacuum steady state") {
  const auto rep = vlf_evaluate(steady_cov(1, 1), optimize_gains(steady_cov(1, 1)));
  for (const auto& r : rep.records) CHECK_FALSE(r.violated);
}

TEST_CASE("optimizer") {
  const CovarianceMatrix vac;
  const auto g = optimize_gains(vac, Bipartition::two_13);
  CHECK(g.h(2) == 0.0);
  CHECK(g.g(2) == 0.0);
  CHECK(vlf_evaluate(vac, Bipartition::two_13, g).ratio == doctest::Approx(1.0));

  for (auto [e1, e2] : {std::pair{0.0, 0.0}, {0.25, 0.25}, {0.0, 0.5}, {-0.5, -0.5}, {0.3, -0.2}}) {
    const auto cov = steady_cov(e1, e2);
    const auto opt = optimize_gains(cov);
    for (auto b : kBipartitions) {
      const double unit = vlf_evaluate(cov, b, default_gains(b)).ratio;
      const double best = vlf_evaluate(cov, b, opt[int(b)]).ratio;
      CHECK(best <= unit + 1e-9);
      CHECK(best == doctest::Approx(balanced_ratio(cov, b, opt[int(b)])).epsilon(1e-12));
    }
    // deterministic
    const auto again = optimize_gains(cov);
    for (int b = 0; b < 3; ++b) {
      CHECK(again[b].h == opt[b].h);
      CHECK(again[b].g == opt[b].g);
    }
  }
}

TEST_CASE("added thermal noise never lowers the variance sum") {
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> u(-1, 1);
  const auto base = steady_state_moments(pref(0.5, 0.1, 0.05), 1.0, Backend::ehrenfest);
  for (int trial = 0; trial < 20; ++trial) {
    Gains g{Eigen::Vector3d(u(rng), u(rng), u(rng)), Eigen::Vector3d(u(rng), u(rng), u(rng))};
    for (int mode = 0; mode < 3; ++mode) {
      auto noisy = base;
      (mode == 0 ? noisy.n1 : mode == 1 ? noisy.n2 : noisy.n3) += 0.1;
      for (auto b : kBipartitions) {
        if (!(witness_bound(b, g) > 0)) continue;
        CHECK(vlf_evaluate(CovarianceMatrix::from_moments(noisy), b, g).lhs >=
              vlf_evaluate(CovarianceMatrix::from_moments(base), b, g).lhs);
      }
    }
  }
}

TEST_CASE("uncorrelated first mode gives no false violation") {
  const auto cov = steady_cov(-0.5, -0.5);
  const auto opt = optimize_gains(cov);
  for (auto b : kBipartitions) {
    const auto r = vlf_evaluate(cov, b, opt[int(b)]);
    CHECK(r.lhs >= r.bound - 1e-9);
  }
}

TEST_CASE("swapping the inversions swaps the 2|13 and 3|12 reports") {
  for (auto [e1, e2] : {std::pair{0.1, 0.3}, {-0.2, 0.4}, {0.0, 0.25}}) {
    const auto a = steady_cov(e1, e2);
    const auto b = steady_cov(e2, e1);
    const auto ra = vlf_evaluate(a);
    const auto rb = vlf_evaluate(b);
    CHECK(ra[Bipartition::one_23].ratio == doctest::Approx(rb[Bipartition::one_23].ratio).epsilon(1e-10));
    CHECK(ra[Bipartition::two_13].ratio == doctest::Approx(rb[Bipartition::three_12].ratio).epsilon(1e-10));
    CHECK(ra[Bipartition::three_12].ratio == doctest::Approx(rb[Bipartition::two_13].ratio).epsilon(1e-10));
    const auto oa = vlf_evaluate(a, optimize_gains(a));
    const auto ob = vlf_evaluate(b, optimize_gains(b));
    CHECK(oa[Bipartition::one_23].ratio == doctest::Approx(ob[Bipartition::one_23].ratio).epsilon(1e-7));
    CHECK(oa[Bipartition::two_13].ratio == doctest::Approx(ob[Bipartition::three_12].ratio).epsilon(1e-7));
    CHECK(oa[Bipartition::three_12].ratio == doctest::Approx(ob[Bipartition::two_13].ratio).epsilon(1e-7));
  }
}

TEST_CASE("witness values from the oracle match the moment equations") {
  const auto f = pref(0.5, 0.0, 0.0);
  fock::FockConfig cfg;
  cfg.n_max = {5, 8, 8};
  cfg.t_final = 3.0;
  cfg.edge_tol = 1e-3;
  cfg.verify_step_halving = false;
  const fock::FockSpace space(cfg.n_max);
  const auto run = fock::integrate(fock::DensityState::vacuum(space), cfg, f, 1.0);
  const auto oracle = CovarianceMatrix::from_table(run.samples.back().moments);
  const auto moments = CovarianceMatrix::from_moments(
      evolve_second_moments(f, 1.0, 3.0, Backend::ehrenfest).moments);
  const auto ra = vlf_evaluate(oracle);
  const auto rb = vlf_evaluate(moments);
  for (int b = 0; b < 3; ++b)
    CHECK(std::abs(ra.records[b].ratio - rb.records[b].ratio) <=
          2e-3 * std::abs(rb.records[b].ratio));
}

TEST_CASE("sweep accounting and determinism") {
  SweepOptions opts;
  opts.threads = 1;
  const auto grid = eta_grid(21, 21);
  CHECK(grid.size() == 441);
  const auto rows = sweep(grid, opts);
  REQUIRE(rows.size() == 441);
  int valid = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].point.eta1 == grid[i].eta1);
    CHECK(rows[i].point.eta2 == grid[i].eta2);
    CHECK(rows[i].valid == validate_physical(grid[i].eta1, grid[i].eta2).valid);
    if (rows[i].valid) {
      ++valid;
      CHECK(rows[i].stable);
      CHECK(rows[i].report.has_value());
    } else {
      CHECK_FALSE(rows[i].moments.has_value());
      CHECK_FALSE(rows[i].note.empty());
    }
  }
  CHECK(valid > 100);
  CHECK(valid < 441);

  opts.threads = 3;
  const auto again = sweep(grid, opts);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(again[i].valid == rows[i].valid);
    if (!rows[i].moments) continue;
    CHECK(again[i].moments->values() == rows[i].moments->values());
    for (int b = 0; b < 3; ++b) CHECK(again[i].report->records[b].ratio == rows[i].report->records[b].ratio);
  }
}

TEST_CASE("sweep rows at the scenario points") {
  SweepOptions opts;
  const auto rows = sweep({{1, 1}, {-0.5, -0.5}, {0.25, 0.25}, {2, 0}}, opts);
  for (double v : rows[0].moments->values()) CHECK(v == 0.0);
  for (const auto& r : rows[0].report->records) CHECK_FALSE(r.violated);

  CHECK_FALSE((*rows[1].report)[Bipartition::one_23].violated);

  const auto& m = *rows[2].moments;
  CHECK(m.c32 > 1e-3);
  CHECK(m.c31 > 1e-3);
  CHECK(m.c21 > 1e-3);

  CHECK_FALSE(rows[3].valid);
  CHECK(rows[3].note.find("rho33") != std::string::npos);
}

TEST_CASE("unstable sweep points are recorded, not thrown") {
  SweepOptions opts;
  opts.A = 3.0;
  const auto rows = sweep({{-0.5, -0.5}, {1, 1}}, opts);
  CHECK(rows[0].valid);
  CHECK_FALSE(rows[0].stable);
  CHECK(rows[0].margin < 0);
  CHECK_FALSE(rows[0].moments.has_value());
  CHECK(rows[1].stable);

  opts.mode = SweepMode::fixed_time;
  opts.t = 1.0;
  const auto timed = sweep({{-0.5, -0.5}}, opts);
  CHECK_FALSE(timed[0].stable);
  CHECK(timed[0].moments.has_value());
}

TEST_CASE("thread count resolution") {
  CHECK(resolve_threads(4) == 4);
  CHECK(resolve_threads(0) >= 1);
}
