#include <doctest.h>

#include <cmath>
#include <random>

#include "dense_reference.hpp"
#include "ycel/dynamics.hpp"
#include "ycel/errors.hpp"
#include "ycel/fock_oracle.hpp"

using namespace ycel;
using namespace ycel::fock;

namespace {

Prefactors<double> pref(double A, double e1, double e2) { return prefactors_from_inversions(A, e1, e2); }

DensityState from_dense(const FockSpace& space, const ref::Mat& rho) { return {space, rho}; }

}  // namespace

TEST_CASE("Fock space indexing") {
  const FockSpace s({2, 3, 4});
  CHECK(s.dim() == 3 * 4 * 5);
  for (int i = 0; i < s.dim(); ++i) CHECK(s.index(s.occupation(i)) == i);
  CHECK(s.index({1, 2, 3}) == 1 * 20 + 2 * 5 + 3);
  CHECK(s.charge(s.index({2, 1, 3})) == 2);
  CHECK(s.on_edge(s.index({0, 0, 4})));
  CHECK_FALSE(s.on_edge(s.index({1, 2, 3})));
  CHECK_THROWS_AS(s.index({3, 0, 0}), ConfigurationError);
  CHECK_THROWS_AS(FockSpace({0, 2, 2}), ConfigurationError);

  // a3^+ a3^+ |0,0,1> = sqrt(2 * 3) |0,0,3>
  const auto r = s.apply({{2, true}, {2, true}}, s.index({0, 0, 1}));
  REQUIRE(r);
  CHECK(r->first == s.index({0, 0, 3}));
  CHECK(r->second == doctest::Approx(std::sqrt(6.0)));
  CHECK_FALSE(s.apply({{0, false}}, s.index({0, 1, 1})));
  CHECK_FALSE(s.apply({{0, true}}, s.index({2, 1, 1})));
}

TEST_CASE("sparse ladder matrices match the Kronecker construction") {
  const FockSpace s({2, 3, 2});
  const ref::Modes m({2, 3, 2});
  for (int k = 0; k < 3; ++k) {
    const Eigen::MatrixXd a = Eigen::MatrixXd(s.matrix({{k, false}}));
    CHECK((a.cast<std::complex<double>>() - m.a[k]).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("term list equals the Lindblad form") {
  const Cutoffs cut{3, 3, 3};
  const FockSpace space(cut);
  const ref::Modes modes(cut);
  std::mt19937 rng(1);
  for (auto [e1, e2, A] : {std::tuple{0.0, 0.0, 0.5}, {0.25, 0.25, 1.0}, {-0.2, 0.3, 0.7},
                           {1.0, 1.0, 0.5}, {-0.5, -0.5, 0.5}, {0.0, 0.5, 0.5}}) {
    const auto f = pref(A, e1, e2);
    for (int trial = 0; trial < 2; ++trial) {
      // full support, including the truncation edge
      const ref::Mat rho = ref::random_state(modes, 3, rng);
      const auto literal = liouvillian_apply(from_dense(space, rho), f, 0.9);
      const auto lindblad = ref::generator(modes, f, 0.9, rho);
      CHECK((literal - lindblad).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(std::abs(literal.trace()) < 1e-12);
    }
  }
}

TEST_CASE("liouvillian examples") {
  const FockSpace space({4, 4, 4});
  const auto vac = DensityState::vacuum(space);
  CHECK(liouvillian_apply(vac, pref(0.8, 1, 1), 1.0).cwiseAbs().maxCoeff() == 0.0);

  const double A = 0.6;
  const auto drho = liouvillian_apply(vac, pref(A, 0, 0), 1.0);
  const DensityState d{space, drho};
  const auto t = moments_from_state(d);
  CHECK(t.normal(2, 2).real() == doctest::Approx(A / 3).epsilon(1e-12));

  DensityState bad{space, Eigen::MatrixXcd::Identity(5, 5)};
  CHECK_THROWS_AS(liouvillian_apply(bad, pref(A, 0, 0), 1.0), ConfigurationError);
}

TEST_CASE("moments of simple states") {
  const FockSpace space({3, 3, 3});
  auto t = moments_from_state(DensityState::vacuum(space));
  CHECK(t.mean.isZero(0));
  CHECK(t.normal.isZero(0));
  CHECK(t.pair.isZero(0));

  t = moments_from_state(DensityState::fock(space, {0, 0, 1}));
  const auto m = t.closure();
  CHECK(m.n3 == 1.0);
  CHECK(m.n1 == 0.0);
  CHECK(m.n2 == 0.0);
  CHECK(m.c32 == 0.0);
  CHECK(m.c31 == 0.0);
  CHECK(m.c21 == 0.0);
  CHECK(t.outside_closure() == 0.0);

  // a general state against the dense reference
  const ref::Modes modes({3, 3, 3});
  std::mt19937 rng(2);
  const ref::Mat rho = ref::random_state(modes, 2, rng);
  t = moments_from_state({space, rho});
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(t.mean(i) - ref::expect(modes.a[i], rho)) < 1e-12);
    for (int j = 0; j < 3; ++j) {
      CHECK(std::abs(t.normal(i, j) - ref::expect(modes.ad(i) * modes.a[j], rho)) < 1e-12);
      CHECK(std::abs(t.pair(i, j) - ref::expect(modes.a[i] * modes.a[j], rho)) < 1e-12);
    }
  }
  CHECK_THROWS_AS(t.closure(1e-14), ConsistencyError);
}

TEST_CASE("compiled integration matches dense RK4 on the literal generator") {
  const Cutoffs cut{2, 2, 2};
  const FockSpace space(cut);
  const ref::Modes modes(cut);
  std::mt19937 rng(4);
  const ref::Mat rho0 = ref::random_state(modes, 2, rng);
  const auto f = pref(0.7, 0.1, 0.2);
  const double kappa = 1.0, h = 0.01;

  FockConfig cfg;
  cfg.n_max = cut;
  cfg.dt = h;
  cfg.t_final = 5 * h;
  cfg.edge_tol = 0.999;
  cfg.verify_step_halving = false;
  cfg.reduce_sectors = false;
  cfg.keep_final_state = true;
  const auto run = integrate({space, rho0}, cfg, f, kappa);
  REQUIRE(run.final_state);

  ref::Mat x = rho0;
  auto L = [&](const ref::Mat& r) { return liouvillian_apply({space, r}, f, kappa); };
  for (int s = 0; s < 5; ++s) {
    const ref::Mat k1 = L(x), k2 = L(x + h / 2 * k1), k3 = L(x + h / 2 * k2), k4 = L(x + h * k3);
    x += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  CHECK((run.final_state->rho - x).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("sector reduction does not change vacuum runs") {
  const auto f = pref(0.5, 0.1, -0.1);
  FockConfig cfg = FockConfig::uniform(4);
  cfg.t_final = 2.0;
  cfg.edge_tol = 0.5;
  cfg.verify_step_halving = false;
  const FockSpace space(cfg.n_max);
  const auto reduced = integrate(DensityState::vacuum(space), cfg, f, 1.0);
  cfg.reduce_sectors = false;
  const auto full = integrate(DensityState::vacuum(space), cfg, f, 1.0);
  CHECK(reduced.tracked_entries < full.tracked_entries);
  const auto& a = reduced.samples.back().moments;
  const auto& b = full.samples.back().moments;
  CHECK((a.normal - b.normal).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((a.pair - b.pair).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("vacuum is stationary without excited atoms") {
  FockConfig cfg = FockConfig::uniform(3);
  cfg.t_final = 10.0;
  const FockSpace space(cfg.n_max);
  const auto run = integrate(DensityState::vacuum(space), cfg, pref(0.5, 1, 1), 1.0,
                             {1.0, 5.0, 10.0});
  for (const auto& s : run.samples) {
    CHECK(s.trace_residue < 1e-15);
    CHECK(s.edge_population == 0.0);
    for (double v : s.moments.closure().values()) CHECK(v == 0.0);
  }
}

TEST_CASE("oracle agrees with the moment equations at the symmetric point") {
  const auto f = pref(0.5, 0, 0);
  FockConfig cfg;
  cfg.n_max = {6, 9, 9};
  cfg.t_final = 10.0;
  cfg.edge_tol = 1e-4;
  const FockSpace space(cfg.n_max);
  const std::vector<double> times{1.0, 3.0, 10.0};
  const auto run = integrate(DensityState::vacuum(space), cfg, f, 1.0, times);
  CHECK(run.step_halving_difference < 1e-6);
  CHECK(run.min_eigenvalue > -1e-8);
  const auto sys = linear_system(f, 1.0, Backend::ehrenfest);
  for (const auto& s : run.samples) {
    CHECK(s.trace_residue < 1e-9);
    CHECK(s.hermiticity_residue < 1e-10);
    CHECK(s.moments.outside_closure() < 1e-8);
    CHECK(s.moments.imaginary_residue() < 1e-10);
    const auto expect = evolve_second_moments(sys, s.t).moments;
    CHECK(max_relative_difference(s.moments.closure(), expect, 1e-9) < 1e-3);
  }
}

TEST_CASE("decoupled first mode stays uncorrelated") {
  FockConfig cfg = FockConfig::uniform(6);
  cfg.t_final = 10.0;
  const FockSpace space(cfg.n_max);
  const auto run = integrate(DensityState::vacuum(space), cfg, pref(0.5, -0.5, -0.5), 1.0);
  const auto m = run.samples.back().moments.closure();
  CHECK(std::abs(m.c31) < 1e-8);
  CHECK(std::abs(m.c21) < 1e-8);
  CHECK(m.n1 == 0.0);
  CHECK(m.c32 > 0.1);
}

TEST_CASE("truncation breach aborts") {
  FockConfig cfg = FockConfig::uniform(2);
  cfg.t_final = 10.0;
  cfg.edge_tol = 1e-6;
  const FockSpace space(cfg.n_max);
  try {
    integrate(DensityState::vacuum(space), cfg, pref(0.5, -0.5, -0.5), 1.0);
    FAIL("expected TruncationError");
  } catch (const TruncationError& e) {
    CHECK(std::string(e.what()).find("n_max") != std::string::npos);
  }
}

TEST_CASE("coarse steps fail the halving check") {
  FockConfig cfg = FockConfig::uniform(3);
  cfg.dt = 0.5;
  cfg.t_final = 1.0;
  cfg.edge_tol = 0.5;
  const FockSpace space(cfg.n_max);
  CHECK_THROWS_AS(integrate(DensityState::vacuum(space), cfg, pref(2.0, 0, 0), 1.0), IntegratorError);
}

TEST_CASE("configuration checks") {
  FockConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.dt = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigurationError);
  cfg = FockConfig{};
  cfg.edge_tol = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigurationError);
  cfg = FockConfig{};
  cfg.n_max = {0, 3, 3};
  CHECK_THROWS_AS(cfg.validate(), ConfigurationError);

  cfg = FockConfig::uniform(3);
  const FockSpace other({2, 2, 2});
  CHECK_THROWS_AS(integrate(DensityState::vacuum(other), cfg, pref(0.5, 0, 0), 1.0), ConfigurationError);
  const FockSpace space(cfg.n_max);
  DensityState twice = DensityState::vacuum(space);
  twice.rho *= 2.0;
  CHECK_THROWS_AS(integrate(twice, cfg, pref(0.5, 0, 0), 1.0), ConfigurationError);
  CHECK_THROWS_AS(integrate(DensityState::vacuum(space), cfg, pref(0.5, 0, 0), 1.0, {2.0, 1.0}),
                  ConfigurationError);
}

TEST_CASE("cutoff suggestions") {
  const auto c = suggest_cutoffs({0.0, 0.218, 0.5}, 1e-6);
  CHECK(c[0] == 5);
  CHECK(c[1] > 5);
  CHECK(c[2] > c[1]);
  // thermal tail at the suggested cutoff is within budget
  const double n = 0.5;
  CHECK(std::pow(n / (n + 1), c[2]) <= 1e-6 / 6 * (1 + 1e-12));
  CHECK(suggest_cutoffs({100.0, 100.0, 100.0}, 1e-6)[0] == 40);
}
