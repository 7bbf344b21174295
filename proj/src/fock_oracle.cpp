#include "ycel/fock_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "ycel/errors.hpp"
#include "ycel/ode.hpp"

namespace ycel::fock {

namespace {

Ladder a(int mode) { return {mode - 1, false}; }
Ladder ad(int mode) { return {mode - 1, true}; }

Word adjoint(const Word& w) {
  Word out(w.rbegin(), w.rend());
  for (auto& l : out) l.dagger = !l.dagger;
  return out;
}

}  // namespace

std::vector<Term> master_equation_terms(const Prefactors<double>& f, double kappa) {
  const double ab = f.A * f.B, ae = f.A * f.E, ac = f.A * f.C;
  const double af = f.A * f.F, ad_ = f.A * f.D, ag = f.A * f.G;
  std::vector<Term> t;
  // AB [2 a3^+ rho a3 - rho a3 a3^+ - a3 a3^+ rho]
  t.push_back({2 * ab, {ad(3)}, {a(3)}});
  t.push_back({-ab, {}, {a(3), ad(3)}});
  t.push_back({-ab, {a(3), ad(3)}, {}});
  // AE [2 a3^+ rho a2 - rho a2 a3^+ - a2 a3^+ rho + 2 a2^+ rho a3 - rho a3 a2^+ - a3 a2^+ rho]
  t.push_back({2 * ae, {ad(3)}, {a(2)}});
  t.push_back({-ae, {}, {a(2), ad(3)}});
  t.push_back({-ae, {a(2), ad(3)}, {}});
  t.push_back({2 * ae, {ad(2)}, {a(3)}});
  t.push_back({-ae, {}, {a(3), ad(2)}});
  t.push_back({-ae, {a(3), ad(2)}, {}});
  // AC [2 a2^+ rho a2 - rho a2 a2^+ - a2 a2^+ rho]
  t.push_back({2 * ac, {ad(2)}, {a(2)}});
  t.push_back({-ac, {}, {a(2), ad(2)}});
  t.push_back({-ac, {a(2), ad(2)}, {}});
  // -AF [2 a1 rho a3 - a3 a1 rho - rho a3 a1 + 2 a3^+ rho a1^+ - rho a1^+ a3^+ - a1^+ a3^+ rho]
  t.push_back({-2 * af, {a(1)}, {a(3)}});
  t.push_back({af, {a(3), a(1)}, {}});
  t.push_back({af, {}, {a(3), a(1)}});
  t.push_back({-2 * af, {ad(3)}, {ad(1)}});
  t.push_back({af, {}, {ad(1), ad(3)}});
  t.push_back({af, {ad(1), ad(3)}, {}});
  // AD [2 a1 rho a1^+ - rho a1^+ a1 - a1^+ a1 rho]
  t.push_back({2 * ad_, {a(1)}, {ad(1)}});
  t.push_back({-ad_, {}, {ad(1), a(1)}});
  t.push_back({-ad_, {ad(1), a(1)}, {}});
  // -AG [2 a1 rho a2 - rho a2 a1 - a2 a1 rho + 2 a2^+ rho a1^+ - a1^+ a2^+ rho - rho a1^+ a2^+]
  t.push_back({-2 * ag, {a(1)}, {a(2)}});
  t.push_back({ag, {}, {a(2), a(1)}});
  t.push_back({ag, {a(2), a(1)}, {}});
  t.push_back({-2 * ag, {ad(2)}, {ad(1)}});
  t.push_back({ag, {ad(1), ad(2)}, {}});
  t.push_back({ag, {}, {ad(1), ad(2)}});
  // kappa/2 sum_i [2 a_i rho a_i^+ - a_i^+ a_i rho - rho a_i^+ a_i]
  for (int i = 1; i <= 3; ++i) {
    t.push_back({kappa, {a(i)}, {ad(i)}});
    t.push_back({-kappa / 2, {ad(i), a(i)}, {}});
    t.push_back({-kappa / 2, {}, {ad(i), a(i)}});
  }
  return t;
}

// ---------------------------------------------------------------------------
// FockSpace

FockSpace::FockSpace(Cutoffs cutoffs) : cutoffs_(cutoffs) {
  for (int c : cutoffs_)
    if (c < 1) throw ConfigurationError("Fock cutoff must be at least 1 per mode");
  strides_[2] = 1;
  strides_[1] = cutoffs_[2] + 1;
  strides_[0] = (cutoffs_[1] + 1) * strides_[1];
  dim_ = (cutoffs_[0] + 1) * strides_[0];
}

int FockSpace::index(const Occupation& occ) const {
  int idx = 0;
  for (int i = 0; i < 3; ++i) {
    if (occ[i] < 0 || occ[i] > cutoffs_[i])
      throw ConfigurationError("occupation outside the truncated space");
    idx += occ[i] * strides_[i];
  }
  return idx;
}

Occupation FockSpace::occupation(int idx) const {
  Occupation occ{};
  for (int i = 0; i < 3; ++i) {
    occ[i] = idx / strides_[i];
    idx %= strides_[i];
  }
  return occ;
}

int FockSpace::charge(int idx) const {
  const auto occ = occupation(idx);
  return occ[1] + occ[2] - occ[0];
}

bool FockSpace::on_edge(int idx) const {
  const auto occ = occupation(idx);
  for (int i = 0; i < 3; ++i)
    if (occ[i] == cutoffs_[i]) return true;
  return false;
}

std::optional<std::pair<int, double>> FockSpace::apply(const Word& word, int idx) const {
  Occupation occ = occupation(idx);
  double amp = 1.0;
  for (auto it = word.rbegin(); it != word.rend(); ++it) {
    int& n = occ[it->mode];
    if (it->dagger) {
      if (n == cutoffs_[it->mode]) return std::nullopt;
      amp *= std::sqrt(double(n + 1));
      ++n;
    } else {
      if (n == 0) return std::nullopt;
      amp *= std::sqrt(double(n));
      --n;
    }
  }
  return std::make_pair(index(occ), amp);
}

Eigen::SparseMatrix<double> FockSpace::matrix(const Word& word) const {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(dim_);
  for (int j = 0; j < dim_; ++j)
    if (auto r = apply(word, j)) trip.emplace_back(r->first, j, r->second);
  Eigen::SparseMatrix<double> m(dim_, dim_);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

// ---------------------------------------------------------------------------
// Config and dense state

void FockConfig::validate() const {
  for (int n : n_max)
    if (n < 1) throw ConfigurationError("n_max must be at least 1");
  if (!(dt > 0)) throw ConfigurationError("dt must be positive");
  if (!(t_final >= 0)) throw ConfigurationError("t_final must be nonnegative");
  if (!(edge_tol > 0 && edge_tol < 1)) throw ConfigurationError("edge_tol must lie in (0, 1)");
}

DensityState DensityState::vacuum(const FockSpace& space) {
  return fock(space, {0, 0, 0});
}

DensityState DensityState::fock(const FockSpace& space, const Occupation& occ) {
  DensityState s{space, Eigen::MatrixXcd::Zero(space.dim(), space.dim())};
  const int i = space.index(occ);
  s.rho(i, i) = 1.0;
  return s;
}

double DensityState::hermiticity_residue() const {
  return (rho - rho.adjoint()).cwiseAbs().maxCoeff();
}

Eigen::MatrixXcd liouvillian_apply(const DensityState& state, const Prefactors<double>& f,
                                   double kappa) {
  const int dim = state.space.dim();
  if (state.rho.rows() != dim || state.rho.cols() != dim) {
    std::ostringstream os;
    os << "configuration error: density matrix is " << state.rho.rows() << "x"
       << state.rho.cols() << " but the Fock space has dimension " << dim;
    throw ConfigurationError(os.str());
  }
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dim, dim);
  for (const auto& term : master_equation_terms(f, kappa)) {
    if (term.coefficient == 0) continue;
    Eigen::MatrixXcd x = state.rho;
    if (!term.left.empty())
      x = state.space.matrix(term.left).cast<std::complex<double>>() * x;
    if (!term.right.empty())
      x = x * state.space.matrix(term.right).cast<std::complex<double>>();
    out += term.coefficient * x;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Moments

SecondMoments<double> MomentTable::closure(double imag_tol) const {
  const std::complex<double> vals[6] = {normal(0, 0), normal(1, 1), normal(2, 2),
                                        normal(2, 1), pair(2, 0),   pair(1, 0)};
  for (const auto& v : vals) {
    if (std::abs(v.imag()) > imag_tol) {
      std::ostringstream os;
      os << "oracle moment has imaginary residue " << v.imag() << " above " << imag_tol;
      throw ConsistencyError(os.str());
    }
  }
  return {vals[0].real(), vals[1].real(), vals[2].real(),
          vals[3].real(), vals[4].real(), vals[5].real()};
}

double MomentTable::outside_closure() const {
  double worst = mean.cwiseAbs().maxCoeff();
  // <a_i^+ a_j> between mode 1 and the upper modes
  for (auto [i, j] : {std::pair{0, 1}, {1, 0}, {0, 2}, {2, 0}})
    worst = std::max(worst, std::abs(normal(i, j)));
  // <a_i a_j> except the (3,1) and (2,1) pairs
  for (auto [i, j] : {std::pair{0, 0}, {1, 1}, {2, 2}, {1, 2}})
    worst = std::max(worst, std::abs(pair(i, j)));
  return worst;
}

double MomentTable::imaginary_residue() const {
  return std::max({std::abs(normal(0, 0).imag()), std::abs(normal(1, 1).imag()),
                   std::abs(normal(2, 2).imag()), std::abs(normal(2, 1).imag()),
                   std::abs(pair(2, 0).imag()), std::abs(pair(1, 0).imag())});
}

namespace {

struct Observables {
  std::array<Word, 3> mean;
  std::array<std::array<Word, 3>, 3> normal;
  std::array<std::array<Word, 3>, 3> pair;

  Observables() {
    for (int i = 0; i < 3; ++i) {
      mean[i] = {{i, false}};
      for (int j = 0; j < 3; ++j) {
        normal[i][j] = {{i, true}, {j, false}};
        pair[i][j] = {{i, false}, {j, false}};
      }
    }
  }
};

/// tr(rho W) = sum_m c(m) rho(m, m') with W|m> = c(m)|m'>.
template <class Lookup>
MomentTable moments_via(const FockSpace& space, const Lookup& entry) {
  static const Observables obs;
  auto expect = [&](const Word& w) {
    std::complex<double> acc = 0;
    for (int m = 0; m < space.dim(); ++m)
      if (auto r = space.apply(w, m)) acc += r->second * entry(m, r->first);
    return acc;
  };
  MomentTable t;
  for (int i = 0; i < 3; ++i) {
    t.mean(i) = expect(obs.mean[i]);
    for (int j = 0; j < 3; ++j) {
      t.normal(i, j) = expect(obs.normal[i][j]);
      t.pair(i, j) = expect(obs.pair[i][j]);
    }
  }
  return t;
}

}  // namespace

MomentTable moments_from_state(const DensityState& state) {
  return moments_via(state.space,
                     [&](int ket, int bra) { return state.rho(ket, bra); });
}

// ---------------------------------------------------------------------------
// Integration on the tracked entries

namespace {

/// The density-matrix entries (ket, bra) whose charge difference belongs to
/// `offsets`. The master equation maps this set into itself.
class EntryLayout {
 public:
  EntryLayout(const FockSpace& space, const std::set<int>& offsets) : space_(space) {
    const int dim = space.dim();
    qmin_ = -space.cutoffs()[0];
    const int qmax = space.cutoffs()[1] + space.cutoffs()[2];
    nq_ = qmax - qmin_ + 1;
    sector_.resize(dim);
    position_.resize(dim);
    sector_states_.assign(nq_, {});
    for (int s = 0; s < dim; ++s) {
      const int q = space.charge(s) - qmin_;
      sector_[s] = q;
      position_[s] = int(sector_states_[q].size());
      sector_states_[q].push_back(s);
    }
    base_.assign(std::size_t(nq_) * nq_, -1);
    long next = 0;
    for (int qk = 0; qk < nq_; ++qk)
      for (int qb = 0; qb < nq_; ++qb) {
        if (!offsets.count(qk - qb)) continue;
        const long size = long(sector_states_[qk].size()) * long(sector_states_[qb].size());
        if (size == 0) continue;
        base_[std::size_t(qk) * nq_ + qb] = next;
        for (int k : sector_states_[qk])
          for (int b : sector_states_[qb]) {
            kets_.push_back(k);
            bras_.push_back(b);
          }
        next += size;
      }
    size_ = next;
    for (int s = 0; s < dim; ++s)
      if (lookup(s, s) >= 0) diagonal_.push_back(s);
    adjoint_.resize(size_);
    for (long e = 0; e < size_; ++e) adjoint_[e] = lookup(bras_[e], kets_[e]);
    block_diagonal_ = offsets.size() == 1 && *offsets.begin() == 0;
  }

  long size() const { return size_; }
  int ket(long e) const { return kets_[e]; }
  int bra(long e) const { return bras_[e]; }
  long adjoint(long e) const { return adjoint_[e]; }
  const std::vector<int>& diagonal_states() const { return diagonal_; }
  bool block_diagonal() const { return block_diagonal_; }
  const std::vector<std::vector<int>>& sectors() const { return sector_states_; }

  long lookup(int ket, int bra) const {
    const long b = base_[std::size_t(sector_[ket]) * nq_ + sector_[bra]];
    if (b < 0) return -1;
    return b + long(position_[ket]) * long(sector_states_[sector_[bra]].size()) + position_[bra];
  }

 private:
  const FockSpace& space_;
  int qmin_ = 0, nq_ = 0;
  std::vector<int> sector_, position_;
  std::vector<std::vector<int>> sector_states_;
  std::vector<long> base_;
  std::vector<int> kets_, bras_;
  std::vector<long> adjoint_;
  std::vector<int> diagonal_;
  long size_ = 0;
  bool block_diagonal_ = false;
};

using SparseOp = Eigen::SparseMatrix<double, Eigen::RowMajor, long>;
// Column 0 real part, column 1 imaginary part; the generator is real.
using StateVec = Eigen::Matrix<double, Eigen::Dynamic, 2>;

SparseOp compile(const EntryLayout& layout, const FockSpace& space,
                 const std::vector<Term>& terms) {
  struct Prepared {
    double c;
    Word left, right_adjoint;
  };
  std::vector<Prepared> prepared;
  for (const auto& t : terms)
    if (t.coefficient != 0) prepared.push_back({t.coefficient, t.left, adjoint(t.right)});

  std::vector<Eigen::Triplet<double, long>> trip;
  trip.reserve(std::size_t(layout.size()) * 16);
  for (long e = 0; e < layout.size(); ++e) {
    const int k = layout.ket(e), b = layout.bra(e);
    for (const auto& p : prepared) {
      // left |k><b| right = (left|k>) (right^+|b>)^+
      const auto lk = space.apply(p.left, k);
      if (!lk) continue;
      const auto rb = space.apply(p.right_adjoint, b);
      if (!rb) continue;
      const long target = layout.lookup(lk->first, rb->first);
      if (target < 0)
        throw ConsistencyError("master-equation term leaves the tracked charge sectors");
      trip.emplace_back(target, e, p.c * lk->second * rb->second);
    }
  }
  SparseOp op(layout.size(), layout.size());
  op.setFromTriplets(trip.begin(), trip.end());
  op.makeCompressed();
  return op;
}

struct Diagnostics {
  double trace_residue, edge_population;
};

Diagnostics diagnose(const EntryLayout& layout, const FockSpace& space, const StateVec& x) {
  double trace = 0, edge = 0;
  for (int s : layout.diagonal_states()) {
    const double p = x(layout.lookup(s, s), 0);
    trace += p;
    if (space.on_edge(s)) edge += p;
  }
  return {std::abs(trace - 1.0), edge};
}

double symmetrize(const EntryLayout& layout, StateVec& x) {
  double residue = 0;
  for (long e = 0; e < layout.size(); ++e) {
    const long t = layout.adjoint(e);
    if (t < e) continue;
    const double re = 0.5 * (x(e, 0) + x(t, 0));
    const double im = 0.5 * (x(e, 1) - x(t, 1));
    residue = std::max(residue, std::hypot(x(e, 0) - x(t, 0), x(e, 1) + x(t, 1)));
    x(e, 0) = re;
    x(t, 0) = re;
    x(e, 1) = im;
    x(t, 1) = -im;
  }
  return residue;
}

MomentTable tracked_moments(const EntryLayout& layout, const FockSpace& space,
                            const StateVec& x) {
  return moments_via(space, [&](int ket, int bra) -> std::complex<double> {
    const long e = layout.lookup(ket, bra);
    return e < 0 ? std::complex<double>(0) : std::complex<double>(x(e, 0), x(e, 1));
  });
}

double min_eigenvalue(const EntryLayout& layout, const StateVec& x, int dim) {
  auto block_min = [&](const std::vector<int>& kets, const std::vector<int>& bras) {
    Eigen::MatrixXcd m(kets.size(), bras.size());
    for (std::size_t i = 0; i < kets.size(); ++i)
      for (std::size_t j = 0; j < bras.size(); ++j) {
        const long e = layout.lookup(kets[i], bras[j]);
        m(i, j) = e < 0 ? std::complex<double>(0) : std::complex<double>(x(e, 0), x(e, 1));
      }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  };
  if (layout.block_diagonal()) {
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& sector : layout.sectors())
      if (!sector.empty()) worst = std::min(worst, block_min(sector, sector));
    return worst;
  }
  if (dim > 1200) return std::numeric_limits<double>::quiet_NaN();
  std::vector<int> all(dim);
  for (int i = 0; i < dim; ++i) all[i] = i;
  return block_min(all, all);
}

struct RawRun {
  std::vector<OracleSample> samples;
  StateVec final_state;
};

RawRun run_fixed_step(const EntryLayout& layout, const FockSpace& space, const SparseOp& op,
                      const StateVec& x0, const std::vector<double>& times, double dt,
                      const FockConfig& cfg) {
  RawRun out;
  StateVec x = x0;
  auto rhs = [&](const StateVec& y) -> StateVec { return op * y; };
  double now = 0;
  auto record = [&](double t, double herm) {
    const auto d = diagnose(layout, space, x);
    out.samples.push_back({t, tracked_moments(layout, space, x), d.trace_residue,
                           d.edge_population, herm});
  };
  for (double target : times) {
    double herm = 0;
    if (target > now) {
      const long steps = std::max(1L, long(std::ceil((target - now) / dt - 1e-9)));
      const double h = (target - now) / double(steps);
      for (long s = 0; s < steps; ++s) {
        x = ode::rk4_step(rhs, x, h);
        herm = std::max(herm, symmetrize(layout, x));
        const double t = now + double(s + 1) * h;
        const auto d = diagnose(layout, space, x);
        if (d.edge_population > cfg.edge_tol) {
          std::ostringstream os;
          os << "edge-layer population " << d.edge_population << " exceeds edge_tol "
             << cfg.edge_tol << " at t=" << t << " with cutoffs (" << space.cutoffs()[0]
             << ", " << space.cutoffs()[1] << ", " << space.cutoffs()[2]
             << "); increase n_max";
          throw TruncationError(os.str());
        }
        if (d.trace_residue > cfg.trace_tol) {
          std::ostringstream os;
          os << "trace drifted by " << d.trace_residue << " at t=" << t
             << "; reduce the integrator step dt=" << h;
          throw IntegratorError(os.str());
        }
      }
      now = target;
    }
    record(target, herm);
  }
  out.final_state = std::move(x);
  return out;
}

double sample_difference(const std::vector<OracleSample>& a, const std::vector<OracleSample>& b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a[i].moments;
    const auto& y = b[i].moments;
    worst = std::max(worst, (x.mean - y.mean).cwiseAbs().maxCoeff());
    worst = std::max(worst, (x.normal - y.normal).cwiseAbs().maxCoeff());
    worst = std::max(worst, (x.pair - y.pair).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace

OracleRun integrate(const DensityState& initial, const FockConfig& cfg,
                    const Prefactors<double>& f, double kappa, std::vector<double> sample_times) {
  cfg.validate();
  const FockSpace& space = initial.space;
  if (space.cutoffs() != cfg.n_max)
    throw ConfigurationError("configuration error: initial state cutoffs differ from n_max");
  const int dim = space.dim();
  if (initial.rho.rows() != dim || initial.rho.cols() != dim)
    throw ConfigurationError("configuration error: density matrix does not match the Fock space");
  if (std::abs(initial.trace() - 1.0) > 1e-9)
    throw ConfigurationError("initial state must have unit trace");

  if (sample_times.empty()) sample_times.push_back(cfg.t_final);
  for (std::size_t i = 0; i < sample_times.size(); ++i) {
    if (!(sample_times[i] >= 0)) throw ConfigurationError("sample times must be nonnegative");
    if (i && sample_times[i] < sample_times[i - 1])
      throw ConfigurationError("sample times must be nondecreasing");
  }

  std::set<int> offsets;
  if (cfg.reduce_sectors) {
    for (int k = 0; k < dim; ++k)
      for (int b = 0; b < dim; ++b)
        if (initial.rho(k, b) != 0.0) {
          offsets.insert(space.charge(k) - space.charge(b));
          offsets.insert(space.charge(b) - space.charge(k));
        }
  } else {
    const int span = space.cutoffs()[0] + space.cutoffs()[1] + space.cutoffs()[2];
    for (int d = -span; d <= span; ++d) offsets.insert(d);
  }
  const EntryLayout layout(space, offsets);
  const SparseOp op = compile(layout, space, master_equation_terms(f, kappa));

  StateVec x0 = StateVec::Zero(layout.size(), 2);
  for (long e = 0; e < layout.size(); ++e) {
    const auto v = initial.rho(layout.ket(e), layout.bra(e));
    x0(e, 0) = v.real();
    x0(e, 1) = v.imag();
  }

  OracleRun run;
  run.n_max = cfg.n_max;
  run.tracked_entries = layout.size();
  RawRun raw = run_fixed_step(layout, space, op, x0, sample_times, cfg.dt, cfg);
  run.dt = cfg.dt;
  if (cfg.verify_step_halving) {
    RawRun fine = run_fixed_step(layout, space, op, x0, sample_times, cfg.dt / 2, cfg);
    run.step_halving_difference = sample_difference(raw.samples, fine.samples);
    if (run.step_halving_difference >= cfg.step_halving_tol) {
      std::ostringstream os;
      os << "halving dt=" << cfg.dt << " changed tracked moments by "
         << run.step_halving_difference << " (limit " << cfg.step_halving_tol
         << "); reduce dt";
      throw IntegratorError(os.str());
    }
    raw = std::move(fine);
    run.dt = cfg.dt / 2;
  }
  run.samples = std::move(raw.samples);
  run.min_eigenvalue = min_eigenvalue(layout, raw.final_state, dim);

  if (cfg.keep_final_state) {
    DensityState fs{space, Eigen::MatrixXcd::Zero(dim, dim)};
    for (long e = 0; e < layout.size(); ++e)
      fs.rho(layout.ket(e), layout.bra(e)) = {raw.final_state(e, 0), raw.final_state(e, 1)};
    run.final_state = std::move(fs);
  }
  return run;
}

Cutoffs suggest_cutoffs(const std::array<double, 3>& photon_numbers, double edge_tol, int floor,
                        int ceiling) {
  if (!(edge_tol > 0 && edge_tol < 1)) throw ConfigurationError("edge_tol must lie in (0, 1)");
  Cutoffs out{};
  const double per_mode = edge_tol / 6.0;
  for (int i = 0; i < 3; ++i) {
    const double n = std::max(0.0, photon_numbers[i]);
    int cut = floor;
    if (n > 1e-12) {
      const double ratio = n / (n + 1.0);
      cut = std::max(floor, int(std::ceil(std::log(per_mode) / std::log(ratio))));
    }
    out[i] = std::min(cut, ceiling);
  }
  return out;
}

}  // namespace ycel::fock
