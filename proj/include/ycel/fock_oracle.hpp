#pragma once

// Brute-force reference: the field master equation integrated on a truncated
// three-mode Fock space. Used to referee the moment equations.

#include <array>
#include <complex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "ycel/dynamics.hpp"
#include "ycel/model.hpp"

namespace ycel::fock {

using Cutoffs = std::array<int, 3>;
using Occupation = std::array<int, 3>;

/// One ladder operator: a_{mode+1} or its adjoint.
struct Ladder {
  int mode = 0;  // 0, 1, 2 for a1, a2, a3
  bool dagger = false;
};

/// Operator product, written left to right as in the formula.
using Word = std::vector<Ladder>;

/// rho -> coefficient * left * rho * right
struct Term {
  double coefficient = 0;
  Word left;
  Word right;
};

/// Every bracketed term of the field master equation with its printed sign,
/// followed by the cavity-loss sum.
std::vector<Term> master_equation_terms(const Prefactors<double>& f, double kappa);

class FockSpace {
 public:
  explicit FockSpace(Cutoffs cutoffs);

  int dim() const { return dim_; }
  const Cutoffs& cutoffs() const { return cutoffs_; }
  int index(const Occupation& occ) const;
  Occupation occupation(int idx) const;
  /// n2 + n3 - n1; every term of the master equation preserves the difference
  /// between ket and bra charge.
  int charge(int idx) const;
  bool on_edge(int idx) const;

  /// word |idx>, or nothing when annihilated or pushed past the cutoff.
  std::optional<std::pair<int, double>> apply(const Word& word, int idx) const;
  Eigen::SparseMatrix<double> matrix(const Word& word) const;

 private:
  Cutoffs cutoffs_;
  std::array<int, 3> strides_{};
  int dim_ = 0;
};

struct FockConfig {
  Cutoffs n_max{5, 5, 5};
  double dt = 0.02;
  double t_final = 10.0;
  double edge_tol = 1e-2;
  bool verify_step_halving = true;
  double step_halving_tol = 1e-6;
  double trace_tol = 1e-6;
  bool reduce_sectors = true;
  bool keep_final_state = false;

  static FockConfig uniform(int n) {
    FockConfig c;
    c.n_max = {n, n, n};
    return c;
  }
  void validate() const;
};

struct DensityState {
  FockSpace space;
  Eigen::MatrixXcd rho;

  static DensityState vacuum(const FockSpace& space);
  static DensityState fock(const FockSpace& space, const Occupation& occ);

  std::complex<double> trace() const { return rho.trace(); }
  double hermiticity_residue() const;
};

/// d rho / dt from the literal term list, on dense matrices.
Eigen::MatrixXcd liouvillian_apply(const DensityState& state, const Prefactors<double>& f,
                                   double kappa);

struct MomentTable {
  Eigen::Vector3cd mean = Eigen::Vector3cd::Zero();    // <a_i>
  Eigen::Matrix3cd normal = Eigen::Matrix3cd::Zero();  // <a_i^dagger a_j>
  Eigen::Matrix3cd pair = Eigen::Matrix3cd::Zero();    // <a_i a_j>

  /// n1, n2, n3, c32 = <a3^dagger a2>, c31 = <a3 a1>, c21 = <a2 a1>.
  /// Throws ConsistencyError when an imaginary part exceeds imag_tol.
  SecondMoments<double> closure(double imag_tol = 1e-10) const;
  /// Largest magnitude among first moments and second moments outside the
  /// six-element closure set (and their conjugates).
  double outside_closure() const;
  double imaginary_residue() const;
};

MomentTable moments_from_state(const DensityState& state);

struct OracleSample {
  double t = 0;
  MomentTable moments;
  double trace_residue = 0;       // |tr rho - 1|
  double edge_population = 0;     // population with any mode at its cutoff
  double hermiticity_residue = 0; // before re-symmetrization
};

struct OracleRun {
  std::vector<OracleSample> samples;
  Cutoffs n_max{};
  double dt = 0;                      // step of the reported run
  double step_halving_difference = 0; // max |moment(dt) - moment(dt/2)|, 0 when not checked
  double min_eigenvalue = 0;          // of the final state; NaN when not computed
  long tracked_entries = 0;
  std::optional<DensityState> final_state;
};

/// Fixed-step RK4 from `initial`. Samples at `sample_times` (default: t_final).
/// Throws TruncationError when the edge population exceeds cfg.edge_tol and
/// IntegratorError on trace drift or failed step halving.
OracleRun integrate(const DensityState& initial, const FockConfig& cfg,
                    const Prefactors<double>& f, double kappa,
                    std::vector<double> sample_times = {});

/// Per-mode cutoffs so that thermal marginals with the given mean photon
/// numbers leave at most edge_tol / 2 in the edge layers.
Cutoffs suggest_cutoffs(const std::array<double, 3>& photon_numbers, double edge_tol,
                        int floor = 5, int ceiling = 40);

}  // namespace ycel::fock
