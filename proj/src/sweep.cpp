#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>

#include "ycel/entanglement.hpp"
#include "ycel/errors.hpp"

namespace ycel {

std::vector<SweepPoint> eta_grid(int n1, int n2, double lo, double hi) {
  if (n1 < 1 || n2 < 1) throw ConfigurationError("grid needs at least one point per axis");
  if (!(hi >= lo)) throw ConfigurationError("grid range must satisfy lo <= hi");
  auto at = [&](int i, int n) { return n == 1 ? lo : lo + (hi - lo) * double(i) / double(n - 1); };
  std::vector<SweepPoint> out;
  out.reserve(std::size_t(n1) * n2);
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) out.push_back({at(i, n1), at(j, n2)});
  return out;
}

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("YCEL_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return unsigned(v);
    throw ConfigurationError(std::string("YCEL_THREADS must be a positive integer, got '") + env +
                             "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

SweepRow evaluate_point(const SweepPoint& pt, const SweepOptions& opts) {
  SweepRow row;
  row.point = pt;
  const auto check = validate_physical(pt.eta1, pt.eta2);
  row.populations = check.populations;
  if (!check.valid) {
    row.note = check.message;
    return row;
  }
  row.valid = true;
  row.prefactors = prefactors_from_inversions(opts.A, pt.eta1, pt.eta2);
  const auto sys = linear_system(row.prefactors, opts.kappa, opts.backend);
  const auto verdict = is_stable(sys.drift);
  row.margin = verdict.margin;
  try {
    if (opts.mode == SweepMode::steady) {
      row.moments = steady_state_moments(sys);
    } else {
      row.moments = evolve_second_moments(sys, opts.t).moments;
    }
    row.stable = verdict.stable;
  } catch (const InstabilityError& e) {
    row.note = e.what();
    return row;
  } catch (const DegeneracyError& e) {
    row.note = e.what();
    return row;
  }
  const auto cov = CovarianceMatrix::from_moments(*row.moments);
  row.report = vlf_evaluate(cov, opts.optimize ? optimize_gains(cov) : default_gains());
  return row;
}

}  // namespace

std::vector<SweepRow> sweep(const std::vector<SweepPoint>& grid, const SweepOptions& opts) {
  if (opts.mode == SweepMode::fixed_time && !(opts.t >= 0))
    throw ConfigurationError("sweep time must be nonnegative");
  std::vector<SweepRow> rows(grid.size());
  const unsigned n = std::min<unsigned>(resolve_threads(opts.threads),
                                        std::max<std::size_t>(1, grid.size()));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= grid.size() || failed) return;
      try {
        rows[i] = evaluate_point(grid[i], opts);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
        return;
      }
    }
  };
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return rows;
}

}  // namespace ycel
