#ifndef EGW_BENCHMARK_HPP
#define EGW_BENCHMARK_HPP

#include <atomic>
#include <chrono>
#include <cmath>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "egw/debias.hpp"
#include "egw/measure.hpp"
#include "egw/solver.hpp"
#include "egw/types.hpp"

namespace egw {

/// Random-instance generator mirroring the runtime experiments: mean-zero
/// normal coordinates (sigma 0.05 for mu0, 0.1 for mu1), weights uniform on
/// [0,1) and normalized.
struct GeneratorSpec {
  double sigma0 = 0.05;
  double sigma1 = 0.1;
};

enum class EpsRule { convex_margin, fixed };  // convex margin: 1.05 * 16 sqrt(M4 M4)

struct BenchmarkSpec {
  std::vector<int> dims{2};
  std::vector<int> sizes{64, 128, 256, 512};
  int trials = 3;
  double time_budget_seconds = 600.0;  // cumulative per (d, N) cell
  EpsRule eps_rule = EpsRule::convex_margin;
  double eps_fixed = 1.0;
  GeneratorSpec generator;
  unsigned long long seed = 0;
  SolveConfig solve;
};

struct RunRecord {
  int d = 0;
  int n = 0;
  int trial = 0;
  double wall_time_seconds = 0.0;
  long outer_iters = 0;
  long total_sinkhorn_iters = 0;
  double objective = std::numeric_limits<double>::quiet_NaN();
  std::string status;
};

namespace detail {

inline unsigned long long splitmix64(unsigned long long x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline unsigned long long cell_seed(unsigned long long seed, int d, int n, int trial,
                                    int which) {
  unsigned long long h = seed;
  h = splitmix64(h ^ (0x1000ULL + static_cast<unsigned long long>(d)));
  h = splitmix64(h ^ (0x2000ULL + static_cast<unsigned long long>(n)));
  h = splitmix64(h ^ (0x3000ULL + static_cast<unsigned long long>(trial)));
  h = splitmix64(h ^ (0x4000ULL + static_cast<unsigned long long>(which)));
  return h;
}

}  // namespace detail

inline DiscreteMeasure random_gaussian_measure(int n, int d, double sigma,
                                               unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> coord(0.0, sigma);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix pts(n, d);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k) pts(i, k) = coord(rng);
  Vector w(n);
  for (int i = 0; i < n; ++i) {
    double v = unif(rng);
    while (v <= 1e-12) v = unif(rng);  // zero weights are invalid atoms
    w[i] = v;
  }
  return DiscreteMeasure(std::move(pts), std::move(w), /*renormalize=*/true);
}

/// One timed EGW computation on a generated pair. Timing covers the full
/// S_eps evaluation (constants + variational solve), as in the experiments.
inline RunRecord benchmark_single(const BenchmarkSpec& spec, int d, int n, int trial) {
  RunRecord rec;
  rec.d = d;
  rec.n = n;
  rec.trial = trial;
  const auto mu0 = random_gaussian_measure(n, d, spec.generator.sigma0,
                                           detail::cell_seed(spec.seed, d, n, trial, 0));
  const auto mu1 = random_gaussian_measure(n, d, spec.generator.sigma1,
                                           detail::cell_seed(spec.seed, d, n, trial, 1));
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const DiscreteMeasure c0 = center(mu0), c1 = center(mu1);
    double eps = spec.eps_fixed;
    if (spec.eps_rule == EpsRule::convex_margin)
      eps = 1.05 * 16.0 * std::sqrt(moments(c0).m4 * moments(c1).m4);
    const double s1 = s1_constant(c0, c1);
    Problem prob = make_problem(c0, c1, eps);
    SolveReport rep = solve(prob, spec.solve);
    rec.outer_iters = rep.outer_iterations;
    rec.total_sinkhorn_iters = rep.total_sinkhorn_iterations;
    rec.objective = s1 + rep.objective;
    rec.status = to_string(rep.status);
  } catch (const Error& e) {
    rec.status = std::string("error: ") + e.what();
  }
  rec.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

/// Full grid. Cells (d, N) run trials sequentially against the cumulative
/// time budget; distinct cells may run on up to `jobs` threads. Records come
/// back in deterministic (d, N, trial) order regardless of scheduling.
inline std::vector<RunRecord> run_benchmark(const BenchmarkSpec& spec, int jobs = 1) {
  if (spec.trials < 1) throw ValidationError("benchmark needs trials >= 1");
  for (size_t i = 0; i + 1 < spec.sizes.size(); ++i)
    if (!(spec.sizes[i] < spec.sizes[i + 1]))
      throw ValidationError("benchmark sizes must be strictly increasing");

  struct Cell {
    int d, n;
  };
  std::vector<Cell> cells;
  for (int d : spec.dims)
    for (int n : spec.sizes) cells.push_back({d, n});

  std::vector<std::vector<RunRecord>> per_cell(cells.size());
  auto run_cell = [&](size_t idx) {
    const Cell cell = cells[idx];
    double elapsed = 0.0;
    for (int t = 0; t < spec.trials; ++t) {
      if (elapsed >= spec.time_budget_seconds) break;
      // a run that starts inside the budget is kept even if it blows past it:
      // averages are over completed calculations only
      RunRecord rec = benchmark_single(spec, cell.d, cell.n, t);
      elapsed += rec.wall_time_seconds;
      per_cell[idx].push_back(std::move(rec));
    }
    if (per_cell[idx].empty()) {
      RunRecord rec;
      rec.d = cell.d;
      rec.n = cell.n;
      rec.trial = -1;
      rec.status = "budget_exhausted";
      per_cell[idx].push_back(std::move(rec));
    }
  };

  if (jobs <= 1) {
    for (size_t i = 0; i < cells.size(); ++i) run_cell(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    const int workers = std::min<int>(jobs, int(cells.size()));
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1))
          run_cell(i);
      });
    for (auto& th : pool) th.join();
  }

  std::vector<RunRecord> out;
  for (auto& cell : per_cell)
    for (auto& rec : cell) out.push_back(std::move(rec));
  return out;
}

/// Least-squares slope of log(y) against log(x); the scaling exponent check.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw ValidationError("loglog_slope needs two or more points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  long n = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) continue;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) throw ValidationError("loglog_slope needs two or more positive points");
  return (double(n) * sxy - sx * sy) / (double(n) * sxx - sx * sx);
}

}  // namespace egw

#endif  // EGW_BENCHMARK_HPP
