#pragma once

// Exact Gaussian path generation: stationary sequences with Toeplitz
// covariance (circulant embedding, Cholesky fallback), FBM, integrated FBM
// and Riemann-Liouville paths, and the Lamperti map between them.

#include <complex>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <boost/random/mersenne_twister.hpp>
#include <span>
#include <string>
#include <vector>

#include "perslab/correlation.hpp"

namespace perslab {

/// Uniform grid {0, step, ..., horizon} with `points` nodes. The
/// degenerate grid horizon = 0, points = 1 is allowed.
class GridSpec {
 public:
  GridSpec(double horizon, std::int64_t points);

  /// Grid with spacing as close to `step` as divides `horizon` evenly.
  static GridSpec from_step(double horizon, double step);

  double horizon() const { return horizon_; }
  std::int64_t points() const { return points_; }
  double step() const { return points_ > 1 ? horizon_ / static_cast<double>(points_ - 1) : 0.0; }
  double at(std::int64_t i) const;

 private:
  double horizon_;
  std::int64_t points_;
};

/// Well-mixed 64-bit seed for substream `tag` of `master`.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag);

/// Gaussian generator for one substream. Streams are identified by
/// (master seed, stream index) so that the values drawn for a given index
/// do not depend on which worker draws them.
class NormalStream {
 public:
  NormalStream(std::uint64_t master_seed, std::uint64_t stream);
  double operator()();
  void fill(std::span<double> out, double scale = 1.0);

 private:
  boost::random::mt19937_64 engine_;
};

/// Runs body(begin, end, worker) over [0, count) split into chunks of
/// `grain`; workers == 0 means one per hardware thread. Exceptions thrown
/// by a worker are rethrown in the caller.
void parallel_for(std::int64_t count, int workers, std::int64_t grain,
                  const std::function<void(std::int64_t, std::int64_t, int)>& body);

int resolve_workers(int workers);

struct SamplingReport {
  std::string method;           // "circulant", "cholesky" or "direct"
  std::string extension;        // circulant only: "even" (minimal) or "tapered"
  std::int64_t embedding_size = 0;
  double clipped_mass = 0.0;    // clipped negative eigenvalue mass / total
  double min_eigenvalue = 0.0;
  double jitter = 0.0;          // diagonal jitter used by the Cholesky route
  double discretization_error = 0.0;  // path simulators: quadrature error estimate
  std::vector<std::string> warnings;
};

/// Sampler for a centered Gaussian vector of length n with covariance
/// matrix (c_{|i-j|}). Construction does all factorization work; drawing
/// is const and thread-safe.
class ToeplitzSampler {
 public:
  /// `covariance(k)` must be defined for every k >= 0 (values beyond n - 1
  /// are only used when the minimal circulant embedding is indefinite).
  ToeplitzSampler(std::int64_t n, const std::function<double(std::int64_t)>& covariance);
  ~ToeplitzSampler();
  ToeplitzSampler(const ToeplitzSampler&) = delete;
  ToeplitzSampler& operator=(const ToeplitzSampler&) = delete;

  std::int64_t size() const { return n_; }
  const SamplingReport& report() const { return report_; }

  /// Calls visit(index, values, worker) for paths 0..n_paths-1. Calls may
  /// come from several threads at once; `values` is only valid during the
  /// call. Path i is a function of (master_seed, i) alone.
  void for_each_path(std::int64_t n_paths, std::uint64_t master_seed, int workers,
                     const std::function<void(std::int64_t, std::span<const double>, int)>& visit) const;

  /// Stores every path, row-major, index order.
  std::vector<std::vector<double>> draw(std::int64_t n_paths, std::uint64_t master_seed, int workers) const;

 private:
  struct Circulant;
  struct Dense;

  bool try_circulant(const std::function<double(std::int64_t)>& covariance);
  void build_dense(const std::function<double(std::int64_t)>& covariance);

  std::int64_t n_;
  SamplingReport report_;
  std::unique_ptr<Circulant> circulant_;
  std::unique_ptr<Dense> dense_;
};

/// Collection of sampled paths sharing one grid.
struct PathBatch {
  GridSpec grid;
  std::optional<CorrelationSpec> spec;  // set for stationary batches
  std::string process;                  // e.g. "GSP", "FBM(H=0.7)"
  std::uint64_t master_seed = 0;
  int worker_count = 1;
  SamplingReport report;
  std::vector<std::vector<double>> paths;
};

/// View of one stationary path together with its provenance.
struct StationaryPath {
  GridSpec grid;
  std::vector<double> values;
  std::uint64_t seed = 0;
  std::optional<CorrelationSpec> spec;
};

/// n_paths samples of the stationary Gaussian sequence with covariance
/// corr_eval(spec, k * step).
PathBatch sample_gsp(const CorrelationSpec& spec, const GridSpec& grid, std::int64_t n_paths,
                     std::uint64_t master_seed, int workers = 1);

/// B^H on the grid via circulant embedding of fractional Gaussian noise.
PathBatch sample_fbm(double hurst, const GridSpec& grid, std::int64_t n_paths, std::uint64_t master_seed,
                     int workers = 1);

/// Unit-variance Lamperti transform of integrated FBM on a tau grid. The
/// underlying t grid is geometric on [1, e^T]; the mass of I^H on [0, 1]
/// enters through an exact joint Gaussian draw with the path increments.
PathBatch sample_ifbm_lamperti(double hurst, const GridSpec& tau_grid, std::int64_t n_paths,
                               std::uint64_t master_seed, int workers = 1);

/// R^H on a uniform t grid, driven by Brownian increments with the
/// kernel integrated exactly over each cell.
PathBatch sample_rl(double hurst, const GridSpec& t_grid, std::int64_t n_paths, std::uint64_t master_seed,
                    int workers = 1);

/// Deterministic part of sample_rl: R at grid nodes 0..n-1 from the
/// increments dB_0..dB_{n-2} on a grid of spacing `step`.
std::vector<double> rl_from_increments(double hurst, double step, std::span<const double> increments);

/// Z_tau = normalizer * e^{-alpha tau} X(e^tau) on tau_grid, with linear
/// interpolation in t. Throws CoverageError unless the sorted t values
/// span [1, e^T].
std::vector<double> lamperti(std::span<const double> t_values, std::span<const double> x_values, double alpha,
                             double normalizer, const GridSpec& tau_grid);

/// Lamperti transform of every path of a batch sampled on a uniform t grid.
PathBatch lamperti_batch(const PathBatch& batch, double alpha, double normalizer, const GridSpec& tau_grid);

}  // namespace perslab
