#include "perslab/sampler.hpp"

#include <fftw3.h>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <boost/random/normal_distribution.hpp>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>
#include <utility>

#include "perslab/errors.hpp"

namespace perslab {

namespace {

// The FFTW planner is not reentrant; execution of an existing plan is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

FftwBuffer<fftw_complex> complex_buffer(std::int64_t n) {
  auto* p = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(n)));
  if (p == nullptr) throw std::bad_alloc();
  return FftwBuffer<fftw_complex>(p);
}

FftwBuffer<double> real_buffer(std::int64_t n) {
  auto* p = static_cast<double*>(fftw_malloc(sizeof(double) * static_cast<std::size_t>(n)));
  if (p == nullptr) throw std::bad_alloc();
  return FftwBuffer<double>(p);
}

class Plan {
 public:
  Plan() = default;
  explicit Plan(fftw_plan p) : plan_(p) {
    if (p == nullptr) throw std::runtime_error("FFTW plan creation failed");
  }
  Plan(Plan&& other) noexcept : plan_(std::exchange(other.plan_, nullptr)) {}
  Plan& operator=(Plan&& other) noexcept {
    std::swap(plan_, other.plan_);
    return *this;
  }
  ~Plan() {
    if (plan_ != nullptr) {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan_);
    }
  }
  fftw_plan get() const { return plan_; }

 private:
  fftw_plan plan_ = nullptr;
};

Plan complex_plan(std::int64_t n, int sign) {
  auto in = complex_buffer(n);
  auto out = complex_buffer(n);
  std::lock_guard lock(planner_mutex());
  return Plan(fftw_plan_dft_1d(static_cast<int>(n), in.get(), out.get(), sign, FFTW_ESTIMATE));
}

std::int64_t fft_friendly_size(std::int64_t minimum) {
  std::int64_t size = 1;
  while (size < minimum) size *= 2;
  // 3 * 2^k is often closer and FFTW handles it just as well.
  if (size % 4 == 0 && 3 * (size / 4) >= minimum) size = 3 * (size / 4);
  return size;
}

void check_paths(std::int64_t n_paths) {
  if (n_paths <= 0) throw DomainError("number of paths must be positive");
}

// Cholesky factor with diagonal jitter escalation; the jitter used is
// written to `jitter`.
Eigen::MatrixXd cholesky_with_jitter(const Eigen::MatrixXd& cov, double& jitter) {
  const Eigen::Index n = cov.rows();
  for (double eps : {0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8}) {
    Eigen::MatrixXd a = cov;
    a.diagonal().array() += eps;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) {
      jitter = eps;
      return llt.matrixL();
    }
  }
  std::ostringstream msg;
  msg << "Cholesky failed for a " << n << "x" << n << " covariance even with jitter 1e-8";
  throw EmbeddingError(msg.str());
}

}  // namespace

GridSpec::GridSpec(double horizon, std::int64_t points) : horizon_(horizon), points_(points) {
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw DomainError("grid horizon must be finite and >= 0");
  if (points < 1) throw DomainError("grid needs at least one point");
  if ((horizon == 0.0) != (points == 1)) {
    throw DomainError("a single-point grid must have zero horizon and vice versa");
  }
}

GridSpec GridSpec::from_step(double horizon, double step) {
  if (!(step > 0.0) || !std::isfinite(step)) throw DomainError("grid step must be positive");
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw DomainError("grid horizon must be finite and >= 0");
  const double cells = horizon / step;
  if (cells > 1e9) throw GridTooLargeError("grid would exceed 1e9 points");
  return GridSpec(horizon, static_cast<std::int64_t>(std::llround(cells)) + 1);
}

double GridSpec::at(std::int64_t i) const {
  if (i == points_ - 1) return horizon_;
  return static_cast<double>(i) * step();
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag) {
  // splitmix64 finalizer applied to the master seed, then to the tag.
  const auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(master) ^ tag);
}

NormalStream::NormalStream(std::uint64_t master_seed, std::uint64_t stream) {
  engine_.seed(derive_seed(master_seed, stream));
}

double NormalStream::operator()() {
  boost::random::normal_distribution<double> dist;
  return dist(engine_);
}

void NormalStream::fill(std::span<double> out, double scale) {
  boost::random::normal_distribution<double> dist;
  for (double& v : out) v = scale * dist(engine_);
}

int resolve_workers(int workers) {
  if (workers < 0) throw DomainError("worker count must be >= 0");
  if (workers == 0) return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return workers;
}

void parallel_for(std::int64_t count, int workers, std::int64_t grain,
                  const std::function<void(std::int64_t, std::int64_t, int)>& body) {
  if (count <= 0) return;
  grain = std::max<std::int64_t>(1, grain);
  const std::int64_t chunks = (count + grain - 1) / grain;
  const int threads = static_cast<int>(std::min<std::int64_t>(resolve_workers(workers), chunks));
  if (threads == 1) {
    body(0, count, 0);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&](int worker) {
    try {
      for (;;) {
        const std::int64_t chunk = next.fetch_add(1);
        if (chunk >= chunks) break;
        const std::int64_t begin = chunk * grain;
        body(begin, std::min(count, begin + grain), worker);
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next.store(chunks);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads - 1));
  for (int w = 1; w < threads; ++w) pool.emplace_back(run, w);
  run(0);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// ToeplitzSampler

struct ToeplitzSampler::Circulant {
  std::int64_t size = 0;
  std::vector<double> scale;  // sqrt(lambda_k / size)
  Plan plan;
};

struct ToeplitzSampler::Dense {
  Eigen::MatrixXd lower;
};

ToeplitzSampler::ToeplitzSampler(std::int64_t n, const std::function<double(std::int64_t)>& covariance)
    : n_(n) {
  if (n < 1) throw DomainError("ToeplitzSampler: size must be positive");
  const double c0 = covariance(0);
  if (!(c0 > 0.0) || !std::isfinite(c0)) throw DomainError("ToeplitzSampler: variance must be positive");
  if (n == 1) {
    report_.method = "direct";
    report_.extension = "none";
    dense_ = std::make_unique<Dense>();
    dense_->lower = Eigen::MatrixXd::Constant(1, 1, std::sqrt(c0));
    return;
  }
  if (!try_circulant(covariance)) build_dense(covariance);
}

ToeplitzSampler::~ToeplitzSampler() = default;

namespace {

// C-infinity step falling from 1 at x = 0 to 0 at x = 1.
double smooth_taper(double x) {
  if (x <= 0.0) return 1.0;
  if (x >= 1.0) return 0.0;
  const double a = std::exp(-1.0 / (1.0 - x));
  const double b = std::exp(-1.0 / x);
  return a / (a + b);
}

// Embedding lengths to try: the minimal even extension first, then
// FFT-friendly lengths (2^k and 3 * 2^k) up to 64 times that.
std::vector<std::int64_t> embedding_sizes(std::int64_t base) {
  std::vector<std::int64_t> sizes{base};
  for (std::int64_t p = 1; p <= 64 * base; p *= 2) {
    for (std::int64_t s : {p, 3 * p}) {
      if (s > base && s <= 64 * base) sizes.push_back(s);
    }
  }
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  return sizes;
}

}  // namespace

bool ToeplitzSampler::try_circulant(const std::function<double(std::int64_t)>& covariance) {
  // Lags 0..n-1 fix the circulant's first n entries of each half; the
  // entries between n-1 and m/2 are free. Past the minimal length they are
  // the covariance rolled off by a smooth taper, which keeps the spectrum
  // nonnegative at far shorter lengths than plain continuation when the
  // covariance is still sizeable at lag n-1. Covariances of the sampled
  // window are exact either way.
  const std::int64_t base = 2 * (n_ - 1);
  const auto last = static_cast<double>(n_ - 1);
  double worst_min = 0.0;
  std::int64_t worst_size = 0;
  for (std::int64_t m : embedding_sizes(base)) {
    const std::int64_t half = m / 2;
    auto row = complex_buffer(m);
    auto spectrum = complex_buffer(m);
    for (std::int64_t k = 0; k <= half; ++k) {
      double c = covariance(k);
      if (!std::isfinite(c)) throw DomainError("ToeplitzSampler: non-finite covariance");
      if (m > base && k > n_ - 1) c *= smooth_taper((static_cast<double>(k) - last) / (static_cast<double>(half) - last));
      row[k][0] = c;
      row[k][1] = 0.0;
      if (k > 0 && k < half) {
        row[m - k][0] = c;
        row[m - k][1] = 0.0;
      }
    }
    Plan forward;
    {
      std::lock_guard lock(planner_mutex());
      forward = Plan(fftw_plan_dft_1d(static_cast<int>(m), row.get(), spectrum.get(), FFTW_FORWARD, FFTW_ESTIMATE));
    }
    fftw_execute(forward.get());
    double min_eig = spectrum[0][0];
    double negative = 0.0;
    double total = 0.0;
    for (std::int64_t k = 0; k < m; ++k) {
      const double lambda = spectrum[k][0];
      min_eig = std::min(min_eig, lambda);
      if (lambda < 0.0) negative -= lambda;
      total += std::max(lambda, 0.0);
    }
    if (min_eig < -1e-9) {
      worst_min = min_eig;
      worst_size = m;
      continue;
    }
    auto circ = std::make_unique<Circulant>();
    circ->size = m;
    circ->scale.resize(static_cast<std::size_t>(m));
    for (std::int64_t k = 0; k < m; ++k) {
      circ->scale[static_cast<std::size_t>(k)] = std::sqrt(std::max(spectrum[k][0], 0.0) / static_cast<double>(m));
    }
    circ->plan = complex_plan(m, FFTW_FORWARD);
    report_.method = "circulant";
    report_.extension = m > base ? "tapered" : "even";
    report_.embedding_size = m;
    report_.min_eigenvalue = min_eig;
    report_.clipped_mass = total > 0.0 ? negative / total : 0.0;
    circulant_ = std::move(circ);
    return true;
  }
  std::ostringstream msg;
  msg << "circulant embedding indefinite up to length " << worst_size << " (min eigenvalue " << worst_min
      << "); using Cholesky";
  report_.warnings.push_back(msg.str());
  report_.min_eigenvalue = worst_min;
  return false;
}

void ToeplitzSampler::build_dense(const std::function<double(std::int64_t)>& covariance) {
  if (n_ > 20000) throw EmbeddingError("Toeplitz matrix too large for the Cholesky fallback");
  std::vector<double> c(static_cast<std::size_t>(n_));
  for (std::int64_t k = 0; k < n_; ++k) c[static_cast<std::size_t>(k)] = covariance(k);
  Eigen::MatrixXd cov(n_, n_);
  for (Eigen::Index i = 0; i < n_; ++i) {
    for (Eigen::Index j = 0; j < n_; ++j) cov(i, j) = c[static_cast<std::size_t>(std::abs(i - j))];
  }
  dense_ = std::make_unique<Dense>();
  dense_->lower = cholesky_with_jitter(cov, report_.jitter);
  report_.method = "cholesky";
  report_.extension = "none";
  report_.embedding_size = 0;
}

void ToeplitzSampler::for_each_path(
    std::int64_t n_paths, std::uint64_t master_seed, int workers,
    const std::function<void(std::int64_t, std::span<const double>, int)>& visit) const {
  check_paths(n_paths);
  if (circulant_) {
    // One complex FFT yields two independent paths (real and imaginary
    // parts); pair p draws from stream p.
    const Circulant& circ = *circulant_;
    const std::int64_t pairs = (n_paths + 1) / 2;
    parallel_for(pairs, workers, 16, [&](std::int64_t begin, std::int64_t end, int worker) {
      const std::int64_t m = circ.size;
      auto in = complex_buffer(m);
      auto out = complex_buffer(m);
      std::vector<double> normals(static_cast<std::size_t>(2 * m));
      std::vector<double> path(static_cast<std::size_t>(n_));
      for (std::int64_t p = begin; p < end; ++p) {
        NormalStream stream(master_seed, static_cast<std::uint64_t>(p));
        stream.fill(normals);
        for (std::int64_t k = 0; k < m; ++k) {
          const double s = circ.scale[static_cast<std::size_t>(k)];
          in[k][0] = s * normals[static_cast<std::size_t>(2 * k)];
          in[k][1] = s * normals[static_cast<std::size_t>(2 * k + 1)];
        }
        fftw_execute_dft(circ.plan.get(), in.get(), out.get());
        for (std::int64_t i = 0; i < n_; ++i) path[static_cast<std::size_t>(i)] = out[i][0];
        visit(2 * p, path, worker);
        if (2 * p + 1 < n_paths) {
          for (std::int64_t i = 0; i < n_; ++i) path[static_cast<std::size_t>(i)] = out[i][1];
          visit(2 * p + 1, path, worker);
        }
      }
    });
    return;
  }
  const Eigen::MatrixXd& lower = dense_->lower;
  parallel_for(n_paths, workers, 16, [&](std::int64_t begin, std::int64_t end, int worker) {
    Eigen::VectorXd z(n_);
    Eigen::VectorXd x(n_);
    for (std::int64_t p = begin; p < end; ++p) {
      NormalStream stream(master_seed, static_cast<std::uint64_t>(p));
      stream.fill(std::span<double>(z.data(), static_cast<std::size_t>(n_)));
      x.noalias() = lower.triangularView<Eigen::Lower>() * z;
      visit(p, std::span<const double>(x.data(), static_cast<std::size_t>(n_)), worker);
    }
  });
}

std::vector<std::vector<double>> ToeplitzSampler::draw(std::int64_t n_paths, std::uint64_t master_seed,
                                                       int workers) const {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(n_paths));
  for_each_path(n_paths, master_seed, workers, [&](std::int64_t i, std::span<const double> values, int) {
    out[static_cast<std::size_t>(i)].assign(values.begin(), values.end());
  });
  return out;
}

// ---------------------------------------------------------------------------
// Samplers

PathBatch sample_gsp(const CorrelationSpec& spec, const GridSpec& grid, std::int64_t n_paths,
                     std::uint64_t master_seed, int workers) {
  check_paths(n_paths);
  const double step = grid.step();
  ToeplitzSampler sampler(grid.points(), [&](std::int64_t k) {
    return corr_eval(spec, static_cast<double>(k) * step);
  });
  PathBatch batch{grid, spec, "GSP " + spec.describe(), master_seed, resolve_workers(workers), sampler.report(), {}};
  batch.paths = sampler.draw(n_paths, master_seed, workers);
  return batch;
}

namespace {

double fgn_covariance(double hurst, std::int64_t k) {
  const double x = static_cast<double>(k);
  const double two_h = 2.0 * hurst;
  if (k == 0) return 1.0;
  return 0.5 * (std::pow(x + 1.0, two_h) - 2.0 * std::pow(x, two_h) + std::pow(x - 1.0, two_h));
}

std::string with_hurst(const char* name, double hurst) {
  std::ostringstream out;
  out.precision(17);
  out << name << "(H=" << hurst << ')';
  return out.str();
}

}  // namespace

PathBatch sample_fbm(double hurst, const GridSpec& grid, std::int64_t n_paths, std::uint64_t master_seed,
                     int workers) {
  if (!(hurst > 0.0 && hurst < 1.0)) throw DomainError("sample_fbm: H must lie in (0, 1)");
  check_paths(n_paths);
  PathBatch batch{grid, std::nullopt, with_hurst("FBM", hurst), master_seed, resolve_workers(workers), {}, {}};
  const std::int64_t n = grid.points();
  if (n == 1) {
    batch.report.method = "direct";
    batch.paths.assign(static_cast<std::size_t>(n_paths), std::vector<double>{0.0});
    return batch;
  }
  const double scale = std::pow(grid.step(), hurst);
  ToeplitzSampler noise(n - 1, [hurst](std::int64_t k) { return fgn_covariance(hurst, k); });
  batch.report = noise.report();
  batch.paths.resize(static_cast<std::size_t>(n_paths));
  noise.for_each_path(n_paths, master_seed, workers, [&](std::int64_t i, std::span<const double> inc, int) {
    auto& path = batch.paths[static_cast<std::size_t>(i)];
    path.resize(static_cast<std::size_t>(n));
    path[0] = 0.0;
    double b = 0.0;
    for (std::int64_t k = 0; k + 1 < n; ++k) {
      b += scale * inc[static_cast<std::size_t>(k)];
      path[static_cast<std::size_t>(k + 1)] = b;
    }
  });
  return batch;
}

namespace {

double fbm_cov(double hurst, double s, double t) {
  const double two_h = 2.0 * hurst;
  return 0.5 * (std::pow(s, two_h) + std::pow(t, two_h) - std::pow(std::abs(t - s), two_h));
}

// Cov(I_1, B_t) for t >= 1: the integral over s in [0, 1] of fbm_cov(s, t).
double cov_i1_b(double hurst, double t) {
  const double p = 2.0 * hurst + 1.0;
  return 0.5 * (std::pow(t, 2.0 * hurst) + 1.0 / p - (std::pow(t, p) - std::pow(t - 1.0, p)) / p);
}

// Joint covariance of (I_1, B_{t_0}, B_{t_1} - B_{t_0}, ..., B_{t_m-1} - B_{t_m-2}).
Eigen::MatrixXd ifbm_joint_covariance(double hurst, const std::vector<double>& t) {
  const auto m = static_cast<Eigen::Index>(t.size());
  const double two_h = 2.0 * hurst;
  const auto pw = [two_h](double x) { return std::pow(std::abs(x), two_h); };
  Eigen::MatrixXd cov(m + 1, m + 1);
  cov(0, 0) = 1.0 / (2.0 * hurst + 2.0);
  cov(0, 1) = cov(1, 0) = cov_i1_b(hurst, t[0]);
  cov(1, 1) = std::pow(t[0], two_h);
  for (Eigen::Index k = 1; k < m; ++k) {
    const double hi = t[static_cast<std::size_t>(k)];
    const double lo = t[static_cast<std::size_t>(k - 1)];
    cov(0, k + 1) = cov(k + 1, 0) = cov_i1_b(hurst, hi) - cov_i1_b(hurst, lo);
    cov(1, k + 1) = cov(k + 1, 1) = fbm_cov(hurst, t[0], hi) - fbm_cov(hurst, t[0], lo);
  }
  for (Eigen::Index j = 1; j < m; ++j) {
    const double tj = t[static_cast<std::size_t>(j)];
    const double tj0 = t[static_cast<std::size_t>(j - 1)];
    for (Eigen::Index k = j; k < m; ++k) {
      const double tk = t[static_cast<std::size_t>(k)];
      const double tk0 = t[static_cast<std::size_t>(k - 1)];
      const double c = 0.5 * (pw(tk - tj0) + pw(tk0 - tj) - pw(tk - tj) - pw(tk0 - tj0));
      cov(j + 1, k + 1) = cov(k + 1, j + 1) = c;
    }
  }
  return cov;
}

}  // namespace

PathBatch sample_ifbm_lamperti(double hurst, const GridSpec& tau_grid, std::int64_t n_paths,
                               std::uint64_t master_seed, int workers) {
  if (!(hurst > 0.0 && hurst < 1.0)) throw DomainError("sample_ifbm_lamperti: H must lie in (0, 1)");
  check_paths(n_paths);
  const CorrelationSpec spec = CorrelationSpec::ifbm(hurst);
  PathBatch batch{tau_grid, spec, "IFBM_LAMPERTI path simulation " + spec.describe(), master_seed,
                  resolve_workers(workers), {}, {}};
  batch.report.method = "joint-cholesky";
  const std::int64_t n_tau = tau_grid.points();
  const double normalizer = std::sqrt(2.0 * (1.0 + hurst));

  // Substeps per tau cell: relative t step at most 1e-3, even so that the
  // coarse (every other node) trapezoid gives a Richardson error estimate.
  constexpr std::int64_t kMaxNodes = 4000;
  std::int64_t q = 2;
  if (n_tau > 1) {
    q = static_cast<std::int64_t>(std::ceil(tau_grid.step() / std::log1p(1e-3)));
    q += q % 2;
    const std::int64_t cap = std::max<std::int64_t>(2, ((kMaxNodes - 1) / (n_tau - 1)) / 2 * 2);
    if (q > cap) {
      std::ostringstream msg;
      msg << "t grid capped at " << kMaxNodes << " nodes; relative step " << std::expm1(tau_grid.step() / cap)
          << " exceeds 1e-3";
      batch.report.warnings.push_back(msg.str());
      q = cap;
    }
  }
  const std::int64_t m = n_tau > 1 ? q * (n_tau - 1) + 1 : 1;
  const double h = n_tau > 1 ? tau_grid.step() / static_cast<double>(q) : 0.0;
  std::vector<double> t(static_cast<std::size_t>(m));
  for (std::int64_t k = 0; k < m; ++k) t[static_cast<std::size_t>(k)] = std::exp(static_cast<double>(k) * h);

  const Eigen::MatrixXd lower = cholesky_with_jitter(ifbm_joint_covariance(hurst, t), batch.report.jitter);
  batch.report.embedding_size = m + 1;

  // Fixed blocks of paths so the matrix products do not depend on workers.
  constexpr std::int64_t kBlock = 64;
  const std::int64_t blocks = (n_paths + kBlock - 1) / kBlock;
  batch.paths.resize(static_cast<std::size_t>(n_paths));
  std::vector<double> block_error(static_cast<std::size_t>(blocks), 0.0);
  parallel_for(blocks, workers, 1, [&](std::int64_t begin, std::int64_t end, int) {
    const Eigen::Index dim = lower.rows();
    for (std::int64_t b = begin; b < end; ++b) {
      const std::int64_t first = b * kBlock;
      const std::int64_t count = std::min(kBlock, n_paths - first);
      Eigen::MatrixXd z(dim, count);
      for (std::int64_t j = 0; j < count; ++j) {
        NormalStream stream(master_seed, static_cast<std::uint64_t>(first + j));
        stream.fill(std::span<double>(z.col(j).data(), static_cast<std::size_t>(dim)));
      }
      const Eigen::MatrixXd y = lower.triangularView<Eigen::Lower>() * z;
      double squares = 0.0;
      for (std::int64_t j = 0; j < count; ++j) {
        double worst = 0.0;
        auto& path = batch.paths[static_cast<std::size_t>(first + j)];
        path.resize(static_cast<std::size_t>(n_tau));
        const double i1 = y(0, j);
        double bprev = y(1, j);
        double fine = i1;    // trapezoid with all nodes
        double coarse = i1;  // trapezoid with every other node
        double bhalf = bprev;
        path[0] = normalizer * i1;
        for (std::int64_t k = 1; k < m; ++k) {
          const double bk = bprev + y(k + 1, j);
          fine += 0.5 * (t[static_cast<std::size_t>(k)] - t[static_cast<std::size_t>(k - 1)]) * (bprev + bk);
          if (k % 2 == 0) {
            coarse += 0.5 * (t[static_cast<std::size_t>(k)] - t[static_cast<std::size_t>(k - 2)]) * (bhalf + bk);
            bhalf = bk;
          }
          if (k % q == 0) {
            const double s = static_cast<double>(k) * h;
            const double weight = normalizer * std::exp(-(1.0 + hurst) * s);
            path[static_cast<std::size_t>(k / q)] = weight * fine;
            worst = std::max(worst, weight * std::abs(fine - coarse) / 3.0);
          }
          bprev = bk;
        }
        squares += worst * worst;
      }
      block_error[static_cast<std::size_t>(b)] = squares;
    }
  });
  // Root mean square over paths of the largest per-path Richardson
  // estimate, on the unit-variance scale.
  double squares = 0.0;
  for (double e : block_error) squares += e;
  const double error = std::sqrt(squares / static_cast<double>(n_paths));
  batch.report.discretization_error = error;
  if (error > 1e-3) {
    std::ostringstream msg;
    msg << "trapezoid error estimate " << error << " exceeds 1e-3; refine the tau grid";
    batch.report.warnings.push_back(msg.str());
  }
  return batch;
}

namespace {

// Convolution of Brownian increments with the cell-averaged RL kernel.
class RlKernel {
 public:
  RlKernel(double hurst, double step, std::int64_t cells) : cells_(cells), unit_(hurst == 0.5) {
    if (unit_ || cells == 0) return;
    const double a = hurst + 0.5;
    const double scale = std::pow(step, hurst - 0.5) / a;
    size_ = fft_friendly_size(2 * cells);
    auto kernel = real_buffer(size_);
    std::fill(kernel.get(), kernel.get() + size_, 0.0);
    for (std::int64_t k = 0; k < cells; ++k) {
      const double x = static_cast<double>(k);
      kernel[k] = scale * (std::pow(x + 1.0, a) - std::pow(x, a));
    }
    const std::int64_t bins = size_ / 2 + 1;
    auto spectrum = complex_buffer(bins);
    auto in = real_buffer(size_);
    auto freq = complex_buffer(bins);
    Plan kplan;
    {
      std::lock_guard lock(planner_mutex());
      kplan = Plan(fftw_plan_dft_r2c_1d(static_cast<int>(size_), kernel.get(), spectrum.get(), FFTW_ESTIMATE));
    }
    fftw_execute(kplan.get());
    kernel_hat_.resize(static_cast<std::size_t>(bins));
    for (std::int64_t k = 0; k < bins; ++k) {
      kernel_hat_[static_cast<std::size_t>(k)] = {spectrum[k][0] / static_cast<double>(size_),
                                                  spectrum[k][1] / static_cast<double>(size_)};
    }
    std::lock_guard lock(planner_mutex());
    forward_ = Plan(fftw_plan_dft_r2c_1d(static_cast<int>(size_), in.get(), freq.get(), FFTW_ESTIMATE));
    backward_ = Plan(fftw_plan_dft_c2r_1d(static_cast<int>(size_), freq.get(), in.get(), FFTW_ESTIMATE));
  }

  struct Workspace {
    FftwBuffer<double> real;
    FftwBuffer<fftw_complex> freq;
  };

  Workspace workspace() const {
    if (unit_ || cells_ == 0) return {};
    return {real_buffer(size_), complex_buffer(size_ / 2 + 1)};
  }

  // out[0] = 0, out[j] = sum_{i<j} k_{j-1-i} dB_i.
  void apply(std::span<const double> increments, std::span<double> out, Workspace& ws) const {
    out[0] = 0.0;
    if (unit_ || cells_ == 0) {
      double acc = 0.0;
      for (std::int64_t j = 0; j < cells_; ++j) {
        acc += increments[static_cast<std::size_t>(j)];
        out[static_cast<std::size_t>(j + 1)] = acc;
      }
      return;
    }
    std::copy(increments.begin(), increments.begin() + cells_, ws.real.get());
    std::fill(ws.real.get() + cells_, ws.real.get() + size_, 0.0);
    fftw_execute_dft_r2c(forward_.get(), ws.real.get(), ws.freq.get());
    const std::int64_t bins = size_ / 2 + 1;
    for (std::int64_t k = 0; k < bins; ++k) {
      const std::complex<double> v(ws.freq[k][0], ws.freq[k][1]);
      const std::complex<double> r = v * kernel_hat_[static_cast<std::size_t>(k)];
      ws.freq[k][0] = r.real();
      ws.freq[k][1] = r.imag();
    }
    fftw_execute_dft_c2r(backward_.get(), ws.freq.get(), ws.real.get());
    for (std::int64_t j = 0; j < cells_; ++j) out[static_cast<std::size_t>(j + 1)] = ws.real[j];
  }

 private:
  std::int64_t cells_;
  bool unit_;
  std::int64_t size_ = 0;
  std::vector<std::complex<double>> kernel_hat_;
  Plan forward_;
  Plan backward_;
};

}  // namespace

std::vector<double> rl_from_increments(double hurst, double step, std::span<const double> increments) {
  if (!(hurst > 0.0) || !std::isfinite(hurst)) throw DomainError("rl_from_increments: H must be positive");
  if (!(step > 0.0)) throw DomainError("rl_from_increments: step must be positive");
  const auto cells = static_cast<std::int64_t>(increments.size());
  RlKernel kernel(hurst, step, cells);
  auto ws = kernel.workspace();
  std::vector<double> out(static_cast<std::size_t>(cells + 1));
  kernel.apply(increments, out, ws);
  return out;
}

PathBatch sample_rl(double hurst, const GridSpec& t_grid, std::int64_t n_paths, std::uint64_t master_seed,
                    int workers) {
  if (!(hurst > 0.0) || !std::isfinite(hurst)) throw DomainError("sample_rl: H must be positive");
  check_paths(n_paths);
  PathBatch batch{t_grid, std::nullopt, with_hurst("RL", hurst), master_seed, resolve_workers(workers), {}, {}};
  batch.report.method = "kernel-convolution";
  const std::int64_t cells = t_grid.points() - 1;
  const double step = t_grid.step();
  const RlKernel kernel(hurst, cells > 0 ? step : 1.0, cells);
  batch.paths.resize(static_cast<std::size_t>(n_paths));
  parallel_for(n_paths, workers, 16, [&](std::int64_t begin, std::int64_t end, int) {
    auto ws = kernel.workspace();
    std::vector<double> inc(static_cast<std::size_t>(cells));
    for (std::int64_t p = begin; p < end; ++p) {
      NormalStream stream(master_seed, static_cast<std::uint64_t>(p));
      stream.fill(inc, std::sqrt(step));
      auto& path = batch.paths[static_cast<std::size_t>(p)];
      path.resize(static_cast<std::size_t>(cells + 1));
      kernel.apply(inc, path, ws);
    }
  });
  return batch;
}

std::vector<double> lamperti(std::span<const double> t_values, std::span<const double> x_values, double alpha,
                             double normalizer, const GridSpec& tau_grid) {
  if (!(alpha > 0.0)) throw DomainError("lamperti: alpha must be positive");
  if (t_values.size() != x_values.size() || t_values.empty()) {
    throw DomainError("lamperti: t and x must be nonempty and of equal length");
  }
  if (!std::is_sorted(t_values.begin(), t_values.end())) throw DomainError("lamperti: t must be sorted");
  const double t_end = std::exp(tau_grid.horizon());
  constexpr double kSlack = 1e-12;
  if (t_values.front() > 1.0 + kSlack || t_values.back() < t_end * (1.0 - kSlack)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "lamperti: t grid [" << t_values.front() << ", " << t_values.back() << "] does not span [1, " << t_end
        << "]";
    throw CoverageError(msg.str());
  }
  std::vector<double> z(static_cast<std::size_t>(tau_grid.points()));
  std::size_t hi = 1;
  for (std::int64_t i = 0; i < tau_grid.points(); ++i) {
    const double tau = tau_grid.at(i);
    const double target = std::clamp(std::exp(tau), t_values.front(), t_values.back());
    double x;
    if (t_values.size() == 1) {
      x = x_values[0];
    } else {
      while (hi + 1 < t_values.size() && t_values[hi] < target) ++hi;
      const double t0 = t_values[hi - 1];
      const double t1 = t_values[hi];
      const double w = t1 > t0 ? (target - t0) / (t1 - t0) : 1.0;
      x = (1.0 - w) * x_values[hi - 1] + w * x_values[hi];
    }
    z[static_cast<std::size_t>(i)] = normalizer * std::exp(-alpha * tau) * x;
  }
  return z;
}

PathBatch lamperti_batch(const PathBatch& batch, double alpha, double normalizer, const GridSpec& tau_grid) {
  std::vector<double> t(static_cast<std::size_t>(batch.grid.points()));
  for (std::int64_t i = 0; i < batch.grid.points(); ++i) t[static_cast<std::size_t>(i)] = batch.grid.at(i);
  PathBatch out{tau_grid, std::nullopt, "Lamperti of " + batch.process, batch.master_seed, batch.worker_count,
                batch.report, {}};
  out.paths.reserve(batch.paths.size());
  for (const auto& path : batch.paths) out.paths.push_back(lamperti(t, path, alpha, normalizer, tau_grid));
  return out;
}

}  // namespace perslab
