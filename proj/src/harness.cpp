#include "mfband/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

namespace mfband {

std::string to_string(BandMethod m) { return m == BandMethod::mpb ? "mpb" : "cub"; }

BandMethod band_method_from_string(const std::string& s) {
  if (s == "mpb") return BandMethod::mpb;
  if (s == "cub") return BandMethod::cub;
  throw SchemaError("unknown band method '" + s + "' (expected mpb or cub)");
}

void StudyConfig::validate() const {
  scenario.validate();
  TrimConfig{alpha, mode, 0.5}.validate();
  if (modulation == ModulationKind::sbar_c)
    throw Error("sbar_c depends on the calibration set and cannot be studied");
  if (replications < 1) throw Error("study needs at least one replication");
  if (l < 1 || l + 1 > scenario.n)
    throw Error("calibration size l=" + std::to_string(l) + " must lie in [1, n-1]");
  if (method == BandMethod::cub && mode != ConformalMode::split)
    throw Error("the CUB method is defined for split mode only");
}

CoverageInterval coverage_ci(std::size_t hits, std::size_t n) {
  if (n == 0) throw Error("coverage_ci: no replications");
  if (hits > n) throw Error("coverage_ci: more hits than replications");
  const double p = static_cast<double>(hits) / static_cast<double>(n);
  const double half = 1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
  return {p, p - half, p + half};
}

Quartiles size_quartiles(std::vector<double> sizes) {
  if (sizes.empty()) throw Error("size_quartiles: empty list");
  std::sort(sizes.begin(), sizes.end());
  auto q = [&](double prob) {
    const double h = (static_cast<double>(sizes.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sizes.size() - 1);
    return sizes[lo] + (h - static_cast<double>(lo)) * (sizes[hi] - sizes[lo]);
  };
  return {q(0.25), q(0.5), q(0.75)};
}

double theoretical_coverage(const StudyConfig& cfg) {
  if (cfg.mode == ConformalMode::smoothed) return 1.0 - cfg.alpha;
  return split_coverage(cfg.l, cfg.alpha);
}

std::uint64_t replication_seed(std::uint64_t master, std::size_t r) {
  return mix_seed(mix_seed(master) ^ mix_seed(static_cast<std::uint64_t>(r) + 1));
}

std::size_t default_threads() {
  if (const char* env = std::getenv("MFBAND_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

ReplicationRecord run_replication(const StudyConfig& cfg, std::size_t r) {
  Rng rng(replication_seed(cfg.seed, r));
  ScenarioSpec spec = cfg.scenario;
  spec.rep_seed = rng.next_u64();
  const std::size_t test_index = rng.below(spec.n + 1);
  const std::uint64_t split_seed = rng.next_u64();
  const double tau = rng.uniform();

  const Dataset all = generate_pairs(spec);
  const SimSample sample = hold_out(all, test_index);
  const Split split = random_split(sample.data.size(), cfg.l, split_seed);
  const RegressorSpec reg = covariate_set_spec(spec.study, spec.scenario, spec.covariate_set);
  const TrimConfig trim{cfg.alpha, cfg.mode, cfg.mode == ConformalMode::smoothed ? tau : 1.0};

  ReplicationRecord rec;
  rec.tau = trim.tau;
  const BandPredictor pred =
      calibrate_predictor(sample.data, split, reg, cfg.modulation, trim);

  if (cfg.method == BandMethod::cub) {
    const auto radii =
        cub_radii(residuals(pred.model, sample.data, split.calib), pred.modulation, cfg.alpha);
    const Band band = cub_band_around(predict(pred.model, sample.test_x), pred.modulation, radii);
    rec.covered = contains(band, sample.test_y);
    rec.size = band_area(band, sample.data.grid);
    rec.radius = *std::max_element(radii.begin(), radii.end());
    return rec;
  }

  const Band band = make_band(pred, sample.test_x);
  rec.covered = contains(band, sample.test_y);
  rec.infinite = pred.calibration.infinite;
  if (!rec.infinite) {
    rec.size = band_size(pred);
    rec.radius = pred.calibration.radius;
  }
  return rec;
}

StudyReport run_study(const StudyConfig& cfg) {
  cfg.validate();
  const std::size_t N = cfg.replications;
  std::vector<ReplicationRecord> records(N);
  std::vector<std::string> errors(N);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < N; r = next++) {
      try {
        records[r] = run_replication(cfg, r);
      } catch (const std::exception& e) {
        records[r].failed = true;
        errors[r] = e.what();
      }
    }
  };
  const std::size_t threads = std::min(N, cfg.threads ? cfg.threads : default_threads());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  StudyReport report;
  report.config = cfg;
  report.theoretical_coverage = theoretical_coverage(cfg);
  std::vector<double> sizes;
  for (std::size_t r = 0; r < N; ++r) {
    const auto& rec = records[r];
    if (rec.failed) {
      if (!cfg.skip_failures) throw Error("replication " + std::to_string(r) + ": " + errors[r]);
      ++report.failures;
      continue;
    }
    ++report.replications;
    if (rec.covered) ++report.hits;
    if (!rec.infinite) sizes.push_back(rec.size);
  }
  if (report.replications == 0) throw Error("every replication failed");
  report.coverage = coverage_ci(report.hits, report.replications);
  if (!sizes.empty()) report.size = size_quartiles(std::move(sizes));
  if (cfg.keep_records) report.records = std::move(records);
  return report;
}

}  // namespace mfband
