#pragma once

#include "mfband/conformal.hpp"
#include "mfband/modulate.hpp"
#include "mfband/simgen.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mfband {

enum class BandMethod { mpb, cub };
std::string to_string(BandMethod m);
BandMethod band_method_from_string(const std::string& s);

struct StudyConfig {
  ScenarioSpec scenario;  // rep_seed is ignored; each replication derives its own
  ModulationKind modulation = ModulationKind::sigma;
  ConformalMode mode = ConformalMode::split;
  BandMethod method = BandMethod::mpb;
  double alpha = 0.1;
  std::size_t l = 9;
  std::size_t replications = 1000;
  std::uint64_t seed = 1;
  std::size_t threads = 0;  // 0: MFBAND_THREADS or hardware concurrency
  bool skip_failures = false;
  bool keep_records = false;

  void validate() const;
};

struct ReplicationRecord {
  bool covered = false;
  bool infinite = false;
  double size = 0.0;  // Q = 2k for MPB, summed band area for CUB
  double radius = 0.0;
  double tau = 1.0;
  bool failed = false;
};

struct CoverageInterval {
  double p = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct Quartiles {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

struct StudyReport {
  StudyConfig config;
  std::size_t replications = 0;  // successful ones
  std::size_t failures = 0;
  std::size_t hits = 0;
  CoverageInterval coverage;
  std::optional<Quartiles> size;  // absent when every band was infinite
  double theoretical_coverage = 0.0;
  std::vector<ReplicationRecord> records;
};

// p +/- 1.96 sqrt(p(1-p)/N).
CoverageInterval coverage_ci(std::size_t hits, std::size_t n);
// Quartiles with linear interpolation between closest ranks.
Quartiles size_quartiles(std::vector<double> sizes);
// 1 - floor((l+1)alpha)/(l+1) in split mode, 1 - alpha in smoothed mode.
double theoretical_coverage(const StudyConfig& cfg);

// Seed of replication r under a master seed.
std::uint64_t replication_seed(std::uint64_t master, std::size_t r);
ReplicationRecord run_replication(const StudyConfig& cfg, std::size_t r);
StudyReport run_study(const StudyConfig& cfg);

std::size_t default_threads();

}  // namespace mfband
