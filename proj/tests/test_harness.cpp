#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mfband/harness.hpp"
#include "oracles.hpp"


#include <cmath>
#include <cstdio>

using namespace mfband;

namespace {

double round3(double x) { return std::round(x * 1000.0) / 1000.0; }

StudyConfig small_config() {
  StudyConfig c;
  c.scenario.study = 1;
  c.scenario.scenario = 1;
  c.scenario.n = 20;
  c.l = 9;
  c.replications = 200;
  c.seed = 2024;
  c.threads = 1;
  c.keep_records = true;
  return c;
}

}  // namespace

TEST_CASE("coverage interval") {
  // 4472 of 5000 reproduces the published row 0.894 [0.886, 0.903]
  const CoverageInterval a = coverage_ci(4472, 5000);
  CHECK(round3(a.p) == doctest::Approx(0.894));
  CHECK(round3(a.lower) == doctest::Approx(0.886));
  CHECK(round3(a.upper) == doctest::Approx(0.903));
  const CoverageInterval b = coverage_ci(4470, 5000);
  CHECK(round3(b.lower) == doctest::Approx(0.885));
  CHECK(round3(b.upper) == doctest::Approx(0.903));
  const CoverageInterval full = coverage_ci(10, 10);
  CHECK(full.lower == 1.0);
  CHECK_THROWS_AS(coverage_ci(3, 2), Error);
  CHECK_THROWS_AS(coverage_ci(0, 0), Error);
}

TEST_CASE("quartiles interpolate between order statistics") {
  const Quartiles q = size_quartiles({4.0, 1.0, 3.0, 2.0, 5.0});
  CHECK(q.q1 == 2.0);
  CHECK(q.median == 3.0);
  CHECK(q.q3 == 4.0);
  const Quartiles e = size_quartiles({1.0, 2.0, 3.0, 4.0});
  CHECK(e.q1 == doctest::Approx(1.75));
  CHECK(e.median == doctest::Approx(2.5));
  CHECK(e.q3 == doctest::Approx(3.25));
  CHECK(size_quartiles({7.0}).median == 7.0);
  CHECK_THROWS_AS(size_quartiles({}), Error);
}

TEST_CASE("theoretical coverage") {
  StudyConfig c = small_config();
  CHECK(theoretical_coverage(c) == doctest::Approx(0.9));
  c.l = 10;
  CHECK(theoretical_coverage(c) == doctest::Approx(10.0 / 11));
  c.mode = ConformalMode::smoothed;
  CHECK(theoretical_coverage(c) == doctest::Approx(0.9));
}

TEST_CASE("config validation") {
  StudyConfig c = small_config();
  c.l = 20;
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_config();
  c.modulation = ModulationKind::sbar_c;
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_config();
  c.method = BandMethod::cub;
  c.mode = ConformalMode::smoothed;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK(band_method_from_string("cub") == BandMethod::cub);
  CHECK_THROWS_AS(band_method_from_string("x"), SchemaError);
}

TEST_CASE("results do not depend on the thread count") {
  StudyConfig c = small_config();
  const StudyReport one = run_study(c);
  c.threads = 3;
  const StudyReport three = run_study(c);
  REQUIRE(one.records.size() == three.records.size());
  for (std::size_t r = 0; r < one.records.size(); ++r) {
    CHECK(one.records[r].covered == three.records[r].covered);
    CHECK(one.records[r].size == three.records[r].size);
    CHECK(one.records[r].tau == three.records[r].tau);
  }
  CHECK(one.hits == three.hits);
}

TEST_CASE("replications are independent of their neighbours") {
  StudyConfig c = small_config();
  const ReplicationRecord r7 = run_replication(c, 7);
  c.replications = 8;
  const StudyReport rep = run_study(c);
  CHECK(rep.records[7].size == r7.size);
  CHECK(replication_seed(1, 0) != replication_seed(1, 1));
  CHECK(replication_seed(1, 0) != replication_seed(2, 0));
}

TEST_CASE("infinite bands count as covered and carry no size") {
  StudyConfig c = small_config();
  c.alpha = 0.05;  // below 1/(l+1)
  const StudyReport r = run_study(c);
  CHECK(r.hits == r.replications);
  CHECK_FALSE(r.size.has_value());
}

TEST_CASE("CUB and smoothed runs") {
  StudyConfig c = small_config();
  c.method = BandMethod::cub;
  const StudyReport cub = run_study(c);
  c.method = BandMethod::mpb;
  const StudyReport mpb = run_study(c);
  CHECK(cub.hits <= mpb.hits);
  c.mode = ConformalMode::smoothed;
  const StudyReport sm = run_study(c);
  for (const auto& rec : sm.records) {
    CHECK(rec.tau > 0.0);
    CHECK(rec.tau < 1.0);
  }
}

TEST_CASE("failures abort unless skipped") {
  StudyConfig c = small_config();
  c.scenario.covariate_set = 3;
  c.scenario.n = 4;  // two training points for three coefficients
  c.l = 2;
  c.replications = 5;
  CHECK_THROWS_WITH_AS(run_study(c), doctest::Contains("replication 0"), Error);
  c.skip_failures = true;
  CHECK_THROWS_AS(run_study(c), Error);  // every replication failed
}

// frozen output of a fixed configuration; any change to generation, fitting,
// modulation or calibration shows up here
TEST_CASE("golden report") {
  StudyConfig c = small_config();
  c.keep_records = false;
  const StudyReport r = run_study(c);
  CHECK(r.replications == 200);
  CHECK(r.failures == 0);
  CHECK(r.hits == 182);
  REQUIRE(r.size.has_value());
  CHECK(r.size->median == doctest::Approx(10.768148393026166).epsilon(1e-9));
  CHECK(r.size->q1 == doctest::Approx(9.5185794117133096).epsilon(1e-9));
  CHECK(r.size->q3 == doctest::Approx(12.997254794148258).epsilon(1e-9));
}
