#pragma once

#include "mfband/core.hpp"
#include "mfband/random.hpp"
#include "mfband/regress.hpp"

#include <cstdint>
#include <vector>

namespace mfband {

// Clamped B-spline basis on [a, b] with equally spaced interior knots.
class BSplineBasis {
 public:
  BSplineBasis(int order, int n_basis, double a = 0.0, double b = 1.0);

  int order() const { return order_; }
  int n_basis() const { return n_basis_; }
  const std::vector<double>& knots() const { return knots_; }
  double lower() const { return a_; }
  double upper() const { return b_; }

  // All basis values at t (Cox-de Boor recursion). Throws for t outside [a, b].
  std::vector<double> values(double t) const;
  // Row g holds values(points[g]).
  std::vector<std::vector<double>> design(const std::vector<double>& points) const;

 private:
  std::size_t span(double t) const;

  int order_;
  int n_basis_;
  double a_, b_;
  std::vector<double> knots_;
};

double eval_bspline(const BSplineBasis& basis, const std::vector<double>& coeffs, double t);

struct ScenarioSpec {
  int study = 1;       // 1, 2 or 3
  int scenario = 1;    // 1..2 for study 1, 1..3 otherwise
  std::size_t n = 20;  // the generator emits n + 1 pairs
  int covariate_set = 2;
  std::uint64_t coef_seed = 1;  // fixes the regression coefficient functions
  std::uint64_t rep_seed = 1;   // drives the error terms
  std::size_t grid_points = 100;
  bool zero_errors = false;  // test hook: systematic component only

  void validate() const;
};

// Scalar covariates carried by every simulated observation: w and w^2.
CovariateLayout sim_layout();

// Coefficient functions shared by all replications of a scenario.
struct SimCoefficients {
  std::vector<double> beta0, beta1, beta2;  // 6 B-spline coefficients each
};
SimCoefficients sim_coefficients(std::uint64_t coef_seed);

// All n + 1 pairs in order i = 1..n+1.
Dataset generate_pairs(const ScenarioSpec& spec);

struct SimSample {
  Dataset data;  // n pairs
  Covariates test_x;
  MFCurve test_y;
};

// Moves pair `index` out of `all` as the test pair.
SimSample hold_out(const Dataset& all, std::size_t index);

// Each returns n training/calibration pairs plus the last pair as test.
SimSample gen_study1(const ScenarioSpec& spec);
SimSample gen_study2(const ScenarioSpec& spec);
SimSample gen_study3(const ScenarioSpec& spec);
SimSample generate(const ScenarioSpec& spec);

// Contamination indicator w_ij of study 3 scenario 3 (i is 1-based, j in {1, 2}).
bool contaminated(std::size_t n, std::size_t i, int j);

// Regression model for a (study, scenario, covariate set) combination.
RegressorSpec covariate_set_spec(int study, int scenario, int covariate_set);

}  // namespace mfband
