#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfband {

// Error hierarchy. The CLI maps SchemaError to exit code 2 and every other
// Error to exit code 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct SchemaError : Error {
  using Error::Error;
};

// Sampled values of one function per component: values[j][g].
using ComponentValues = std::vector<std::vector<double>>;

struct ComponentGrid {
  std::vector<double> points;
  std::vector<double> weights;

  double length() const;  // sum of weights = b - a
  bool operator==(const ComponentGrid& other) const = default;
};

// Per-component discretization of the domains with quadrature weights.
class Grid {
 public:
  Grid() = default;
  explicit Grid(std::vector<ComponentGrid> components);

  // Trapezoid weights on the given (strictly increasing) points.
  static Grid from_points(const std::vector<std::vector<double>>& points);
  // p components, each with `points` equispaced samples on [a, b].
  static Grid uniform(std::size_t p, std::size_t points, double a = 0.0, double b = 1.0);

  std::size_t dims() const { return components_.size(); }
  const ComponentGrid& component(std::size_t j) const { return components_.at(j); }
  const std::vector<ComponentGrid>& components() const { return components_; }
  std::size_t size(std::size_t j) const { return components_.at(j).points.size(); }
  std::size_t total_points() const;
  double total_length() const;

  // Throws ShapeError unless values has exactly this grid's shape.
  void check_shape(const ComponentValues& values, const char* what) const;
  bool conforms(const ComponentValues& values) const;

  bool operator==(const Grid& other) const = default;

 private:
  std::vector<ComponentGrid> components_;
};

std::vector<double> trapezoid_weights(const std::vector<double>& points);

// One multivariate functional datum.
struct MFCurve {
  ComponentValues values;

  std::size_t dims() const { return values.size(); }
  bool operator==(const MFCurve& other) const = default;
};

MFCurve zeros_like(const Grid& grid);
MFCurve operator-(const MFCurve& a, const MFCurve& b);

// Names of the covariates carried by every observation of a dataset.
struct CovariateLayout {
  std::vector<std::string> scalar;
  std::vector<std::string> functional;

  std::size_t scalar_index(const std::string& name) const;
  std::size_t functional_index(const std::string& name) const;
  bool operator==(const CovariateLayout& other) const = default;
};

// Covariates of one observation. Functional covariates are sampled on the
// response grid, one vector per component.
struct Covariates {
  std::vector<double> scalar;
  std::vector<MFCurve> functional;
};

void check_layout(const CovariateLayout& layout, const Grid& grid, const Covariates& x);

struct Dataset {
  Grid grid;
  CovariateLayout layout;
  std::vector<Covariates> x;
  std::vector<MFCurve> y;

  std::size_t size() const { return y.size(); }
  // Throws ShapeError on any inconsistency.
  void validate() const;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> calib;
};

enum class SplitStrategy { random, parity };

double sup_abs(const MFCurve& curve);
double total_integral(const ComponentValues& fns, const Grid& grid);

// Uniformly random partition of {0..n-1} with |calib| = l, deterministic in seed.
Split random_split(std::size_t n, std::size_t l, std::uint64_t seed);
// Observations are labeled 1..n. Odd labels go to training and even labels to
// calibration; surplus even labels nearest the middle label (n+1)/2 (lowest
// first on ties) are moved to training until exactly l remain.
Split parity_split(std::size_t n, std::size_t l);
Split make_split(std::size_t n, std::size_t l, std::uint64_t seed, SplitStrategy strategy);
void check_split(const Split& split, std::size_t n);

// ceil/floor for order-statistic ranks such as (l+1)(1-alpha). Products like
// 10 * 0.9 carry rounding noise, so values within 1e-9 (relative) of an
// integer snap to it before rounding.
long ceil_rank(double x);
long floor_rank(double x);

// splitmix64 finalizer, used to derive independent seeds.
std::uint64_t mix_seed(std::uint64_t x);

}  // namespace mfband
