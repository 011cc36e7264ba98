#include "mfband/core.hpp"

#include "mfband/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace mfband {

double ComponentGrid::length() const {
  return std::accumulate(weights.begin(), weights.end(), 0.0);
}

std::vector<double> trapezoid_weights(const std::vector<double>& points) {
  const std::size_t n = points.size();
  if (n < 2) throw ShapeError("grid component needs at least 2 points");
  std::vector<double> w(n, 0.0);
  for (std::size_t g = 0; g + 1 < n; ++g) {
    const double h = points[g + 1] - points[g];
    w[g] += 0.5 * h;
    w[g + 1] += 0.5 * h;
  }
  return w;
}

Grid::Grid(std::vector<ComponentGrid> components) : components_(std::move(components)) {
  if (components_.empty()) throw ShapeError("grid needs at least one component");
  for (std::size_t j = 0; j < components_.size(); ++j) {
    const auto& c = components_[j];
    const std::string where = "grid component " + std::to_string(j);
    if (c.points.size() < 2) throw ShapeError(where + ": needs at least 2 points");
    if (c.weights.size() != c.points.size())
      throw ShapeError(where + ": weights and points differ in length");
    for (std::size_t g = 0; g < c.points.size(); ++g) {
      if (!std::isfinite(c.points[g])) throw ShapeError(where + ": non-finite point");
      if (g > 0 && !(c.points[g] > c.points[g - 1]))
        throw ShapeError(where + ": points must be strictly increasing");
      if (!(c.weights[g] > 0.0) || !std::isfinite(c.weights[g]))
        throw ShapeError(where + ": weights must be positive");
    }
  }
}

Grid Grid::from_points(const std::vector<std::vector<double>>& points) {
  std::vector<ComponentGrid> comps;
  comps.reserve(points.size());
  for (const auto& pts : points) comps.push_back({pts, trapezoid_weights(pts)});
  return Grid(std::move(comps));
}

Grid Grid::uniform(std::size_t p, std::size_t points, double a, double b) {
  if (points < 2) throw ShapeError("uniform grid needs at least 2 points");
  if (!(b > a)) throw ShapeError("uniform grid needs b > a");
  std::vector<double> pts(points);
  for (std::size_t g = 0; g < points; ++g)
    pts[g] = a + (b - a) * static_cast<double>(g) / static_cast<double>(points - 1);
  pts.back() = b;
  return from_points(std::vector<std::vector<double>>(p, pts));
}

std::size_t Grid::total_points() const {
  std::size_t total = 0;
  for (const auto& c : components_) total += c.points.size();
  return total;
}

double Grid::total_length() const {
  double total = 0.0;
  for (const auto& c : components_) total += c.length();
  return total;
}

bool Grid::conforms(const ComponentValues& values) const {
  if (values.size() != components_.size()) return false;
  for (std::size_t j = 0; j < values.size(); ++j)
    if (values[j].size() != components_[j].points.size()) return false;
  return true;
}

void Grid::check_shape(const ComponentValues& values, const char* what) const {
  if (!conforms(values)) throw ShapeError(std::string(what) + ": shape does not match grid");
}

MFCurve zeros_like(const Grid& grid) {
  MFCurve c;
  c.values.resize(grid.dims());
  for (std::size_t j = 0; j < grid.dims(); ++j) c.values[j].assign(grid.size(j), 0.0);
  return c;
}

MFCurve operator-(const MFCurve& a, const MFCurve& b) {
  if (a.values.size() != b.values.size()) throw ShapeError("curve difference: component mismatch");
  MFCurve out = a;
  for (std::size_t j = 0; j < a.values.size(); ++j) {
    if (a.values[j].size() != b.values[j].size())
      throw ShapeError("curve difference: length mismatch");
    for (std::size_t g = 0; g < a.values[j].size(); ++g) out.values[j][g] -= b.values[j][g];
  }
  return out;
}

namespace {

std::size_t find_name(const std::vector<std::string>& names, const std::string& name,
                      const char* kind) {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end())
    throw ShapeError(std::string("unknown ") + kind + " covariate '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

}  // namespace

std::size_t CovariateLayout::scalar_index(const std::string& name) const {
  return find_name(scalar, name, "scalar");
}

std::size_t CovariateLayout::functional_index(const std::string& name) const {
  return find_name(functional, name, "functional");
}

void check_layout(const CovariateLayout& layout, const Grid& grid, const Covariates& x) {
  if (x.scalar.size() != layout.scalar.size())
    throw ShapeError("covariates: expected " + std::to_string(layout.scalar.size()) +
                     " scalar values, got " + std::to_string(x.scalar.size()));
  if (x.functional.size() != layout.functional.size())
    throw ShapeError("covariates: expected " + std::to_string(layout.functional.size()) +
                     " functional covariates, got " + std::to_string(x.functional.size()));
  for (const auto& f : x.functional) grid.check_shape(f.values, "functional covariate");
}

void Dataset::validate() const {
  if (y.size() < 2) throw ShapeError("dataset needs at least 2 observations");
  if (x.size() != y.size()) throw ShapeError("dataset: covariate and response counts differ");
  for (std::size_t i = 0; i < y.size(); ++i) {
    grid.check_shape(y[i].values, "response curve");
    for (const auto& comp : y[i].values)
      for (double v : comp)
        if (!std::isfinite(v))
          throw ShapeError("response curve " + std::to_string(i) + " has non-finite values");
    check_layout(layout, grid, x[i]);
  }
}

double sup_abs(const MFCurve& curve) {
  double m = 0.0;
  for (const auto& comp : curve.values)
    for (double v : comp) m = std::max(m, std::abs(v));
  return m;
}

double total_integral(const ComponentValues& fns, const Grid& grid) {
  grid.check_shape(fns, "total_integral");
  double total = 0.0;
  for (std::size_t j = 0; j < fns.size(); ++j) {
    const auto& w = grid.component(j).weights;
    for (std::size_t g = 0; g < w.size(); ++g) total += w[g] * fns[j][g];
  }
  return total;
}

namespace {

double snap(double x) {
  const double r = std::round(x);
  return std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x)) ? r : x;
}

}  // namespace

long ceil_rank(double x) { return static_cast<long>(std::ceil(snap(x))); }
long floor_rank(double x) { return static_cast<long>(std::floor(snap(x))); }

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void check_split(const Split& split, std::size_t n) {
  if (split.train.empty() || split.calib.empty())
    throw ShapeError("split: training and calibration sets must be non-empty");
  if (split.train.size() + split.calib.size() != n)
    throw ShapeError("split: sets do not cover the dataset");
  std::vector<char> seen(n, 0);
  for (const auto* set : {&split.train, &split.calib})
    for (std::size_t i : *set) {
      if (i >= n) throw ShapeError("split: index " + std::to_string(i) + " out of range");
      if (seen[i]) throw ShapeError("split: index " + std::to_string(i) + " repeated");
      seen[i] = 1;
    }
}

Split random_split(std::size_t n, std::size_t l, std::uint64_t seed) {
  if (l < 1 || l + 1 > n)
    throw Error("random_split: calibration size " + std::to_string(l) + " outside [1, " +
                std::to_string(n == 0 ? 0 : n - 1) + "]");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(mix_seed(seed));
  rng.shuffle(std::span<std::size_t>(idx));
  Split s;
  s.calib.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(l));
  s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(l), idx.end());
  std::sort(s.calib.begin(), s.calib.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

Split parity_split(std::size_t n, std::size_t l) {
  // labels are 1-based; index = label - 1
  std::vector<std::size_t> even;
  for (std::size_t label = 2; label <= n; label += 2) even.push_back(label);
  if (l < 1 || l > even.size() || l + 1 > n)
    throw Error("parity_split: calibration size " + std::to_string(l) +
                " incompatible with " + std::to_string(even.size()) + " even labels");
  const double middle = 0.5 * static_cast<double>(n + 1);
  std::vector<std::size_t> order = even;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(static_cast<double>(a) - middle) < std::abs(static_cast<double>(b) - middle);
  });
  std::vector<char> to_train(n + 1, 0);
  for (std::size_t k = 0; k < even.size() - l; ++k) to_train[order[k]] = 1;

  Split s;
  for (std::size_t label = 1; label <= n; ++label) {
    const bool calib = label % 2 == 0 && !to_train[label];
    (calib ? s.calib : s.train).push_back(label - 1);
  }
  return s;
}

Split make_split(std::size_t n, std::size_t l, std::uint64_t seed, SplitStrategy strategy) {
  return strategy == SplitStrategy::parity ? parity_split(n, l) : random_split(n, l, seed);
}

}  // namespace mfband
