#include "mfband/simgen.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace mfband {

BSplineBasis::BSplineBasis(int order, int n_basis, double a, double b)
    : order_(order), n_basis_(n_basis), a_(a), b_(b) {
  if (order < 1) throw Error("B-spline order must be positive");
  if (n_basis < order) throw Error("B-spline basis needs n_basis >= order");
  if (!(b > a)) throw Error("B-spline domain needs b > a");
  const int interior = n_basis - order;
  knots_.assign(static_cast<std::size_t>(order), a);
  for (int k = 1; k <= interior; ++k) knots_.push_back(a + (b - a) * k / (interior + 1));
  knots_.insert(knots_.end(), static_cast<std::size_t>(order), b);
}

std::size_t BSplineBasis::span(double t) const {
  const auto last = static_cast<std::size_t>(n_basis_ - 1);
  if (t >= b_) return last;
  // largest i with knots[i] <= t, restricted to [order-1, n_basis-1]
  auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
  auto i = static_cast<std::size_t>(it - knots_.begin()) - 1;
  return std::clamp(i, static_cast<std::size_t>(order_ - 1), last);
}

std::vector<double> BSplineBasis::values(double t) const {
  if (!(t >= a_ && t <= b_))
    throw Error("B-spline evaluation point " + std::to_string(t) + " outside domain");
  const int p = order_ - 1;
  const std::size_t i = span(t);
  std::vector<double> N(static_cast<std::size_t>(p + 1), 0.0);
  std::vector<double> left(static_cast<std::size_t>(p + 1)), right(static_cast<std::size_t>(p + 1));
  N[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = t - knots_[i + 1 - j];
    right[j] = knots_[i + j] - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = N[r] / (right[r + 1] + left[j - r]);
      N[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    N[j] = saved;
  }
  std::vector<double> out(static_cast<std::size_t>(n_basis_), 0.0);
  for (int r = 0; r <= p; ++r) out[i - p + r] = N[r];
  return out;
}

std::vector<std::vector<double>> BSplineBasis::design(const std::vector<double>& points) const {
  std::vector<std::vector<double>> rows;
  rows.reserve(points.size());
  for (double t : points) rows.push_back(values(t));
  return rows;
}

double eval_bspline(const BSplineBasis& basis, const std::vector<double>& coeffs, double t) {
  if (coeffs.size() != static_cast<std::size_t>(basis.n_basis()))
    throw Error("B-spline coefficient count does not match basis");
  const auto v = basis.values(t);
  double s = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) s += coeffs[k] * v[k];
  return s;
}

void ScenarioSpec::validate() const {
  if (study < 1 || study > 3) throw Error("study must be 1, 2 or 3");
  const int max_scenario = study == 1 ? 2 : 3;
  if (scenario < 1 || scenario > max_scenario)
    throw Error("study " + std::to_string(study) + " has no scenario " + std::to_string(scenario));
  if (covariate_set < 1 || covariate_set > 3) throw Error("covariate set must be 1, 2 or 3");
  if (n < 2) throw Error("simulation needs n >= 2");
  if (grid_points < 2) throw Error("simulation grid needs at least 2 points");
}

CovariateLayout sim_layout() { return CovariateLayout{{"w", "w2"}, {}}; }

SimCoefficients sim_coefficients(std::uint64_t coef_seed) {
  Rng rng(mix_seed(coef_seed));
  SimCoefficients c;
  for (auto* beta : {&c.beta0, &c.beta1, &c.beta2}) {
    beta->resize(6);
    for (double& v : *beta) v = rng.normal();
  }
  return c;
}

bool contaminated(std::size_t n, std::size_t i, int j) {
  if (n < 40) return i == 1 && j == 1;
  const std::size_t offset = static_cast<std::size_t>(j);
  if (i < offset) return false;
  const std::size_t d = i - offset;
  return d % 40 == 0 && d / 40 < n / 40;
}

namespace {

using Rows = std::vector<std::vector<double>>;

std::vector<double> combine(const Rows& design, const std::vector<double>& coef) {
  std::vector<double> out(design.size(), 0.0);
  for (std::size_t g = 0; g < design.size(); ++g)
    for (std::size_t k = 0; k < coef.size(); ++k) out[g] += design[g][k] * coef[k];
  return out;
}

std::vector<double> normal_vector(Rng& rng, std::size_t k, double sd = 1.0) {
  std::vector<double> v(k);
  for (double& x : v) x = sd * rng.normal();
  return v;
}

// Scenario-2/3 error coefficients of study 3: 13 independent normals with
// variance 0.001 except the 7th, which has variance 9e-6.
std::vector<double> study3_spline_coefs(Rng& rng) {
  std::vector<double> v(13);
  for (std::size_t a = 0; a < 13; ++a) v[a] = (a == 6 ? 3e-3 : std::sqrt(1e-3)) * rng.normal();
  return v;
}

const Eigen::Matrix3d& trig_cholesky() {
  static const Eigen::Matrix3d L = [] {
    Eigen::Matrix3d sigma;
    sigma << 1.0, 0.7, 0.7, 0.7, 1.0, 0.7, 0.7, 0.7, 1.0;
    return Eigen::Matrix3d(Eigen::LLT<Eigen::Matrix3d>(sigma).matrixL());
  }();
  return L;
}

std::vector<double> trig_error(Rng& rng, const std::vector<double>& t) {
  Eigen::Vector3d z(rng.normal(), rng.normal(), rng.normal());
  const Eigen::Vector3d B = trig_cholesky() * z;
  const double u = rng.uniform(-0.5, 0.5);
  const double w = 10.0 * std::numbers::pi;
  std::vector<double> out(t.size());
  for (std::size_t g = 0; g < t.size(); ++g)
    out[g] = B(0) + B(1) * std::cos(w * (t[g] + u)) + B(2) * std::sin(w * (t[g] + u));
  return out;
}

}  // namespace

Dataset generate_pairs(const ScenarioSpec& spec) {
  spec.validate();
  Dataset data;
  data.grid = Grid::uniform(2, spec.grid_points);
  data.layout = sim_layout();
  const auto& t = data.grid.component(0).points;
  const std::size_t G = t.size();

  const BSplineBasis basis6(4, 6);
  const Rows design6 = basis6.design(t);
  const SimCoefficients coef = sim_coefficients(spec.coef_seed);
  const auto b0 = combine(design6, coef.beta0);
  const auto b1 = combine(design6, coef.beta1);
  const auto b2 = combine(design6, coef.beta2);

  const BSplineBasis basis13(4, 13);
  const Rows design13 = spec.study == 3 ? basis13.design(t) : Rows{};
  std::vector<double> outlier;
  if (spec.study == 3 && spec.scenario == 3) {
    std::vector<double> c(13, 0.0);
    c[6] = 0.5;
    outlier = combine(design13, c);
  }

  Rng rng(mix_seed(spec.rep_seed ^ 0x5eedc0deULL));
  const std::size_t total = spec.n + 1;
  data.x.reserve(total);
  data.y.reserve(total);

  for (std::size_t i = 1; i <= total; ++i) {
    const double w = static_cast<double>(i) / static_cast<double>(total);
    data.x.push_back(Covariates{{w, w * w}, {}});

    // error draws for both components, always taken in the same order
    std::vector<double> e1, e2;
    if (spec.study == 3 && spec.scenario == 1) {
      e1 = trig_error(rng, t);
      e2 = trig_error(rng, t);
    } else if (spec.study == 3) {
      e1 = combine(design13, study3_spline_coefs(rng));
      e2 = combine(design13, study3_spline_coefs(rng));
    } else {
      e1 = combine(design6, normal_vector(rng, 6));
      e2 = combine(design6, normal_vector(rng, 6));
    }
    if (spec.zero_errors) {
      std::fill(e1.begin(), e1.end(), 0.0);
      std::fill(e2.begin(), e2.end(), 0.0);
    }
    if (spec.study == 2 && spec.scenario == 2) {
      for (std::size_t g = 0; g < G; ++g)
        if (t[g] <= 0.5) e2[g] = e1[g];
    } else if (spec.study == 2 && spec.scenario == 3) {
      e2 = e1;
    }

    MFCurve y;
    y.values.assign(2, std::vector<double>(G, 0.0));
    for (std::size_t g = 0; g < G; ++g) {
      double s1 = 0.0, s2 = 0.0;
      if (spec.study == 2) {
        s1 = s2 = b0[g] + b1[g] * w + b2[g] * w * w;
      } else if (spec.study == 3 && spec.scenario == 3) {
        s1 = contaminated(spec.n, i, 1) ? outlier[g] : 0.0;
        s2 = contaminated(spec.n, i, 2) ? outlier[g] : 0.0;
      } else {
        s1 = b0[g] + b1[g] * w;
        s2 = b0[g] + b2[g] * w * w;
      }
      double y1 = s1 + e1[g];
      double y2 = s2 + e2[g];
      if (spec.study == 1 && spec.scenario == 2) {
        y1 = std::exp(y1);
        y2 = std::exp(y2);
      }
      y.values[0][g] = y1;
      y.values[1][g] = y2;
    }
    data.y.push_back(std::move(y));
  }
  return data;
}

SimSample hold_out(const Dataset& all, std::size_t index) {
  if (index >= all.size()) throw Error("hold_out: index out of range");
  SimSample s;
  s.data.grid = all.grid;
  s.data.layout = all.layout;
  s.data.x.reserve(all.size() - 1);
  s.data.y.reserve(all.size() - 1);
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (i == index) {
      s.test_x = all.x[i];
      s.test_y = all.y[i];
    } else {
      s.data.x.push_back(all.x[i]);
      s.data.y.push_back(all.y[i]);
    }
  }
  return s;
}

namespace {

SimSample generate_checked(const ScenarioSpec& spec, int study) {
  if (spec.study != study)
    throw Error("generator for study " + std::to_string(study) + " called with study " +
                std::to_string(spec.study));
  const Dataset all = generate_pairs(spec);
  return hold_out(all, all.size() - 1);
}

}  // namespace

SimSample gen_study1(const ScenarioSpec& spec) { return generate_checked(spec, 1); }
SimSample gen_study2(const ScenarioSpec& spec) { return generate_checked(spec, 2); }
SimSample gen_study3(const ScenarioSpec& spec) { return generate_checked(spec, 3); }

SimSample generate(const ScenarioSpec& spec) {
  const Dataset all = generate_pairs(spec);
  return hold_out(all, all.size() - 1);
}

RegressorSpec covariate_set_spec(int study, int scenario, int covariate_set) {
  const Term w{Term::Source::scalar, 0};
  const Term w2{Term::Source::scalar, 1};
  auto fos = [](std::vector<Term> terms) { return ComponentDesign{true, std::move(terms)}; };

  if (study == 3) {
    // only the correctly specified model is studied
    if (scenario == 3) return RegressorSpec::intercept_only(2);
    return covariate_set_spec(1, 1, 2);
  }
  switch (covariate_set) {
    case 1: return RegressorSpec::intercept_only(2);
    case 2: {
      RegressorSpec spec;
      spec.kind = RegressorKind::concurrent_fos;
      if (study == 1)
        spec.components = {fos({w}), fos({w2})};
      else
        spec.components = {fos({w}), fos({w})};
      return spec;
    }
    case 3: return RegressorSpec::uniform(RegressorKind::concurrent_fos, 2, fos({w, w2}));
    default: break;
  }
  throw Error("covariate set must be 1, 2 or 3");
}

}  // namespace mfband
