#include "mfband/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mfband {

std::string to_string(Closure c) { return c == Closure::closed ? "closed" : "open"; }

Closure closure_from_string(const std::string& s) {
  if (s == "closed") return Closure::closed;
  if (s == "open") return Closure::open;
  throw SchemaError("unknown closure '" + s + "'");
}

Scores::Scores(std::vector<double> values) : values_(std::move(values)) {
  for (double v : values_)
    if (!std::isfinite(v) || v < 0.0) throw Error("scores must be finite and nonnegative");
  sorted_ = values_;
  std::sort(sorted_.begin(), sorted_.end());
}

double Scores::order_statistic(long rank) const {
  if (rank < 1 || rank > static_cast<long>(sorted_.size()))
    throw Error("order statistic rank " + std::to_string(rank) + " outside [1, " +
                std::to_string(sorted_.size()) + "]");
  return sorted_[static_cast<std::size_t>(rank - 1)];
}

double score(const MFCurve& residual, const ModulationSet& s) {
  if (residual.values.size() != s.fns.size()) throw ShapeError("score: component mismatch");
  double m = 0.0;
  for (std::size_t j = 0; j < s.fns.size(); ++j) {
    const auto& r = residual.values[j];
    const auto& w = s.fns[j];
    if (r.size() != w.size()) throw ShapeError("score: length mismatch");
    for (std::size_t g = 0; g < r.size(); ++g) m = std::max(m, std::abs(r[g]) / w[g]);
  }
  return m;
}

Scores compute_scores(const std::vector<MFCurve>& residuals, const ModulationSet& s) {
  std::vector<double> v;
  v.reserve(residuals.size());
  for (const auto& r : residuals) v.push_back(score(r, s));
  return Scores(std::move(v));
}

Calibration calibrate_split(const Scores& scores, double alpha) {
  const std::size_t l = scores.size();
  if (l < 1) throw Error("calibration needs at least one score");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha must lie in (0, 1)");
  Calibration cal;
  cal.rank = ceil_rank(static_cast<double>(l + 1) * (1.0 - alpha));
  if (cal.rank > static_cast<long>(l)) {
    cal.infinite = true;
    return cal;
  }
  cal.radius = scores.order_statistic(cal.rank);
  cal.closure = Closure::closed;
  return cal;
}

Calibration calibrate_smoothed(const Scores& scores, double alpha, double tau) {
  const std::size_t l = scores.size();
  if (l < 1) throw Error("calibration needs at least one score");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha must lie in (0, 1)");
  if (!(tau >= 0.0 && tau <= 1.0)) throw Error("tau must lie in [0, 1]");
  const double L = static_cast<double>(l);
  Calibration cal;
  cal.rank = ceil_rank(L + tau - (L + 1.0) * alpha);
  if (cal.rank > static_cast<long>(l)) {
    cal.infinite = true;
    return cal;
  }
  if (cal.rank < 1)
    throw EmptyBandError("smoothed calibration: alpha at or above (l + tau)/(l + 1) gives an "
                         "empty prediction set");
  const auto& sorted = scores.sorted();
  const auto pos = static_cast<std::size_t>(cal.rank - 1);
  cal.radius = sorted[pos];
  for (std::size_t i = pos + 1; i < l && sorted[i] == cal.radius; ++i) ++cal.ties_right;
  for (std::size_t i = pos; i > 0 && sorted[i - 1] == cal.radius; --i) ++cal.ties_left;

  const double r = static_cast<double>(cal.ties_right);
  const double v = static_cast<double>(cal.ties_left);
  const double scaled = (L + 1.0) * alpha;
  // closed iff tau (r + v + 2) > (l+1)alpha - floor((l+1)alpha - tau) + r; equality
  // up to rounding counts as open, since the boundary p-value then equals alpha
  const double lhs = tau * (r + v + 2.0);
  const double rhs = scaled - static_cast<double>(floor_rank(scaled - tau)) + r;
  cal.closure = lhs - rhs > 1e-9 * std::max(1.0, rhs) ? Closure::closed : Closure::open;
  return cal;
}

Calibration calibrate(const Scores& scores, const TrimConfig& cfg) {
  return cfg.mode == ConformalMode::split ? calibrate_split(scores, cfg.alpha)
                                          : calibrate_smoothed(scores, cfg.alpha, cfg.tau);
}

double p_value(const Scores& calib, double new_score) {
  const auto& s = calib.sorted();
  const auto ge = static_cast<double>(s.end() - std::lower_bound(s.begin(), s.end(), new_score));
  return (ge + 1.0) / static_cast<double>(s.size() + 1);
}

double p_value_smoothed(const Scores& calib, double new_score, double tau) {
  const auto& s = calib.sorted();
  const auto lo = std::lower_bound(s.begin(), s.end(), new_score);
  const auto hi = std::upper_bound(s.begin(), s.end(), new_score);
  const auto greater = static_cast<double>(s.end() - hi);
  const auto equal = static_cast<double>(hi - lo) + 1.0;  // the new point ties itself
  return (greater + tau * equal) / static_cast<double>(s.size() + 1);
}

double split_coverage(std::size_t l, double alpha) {
  const double L1 = static_cast<double>(l + 1);
  return 1.0 - static_cast<double>(floor_rank(L1 * alpha)) / L1;
}

Band band_around(const MFCurve& prediction, const ModulationSet& s, const Calibration& cal) {
  Band band;
  band.closure = cal.closure;
  band.infinite = cal.infinite;
  if (cal.infinite) return band;
  if (prediction.values.size() != s.fns.size()) throw ShapeError("band: component mismatch");
  band.lower = prediction.values;
  band.upper = prediction.values;
  for (std::size_t j = 0; j < s.fns.size(); ++j) {
    if (s.fns[j].size() != prediction.values[j].size()) throw ShapeError("band: length mismatch");
    for (std::size_t g = 0; g < s.fns[j].size(); ++g) {
      const double half = cal.radius * s.fns[j][g];
      band.lower[j][g] -= half;
      band.upper[j][g] += half;
    }
  }
  return band;
}

void truncate_at_zero(Band& band) {
  for (auto* side : {&band.lower, &band.upper})
    for (auto& comp : *side)
      for (double& v : comp) v = std::max(v, 0.0);
}

bool contains(const Band& band, const MFCurve& y) {
  if (band.infinite) return true;
  if (y.values.size() != band.lower.size()) throw ShapeError("contains: component mismatch");
  const bool open = band.closure == Closure::open;
  for (std::size_t j = 0; j < band.lower.size(); ++j) {
    const auto& v = y.values[j];
    if (v.size() != band.lower[j].size()) throw ShapeError("contains: length mismatch");
    for (std::size_t g = 0; g < v.size(); ++g) {
      const double lo = band.lower[j][g];
      const double hi = band.upper[j][g];
      if (open ? !(v[g] > lo && v[g] < hi) : !(v[g] >= lo && v[g] <= hi)) return false;
    }
  }
  return true;
}

double band_area(const Band& band, const Grid& grid) {
  if (band.infinite) throw InfiniteBandError("infinite band has no finite size");
  ComponentValues width = band.upper;
  for (std::size_t j = 0; j < width.size(); ++j)
    for (std::size_t g = 0; g < width[j].size(); ++g) width[j][g] -= band.lower[j][g];
  return total_integral(width, grid);
}

bool band_within(const Band& inner, const Band& outer, double tol) {
  if (outer.infinite) return true;
  if (inner.infinite) return false;
  for (std::size_t j = 0; j < inner.lower.size(); ++j)
    for (std::size_t g = 0; g < inner.lower[j].size(); ++g) {
      if (inner.lower[j][g] < outer.lower[j][g] - tol) return false;
      if (inner.upper[j][g] > outer.upper[j][g] + tol) return false;
    }
  return true;
}

BandPredictor calibrate_predictor(FittedRegressor model, const Dataset& data, const Split& split,
                                  ModulationKind modulation, const TrimConfig& cfg) {
  cfg.validate();
  check_split(split, data.size());
  const auto train_res = residuals(model, data, split.train);
  ModulationSet s = make_modulation(modulation, train_res, data.grid, cfg);
  const Scores scores = compute_scores(residuals(model, data, split.calib), s);

  BandPredictor pred;
  pred.calibration = calibrate(scores, cfg);
  pred.model = std::move(model);
  pred.modulation = std::move(s);
  pred.alpha = cfg.alpha;
  pred.mode = cfg.mode;
  if (cfg.mode == ConformalMode::smoothed) pred.tau = cfg.tau;
  pred.calib_size = split.calib.size();
  return pred;
}

BandPredictor calibrate_predictor(const Dataset& data, const Split& split,
                                  const RegressorSpec& spec, ModulationKind modulation,
                                  const TrimConfig& cfg) {
  check_split(split, data.size());
  return calibrate_predictor(fit(data, split.train, spec), data, split, modulation, cfg);
}

Band make_band(const BandPredictor& pred, const Covariates& x, bool truncate) {
  Band band = band_around(predict(pred.model, x), pred.modulation, pred.calibration);
  if (truncate && !band.infinite) truncate_at_zero(band);
  return band;
}

double band_size(const BandPredictor& pred) {
  if (pred.calibration.infinite) throw InfiniteBandError("infinite band has no finite size");
  const double q = 2.0 * pred.calibration.radius;
  ComponentValues width = pred.modulation.fns;
  for (auto& comp : width)
    for (double& v : comp) v *= 2.0 * pred.calibration.radius;
  const double check = total_integral(width, pred.model.grid);
  if (std::abs(check - q) > 1e-10 * std::max(1.0, q))
    throw Error("band size check failed: modulation is not normalized (" + std::to_string(check) +
                " vs " + std::to_string(q) + ")");
  return q;
}

namespace {

long feasible_rank(std::size_t l, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha must lie in (0, 1)");
  const long rank = ceil_rank(static_cast<double>(l + 1) * (1.0 - alpha));
  if (l == 0 || rank > static_cast<long>(l))
    throw InfiniteBandError("alpha below 1/(l+1): the band is the whole space");
  return rank;
}

double kth_smallest(std::vector<double> v, long rank) {
  auto nth = v.begin() + (rank - 1);
  std::nth_element(v.begin(), nth, v.end());
  return *nth;
}

}  // namespace

std::vector<double> cub_radii(const std::vector<MFCurve>& calib_residuals, const ModulationSet& s,
                              double alpha) {
  const long rank = feasible_rank(calib_residuals.size(), alpha);
  std::vector<double> radii(s.fns.size());
  for (std::size_t j = 0; j < s.fns.size(); ++j) {
    std::vector<double> comp_scores;
    comp_scores.reserve(calib_residuals.size());
    for (const auto& r : calib_residuals) {
      double m = 0.0;
      for (std::size_t g = 0; g < s.fns[j].size(); ++g)
        m = std::max(m, std::abs(r.values.at(j).at(g)) / s.fns[j][g]);
      comp_scores.push_back(m);
    }
    radii[j] = kth_smallest(std::move(comp_scores), rank);
  }
  return radii;
}

ComponentValues pointwise_radii(const std::vector<MFCurve>& calib_residuals,
                                const ModulationSet& s, double alpha) {
  const long rank = feasible_rank(calib_residuals.size(), alpha);
  ComponentValues radii = s.fns;
  std::vector<double> column(calib_residuals.size());
  for (std::size_t j = 0; j < s.fns.size(); ++j)
    for (std::size_t g = 0; g < s.fns[j].size(); ++g) {
      for (std::size_t d = 0; d < calib_residuals.size(); ++d)
        column[d] = std::abs(calib_residuals[d].values.at(j).at(g)) / s.fns[j][g];
      radii[j][g] = kth_smallest(column, rank);
    }
  return radii;
}

Band cub_band_around(const MFCurve& prediction, const ModulationSet& s,
                     const std::vector<double>& radii) {
  ComponentValues per_point = s.fns;
  for (std::size_t j = 0; j < per_point.size(); ++j)
    for (double& v : per_point[j]) v = radii.at(j);
  return pointwise_band_around(prediction, s, per_point);
}

Band pointwise_band_around(const MFCurve& prediction, const ModulationSet& s,
                           const ComponentValues& radii) {
  Band band;
  band.lower = prediction.values;
  band.upper = prediction.values;
  for (std::size_t j = 0; j < s.fns.size(); ++j)
    for (std::size_t g = 0; g < s.fns[j].size(); ++g) {
      const double half = radii.at(j).at(g) * s.fns[j][g];
      band.lower.at(j).at(g) -= half;
      band.upper.at(j).at(g) += half;
    }
  return band;
}

Band cub_band(const Dataset& data, const Split& split, const FittedRegressor& model,
              const ModulationSet& s, double alpha, const Covariates& x) {
  const auto radii = cub_radii(residuals(model, data, split.calib), s, alpha);
  return cub_band_around(predict(model, x), s, radii);
}

Band pointwise_band(const Dataset& data, const Split& split, const FittedRegressor& model,
                    const ModulationSet& s, double alpha, const Covariates& x) {
  const auto radii = pointwise_radii(residuals(model, data, split.calib), s, alpha);
  return pointwise_band_around(predict(model, x), s, radii);
}

}  // namespace mfband
