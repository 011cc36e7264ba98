#include "mfband/modulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mfband {

std::string to_string(ModulationKind kind) {
  switch (kind) {
    case ModulationKind::s0: return "s0";
    case ModulationKind::sigma: return "sigma";
    case ModulationKind::sbar: return "sbar";
    case ModulationKind::sbar_c: return "sbar_c";
  }
  return "?";
}

ModulationKind modulation_kind_from_string(const std::string& s) {
  if (s == "s0") return ModulationKind::s0;
  if (s == "sigma") return ModulationKind::sigma;
  if (s == "sbar") return ModulationKind::sbar;
  if (s == "sbar_c") return ModulationKind::sbar_c;
  throw SchemaError("unknown modulation '" + s + "' (expected s0, sigma, sbar)");
}

std::string to_string(ConformalMode mode) {
  return mode == ConformalMode::split ? "split" : "smoothed";
}

ConformalMode conformal_mode_from_string(const std::string& s) {
  if (s == "split") return ConformalMode::split;
  if (s == "smoothed") return ConformalMode::smoothed;
  throw SchemaError("unknown conformal mode '" + s + "' (expected split or smoothed)");
}

void TrimConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha must lie in (0, 1)");
  if (!(tau >= 0.0 && tau <= 1.0)) throw Error("tau must lie in [0, 1]");
}

long trim_rank(std::size_t count, const TrimConfig& cfg) {
  const double c = static_cast<double>(count);
  if (cfg.mode == ConformalMode::split) return ceil_rank((c + 1.0) * (1.0 - cfg.alpha));
  return ceil_rank(c + cfg.tau - (c + 1.0) * cfg.alpha);
}

ModulationSet ModulationSet::scaled(double lambda) const {
  ModulationSet out = *this;
  for (auto& comp : out.fns)
    for (double& v : comp) v *= lambda;
  return out;
}

TrimmedEnvelope trimmed_envelope(const std::vector<MFCurve>& residuals, long rank) {
  if (residuals.empty()) throw Error("trimmed envelope of an empty residual set");
  TrimmedEnvelope env;
  const auto count = static_cast<long>(residuals.size());
  std::vector<double> sups;
  sups.reserve(residuals.size());
  for (const auto& r : residuals) sups.push_back(sup_abs(r));

  if (rank > count) {
    env.threshold = std::numeric_limits<double>::infinity();
  } else {
    if (rank < 1) throw Error("trimmed envelope: rank " + std::to_string(rank) + " below 1");
    std::vector<double> sorted = sups;
    std::nth_element(sorted.begin(), sorted.begin() + (rank - 1), sorted.end());
    env.threshold = sorted[static_cast<std::size_t>(rank - 1)];
  }
  for (std::size_t h = 0; h < sups.size(); ++h)
    if (sups[h] <= env.threshold) env.kept.push_back(h);

  env.numerator = residuals[env.kept.front()].values;
  for (auto& comp : env.numerator)
    for (double& v : comp) v = 0.0;
  for (std::size_t h : env.kept) {
    const auto& r = residuals[h].values;
    if (r.size() != env.numerator.size()) throw ShapeError("residual component mismatch");
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (r[j].size() != env.numerator[j].size()) throw ShapeError("residual length mismatch");
      for (std::size_t g = 0; g < r[j].size(); ++g)
        env.numerator[j][g] = std::max(env.numerator[j][g], std::abs(r[j][g]));
    }
  }
  return env;
}

void zero_adjust(ComponentValues& numerator) {
  double top = 0.0;
  for (const auto& comp : numerator)
    for (double v : comp) top = std::max(top, v);
  if (!(top > 0.0))
    throw PathologicalInputError("modulation numerator is identically zero");
  const double eps = 1e-6 * top;
  for (auto& comp : numerator)
    for (double& v : comp)
      if (v == 0.0) v = eps;
}

ModulationSet normalize_modulation(ComponentValues numerator, const Grid& grid,
                                   ModulationKind label) {
  grid.check_shape(numerator, "modulation");
  zero_adjust(numerator);
  const double total = total_integral(numerator, grid);
  for (auto& comp : numerator)
    for (double& v : comp) v /= total;
  return ModulationSet{std::move(numerator), label};
}

ModulationSet s_const(const Grid& grid) {
  ModulationSet s;
  s.label = ModulationKind::s0;
  const double value = 1.0 / grid.total_length();
  s.fns.resize(grid.dims());
  for (std::size_t j = 0; j < grid.dims(); ++j) s.fns[j].assign(grid.size(j), value);
  return s;
}

ModulationSet s_sigma(const std::vector<MFCurve>& train_residuals, const Grid& grid) {
  const std::size_t m = train_residuals.size();
  if (m < 2) throw Error("s_sigma needs at least 2 training residuals");
  for (const auto& r : train_residuals) grid.check_shape(r.values, "s_sigma residual");

  ComponentValues sd(grid.dims());
  for (std::size_t j = 0; j < grid.dims(); ++j) {
    sd[j].assign(grid.size(j), 0.0);
    for (std::size_t g = 0; g < grid.size(j); ++g) {
      double mean = 0.0;
      for (const auto& r : train_residuals) mean += r.values[j][g];
      mean /= static_cast<double>(m);
      double ss = 0.0;
      for (const auto& r : train_residuals) {
        const double d = r.values[j][g] - mean;
        ss += d * d;
      }
      sd[j][g] = std::sqrt(ss / static_cast<double>(m - 1));
    }
  }
  return normalize_modulation(std::move(sd), grid, ModulationKind::sigma);
}

ModulationSet s_bar(const std::vector<MFCurve>& train_residuals, const Grid& grid,
                    const TrimConfig& cfg) {
  cfg.validate();
  if (train_residuals.empty()) throw Error("s_bar needs at least 1 training residual");
  for (const auto& r : train_residuals) grid.check_shape(r.values, "s_bar residual");
  const long rank = trim_rank(train_residuals.size(), cfg);
  if (rank <= 0) {
    // smoothed mode only: fall back to the unmodulated set
    ModulationSet s = s_const(grid);
    s.label = ModulationKind::sbar;
    return s;
  }
  auto env = trimmed_envelope(train_residuals, rank);
  return normalize_modulation(std::move(env.numerator), grid, ModulationKind::sbar);
}

ModulationSet s_bar_c(const std::vector<MFCurve>& calib_residuals, const Grid& grid,
                      const TrimConfig& cfg) {
  cfg.validate();
  if (calib_residuals.empty()) throw Error("s_bar_c needs at least 1 calibration residual");
  for (const auto& r : calib_residuals) grid.check_shape(r.values, "s_bar_c residual");
  const long rank = trim_rank(calib_residuals.size(), cfg);
  if (rank < 1 || rank > static_cast<long>(calib_residuals.size()))
    throw Error("s_bar_c: order-statistic rank " + std::to_string(rank) + " outside [1, " +
                std::to_string(calib_residuals.size()) + "]");
  auto env = trimmed_envelope(calib_residuals, rank);
  return normalize_modulation(std::move(env.numerator), grid, ModulationKind::sbar_c);
}

ModulationSet make_modulation(ModulationKind kind, const std::vector<MFCurve>& train_residuals,
                              const Grid& grid, const TrimConfig& cfg) {
  switch (kind) {
    case ModulationKind::s0: return s_const(grid);
    case ModulationKind::sigma: return s_sigma(train_residuals, grid);
    case ModulationKind::sbar: return s_bar(train_residuals, grid, cfg);
    case ModulationKind::sbar_c: break;
  }
  throw Error("sbar_c depends on the calibration set and cannot drive a predictor");
}

}  // namespace mfband
