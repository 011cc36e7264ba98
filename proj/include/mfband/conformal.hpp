#pragma once

#include "mfband/core.hpp"
#include "mfband/modulate.hpp"
#include "mfband/regress.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mfband {

// Smoothed calibration with alpha at or above (l + tau)/(l + 1): the
// prediction set is empty.
struct EmptyBandError : Error {
  using Error::Error;
};
struct InfiniteBandError : Error {
  using Error::Error;
};

enum class Closure { closed, open };
std::string to_string(Closure c);
Closure closure_from_string(const std::string& s);

// Nonconformity scores of the calibration set, with a sorted copy.
class Scores {
 public:
  Scores() = default;
  explicit Scores(std::vector<double> values);

  std::size_t size() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& sorted() const { return sorted_; }
  // 1-based rank into the ascending order.
  double order_statistic(long rank) const;

 private:
  std::vector<double> values_;
  std::vector<double> sorted_;
};

// max over j, g of |residual| / s.
double score(const MFCurve& residual, const ModulationSet& s);
Scores compute_scores(const std::vector<MFCurve>& residuals, const ModulationSet& s);

struct Calibration {
  bool infinite = false;
  double radius = 0.0;
  Closure closure = Closure::closed;
  long rank = 0;               // order statistic selected (1-based)
  std::size_t ties_right = 0;  // smoothed mode: scores equal to radius after it
  std::size_t ties_left = 0;   // and before it, in sorted order
};

Calibration calibrate_split(const Scores& scores, double alpha);
Calibration calibrate_smoothed(const Scores& scores, double alpha, double tau);
Calibration calibrate(const Scores& scores, const TrimConfig& cfg);

double p_value(const Scores& calib, double new_score);
double p_value_smoothed(const Scores& calib, double new_score, double tau);

// 1 - floor((l+1) alpha)/(l+1).
double split_coverage(std::size_t l, double alpha);

struct Band {
  ComponentValues lower;
  ComponentValues upper;
  Closure closure = Closure::closed;
  bool infinite = false;
};

// prediction -/+ radius * s, or a flagged infinite band.
Band band_around(const MFCurve& prediction, const ModulationSet& s, const Calibration& cal);
// Clamps both bounds at zero.
void truncate_at_zero(Band& band);
bool contains(const Band& band, const MFCurve& y);
// Sum over components of the weighted integral of upper - lower.
double band_area(const Band& band, const Grid& grid);
// Band A lies inside band B at every grid point.
bool band_within(const Band& inner, const Band& outer, double tol = 0.0);

struct BandPredictor {
  FittedRegressor model;
  ModulationSet modulation;
  Calibration calibration;
  double alpha = 0.1;
  ConformalMode mode = ConformalMode::split;
  std::optional<double> tau;
  std::size_t calib_size = 0;

  TrimConfig trim() const { return {alpha, mode, tau.value_or(1.0)}; }
};

// Fits the regressor on split.train, builds the modulation from the training
// residuals and calibrates on split.calib.
BandPredictor calibrate_predictor(const Dataset& data, const Split& split,
                                  const RegressorSpec& spec, ModulationKind modulation,
                                  const TrimConfig& cfg);
BandPredictor calibrate_predictor(FittedRegressor model, const Dataset& data, const Split& split,
                                  ModulationKind modulation, const TrimConfig& cfg);

Band make_band(const BandPredictor& pred, const Covariates& x, bool truncate = false);
// Q = 2 * radius; throws InfiniteBandError for infinite bands and Error when
// the quadrature recomputation disagrees by more than 1e-10.
double band_size(const BandPredictor& pred);

// Per-component sup scores for the CUB construction.
std::vector<double> cub_radii(const std::vector<MFCurve>& calib_residuals, const ModulationSet& s,
                              double alpha);
// Per-(j, g) order statistics of |residual| / s.
ComponentValues pointwise_radii(const std::vector<MFCurve>& calib_residuals,
                                const ModulationSet& s, double alpha);

Band cub_band(const Dataset& data, const Split& split, const FittedRegressor& model,
              const ModulationSet& s, double alpha, const Covariates& x);
Band pointwise_band(const Dataset& data, const Split& split, const FittedRegressor& model,
                    const ModulationSet& s, double alpha, const Covariates& x);

Band cub_band_around(const MFCurve& prediction, const ModulationSet& s,
                     const std::vector<double>& radii);
Band pointwise_band_around(const MFCurve& prediction, const ModulationSet& s,
                           const ComponentValues& radii);

}  // namespace mfband
