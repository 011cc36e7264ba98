#pragma once

#include "mfband/core.hpp"

#include <string>
#include <vector>

namespace mfband {

// Raised when every trimmed residual is zero everywhere, so no positive
// modulation can be formed.
struct PathologicalInputError : Error {
  using Error::Error;
};

enum class ModulationKind { s0, sigma, sbar, sbar_c };
enum class ConformalMode { split, smoothed };

std::string to_string(ModulationKind kind);
ModulationKind modulation_kind_from_string(const std::string& s);
std::string to_string(ConformalMode mode);
ConformalMode conformal_mode_from_string(const std::string& s);

struct TrimConfig {
  double alpha = 0.1;
  ConformalMode mode = ConformalMode::split;
  double tau = 1.0;  // smoothed mode only

  void validate() const;
};

// 1-based rank of the order statistic used for a set of `count` scores:
// ceil((count+1)(1-alpha)) in split mode, ceil(count + tau - (count+1)alpha)
// in smoothed mode. May fall outside [1, count].
long trim_rank(std::size_t count, const TrimConfig& cfg);

// Strictly positive sampled functions with unit total integral.
struct ModulationSet {
  ComponentValues fns;
  ModulationKind label = ModulationKind::s0;

  // Multiplies every function by lambda (the result is no longer normalized).
  ModulationSet scaled(double lambda) const;
};

// Pointwise max of |residual| over the residual curves whose sup-norm does not
// exceed the rank-th smallest sup-norm.
struct TrimmedEnvelope {
  std::vector<std::size_t> kept;  // positions into the residual list
  double threshold = 0.0;         // gamma or k; +inf when everything is kept
  ComponentValues numerator;
};

TrimmedEnvelope trimmed_envelope(const std::vector<MFCurve>& residuals, long rank);

// Where the numerator is zero add 1e-6 times its global max; throws
// PathologicalInputError when the global max is itself zero.
void zero_adjust(ComponentValues& numerator);
ModulationSet normalize_modulation(ComponentValues numerator, const Grid& grid,
                                   ModulationKind label);

ModulationSet s_const(const Grid& grid);
ModulationSet s_sigma(const std::vector<MFCurve>& train_residuals, const Grid& grid);
ModulationSet s_bar(const std::vector<MFCurve>& train_residuals, const Grid& grid,
                    const TrimConfig& cfg);
ModulationSet s_bar_c(const std::vector<MFCurve>& calib_residuals, const Grid& grid,
                      const TrimConfig& cfg);

// Dispatch on kind for the training-set families (s0, sigma, sbar).
ModulationSet make_modulation(ModulationKind kind, const std::vector<MFCurve>& train_residuals,
                              const Grid& grid, const TrimConfig& cfg);

}  // namespace mfband
