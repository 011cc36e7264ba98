#pragma once

#include "mfband/core.hpp"

#include <concepts>
#include <string>
#include <vector>

namespace mfband {

struct SingularDesignError : Error {
  using Error::Error;
};
struct InsufficientDataError : Error {
  using Error::Error;
};

enum class RegressorKind { intercept_only, concurrent_fos, concurrent_fof };

std::string to_string(RegressorKind kind);
RegressorKind regressor_kind_from_string(const std::string& s);

// One design column: a scalar covariate or a functional covariate evaluated
// at the current grid point.
struct Term {
  enum class Source { scalar, functional };
  Source source = Source::scalar;
  std::size_t index = 0;  // into CovariateLayout::scalar / ::functional

  bool operator==(const Term& other) const = default;
};

struct ComponentDesign {
  bool intercept = true;
  std::vector<Term> terms;

  std::size_t columns() const { return terms.size() + (intercept ? 1 : 0); }
  bool operator==(const ComponentDesign& other) const = default;
};

struct RegressorSpec {
  RegressorKind kind = RegressorKind::intercept_only;
  std::vector<ComponentDesign> components;  // one per response component

  static RegressorSpec intercept_only(std::size_t p);
  // Same design for every component.
  static RegressorSpec uniform(RegressorKind kind, std::size_t p, ComponentDesign design);

  // Throws ShapeError when terms reference covariates absent from layout or
  // the kind does not admit the terms used.
  void validate(const CovariateLayout& layout, std::size_t p) const;
  bool operator==(const RegressorSpec& other) const = default;
};

// Pointwise least-squares coefficients: coefficients[j][g] has one entry per
// design column (intercept first, then terms in order).
struct FittedRegressor {
  Grid grid;
  CovariateLayout layout;
  RegressorSpec spec;
  std::vector<std::vector<std::vector<double>>> coefficients;
};

// Pointwise OLS fit on the observations listed in `train`.
FittedRegressor fit(const Dataset& data, const std::vector<std::size_t>& train,
                    const RegressorSpec& spec);

MFCurve predict(const FittedRegressor& model, const Covariates& x, bool truncate_at_zero = false);

// y_i - predict(x_i) for every listed observation.
std::vector<MFCurve> residuals(const FittedRegressor& model, const Dataset& data,
                               const std::vector<std::size_t>& idx);

// Design row of observation x for component j at grid point g.
std::vector<double> design_row(const ComponentDesign& design, const Covariates& x,
                               std::size_t j, std::size_t g);

// Anything that can produce a predicted curve from covariates can sit behind
// the conformal machinery; FittedRegressor is the built-in model.
template <typename M>
concept CurvePredictor = requires(const M& m, const Covariates& x) {
  { predict(m, x) } -> std::convertible_to<MFCurve>;
};

}  // namespace mfband
