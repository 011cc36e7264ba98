#include "mfband/regress.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <string>

namespace mfband {

namespace {

constexpr double kSingularTolerance = 1e-10;

bool has_functional_terms(const ComponentDesign& d) {
  return std::any_of(d.terms.begin(), d.terms.end(),
                     [](const Term& t) { return t.source == Term::Source::functional; });
}

// Least-squares solve of X B = Y with a rank check on X.
Eigen::MatrixXd solve_checked(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                              std::size_t component, std::size_t grid_index) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  const Eigen::Index q = X.cols();
  Eigen::MatrixXd R = qr.matrixR().topLeftCorner(q, q).template triangularView<Eigen::Upper>();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(R);
  const auto& sv = svd.singularValues();
  const double largest = sv.size() ? sv(0) : 0.0;
  const double smallest = sv.size() ? sv(sv.size() - 1) : 0.0;
  if (!(largest > 0.0) || smallest < kSingularTolerance * largest)
    throw SingularDesignError("singular design for component " + std::to_string(component) +
                              " at grid index " + std::to_string(grid_index));
  return qr.solve(Y);
}

}  // namespace

std::string to_string(RegressorKind kind) {
  switch (kind) {
    case RegressorKind::intercept_only: return "intercept_only";
    case RegressorKind::concurrent_fos: return "concurrent_fos";
    case RegressorKind::concurrent_fof: return "concurrent_fof";
  }
  return "?";
}

RegressorKind regressor_kind_from_string(const std::string& s) {
  if (s == "intercept_only") return RegressorKind::intercept_only;
  if (s == "concurrent_fos") return RegressorKind::concurrent_fos;
  if (s == "concurrent_fof") return RegressorKind::concurrent_fof;
  throw SchemaError("unknown regressor kind '" + s + "'");
}

RegressorSpec RegressorSpec::intercept_only(std::size_t p) {
  return uniform(RegressorKind::intercept_only, p, ComponentDesign{true, {}});
}

RegressorSpec RegressorSpec::uniform(RegressorKind kind, std::size_t p, ComponentDesign design) {
  RegressorSpec spec;
  spec.kind = kind;
  spec.components.assign(p, design);
  return spec;
}

void RegressorSpec::validate(const CovariateLayout& layout, std::size_t p) const {
  if (components.size() != p)
    throw ShapeError("regressor spec has " + std::to_string(components.size()) +
                     " component designs for " + std::to_string(p) + " components");
  for (std::size_t j = 0; j < p; ++j) {
    const auto& d = components[j];
    if (d.columns() == 0) throw ShapeError("component " + std::to_string(j) + ": empty design");
    if (kind == RegressorKind::intercept_only && (!d.terms.empty() || !d.intercept))
      throw ShapeError("intercept_only regressor cannot carry covariate terms");
    for (const auto& t : d.terms) {
      const bool scalar = t.source == Term::Source::scalar;
      const std::size_t bound = scalar ? layout.scalar.size() : layout.functional.size();
      if (t.index >= bound)
        throw ShapeError("component " + std::to_string(j) + ": covariate term out of range");
      if (!scalar && kind != RegressorKind::concurrent_fof)
        throw ShapeError("functional covariates require a concurrent_fof regressor");
    }
  }
}

std::vector<double> design_row(const ComponentDesign& design, const Covariates& x, std::size_t j,
                               std::size_t g) {
  std::vector<double> row;
  row.reserve(design.columns());
  if (design.intercept) row.push_back(1.0);
  for (const auto& t : design.terms) {
    if (t.source == Term::Source::scalar)
      row.push_back(x.scalar.at(t.index));
    else
      row.push_back(x.functional.at(t.index).values.at(j).at(g));
  }
  return row;
}

FittedRegressor fit(const Dataset& data, const std::vector<std::size_t>& train,
                    const RegressorSpec& spec) {
  const Grid& grid = data.grid;
  spec.validate(data.layout, grid.dims());
  for (std::size_t i : train)
    if (i >= data.size()) throw ShapeError("fit: training index out of range");

  FittedRegressor model{grid, data.layout, spec, {}};
  model.coefficients.resize(grid.dims());
  const auto m = static_cast<Eigen::Index>(train.size());

  for (std::size_t j = 0; j < grid.dims(); ++j) {
    const auto& design = spec.components[j];
    const auto q = static_cast<Eigen::Index>(design.columns());
    const std::size_t G = grid.size(j);
    if (m < q)
      throw InsufficientDataError("component " + std::to_string(j) + ": " + std::to_string(m) +
                                  " training observations for " + std::to_string(q) +
                                  " coefficients");
    auto& coef = model.coefficients[j];
    coef.assign(G, std::vector<double>(static_cast<std::size_t>(q), 0.0));

    auto fill_design = [&](Eigen::MatrixXd& X, std::size_t g) {
      for (Eigen::Index r = 0; r < m; ++r) {
        const auto row = design_row(design, data.x[train[static_cast<std::size_t>(r)]], j, g);
        for (Eigen::Index c = 0; c < q; ++c) X(r, c) = row[static_cast<std::size_t>(c)];
      }
    };

    if (!has_functional_terms(design)) {
      // One design serves every grid point: solve all of them at once.
      Eigen::MatrixXd X(m, q);
      fill_design(X, 0);
      Eigen::MatrixXd Y(m, static_cast<Eigen::Index>(G));
      for (Eigen::Index r = 0; r < m; ++r)
        for (std::size_t g = 0; g < G; ++g)
          Y(r, static_cast<Eigen::Index>(g)) = data.y[train[static_cast<std::size_t>(r)]].values[j][g];
      const Eigen::MatrixXd B = solve_checked(X, Y, j, 0);
      for (std::size_t g = 0; g < G; ++g)
        for (Eigen::Index c = 0; c < q; ++c)
          coef[g][static_cast<std::size_t>(c)] = B(c, static_cast<Eigen::Index>(g));
    } else {
      Eigen::MatrixXd X(m, q);
      Eigen::VectorXd y(m);
      for (std::size_t g = 0; g < G; ++g) {
        fill_design(X, g);
        for (Eigen::Index r = 0; r < m; ++r)
          y(r) = data.y[train[static_cast<std::size_t>(r)]].values[j][g];
        const Eigen::VectorXd b = solve_checked(X, y, j, g);
        for (Eigen::Index c = 0; c < q; ++c) coef[g][static_cast<std::size_t>(c)] = b(c);
      }
    }
  }
  return model;
}

MFCurve predict(const FittedRegressor& model, const Covariates& x, bool truncate_at_zero) {
  check_layout(model.layout, model.grid, x);
  MFCurve out = zeros_like(model.grid);
  for (std::size_t j = 0; j < model.grid.dims(); ++j) {
    const auto& design = model.spec.components[j];
    for (std::size_t g = 0; g < model.grid.size(j); ++g) {
      const auto row = design_row(design, x, j, g);
      const auto& b = model.coefficients[j][g];
      double v = 0.0;
      for (std::size_t c = 0; c < row.size(); ++c) v += row[c] * b[c];
      if (truncate_at_zero && v < 0.0) v = 0.0;
      out.values[j][g] = v;
    }
  }
  return out;
}

std::vector<MFCurve> residuals(const FittedRegressor& model, const Dataset& data,
                               const std::vector<std::size_t>& idx) {
  std::vector<MFCurve> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(data.y.at(i) - predict(model, data.x.at(i)));
  return out;
}

}  // namespace mfband
