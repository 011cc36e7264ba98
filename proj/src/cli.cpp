#include "mfband/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

namespace mfband {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------- csv helpers

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct CsvReader {
  std::istream& in;
  std::string name;
  std::size_t line_no = 0;

  bool next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      fields = split_csv_line(line);
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw SchemaError(name + ": row " + std::to_string(line_no) + ": " + msg);
  }

  double real(const std::string& s) const {
    if (s.empty()) fail("empty numeric field");
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v))
      fail("invalid number '" + s + "'");
    return v;
  }

  std::size_t index(const std::string& s) const {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
      fail("invalid component index '" + s + "'");
    return static_cast<std::size_t>(std::stoul(s));
  }
};

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open '" + path + "'");
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  return out;
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

json read_json(const std::string& path) {
  auto in = open_input(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

template <typename T>
T get_field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw SchemaError(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw SchemaError(where + ": field '" + key + "': " + e.what());
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  return j.contains(key) ? get_field<T>(j, key, where) : fallback;
}

}  // namespace

// ---------------------------------------------------------------- curves

CurveTable parse_curves_csv(std::istream& in, const std::string& name) {
  CsvReader csv{in, name};
  std::vector<std::string> f;
  if (!csv.next(f)) throw SchemaError(name + ": empty file");
  if (f != std::vector<std::string>{"curve_id", "component", "t", "value"})
    csv.fail("header must be curve_id,component,t,value");

  // (component -> t -> value) per curve
  std::vector<std::map<std::size_t, std::map<double, double>>> raw;
  std::unordered_map<std::string, std::size_t> id_index;
  CurveTable table;
  std::size_t max_component = 0;
  while (csv.next(f)) {
    if (f.size() != 4) csv.fail("expected 4 fields, got " + std::to_string(f.size()));
    if (f[0].empty()) csv.fail("empty curve_id");
    const std::size_t comp = csv.index(f[1]);
    const double t = csv.real(f[2]);
    const double v = csv.real(f[3]);
    auto [it, inserted] = id_index.emplace(f[0], table.ids.size());
    if (inserted) {
      table.ids.push_back(f[0]);
      raw.emplace_back();
    }
    auto& slot = raw[it->second][comp];
    if (!slot.emplace(t, v).second) csv.fail("duplicate (curve_id, component, t)");
    max_component = std::max(max_component, comp);
  }
  if (table.ids.size() < 2) throw SchemaError(name + ": need at least 2 curves");

  const std::size_t p = max_component + 1;
  std::vector<std::vector<double>> points(p);
  for (std::size_t j = 0; j < p; ++j) {
    const auto found = raw.front().find(j);
    if (found == raw.front().end())
      throw SchemaError(name + ": component " + std::to_string(j) + " missing for curve '" +
                        table.ids.front() + "'");
    for (const auto& [t, v] : found->second) points[j].push_back(t);
  }
  for (std::size_t i = 0; i < raw.size(); ++i) {
    MFCurve c;
    c.values.resize(p);
    for (std::size_t j = 0; j < p; ++j) {
      const auto found = raw[i].find(j);
      if (found == raw[i].end() || found->second.size() != points[j].size())
        throw SchemaError(name + ": curve '" + table.ids[i] + "' does not match the grid of '" +
                          table.ids.front() + "' on component " + std::to_string(j));
      std::size_t g = 0;
      for (const auto& [t, v] : found->second) {
        if (t != points[j][g])
          throw SchemaError(name + ": curve '" + table.ids[i] + "' has t=" + fmt17(t) +
                            " not present in the common grid");
        c.values[j].push_back(v);
        ++g;
      }
    }
    table.curves.push_back(std::move(c));
  }
  try {
    table.grid = Grid::from_points(points);
  } catch (const ShapeError& e) {
    throw SchemaError(name + ": " + e.what());
  }
  return table;
}

CurveTable read_curves_csv(const std::string& path) {
  auto in = open_input(path);
  return parse_curves_csv(in, path);
}

// ---------------------------------------------------------------- covariates

CovariateTable read_covariates(const std::vector<std::string>& paths, const Grid& grid,
                               const std::vector<std::string>* order) {
  // id -> (scalar name -> value), id -> (functional name -> curve)
  std::map<std::string, std::map<std::string, double>> scalars;
  std::map<std::string, std::map<std::string, MFCurve>> functionals;
  std::vector<std::string> first_ids;
  CovariateLayout layout;

  std::vector<std::map<double, std::size_t>> grid_pos(grid.dims());
  for (std::size_t j = 0; j < grid.dims(); ++j)
    for (std::size_t g = 0; g < grid.size(j); ++g) grid_pos[j][grid.component(j).points[g]] = g;

  for (const auto& path : paths) {
    auto in = open_input(path);
    CsvReader csv{in, path};
    std::vector<std::string> header;
    if (!csv.next(header)) throw SchemaError(path + ": empty file");
    if (header.empty() || header[0] != "curve_id") csv.fail("header must start with curve_id");
    const bool functional = header.size() >= 3 && header[1] == "component" && header[2] == "t";
    const std::size_t first_value = functional ? 3 : 1;
    if (header.size() <= first_value) csv.fail("no covariate columns");
    std::vector<std::string> names(header.begin() + static_cast<std::ptrdiff_t>(first_value),
                                   header.end());
    auto& target = functional ? layout.functional : layout.scalar;
    for (const auto& n : names) {
      if (n.empty()) csv.fail("empty covariate name");
      if (std::find(target.begin(), target.end(), n) != target.end())
        csv.fail("covariate '" + n + "' defined twice");
      target.push_back(n);
    }

    std::set<std::string> seen_ids;
    std::vector<std::string> f;
    while (csv.next(f)) {
      if (f.size() != header.size())
        csv.fail("expected " + std::to_string(header.size()) + " fields, got " +
                 std::to_string(f.size()));
      const std::string& id = f[0];
      if (id.empty()) csv.fail("empty curve_id");
      if (seen_ids.insert(id).second && paths.front() == path) first_ids.push_back(id);
      if (!functional) {
        auto& row = scalars[id];
        for (std::size_t c = 0; c < names.size(); ++c) {
          if (row.count(names[c])) csv.fail("duplicate row for curve '" + id + "'");
          row[names[c]] = csv.real(f[first_value + c]);
        }
        continue;
      }
      const std::size_t comp = csv.index(f[1]);
      const double t = csv.real(f[2]);
      if (comp >= grid.dims()) csv.fail("component " + f[1] + " outside the response grid");
      const auto pos = grid_pos[comp].find(t);
      if (pos == grid_pos[comp].end()) csv.fail("t=" + f[2] + " is not a response grid point");
      for (std::size_t c = 0; c < names.size(); ++c) {
        auto [it, fresh] = functionals[id].try_emplace(names[c]);
        if (fresh) {
          it->second = zeros_like(grid);
          for (auto& comp_vals : it->second.values)
            std::fill(comp_vals.begin(), comp_vals.end(), std::nan(""));
        }
        double& slot = it->second.values[comp][pos->second];
        if (!std::isnan(slot)) csv.fail("duplicate (curve_id, component, t)");
        slot = csv.real(f[first_value + c]);
      }
    }
  }

  CovariateTable table;
  table.layout = layout;
  table.ids = order ? *order : first_ids;
  for (const auto& id : table.ids) {
    Covariates x;
    for (const auto& name : layout.scalar) {
      auto it = scalars.find(id);
      if (it == scalars.end() || !it->second.count(name))
        throw SchemaError("scalar covariate '" + name + "' missing for curve '" + id + "'");
      x.scalar.push_back(it->second.at(name));
    }
    for (const auto& name : layout.functional) {
      auto it = functionals.find(id);
      if (it == functionals.end() || !it->second.count(name))
        throw SchemaError("functional covariate '" + name + "' missing for curve '" + id + "'");
      const MFCurve& curve = it->second.at(name);
      for (const auto& comp : curve.values)
        for (double v : comp)
          if (std::isnan(v))
            throw SchemaError("functional covariate '" + name + "' incomplete for curve '" + id +
                              "'");
      x.functional.push_back(curve);
    }
    table.x.push_back(std::move(x));
  }
  return table;
}

// ---------------------------------------------------------------- bundle

namespace {

json grid_to_json(const Grid& grid) {
  json comps = json::array();
  for (const auto& c : grid.components()) comps.push_back({{"points", c.points}, {"weights", c.weights}});
  return comps;
}

Grid grid_from_json(const json& j) {
  std::vector<ComponentGrid> comps;
  for (const auto& c : j)
    comps.push_back({get_field<std::vector<double>>(c, "points", "grid"),
                     get_field<std::vector<double>>(c, "weights", "grid")});
  try {
    return Grid(std::move(comps));
  } catch (const ShapeError& e) {
    throw SchemaError(std::string("bundle grid: ") + e.what());
  }
}

json design_to_json(const ComponentDesign& d, const CovariateLayout& layout) {
  json terms = json::array();
  for (const auto& t : d.terms) {
    const bool scalar = t.source == Term::Source::scalar;
    terms.push_back({{"source", scalar ? "scalar" : "functional"},
                     {"name", scalar ? layout.scalar.at(t.index) : layout.functional.at(t.index)}});
  }
  return {{"intercept", d.intercept}, {"terms", terms}};
}

ComponentDesign design_from_json(const json& j, const CovariateLayout& layout) {
  ComponentDesign d;
  d.intercept = get_field<bool>(j, "intercept", "regressor component");
  for (const auto& t : get_field<json>(j, "terms", "regressor component")) {
    const auto source = get_field<std::string>(t, "source", "term");
    const auto name = get_field<std::string>(t, "name", "term");
    try {
      if (source == "scalar")
        d.terms.push_back({Term::Source::scalar, layout.scalar_index(name)});
      else if (source == "functional")
        d.terms.push_back({Term::Source::functional, layout.functional_index(name)});
      else
        throw SchemaError("term source must be scalar or functional");
    } catch (const ShapeError& e) {
      throw SchemaError(e.what());
    }
  }
  return d;
}

}  // namespace

json bundle_to_json(const ModelBundle& bundle) {
  const BandPredictor& p = bundle.predictor;
  json designs = json::array();
  for (const auto& d : p.model.spec.components) designs.push_back(design_to_json(d, p.model.layout));
  const Calibration& c = p.calibration;
  json cal = {{"alpha", p.alpha},
              {"mode", to_string(p.mode)},
              {"tau", p.tau ? json(*p.tau) : json(nullptr)},
              {"infinite", c.infinite},
              {"radius", c.radius},
              {"closure", to_string(c.closure)},
              {"rank", c.rank},
              {"ties_right", c.ties_right},
              {"ties_left", c.ties_left},
              {"calib_size", p.calib_size}};
  return {{"format", "mfband-bundle"},
          {"format_version", kBundleFormatVersion},
          {"metadata", {{"seed", bundle.seed}, {"created_by", bundle.created_by}}},
          {"grid", grid_to_json(p.model.grid)},
          {"layout", {{"scalar", p.model.layout.scalar}, {"functional", p.model.layout.functional}}},
          {"regressor",
           {{"kind", to_string(p.model.spec.kind)},
            {"components", designs},
            {"coefficients", p.model.coefficients}}},
          {"modulation", {{"label", to_string(p.modulation.label)}, {"values", p.modulation.fns}}},
          {"calibration", cal}};
}

ModelBundle bundle_from_json(const json& j) {
  const std::string where = "bundle";
  if (get_field<std::string>(j, "format", where) != "mfband-bundle")
    throw SchemaError("not an mfband bundle");
  const int version = get_field<int>(j, "format_version", where);
  if (version != kBundleFormatVersion)
    throw SchemaError("bundle format version " + std::to_string(version) +
                      " is not supported (expected " + std::to_string(kBundleFormatVersion) + ")");
  ModelBundle b;
  const json meta = get_field<json>(j, "metadata", where);
  b.seed = get_or<std::uint64_t>(meta, "seed", 0, "metadata");
  b.created_by = get_or<std::string>(meta, "created_by", "", "metadata");

  BandPredictor& p = b.predictor;
  p.model.grid = grid_from_json(get_field<json>(j, "grid", where));
  const json layout = get_field<json>(j, "layout", where);
  p.model.layout.scalar = get_field<std::vector<std::string>>(layout, "scalar", "layout");
  p.model.layout.functional = get_field<std::vector<std::string>>(layout, "functional", "layout");

  const json reg = get_field<json>(j, "regressor", where);
  p.model.spec.kind = regressor_kind_from_string(get_field<std::string>(reg, "kind", "regressor"));
  for (const auto& d : get_field<json>(reg, "components", "regressor"))
    p.model.spec.components.push_back(design_from_json(d, p.model.layout));
  p.model.coefficients =
      get_field<std::vector<std::vector<std::vector<double>>>>(reg, "coefficients", "regressor");

  const json mod = get_field<json>(j, "modulation", where);
  p.modulation.label = modulation_kind_from_string(get_field<std::string>(mod, "label", "modulation"));
  p.modulation.fns = get_field<ComponentValues>(mod, "values", "modulation");

  const json cal = get_field<json>(j, "calibration", where);
  p.alpha = get_field<double>(cal, "alpha", "calibration");
  p.mode = conformal_mode_from_string(get_field<std::string>(cal, "mode", "calibration"));
  if (cal.contains("tau") && !cal.at("tau").is_null()) p.tau = get_field<double>(cal, "tau", "calibration");
  p.calibration.infinite = get_field<bool>(cal, "infinite", "calibration");
  p.calibration.radius = get_field<double>(cal, "radius", "calibration");
  p.calibration.closure = closure_from_string(get_field<std::string>(cal, "closure", "calibration"));
  p.calibration.rank = get_field<long>(cal, "rank", "calibration");
  p.calibration.ties_right = get_or<std::size_t>(cal, "ties_right", 0, "calibration");
  p.calibration.ties_left = get_or<std::size_t>(cal, "ties_left", 0, "calibration");
  p.calib_size = get_field<std::size_t>(cal, "calib_size", "calibration");

  // structural consistency
  const Grid& grid = p.model.grid;
  try {
    p.model.spec.validate(p.model.layout, grid.dims());
    grid.check_shape(p.modulation.fns, "bundle modulation");
  } catch (const ShapeError& e) {
    throw SchemaError(e.what());
  }
  if (p.model.coefficients.size() != grid.dims())
    throw SchemaError("bundle coefficients do not match the grid");
  for (std::size_t jj = 0; jj < grid.dims(); ++jj) {
    if (p.model.coefficients[jj].size() != grid.size(jj))
      throw SchemaError("bundle coefficients do not match the grid");
    for (const auto& c : p.model.coefficients[jj])
      if (c.size() != p.model.spec.components[jj].columns())
        throw SchemaError("bundle coefficient vector has the wrong length");
  }
  for (const auto& comp : p.modulation.fns)
    for (double v : comp)
      if (!(v > 0.0)) throw SchemaError("bundle modulation must be strictly positive");
  return b;
}

void save_bundle(const ModelBundle& bundle, const std::string& path) {
  auto out = open_output(path);
  out << bundle_to_json(bundle).dump(2) << '\n';
}

ModelBundle load_bundle(const std::string& path) { return bundle_from_json(read_json(path)); }

// ---------------------------------------------------------------- band csv

void write_band_csv(std::ostream& out, const std::vector<std::string>& ids,
                    const std::vector<Band>& bands, const Grid& grid) {
  out << "curve_id,component,t,lower,upper,closure\n";
  for (std::size_t b = 0; b < bands.size(); ++b) {
    const Band& band = bands[b];
    for (std::size_t j = 0; j < grid.dims(); ++j)
      for (std::size_t g = 0; g < grid.size(j); ++g) {
        out << ids.at(b) << ',' << j << ',' << fmt17(grid.component(j).points[g]) << ',';
        if (band.infinite)
          out << ",,infinite\n";
        else
          out << fmt17(band.lower[j][g]) << ',' << fmt17(band.upper[j][g]) << ','
              << to_string(band.closure) << '\n';
      }
  }
}

std::vector<BandRow> read_band_csv(const std::string& path) {
  auto in = open_input(path);
  CsvReader csv{in, path};
  std::vector<std::string> f;
  if (!csv.next(f) ||
      f != std::vector<std::string>{"curve_id", "component", "t", "lower", "upper", "closure"})
    csv.fail("header must be curve_id,component,t,lower,upper,closure");
  std::vector<BandRow> rows;
  while (csv.next(f)) {
    if (f.size() != 6) csv.fail("expected 6 fields");
    BandRow r;
    r.curve_id = f[0];
    r.component = csv.index(f[1]);
    r.t = csv.real(f[2]);
    if (f[5] == "infinite") {
      r.infinite = true;
    } else {
      r.lower = csv.real(f[3]);
      r.upper = csv.real(f[4]);
      r.closure = closure_from_string(f[5]);
    }
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------- calibrate

namespace {

ComponentDesign design_from_config(const json& j, const CovariateLayout& layout) {
  ComponentDesign d;
  d.intercept = get_or<bool>(j, "intercept", true, "regressor");
  try {
    for (const auto& n : get_or<std::vector<std::string>>(j, "scalar", {}, "regressor"))
      d.terms.push_back({Term::Source::scalar, layout.scalar_index(n)});
    for (const auto& n : get_or<std::vector<std::string>>(j, "functional", {}, "regressor"))
      d.terms.push_back({Term::Source::functional, layout.functional_index(n)});
  } catch (const ShapeError& e) {
    throw SchemaError(std::string("regressor: ") + e.what());
  }
  return d;
}

}  // namespace

CalibrationPlan plan_from_json(const json& config, const Dataset& data) {
  const std::string where = "config";
  CalibrationPlan plan;
  plan.seed = get_or<std::uint64_t>(config, "seed", 0, where);
  plan.trim.alpha = get_field<double>(config, "alpha", where);
  plan.trim.mode = conformal_mode_from_string(get_or<std::string>(config, "mode", "split", where));
  if (plan.trim.mode == ConformalMode::smoothed) {
    if (config.contains("tau"))
      plan.trim.tau = get_field<double>(config, "tau", where);
    else
      plan.trim.tau = Rng(mix_seed(plan.seed ^ 0x7a7aULL)).uniform();
  }
  plan.modulation = modulation_kind_from_string(get_or<std::string>(config, "modulation", "s0", where));
  if (plan.modulation == ModulationKind::sbar_c)
    throw SchemaError("config: sbar_c cannot drive a predictor");

  const std::size_t n = data.size();
  const std::size_t p = data.grid.dims();
  const json reg = get_or<json>(config, "regressor", json{{"kind", "intercept_only"}}, where);
  plan.regressor.kind = regressor_kind_from_string(get_or<std::string>(reg, "kind", "intercept_only", "regressor"));
  if (reg.contains("components")) {
    for (const auto& c : reg.at("components"))
      plan.regressor.components.push_back(design_from_config(c, data.layout));
  } else {
    plan.regressor.components.assign(p, design_from_config(reg, data.layout));
  }
  try {
    plan.regressor.validate(data.layout, p);
  } catch (const ShapeError& e) {
    throw SchemaError(std::string("regressor: ") + e.what());
  }

  const json split = get_field<json>(config, "split", where);
  const auto strategy = get_or<std::string>(split, "strategy", "random", "split");
  if (strategy == "explicit") {
    plan.split.train = get_field<std::vector<std::size_t>>(split, "train", "split");
    plan.split.calib = get_field<std::vector<std::size_t>>(split, "calib", "split");
    try {
      check_split(plan.split, n);
    } catch (const ShapeError& e) {
      throw SchemaError(std::string("split: ") + e.what());
    }
  } else if (strategy == "random" || strategy == "parity") {
    const auto l = get_field<std::size_t>(split, "l", "split");
    const auto seed = get_or<std::uint64_t>(split, "seed", plan.seed, "split");
    plan.split = make_split(n, l, seed,
                            strategy == "parity" ? SplitStrategy::parity : SplitStrategy::random);
  } else {
    throw SchemaError("split: unknown strategy '" + strategy + "'");
  }
  return plan;
}

CalibrateSummary cmd_calibrate(const std::string& curves_path,
                               const std::vector<std::string>& covariate_paths,
                               const std::string& config_path, const std::string& out_path,
                               std::ostream& log) {
  const CurveTable curves = read_curves_csv(curves_path);
  const json config = read_json(config_path);

  Dataset data;
  data.grid = curves.grid;
  data.y = curves.curves;
  if (covariate_paths.empty()) {
    data.x.assign(curves.curves.size(), Covariates{});
  } else {
    CovariateTable cov = read_covariates(covariate_paths, curves.grid, &curves.ids);
    data.layout = cov.layout;
    data.x = std::move(cov.x);
  }
  data.validate();

  const CalibrationPlan plan = plan_from_json(config, data);
  const std::size_t l = plan.split.calib.size();
  CalibrateSummary summary;
  summary.l = l;
  summary.bundle.seed = plan.seed;
  summary.bundle.created_by = std::string("mfband ") + kVersion;
  summary.bundle.predictor =
      calibrate_predictor(data, plan.split, plan.regressor, plan.modulation, plan.trim);
  const auto& cal = summary.bundle.predictor.calibration;
  if (cal.infinite) {
    const bool split = plan.trim.mode == ConformalMode::split;
    const double bound = (split ? 1.0 : plan.trim.tau) / static_cast<double>(l + 1);
    throw Error("alpha=" + fmt_short(plan.trim.alpha) + " is below " +
                (split ? "1/(l+1)" : "tau/(l+1)") + " = " + fmt_short(bound) + " for l=" +
                std::to_string(l) + ": the prediction band is the whole space");
  }
  summary.theoretical_coverage = plan.trim.mode == ConformalMode::split
                                     ? split_coverage(l, plan.trim.alpha)
                                     : 1.0 - plan.trim.alpha;
  save_bundle(summary.bundle, out_path);
  log << "k=" << fmt17(cal.radius) << "\n"
      << "l=" << l << "\n"
      << "m=" << plan.split.train.size() << "\n"
      << "closure=" << to_string(cal.closure) << "\n"
      << "theoretical_coverage=" << fmt17(summary.theoretical_coverage) << "\n";
  return summary;
}

// ---------------------------------------------------------------- band

void cmd_band(const std::string& bundle_path, const std::vector<std::string>& covariate_paths,
              const std::string& out_path, bool truncate) {
  const ModelBundle bundle = load_bundle(bundle_path);
  const BandPredictor& pred = bundle.predictor;
  const Grid& grid = pred.model.grid;

  std::vector<std::string> ids;
  std::vector<Covariates> xs;
  if (covariate_paths.empty()) {
    if (!pred.model.layout.scalar.empty() || !pred.model.layout.functional.empty())
      throw SchemaError("the bundle's regressor needs covariates (--covariates)");
    ids = {"new"};
    xs = {Covariates{}};
  } else {
    CovariateTable cov = read_covariates(covariate_paths, grid);
    if (!(cov.layout == pred.model.layout)) {
      // accept any column order as long as the names match
      CovariateTable reordered;
      for (std::size_t i = 0; i < cov.x.size(); ++i) {
        Covariates x;
        try {
          for (const auto& name : pred.model.layout.scalar)
            x.scalar.push_back(cov.x[i].scalar.at(cov.layout.scalar_index(name)));
          for (const auto& name : pred.model.layout.functional)
            x.functional.push_back(cov.x[i].functional.at(cov.layout.functional_index(name)));
        } catch (const ShapeError& e) {
          throw SchemaError(std::string("covariate layout mismatch: ") + e.what());
        }
        reordered.x.push_back(std::move(x));
      }
      cov.x = std::move(reordered.x);
    }
    ids = cov.ids;
    xs = std::move(cov.x);
  }
  std::vector<Band> bands;
  for (const auto& x : xs) {
    try {
      bands.push_back(make_band(pred, x, truncate));
    } catch (const ShapeError& e) {
      throw SchemaError(std::string("covariate layout mismatch: ") + e.what());
    }
  }
  auto out = open_output(out_path);
  write_band_csv(out, ids, bands, grid);
}

// ---------------------------------------------------------------- study

StudyConfig study_config_from_json(const json& j) {
  const std::string where = "study config";
  StudyConfig cfg;
  cfg.scenario.study = get_field<int>(j, "study", where);
  cfg.scenario.scenario = get_field<int>(j, "scenario", where);
  cfg.scenario.n = get_field<std::size_t>(j, "n", where);
  cfg.scenario.covariate_set = get_or<int>(j, "covariate_set", 2, where);
  cfg.scenario.coef_seed = get_or<std::uint64_t>(j, "coef_seed", 1, where);
  cfg.scenario.grid_points = get_or<std::size_t>(j, "grid_points", 100, where);
  cfg.modulation = modulation_kind_from_string(get_or<std::string>(j, "modulation", "sigma", where));
  cfg.mode = conformal_mode_from_string(get_or<std::string>(j, "mode", "split", where));
  cfg.method = band_method_from_string(get_or<std::string>(j, "method", "mpb", where));
  cfg.alpha = get_or<double>(j, "alpha", 0.1, where);
  cfg.l = get_field<std::size_t>(j, "l", where);
  cfg.replications = get_or<std::size_t>(j, "replications", 1000, where);
  cfg.seed = get_or<std::uint64_t>(j, "seed", 1, where);
  cfg.threads = get_or<std::size_t>(j, "threads", 0, where);
  cfg.skip_failures = get_or<bool>(j, "skip_failures", false, where);
  return cfg;
}

std::vector<StudyConfig> study_configs_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("study config must be a JSON object");
  if (!j.contains("runs")) return {study_config_from_json(j)};
  json base = j;
  base.erase("runs");
  std::vector<StudyConfig> out;
  for (const auto& overrides : j.at("runs")) {
    json merged = base;
    merged.update(overrides);
    out.push_back(study_config_from_json(merged));
  }
  return out;
}

json report_to_json(const StudyReport& r) {
  const StudyConfig& c = r.config;
  json j = {{"study", c.scenario.study},
            {"scenario", c.scenario.scenario},
            {"n", c.scenario.n},
            {"covariate_set", c.scenario.covariate_set},
            {"coef_seed", c.scenario.coef_seed},
            {"grid_points", c.scenario.grid_points},
            {"modulation", to_string(c.modulation)},
            {"mode", to_string(c.mode)},
            {"method", to_string(c.method)},
            {"alpha", c.alpha},
            {"l", c.l},
            {"seed", c.seed},
            {"replications", r.replications},
            {"failures", r.failures},
            {"hits", r.hits},
            {"coverage", r.coverage.p},
            {"ci", {r.coverage.lower, r.coverage.upper}},
            {"theoretical_coverage", r.theoretical_coverage}};
  if (r.size)
    j["size"] = {{"q1", r.size->q1}, {"median", r.size->median}, {"q3", r.size->q3}};
  else
    j["size"] = nullptr;
  return j;
}

void write_study_table(std::ostream& out, const std::vector<StudyReport>& reports) {
  out << "study,scenario,n,covariate_set,modulation,method,mode,alpha,l,replications,coverage,"
         "ci_lower,ci_upper,median_size,q1_size,q3_size,theoretical_coverage\n";
  for (const auto& r : reports) {
    const auto& c = r.config;
    out << c.scenario.study << ',' << c.scenario.scenario << ',' << c.scenario.n << ','
        << c.scenario.covariate_set << ',' << to_string(c.modulation) << ','
        << to_string(c.method) << ',' << to_string(c.mode) << ',' << fmt17(c.alpha) << ','
        << c.l << ',' << r.replications << ',' << fmt17(r.coverage.p) << ','
        << fmt17(r.coverage.lower) << ',' << fmt17(r.coverage.upper) << ',';
    if (r.size)
      out << fmt17(r.size->median) << ',' << fmt17(r.size->q1) << ',' << fmt17(r.size->q3);
    else
      out << ",,";
    out << ',' << fmt17(r.theoretical_coverage) << '\n';
  }
}

std::vector<StudyReport> cmd_study(const std::string& config_path, const std::string& report_path,
                                   const std::string& table_path) {
  const auto configs = study_configs_from_json(read_json(config_path));
  std::vector<StudyReport> reports;
  json runs = json::array();
  for (const auto& cfg : configs) {
    reports.push_back(run_study(cfg));
    runs.push_back(report_to_json(reports.back()));
  }
  {
    auto out = open_output(report_path);
    out << json{{"runs", runs}}.dump(2) << '\n';
  }
  if (!table_path.empty()) {
    auto out = open_output(table_path);
    write_study_table(out, reports);
  }
  return reports;
}

// ---------------------------------------------------------------- entry point

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Conformal prediction bands for multivariate functional data"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string curves, config, out, bundle, report, table;
  std::vector<std::string> covariates;
  bool truncate = false;

  auto* cal = app.add_subcommand("calibrate", "fit, modulate and calibrate; writes a model bundle");
  cal->add_option("--curves", curves, "response curves CSV (curve_id,component,t,value)")->required();
  cal->add_option("--covariates", covariates, "covariate CSV files (scalar or functional)");
  cal->add_option("--config", config, "calibration config JSON")->required();
  cal->add_option("--out", out, "output bundle JSON")->required();

  auto* band = app.add_subcommand("band", "prediction bands for new covariates");
  band->add_option("--bundle", bundle, "model bundle JSON")->required();
  band->add_option("--covariates", covariates, "covariate CSV files for the new observations");
  band->add_option("--out", out, "output band CSV")->required();
  band->add_flag("--truncate-at-zero", truncate, "clamp band bounds at zero");

  auto* study = app.add_subcommand("study", "run a Monte Carlo coverage/efficiency study");
  study->add_option("--config", config, "study config JSON")->required();
  study->add_option("--report", report, "output report JSON")->required();
  study->add_option("--table", table, "output table CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*cal) {
      cmd_calibrate(curves, covariates, config, out, std::cout);
    } else if (*band) {
      cmd_band(bundle, covariates, out, truncate);
    } else if (*study) {
      for (const auto& r : cmd_study(config, report, table))
        std::cout << "coverage=" << r.coverage.p << " [" << r.coverage.lower << ", "
                  << r.coverage.upper << "] theoretical=" << r.theoretical_coverage << "\n";
    }
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace mfband
