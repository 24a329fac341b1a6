#include "ncjoin/cli.hpp"

#include "ncjoin/dual.hpp"
#include "ncjoin/joinings.hpp"
#include "ncjoin/system_io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace ncjoin {

using nlohmann::json;

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "unreadable";
  std::uint64_t h = 1469598103934665603ULL;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  std::ostringstream out;
  out << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

json report_to_json(const Report& r) {
  return {{"command", r.command}, {"arguments", r.arguments}, {"inputs", r.inputs},
          {"results", r.results}, {"warnings", r.warnings},   {"errors", r.errors},
          {"exit_status", r.exit_status}, {"format", r.format}};
}

Report report_from_json(const json& j) {
  Report r;
  r.command = j.at("command").get<std::string>();
  r.arguments = j.at("arguments").get<std::vector<std::string>>();
  r.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
  r.results = j.at("results");
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  r.errors = j.at("errors").get<std::vector<std::string>>();
  r.exit_status = j.at("exit_status").get<int>();
  r.format = j.at("format").get<std::string>();
  return r;
}

// ---------------------------------------------------------------------------
// Table rendering

static std::string scalar_text(const json& v) {
  if (v.is_null()) return "-";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  if (v.is_number_float()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v.get<double>());
    return buf;
  }
  return v.dump();
}

static bool is_complex_pair(const json& v) {
  return v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number();
}

static std::string compact_text(const json& v) {
  if (is_complex_pair(v)) {
    const double im = v[1].get<double>();
    if (im == 0.0) return scalar_text(v[0]);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%.6gi", im < 0 ? "-" : "+", std::abs(im));
    return scalar_text(v[0]) + buf;
  }
  if (v.is_array()) {
    std::string out;
    for (const auto& e : v) out += (out.empty() ? "" : " ") + compact_text(e);
    return "[" + out + "]";
  }
  if (v.is_object()) return v.dump();
  return scalar_text(v);
}

static bool is_record_array(const json& v) {
  if (!v.is_array() || v.empty()) return false;
  for (const auto& e : v)
    if (!e.is_object()) return false;
  return true;
}

static void render(const json& v, const std::string& indent, std::ostringstream& out);

static void render_records(const json& rows, const std::string& indent, std::ostringstream& out) {
  std::vector<std::string> cols;
  for (const auto& row : rows)
    for (auto it = row.begin(); it != row.end(); ++it)
      if (std::find(cols.begin(), cols.end(), it.key()) == cols.end()) cols.push_back(it.key());
  std::vector<std::vector<std::string>> cells;
  std::vector<std::size_t> width(cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c) width[c] = cols[c].size();
  for (const auto& row : rows) {
    std::vector<std::string> line;
    for (std::size_t c = 0; c < cols.size(); ++c) {
      line.push_back(row.contains(cols[c]) ? compact_text(row[cols[c]]) : "");
      width[c] = std::max(width[c], line.back().size());
    }
    cells.push_back(std::move(line));
  }
  auto emit_line = [&](const std::vector<std::string>& line) {
    out << indent;
    for (std::size_t c = 0; c < line.size(); ++c) {
      out << std::left << std::setw(int(width[c])) << line[c];
      if (c + 1 < line.size()) out << "  ";
    }
    out << "\n";
  };
  emit_line(cols);
  for (const auto& line : cells) emit_line(line);
}

static void render(const json& v, const std::string& indent, std::ostringstream& out) {
  std::size_t key_width = 0;
  for (auto it = v.begin(); it != v.end(); ++it) key_width = std::max(key_width, it.key().size());
  for (auto it = v.begin(); it != v.end(); ++it) {
    const json& x = it.value();
    if (x.is_object() && !x.empty()) {
      out << indent << it.key() << ":\n";
      render(x, indent + "  ", out);
    } else if (is_record_array(x)) {
      out << indent << it.key() << ":\n";
      render_records(x, indent + "  ", out);
    } else {
      out << indent << std::left << std::setw(int(key_width)) << it.key() << "  " << compact_text(x) << "\n";
    }
  }
}

std::string emit_table(const Report& r) {
  std::ostringstream out;
  out << "ncjoin " << r.command << "\n";
  render(r.results, "  ", out);
  for (const auto& w : r.warnings) out << "warning: " << w << "\n";
  for (const auto& e : r.errors) out << "error: " << e << "\n";
  return out.str();
}

std::string emit(const Report& r) {
  if (r.format == "json") return report_to_json(r).dump(2) + "\n";
  return emit_table(r);
}

// ---------------------------------------------------------------------------
// Helpers

namespace {

struct Inconclusive : Error {
  using Error::Error;
};

struct Globals {
  std::string format = "table";
  std::optional<double> tol;
  std::optional<int> max_iter;
  std::uint64_t seed = 1;
};

json cjson(Complex z) { return complex_to_json(z); }
json qjson(const Rational& q) { return to_string(q); }
json zjson(const GaussianRational& z) { return to_string(z); }

std::pair<long long, long long> parse_range(const std::string& s) {
  const auto dots = s.find("..");
  if (dots == std::string::npos) throw InputError("range must look like \"0..32\", got \"" + s + "\"");
  try {
    std::size_t used = 0;
    const long long a = std::stoll(s.substr(0, dots), &used);
    if (used != dots) throw InputError("bad range start");
    const std::string rest = s.substr(dots + 2);
    const long long b = std::stoll(rest, &used);
    if (used != rest.size()) throw InputError("bad range end");
    if (b < a) throw InputError("empty range \"" + s + "\"");
    return {a, b};
  } catch (const std::logic_error&) {
    throw InputError("range must look like \"0..32\", got \"" + s + "\"");
  }
}

SolverOptions solver_options(const Globals& g) {
  SolverOptions o = default_solver_options();
  if (g.tol) o.tol = *g.tol;
  if (g.max_iter) o.max_iterations = *g.max_iter;
  return o;
}

json residuals_json(const JoiningResiduals& r) {
  return {{"psd", r.psd},
          {"trace", r.trace},
          {"marginal_a", r.marginal_a},
          {"marginal_b", r.marginal_b},
          {"invariance", r.invariance},
          {"max", r.max()}};
}

json values_json(const TensorContext& ctx, const JoiningMatrix& w) {
  json rows = json::array();
  for (int i = 0; i < ctx.a().structure.dimension(); ++i) {
    json row = json::array();
    for (int j = 0; j < ctx.b().structure.dimension(); ++j) row.push_back(cjson(w(ctx.basis(i, j))));
    rows.push_back(row);
  }
  return rows;
}

Vector gns_vector(const FiniteSystem& sys, const std::string& text) {
  const int d = sys.structure.dimension();
  if (text == "omega") return AlgebraElement::identity(sys.structure).coordinates();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception&) {
    throw InputError("vector must be a basis index, \"omega\" or a JSON coefficient list: \"" + text + "\"");
  }
  if (j.is_number_integer()) {
    const int i = j.get<int>();
    if (i < 0 || i >= d) throw InputError("basis index " + std::to_string(i) + " out of range");
    return AlgebraElement::unit(sys.structure, i).coordinates();
  }
  if (!j.is_array() || int(j.size()) != d)
    throw InputError("coefficient list must have " + std::to_string(d) + " entries");
  Vector v(d);
  for (int i = 0; i < d; ++i) v(i) = complex_from_json(j[std::size_t(i)]);
  return v;
}

FiniteSystem load_valid(const std::string& path, Report& r) {
  r.inputs[path] = file_digest(path);
  FiniteSystem sys = load_system(path);
  const ValidationReport v = validate_system(sys);
  if (!v.valid()) throw InvalidSystem(path + ": " + v.summary());
  return sys;
}

DualSystem load_dual(const std::string& path, Report& r) {
  r.inputs[path] = file_digest(path);
  return load_dual_system(path);
}

// ---------------------------------------------------------------------------
// Finite systems

void cmd_validate(const std::string& path, Report& r) {
  r.inputs[path] = file_digest(path);
  const FiniteSystem sys = load_system(path);
  const ValidationReport v = validate_system(sys);
  json viol = json::array();
  for (const Violation& x : v.violations)
    viol.push_back({{"kind", to_string(x.kind)}, {"residual", x.residual}, {"message", x.message}});
  r.results = {{"system", sys.name}, {"valid", v.valid()}, {"violations", viol}};
  if (!v.valid()) {
    r.errors.push_back(v.summary());
    r.exit_status = kExitMalformedInput;
  }
}

void cmd_classify(const std::string& path, Report& r) {
  const FiniteSystem sys = load_valid(path, r);
  const Classification c = classify_finite(sys);
  json spectrum = json::array();
  for (const PointSpectrumEntry& e : point_spectrum(sys)) {
    json chi = json::array();
    for (Complex z : e.eigenvalue) chi.push_back(cjson(z));
    spectrum.push_back({{"eigenvalue", chi}, {"argument_over_2pi", principal_arg(e.eigenvalue[0]) / (2 * M_PI)},
                        {"multiplicity", e.multiplicity}});
  }
  r.results = {{"system", sys.name},
               {"ergodic", c.ergodic},
               {"weakly_mixing", c.weakly_mixing},
               {"compact", c.compact},
               {"discrete_spectrum", c.discrete_spectrum},
               {"fixed_algebra_dimension", c.fixed_algebra_dimension},
               {"h0_dimension", c.h0_dimension},
               {"gns_dimension", c.gns_dimension},
               {"epsilon_net_size", c.epsilon_net_size},
               {"orbit_samples", c.orbit_samples},
               {"point_spectrum", spectrum},
               {"notes", c.notes}};
}

void cmd_average(const std::string& path, const std::string& xs, const std::string& ys, int n, Report& r) {
  const FiniteSystem sys = load_valid(path, r);
  if (n < 1) throw InputError("--N must be positive");
  const CesaroResult c = cesaro_correlation(sys, gns_vector(sys, xs), gns_vector(sys, ys), n);
  r.results = {{"system", sys.name}, {"N", n},         {"value", cjson(c.value)},
               {"deviation", c.deviation}, {"ergodic", c.ergodic}, {"bound", c.bound ? json(*c.bound) : json()}};
  if (c.bound && c.deviation > *c.bound) throw InvariantViolation("Cesaro deviation exceeds its bound");
  if (!c.ergodic) r.warnings.push_back("system is not ergodic: the average converges to a projection onto H0, no bound");
}

AlgebraElement objective_element(const TensorContext& ctx, const std::string& text) {
  if (std::filesystem::exists(text))
    return AlgebraElement::from_block_diagonal(ctx.structure(), matrix_from_json(read_json_file(text)));
  const auto comma = text.find(',');
  try {
    if (comma != std::string::npos) {
      const int i = std::stoi(text.substr(0, comma));
      const int j = std::stoi(text.substr(comma + 1));
      if (i < 0 || j < 0 || i >= ctx.a().structure.dimension() || j >= ctx.b().structure.dimension())
        throw InputError("objective index out of range");
      return ctx.basis(i, j);
    }
    std::size_t used = 0;
    const int idx = std::stoi(text, &used);
    if (used != text.size() || idx < 0 || idx >= ctx.dimension()) throw InputError("objective index out of range");
    return AlgebraElement::unit(ctx.structure(), idx);
  } catch (const std::logic_error&) {
    throw InputError("objective must be a tensor basis index, \"i,j\" or a matrix file: \"" + text + "\"");
  }
}

void cmd_joinings_find(const std::string& a, const std::string& b, const std::string& objective, const Globals& g,
                       Report& r) {
  const TensorContext ctx(load_valid(a, r), load_valid(b, r));
  std::optional<AlgebraElement> c;
  if (!objective.empty()) c = objective_element(ctx, objective);
  const FindResult f = find_joining(ctx, c, solver_options(g));
  r.results = {{"a", ctx.a().name},
               {"b", ctx.b().name},
               {"objective", objective.empty() ? json() : json(objective)},
               {"achieved", f.report.achieved ? json(*f.report.achieved) : json()},
               {"upper_bound", f.report.upper_bound ? json(*f.report.upper_bound) : json()},
               {"iterations", f.report.iterations},
               {"oracle_calls", f.report.oracle_calls},
               {"inconclusive_calls", f.report.inconclusive_calls},
               {"residual", f.report.residual},
               {"residuals", residuals_json(f.joining.residuals)},
               {"values", values_json(ctx, f.joining)},
               {"notes", f.report.notes}};
  if (f.report.inconclusive) throw Inconclusive("solver hit its iteration cap above tolerance");
  if (!is_joining(f.joining.residuals)) throw InvariantViolation("returned state fails the joining residual battery");
}

void cmd_joinings_disjoint(const std::string& a, const std::string& b, const Globals& g, Report& r) {
  const TensorContext ctx(load_valid(a, r), load_valid(b, r));
  const DisjointnessCertificate cert = disjointness_test(ctx, solver_options(g));
  json gaps = json::array();
  for (const DirectionGap& d : cert.gaps)
    gaps.push_back({{"i", d.i},
                    {"j", d.j},
                    {"multiplier", cjson(d.multiplier)},
                    {"product_value", d.product_value},
                    {"max_value", d.max_value},
                    {"gap", d.gap},
                    {"inconclusive", d.inconclusive}});
  json witness;
  if (cert.witness)
    witness = {{"i", cert.witness->i},
               {"j", cert.witness->j},
               {"multiplier", cjson(cert.witness->multiplier)},
               {"gap", cert.witness->gap},
               {"residual", cert.witness_joining ? cert.witness_joining->residuals.max() : 0.0}};
  r.results = {{"a", ctx.a().name},
               {"b", ctx.b().name},
               {"verdict", to_string(cert.verdict)},
               {"threshold", cert.threshold},
               {"max_gap", cert.max_gap},
               {"oracle_calls", cert.oracle_calls},
               {"iterations", cert.iterations},
               {"witness", witness},
               {"gaps", gaps}};
  if (cert.verdict == Verdict::Inconclusive) throw Inconclusive("some directions could not be decided");
}

void cmd_joinings_diagonal(const std::string& path, std::optional<long long> n, Report& r) {
  const FiniteSystem sys = load_valid(path, r);
  const TensorContext ctx = diagonal_context(sys);
  const JoiningMatrix w = n ? graph_joining(sys, *n) : diagonal_state(sys);
  const ConditionalExpectation ce = conditional_expectation(ctx, w);
  r.results = {{"system", sys.name},
               {"joining", n ? "graph joining n = " + std::to_string(*n) : std::string("diagonal state")},
               {"residuals", residuals_json(w.residuals)},
               {"face_dimension", joining_face_dimension(ctx, w)},
               {"conditional_expectation", {{"norm", ce.norm}, {"intertwining", ce.intertwining}}},
               {"values", values_json(ctx, w)}};
  if (!is_joining(w.residuals)) throw InvariantViolation("constructed joining fails the residual battery");
}

void cmd_ornstein(const std::string& path, const std::string& window, Report& r) {
  const FiniteSystem sys = load_valid(path, r);
  const auto [first, last] = parse_range(window);
  const TensorContext ctx = diagonal_context(sys);
  std::vector<OrnsteinTestElement> tests = {{"1 (x) 1", AlgebraElement::identity(ctx.structure())}};
  for (int i = 0; i < sys.structure.dimension(); ++i)
    tests.push_back({"e" + std::to_string(i) + " (x) e~" + std::to_string(i), ctx.basis(i, i)});
  const OrnsteinScan scan = ornstein_ratio_scan(sys, tests, first, last);
  json rows = json::array();
  for (const OrnsteinRow& row : scan.rows)
    rows.push_back({{"element", row.label},
                    {"skipped", row.skipped},
                    {"product_value", row.product_value},
                    {"sup", row.sup},
                    {"ratios", row.ratios}});
  r.results = {{"system", sys.name},
               {"window", window},
               {"recurrence_period", scan.recurrence_period ? json(*scan.recurrence_period) : json()},
               {"strongly_mixing", scan.strongly_mixing},
               {"rows", rows},
               {"notes", scan.notes}};
}

// ---------------------------------------------------------------------------
// Dual systems

json classification_json(const DualClassification& c) {
  return {{"ergodic", c.ergodic},
          {"weakly_mixing", c.weakly_mixing},
          {"strongly_mixing", c.strongly_mixing},
          {"compact", c.compact},
          {"group_finite", c.group_finite},
          {"group_order", c.group_order ? qjson(*c.group_order) : json()},
          {"finite_orbit_subgroup_trivial", c.finite_orbit_trivial},
          {"notes", c.notes}};
}

void cmd_dual_classify(const std::string& path, Report& r) {
  const DualSystem sys = load_dual(path, r);
  const DualClassification c = classify_dual(sys);
  const FiniteOrbitSubsystem e = finite_orbit_subsystem(sys);
  const DualClassification ec = classify_dual(e.restricted);
  r.results = {{"group", sys.name},
               {"family", sys.family() == DualFamily::FreeGroup ? "free" : "finperm"},
               {"classification", classification_json(c)},
               {"finite_orbit_subsystem", {{"description", e.description}, {"trivial", e.trivial}, {"compact", ec.compact}}}};
  if (!ec.compact) throw InvariantViolation("finite-orbit subsystem does not classify compact");
}

void cmd_dual_orbit(const std::string& path, const std::string& word, Report& r) {
  const DualSystem sys = load_dual(path, r);
  const DualElement g = sys.parse(word);
  const OrbitCertificate o = orbit_length(sys, g);
  r.results = {{"group", sys.name},
               {"element", sys.format(g)},
               {"orbit", o.finite ? "finite" : "infinite"},
               {"period", o.finite ? json(o.period) : json()},
               {"escaping_letter", o.escaping ? json(sys.format(*o.escaping)) : json()}};
}

void cmd_dual_correlations(const std::string& path, const std::string& as, const std::string& bs,
                           const std::string& range, Report& r) {
  const DualSystem sys = load_dual(path, r);
  const auto [first, last] = parse_range(range);
  const Combination a = parse_combination(sys, as);
  const Combination b = parse_combination(sys, bs);
  const CorrelationSeries s = correlation_series(sys, a, b, first, last);
  json rows = json::array();
  for (std::size_t k = 0; k < s.values.size(); ++k) {
    if (s.values[k].norm() > s.cauchy_schwarz_squared) throw InvariantViolation("correlation exceeds |a|_2 |b|_2");
    rows.push_back({{"n", first + (long long)k}, {"value", zjson(s.values[k])}, {"centered", zjson(s.centered[k])}});
  }
  r.results = {{"group", sys.name},
               {"a", format(sys, a)},
               {"b", format(sys, b)},
               {"product", zjson(s.product)},
               {"escape_bound", s.escape_bound ? json(*s.escape_bound) : json()},
               {"series", rows}};
  if (s.escape_bound)
    for (std::size_t k = 0; k < s.values.size(); ++k)
      if (first + (long long)k > *s.escape_bound && !s.centered[k].is_zero())
        throw InvariantViolation("nonzero centered correlation past the escape bound");
}

void cmd_dual_ornstein(const std::string& path, const std::string& window, const std::vector<std::string>& specs,
                       int random_tests, int max_terms, const Globals& g, Report& r) {
  const DualSystem sys = load_dual(path, r);
  const auto [first, last] = parse_range(window);
  std::vector<DualTestElement> tests;
  for (const std::string& s : specs) tests.push_back({s, parse_pair_combination(sys, s)});
  if (specs.empty()) {
    tests.push_back({"1|1", parse_pair_combination(sys, "1|1")});
    if (sys.family() == DualFamily::FreeGroup) {
      const std::string x0 = sys.format(sys.letter(0, 0));
      const std::string x1 = sys.format(sys.letter(0, 1));
      const std::string two = x0 + "|" + x0 + "; " + x1 + "|" + x1;
      tests.push_back({two, parse_pair_combination(sys, two)});
    }
  }
  std::mt19937_64 rng(g.seed);
  for (int k = 0; k < random_tests; ++k) {
    PairCombination c = sample_pair_combination(sys, rng, max_terms);
    tests.push_back({format(sys, c), c});
  }
  const DualOrnsteinScan scan = ornstein_scan_dual(sys, tests, first, last);
  json rows = json::array();
  for (const DualOrnsteinRow& row : scan.rows) {
    json ratios = json::array();
    for (const Rational& q : row.ratios) ratios.push_back(qjson(q));
    rows.push_back({{"element", row.label},
                    {"skipped", row.skipped},
                    {"product", qjson(row.product)},
                    {"escape_bound", row.escape_bound},
                    {"period", row.period},
                    {"limsup", qjson(row.limsup)},
                    {"ratios", ratios}});
  }
  r.results = {{"group", sys.name},
               {"window", window},
               {"strongly_mixing", scan.strongly_mixing},
               {"consistent", scan.consistent},
               {"rows", rows},
               {"notes", scan.notes}};
  if (!scan.consistent) throw InvariantViolation("Ornstein scan disagrees with the mixing classification");
}

void cmd_dual_opposite(const std::string& path, const std::string& experiment, const Globals& g, Report& r) {
  const DualSystem sys = load_dual(path, r);
  const OppositeGroupJoining j = opposite_group_joining(sys, g.seed);
  r.results = {{"group", sys.name},
               {"finite_orbit_subsystem", j.subsystem.description},
               {"trivial", j.trivial},
               {"unit_value", qjson(j(sys.identity(), sys.identity()))},
               {"witness", j.witness ? json(sys.format(*j.witness)) : json()},
               {"witness_value", j.witness ? qjson(j.witness_value) : json()},
               {"witness_product_value", j.witness ? qjson(j.witness_product_value) : json()},
               {"invariance_samples", j.samples},
               {"invariance_failures", j.invariance_failures},
               {"consistent_with_classification", j.consistent_with_classification}};
  if (!experiment.empty()) {
    // Orbit-matching scan between this system and a compact one. The
    // question it probes is open; the scan only counts.
    const DualSystem c = load_dual(experiment, r);
    if (!classify_dual(c).compact) throw InputError(experiment + " is not a compact dual system");
    std::mt19937_64 rng(g.seed);
    int pairs = 0;
    int compatible = 0;
    for (int k = 0; k < 500; ++k) {
      const DualElement a = sys.sample(rng, 4);
      const DualElement b = c.sample(rng, 4);
      if (sys.is_identity(a) || c.is_identity(b)) continue;
      ++pairs;
      if (orbit_length(sys, a).finite && orbit_length(c, b).finite) ++compatible;
    }
    r.results["experiment"] = {{"compact_system", c.name},
                               {"ergodic", classify_dual(sys).ergodic},
                               {"sampled_pairs", pairs},
                               {"orbit_compatible_pairs", compatible}};
    r.warnings.push_back("experiment mode: whether ergodic dual systems are disjoint from compact ones is open; no "
                         "conclusion is drawn");
  }
  if (j.invariance_failures > 0 || !j.consistent_with_classification)
    throw InvariantViolation("opposite-group joining failed its consistency checks");
}

void cmd_dual_check(const std::string& path, int samples, const Globals& g, Report& r) {
  const DualSystem sys = load_dual(path, r);
  const DualPropertyReport p = dual_property_checks(sys, g.seed, samples);
  r.results = {{"group", sys.name},
               {"seed", g.seed},
               {"samples", p.samples},
               {"checks", p.checks},
               {"failures", p.failures}};
  if (!p.failures.empty()) throw InvariantViolation(std::to_string(p.failures.size()) + " property checks failed");
}

void cmd_dual_abelian(const std::string& path, const std::string& as, const std::string& bs, int n, Report& r) {
  const DualSystem sys = load_dual(path, r);
  if (n < 1) throw InputError("--n must be positive");
  const Combination a = parse_combination(sys, as);
  const Combination b = parse_combination(sys, bs);
  const auto prof = commutator_profile_2norm(sys, a, b, n);
  json rows = json::array();
  double sum = 0.0;
  for (std::size_t k = 0; k < prof.size(); ++k) {
    sum += std::sqrt(prof[k].convert_to<double>());
    rows.push_back({{"k", k + 1}, {"commutator_norm_squared", qjson(prof[k])}, {"cesaro_mean", sum / double(k + 1)}});
  }
  r.results = {{"group", sys.name}, {"norm", "mu-2-norm"}, {"a", format(sys, a)}, {"b", format(sys, b)}, {"profile", rows}};
  r.warnings.push_back("commutators measured in the mu-2-norm |x|_2 = mu(x^* x)^(1/2), not the operator norm");
}

}  // namespace

// ---------------------------------------------------------------------------

Report execute(const std::vector<std::string>& args) {
  Report r;
  r.arguments = args;
  Globals g;

  CLI::App app{"ncjoin: joinings, ergodicity and mixing of finite and dual W*-dynamical systems", "ncjoin"};
  app.fallthrough();
  app.require_subcommand(1);
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"json", "table"}));
  app.add_option("--tol", g.tol, "Solver convergence tolerance");
  app.add_option("--max-iter", g.max_iter, "Solver iteration cap (overrides NCJOIN_MAX_ITER)");
  app.add_option("--seed", g.seed, "Seed for sampled checks");

  std::string system, a, b, objective, window = "0..32", range = "0..64", word, xs, ys, experiment;
  std::string as = "1", bs = "1";
  std::optional<long long> graph_n;
  int n_avg = 1000, random_tests = 10, max_terms = 4, samples = 1000, n_abel = 16;
  std::vector<std::string> tests;
  std::function<void()> action;
  std::string command;

  auto sub = [&](CLI::App* parent, const std::string& name, const std::string& help) {
    CLI::App* s = parent->add_subcommand(name, help);
    s->fallthrough();
    return s;
  };

  auto* validate = sub(&app, "validate", "Check every invariant of a system file");
  validate->add_option("--system", system)->required();
  validate->callback([&] { command = "validate"; action = [&] { cmd_validate(system, r); }; });

  auto* classify = sub(&app, "classify", "Classification and point spectrum of a finite system");
  classify->add_option("--system", system)->required();
  classify->callback([&] { command = "classify"; action = [&] { cmd_classify(system, r); }; });

  auto* average = sub(&app, "average", "Cesaro average of <U_g x, y>");
  average->add_option("--system", system)->required();
  average->add_option("--x", xs, "Basis index, \"omega\" or JSON coefficient list")->required();
  average->add_option("--y", ys, "Basis index, \"omega\" or JSON coefficient list")->required();
  average->add_option("--N", n_avg);
  average->callback([&] { command = "average"; action = [&] { cmd_average(system, xs, ys, n_avg, r); }; });

  auto* joinings = sub(&app, "joinings", "Joinings of two finite systems");
  joinings->require_subcommand(1);
  auto* find = sub(joinings, "find", "Find a joining, optionally maximizing Re omega(c)");
  find->add_option("--a", a)->required();
  find->add_option("--b", b)->required();
  find->add_option("--objective", objective, "Tensor basis index, \"i,j\" or matrix file");
  find->callback([&] { command = "joinings find"; action = [&] { cmd_joinings_find(a, b, objective, g, r); }; });
  auto* disjoint = sub(joinings, "disjoint", "Decide whether the product is the only joining");
  disjoint->add_option("--a", a)->required();
  disjoint->add_option("--b", b)->required();
  disjoint->callback([&] { command = "joinings disjoint"; action = [&] { cmd_joinings_disjoint(a, b, g, r); }; });
  auto* diagonal = sub(joinings, "diagonal", "Diagonal state or graph joining of a system with its mirror");
  diagonal->add_option("--system", system)->required();
  diagonal->add_option("--graph-n", graph_n);
  diagonal->callback([&] { command = "joinings diagonal"; action = [&] { cmd_joinings_diagonal(system, graph_n, r); }; });

  auto* ornstein = sub(&app, "ornstein", "Ratios Delta_n(c^* c) / product over a window");
  ornstein->add_option("--system", system)->required();
  ornstein->add_option("--window", window, "Range like 0..32");
  ornstein->callback([&] { command = "ornstein"; action = [&] { cmd_ornstein(system, window, r); }; });

  auto* dual = sub(&app, "dual", "Dual systems of discrete groups");
  dual->require_subcommand(1);
  auto* dclassify = sub(dual, "classify", "Exact classification");
  dclassify->add_option("--group", system)->required();
  dclassify->callback([&] { command = "dual classify"; action = [&] { cmd_dual_classify(system, r); }; });
  auto* dorbit = sub(dual, "orbit", "Orbit certificate of an element");
  dorbit->add_option("--group", system)->required();
  dorbit->add_option("--word", word)->required();
  dorbit->callback([&] { command = "dual orbit"; action = [&] { cmd_dual_orbit(system, word, r); }; });
  auto* dcorr = sub(dual, "correlations", "Exact series mu(alpha^n(a) b)");
  dcorr->add_option("--group", system)->required();
  dcorr->add_option("--a", as, "Combination \"coef:word; ...\"");
  dcorr->add_option("--b", bs, "Combination \"coef:word; ...\"");
  dcorr->add_option("--n", range, "Range like 0..64");
  dcorr->callback([&] { command = "dual correlations"; action = [&] { cmd_dual_correlations(system, as, bs, range, r); }; });
  auto* dorn = sub(dual, "ornstein", "Exact Ornstein ratio scan");
  dorn->add_option("--group", system)->required();
  dorn->add_option("--window", range, "Range like 0..64");
  dorn->add_option("--test", tests, "Test element \"coef:g|h; ...\" (repeatable)");
  dorn->add_option("--random", random_tests, "Number of random test elements");
  dorn->add_option("--max-terms", max_terms, "Support bound of random test elements");
  dorn->callback([&] {
    command = "dual ornstein";
    action = [&] { cmd_dual_ornstein(system, range, tests, random_tests, max_terms, g, r); };
  });
  auto* dopp = sub(dual, "opposite-joining", "Joining with the finite-orbit part through the opposite group");
  dopp->add_option("--group", system)->required();
  dopp->add_option("--experiment", experiment, "Compact dual system to scan against");
  dopp->callback([&] { command = "dual opposite-joining"; action = [&] { cmd_dual_opposite(system, experiment, g, r); }; });
  auto* dcheck = sub(dual, "check", "Sampled exact property checks");
  dcheck->add_option("--group", system)->required();
  dcheck->add_option("--samples", samples);
  dcheck->callback([&] { command = "dual check"; action = [&] { cmd_dual_check(system, samples, g, r); }; });
  auto* dabel = sub(dual, "abelian", "Commutator profile |[a, alpha^k(b)]|_2");
  dabel->add_option("--group", system)->required();
  dabel->add_option("--a", as);
  dabel->add_option("--b", bs);
  dabel->add_option("--n", n_abel);
  dabel->callback([&] { command = "dual abelian"; action = [&] { cmd_dual_abelian(system, as, bs, n_abel, r); }; });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    r.command = "help";
    r.results = {{"usage", app.help()}};
    return r;
  } catch (const CLI::ParseError& e) {
    r.command = "usage";
    r.errors.push_back(e.what());
    r.results = {{"usage", app.help()}};
    r.exit_status = kExitMalformedInput;
    return r;
  }
  r.command = command;
  r.format = g.format;
  try {
    action();
  } catch (const Inconclusive& e) {
    r.errors.push_back(e.what());
    r.exit_status = kExitInconclusive;
  } catch (const InvariantViolation& e) {
    r.errors.push_back(e.what());
    r.exit_status = kExitInvariantViolation;
  } catch (const InputError& e) {
    r.errors.push_back(e.what());
    r.exit_status = kExitMalformedInput;
  } catch (const InvalidSystem& e) {
    r.errors.push_back(e.what());
    r.exit_status = kExitMalformedInput;
  } catch (const StructuralError& e) {
    r.errors.push_back(e.what());
    r.exit_status = kExitMalformedInput;
  } catch (const DimensionMismatch& e) {
    r.errors.push_back(e.what());
    r.exit_status = kExitMalformedInput;
  } catch (const PreconditionError& e) {
    r.errors.push_back(e.what());
    r.exit_status = kExitMalformedInput;
  } catch (const std::exception& e) {
    r.errors.push_back(std::string("internal error: ") + e.what());
    r.exit_status = kExitInvariantViolation;
  }
  return r;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const Report r = execute(args);
  if (r.command == "help") {
    out << r.results["usage"].get<std::string>();
    return kExitOk;
  }
  if (r.command == "usage") {
    for (const auto& e : r.errors) err << "error: " << e << "\n";
    err << r.results["usage"].get<std::string>();
    return r.exit_status;
  }
  out << emit(r);
  if (r.format == "json")
    for (const auto& e : r.errors) err << "error: " << e << "\n";
  return r.exit_status;
}

}  // namespace ncjoin
