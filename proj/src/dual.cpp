#include "ncjoin/dual.hpp"

#include "ncjoin/system_io.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <set>
#include <sstream>

namespace ncjoin {

using nlohmann::json;

FreeWord::FreeWord(const std::vector<SignedLetter>& letters) {
  for (const SignedLetter& s : letters) {
    if (s.exponent != 1 && s.exponent != -1) throw PreconditionError("free word exponents must be +1 or -1");
    if (!letters_.empty() && letters_.back().letter == s.letter && letters_.back().exponent == -s.exponent)
      letters_.pop_back();
    else
      letters_.push_back(s);
  }
}

FreeWord FreeWord::inverse() const {
  FreeWord out;
  out.letters_.reserve(letters_.size());
  for (auto it = letters_.rbegin(); it != letters_.rend(); ++it) out.letters_.push_back({it->letter, -it->exponent});
  return out;
}

FreeWord operator*(const FreeWord& a, const FreeWord& b) {
  std::vector<SignedLetter> joined = a.letters_;
  joined.insert(joined.end(), b.letters_.begin(), b.letters_.end());
  return FreeWord(joined);
}

FinitaryPermutation::FinitaryPermutation(std::map<Letter, Letter> images) {
  std::set<Letter> targets;
  for (const auto& [s, t] : images) {
    if (!images.count(t)) throw PreconditionError("permutation image outside its support");
    if (!targets.insert(t).second) throw PreconditionError("permutation is not injective");
    if (s != t) images_.emplace(s, t);
  }
}

FinitaryPermutation FinitaryPermutation::cycle(const std::vector<Letter>& points) {
  std::map<Letter, Letter> images;
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (images.count(points[k])) throw PreconditionError("repeated point in a cycle");
    images[points[k]] = points[(k + 1) % points.size()];
  }
  return FinitaryPermutation(std::move(images));
}

Letter FinitaryPermutation::operator()(const Letter& s) const {
  auto it = images_.find(s);
  return it == images_.end() ? s : it->second;
}

std::vector<Letter> FinitaryPermutation::support() const {
  std::vector<Letter> out;
  for (const auto& [s, t] : images_) out.push_back(s);
  return out;
}

FinitaryPermutation FinitaryPermutation::inverse() const {
  FinitaryPermutation out;
  for (const auto& [s, t] : images_) out.images_.emplace(t, s);
  return out;
}

FinitaryPermutation operator*(const FinitaryPermutation& g, const FinitaryPermutation& h) {
  std::set<Letter> points;
  for (const auto& [s, t] : g.images_) points.insert(s);
  for (const auto& [s, t] : h.images_) points.insert(s);
  FinitaryPermutation out;
  for (const Letter& s : points) {
    const Letter t = g(h(s));
    if (t != s) out.images_.emplace(s, t);
  }
  return out;
}

// ---------------------------------------------------------------------------

DualSystem::DualSystem(DualFamily family, std::vector<Track> tracks, std::map<std::string, Letter> aliases)
    : family_(family), tracks_(std::move(tracks)), aliases_(std::move(aliases)) {
  std::set<std::string> ids;
  for (const Track& t : tracks_) {
    if (!ids.insert(t.id).second) throw PreconditionError("duplicate track id \"" + t.id + "\"");
    if (t.kind == Track::Kind::Cycle && t.m < 1) throw PreconditionError("cycle track \"" + t.id + "\" needs m >= 1");
  }
  for (auto& [name, s] : aliases_) {
    if (s.track < 0 || s.track >= int(tracks_.size())) throw PreconditionError("alias \"" + name + "\" names no track");
    s = letter(s.track, s.index);
  }
}

bool DualSystem::has_shift_track() const {
  return std::any_of(tracks_.begin(), tracks_.end(), [](const Track& t) { return t.kind == Track::Kind::Shift; });
}

bool DualSystem::has_cycle_track() const {
  return std::any_of(tracks_.begin(), tracks_.end(), [](const Track& t) { return t.kind == Track::Kind::Cycle; });
}

long long DualSystem::cycle_letter_count() const {
  long long n = 0;
  for (const Track& t : tracks_)
    if (t.kind == Track::Kind::Cycle) n += t.m;
  return n;
}

Letter DualSystem::letter(int track, long long index) const {
  if (track < 0 || track >= int(tracks_.size())) throw PreconditionError("letter on unknown track");
  const Track& t = tracks_[std::size_t(track)];
  if (t.kind == Track::Kind::Cycle) index = ((index % t.m) + t.m) % t.m;
  return {track, index};
}

Letter DualSystem::advance(const Letter& s, long long n) const { return letter(s.track, s.index + n); }

DualElement DualSystem::identity() const {
  if (family_ == DualFamily::FreeGroup) return FreeWord();
  return FinitaryPermutation();
}

bool DualSystem::is_identity(const DualElement& g) const {
  return std::visit([](const auto& x) { return x.empty(); }, g);
}

void DualSystem::check_element(const DualElement& g) const {
  const bool free = std::holds_alternative<FreeWord>(g);
  if (free != (family_ == DualFamily::FreeGroup)) throw PreconditionError("element belongs to a different group family");
}

DualElement DualSystem::multiply(const DualElement& a, const DualElement& b) const {
  check_element(a);
  check_element(b);
  if (family_ == DualFamily::FreeGroup) return std::get<FreeWord>(a) * std::get<FreeWord>(b);
  return std::get<FinitaryPermutation>(a) * std::get<FinitaryPermutation>(b);
}

DualElement DualSystem::inverse(const DualElement& g) const {
  check_element(g);
  return std::visit([](const auto& x) -> DualElement { return x.inverse(); }, g);
}

DualElement DualSystem::apply_T(const DualElement& g, long long n) const {
  check_element(g);
  if (family_ == DualFamily::FreeGroup) {
    std::vector<SignedLetter> out;
    for (const SignedLetter& s : std::get<FreeWord>(g).letters()) out.push_back({advance(s.letter, n), s.exponent});
    return FreeWord(out);
  }
  // h^n g h^-n: the support moves forward along the tracks.
  std::map<Letter, Letter> images;
  for (const auto& [s, t] : std::get<FinitaryPermutation>(g).images()) images.emplace(advance(s, n), advance(t, n));
  return FinitaryPermutation(std::move(images));
}

DualElement DualSystem::generator(const Letter& s) const {
  if (family_ != DualFamily::FreeGroup) throw PreconditionError("letters are group elements only in the free family");
  return FreeWord({{letter(s.track, s.index), 1}});
}

std::vector<Letter> DualSystem::letters_of(const DualElement& g) const {
  check_element(g);
  if (family_ == DualFamily::FinitaryPermutations) return std::get<FinitaryPermutation>(g).support();
  std::vector<Letter> out;
  for (const SignedLetter& s : std::get<FreeWord>(g).letters()) out.push_back(s.letter);
  return out;
}

static std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\n\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\n\r");
  return s.substr(b, e - b + 1);
}

static long long parse_integer(const std::string& s, const std::string& context) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size()) throw InputError("bad integer in \"" + context + "\"");
  return v;
}

static Letter parse_letter(const DualSystem& sys, const std::string& token) {
  if (auto it = sys.aliases().find(token); it != sys.aliases().end()) return it->second;
  std::size_t k = 0;
  while (k < token.size() && !std::isdigit(static_cast<unsigned char>(token[k])) && token[k] != '-') ++k;
  const std::string id = token.substr(0, k);
  for (std::size_t t = 0; t < sys.tracks().size(); ++t)
    if (sys.tracks()[t].id == id) return sys.letter(int(t), parse_integer(token.substr(k), token));
  throw InputError("unknown letter \"" + token + "\"");
}

DualElement DualSystem::parse(const std::string& text) const {
  const std::string s = trim(text);
  if (s.empty() || s == "1") return identity();
  if (family_ == DualFamily::FreeGroup) {
    std::vector<SignedLetter> letters;
    std::istringstream in(s);
    std::string token;
    while (in >> token) {
      long long e = 1;
      const auto caret = token.find('^');
      if (caret != std::string::npos) {
        e = parse_integer(token.substr(caret + 1), token);
        token = token.substr(0, caret);
      }
      const Letter l = parse_letter(*this, token);
      for (long long r = 0; r < std::llabs(e); ++r) letters.push_back({l, e > 0 ? 1 : -1});
    }
    return FreeWord(letters);
  }
  FinitaryPermutation g;
  std::size_t pos = 0;
  while (pos < s.size()) {
    if (std::isspace(static_cast<unsigned char>(s[pos]))) {
      ++pos;
      continue;
    }
    if (s[pos] != '(') throw InputError("permutations are written as cycles \"(a b c)\": \"" + s + "\"");
    const auto close = s.find(')', pos);
    if (close == std::string::npos) throw InputError("unbalanced parenthesis in \"" + s + "\"");
    std::istringstream in(s.substr(pos + 1, close - pos - 1));
    std::vector<Letter> points;
    std::string token;
    while (in >> token) points.push_back(parse_letter(*this, token));
    try {
      g = g * FinitaryPermutation::cycle(points);
    } catch (const PreconditionError& e) {
      throw InputError(std::string(e.what()) + " in \"" + s + "\"");
    }
    pos = close + 1;
  }
  return g;
}

std::string DualSystem::format(const Letter& s) const {
  for (const auto& [name, l] : aliases_)
    if (l == s) return name;
  return tracks_[std::size_t(s.track)].id + std::to_string(s.index);
}

std::string DualSystem::format(const DualElement& g) const {
  check_element(g);
  if (is_identity(g)) return "1";
  std::string out;
  if (family_ == DualFamily::FreeGroup) {
    for (const SignedLetter& s : std::get<FreeWord>(g).letters()) {
      if (!out.empty()) out += ' ';
      out += format(s.letter);
      if (s.exponent < 0) out += "^-1";
    }
    return out;
  }
  const auto& p = std::get<FinitaryPermutation>(g);
  std::set<Letter> seen;
  for (const auto& [start, t] : p.images()) {
    if (seen.count(start)) continue;
    out += '(';
    Letter s = start;
    do {
      if (s != start) out += ' ';
      out += format(s);
      seen.insert(s);
      s = p(s);
    } while (s != start);
    out += ')';
  }
  return out;
}

DualElement DualSystem::sample(std::mt19937_64& rng, int max_factors, long long window) const {
  if (tracks_.empty()) return identity();
  std::uniform_int_distribution<int> count(0, max_factors);
  std::uniform_int_distribution<int> track(0, int(tracks_.size()) - 1);
  std::uniform_int_distribution<long long> index(-window, window);
  auto random_letter = [&] { return letter(track(rng), index(rng)); };
  const int n = count(rng);
  if (family_ == DualFamily::FreeGroup) {
    std::vector<SignedLetter> letters;
    for (int k = 0; k < n; ++k) letters.push_back({random_letter(), (rng() & 1) ? 1 : -1});
    return FreeWord(letters);
  }
  if (!has_shift_track() && cycle_letter_count() < 2) return identity();
  FinitaryPermutation g;
  for (int k = 0; k < n; ++k) {
    const Letter a = random_letter();
    Letter b = random_letter();
    while (b == a) b = random_letter();
    g = g * FinitaryPermutation::cycle({a, b});
  }
  return g;
}

// ---------------------------------------------------------------------------

static long long lcm_capped(long long a, long long b) {
  const long long l = std::lcm(a, b);
  if (l > 1'000'000'000LL) throw PreconditionError("orbit period exceeds 1e9");
  return l;
}

OrbitCertificate orbit_length(const DualSystem& sys, const DualElement& g) {
  OrbitCertificate cert;
  long long bound = 1;
  for (const Letter& s : sys.letters_of(g)) {
    const Track& t = sys.tracks()[std::size_t(s.track)];
    if (t.kind == Track::Kind::Shift) {
      if (!cert.escaping) cert.escaping = s;
    } else {
      bound = lcm_capped(bound, t.m);
    }
  }
  if (cert.escaping) return cert;
  // T^bound(g) = g; the exact period is the least divisor that also returns.
  cert.finite = true;
  std::vector<long long> divisors;
  for (long long d = 1; d * d <= bound; ++d)
    if (bound % d == 0) {
      divisors.push_back(d);
      divisors.push_back(bound / d);
    }
  std::sort(divisors.begin(), divisors.end());
  for (long long d : divisors)
    if (sys.apply_T(g, d) == g) {
      cert.period = d;
      break;
    }
  return cert;
}

DualClassification classify_dual(const DualSystem& sys) {
  DualClassification c;
  if (sys.family() == DualFamily::FreeGroup) {
    c.finite_orbit_trivial = !sys.has_cycle_track();
  } else {
    c.finite_orbit_trivial = sys.cycle_letter_count() < 2;
    if (sys.has_cycle_track() && c.finite_orbit_trivial)
      c.notes.push_back("a single cycle-track letter carries no nontrivial permutation");
  }
  c.ergodic = c.weakly_mixing = c.strongly_mixing = c.finite_orbit_trivial;
  c.compact = !sys.has_shift_track();
  if (sys.family() == DualFamily::FinitaryPermutations && !sys.has_shift_track()) {
    c.group_finite = true;
    Rational order = 1;
    for (long long k = 2; k <= sys.cycle_letter_count(); ++k) order *= k;
    c.group_order = order;
    if (order > 1) c.notes.push_back("1 < |Gamma| < infinity, so the system cannot be ergodic");
  }
  if (!c.ergodic && !c.compact) c.notes.push_back("neither ergodic nor compact: finite and infinite orbits coexist");
  return c;
}

bool FiniteOrbitSubsystem::contains(const DualElement& g) const { return orbit_length(parent, g).finite; }

FiniteOrbitSubsystem finite_orbit_subsystem(const DualSystem& sys) {
  FiniteOrbitSubsystem sub;
  sub.parent = sys;
  std::vector<Track> cycles;
  std::map<int, int> renumber;
  for (std::size_t t = 0; t < sys.tracks().size(); ++t)
    if (sys.tracks()[t].kind == Track::Kind::Cycle) {
      renumber[int(t)] = int(cycles.size());
      cycles.push_back(sys.tracks()[t]);
    }
  std::map<std::string, Letter> aliases;
  for (const auto& [name, s] : sys.aliases())
    if (renumber.count(s.track)) aliases[name] = {renumber[s.track], s.index};
  sub.restricted = DualSystem(sys.family(), cycles, aliases);
  sub.restricted.name = sys.name.empty() ? "finite-orbit part" : sys.name + " finite-orbit part";
  sub.trivial = classify_dual(sys).finite_orbit_trivial;
  std::string ids;
  for (const Track& t : cycles) ids += (ids.empty() ? "" : ", ") + t.id;
  if (sys.family() == DualFamily::FreeGroup)
    sub.description = cycles.empty() ? "trivial subgroup {1}" : "free subgroup on the cycle-track letters (" + ids + ")";
  else
    sub.description = sub.trivial ? "trivial subgroup {1}"
                                  : "finitary permutations of the cycle-track letters (" + ids + ")";
  return sub;
}

// ---------------------------------------------------------------------------

void Combination::add(const DualElement& g, const GaussianRational& c) {
  auto [it, fresh] = terms.emplace(g, c);
  if (!fresh) it->second += c;
  if (it->second.is_zero()) terms.erase(it);
}

Rational Combination::norm2_squared() const {
  Rational s = 0;
  for (const auto& [g, c] : terms) s += c.norm();
  return s;
}

GaussianRational Combination::coefficient(const DualElement& g) const {
  auto it = terms.find(g);
  return it == terms.end() ? GaussianRational() : it->second;
}

Combination multiply(const DualSystem& sys, const Combination& a, const Combination& b) {
  Combination out;
  for (const auto& [g, c] : a.terms)
    for (const auto& [h, d] : b.terms) out.add(sys.multiply(g, h), c * d);
  return out;
}

Combination apply_T(const DualSystem& sys, const Combination& a, long long n) {
  Combination out;
  for (const auto& [g, c] : a.terms) out.add(sys.apply_T(g, n), c);
  return out;
}

GaussianRational haar_state(const DualSystem& sys, const Combination& a) { return a.coefficient(sys.identity()); }

static std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

static std::pair<GaussianRational, std::string> split_coefficient(const std::string& term) {
  const auto colon = term.find(':');
  if (colon == std::string::npos) return {GaussianRational(1), term};
  return {parse_gaussian(term.substr(0, colon)), term.substr(colon + 1)};
}

Combination parse_combination(const DualSystem& sys, const std::string& text) {
  Combination out;
  for (const std::string& raw : split(text, ';')) {
    const std::string term = trim(raw);
    if (term.empty()) continue;
    auto [c, word] = split_coefficient(term);
    out.add(sys.parse(word), c);
  }
  return out;
}

std::string format(const DualSystem& sys, const Combination& c) {
  if (c.terms.empty()) return "0";
  std::string out;
  for (const auto& [g, coef] : c.terms) {
    if (!out.empty()) out += "; ";
    out += to_string(coef) + ":" + sys.format(g);
  }
  return out;
}

CorrelationSeries correlation_series(const DualSystem& sys, const Combination& a, const Combination& b, long long first,
                                     long long last) {
  if (a.terms.empty() || b.terms.empty()) throw PreconditionError("correlation of an empty combination");
  if (last < first) throw PreconditionError("empty range of n");
  CorrelationSeries s;
  s.first = first;
  s.product = haar_state(sys, a) * haar_state(sys, b);
  s.cauchy_schwarz_squared = a.norm2_squared() * b.norm2_squared();
  for (long long n = first; n <= last; ++n) {
    GaussianRational v;
    for (const auto& [g, c] : a.terms)
      for (const auto& [h, d] : b.terms)
        if (sys.is_identity(sys.multiply(sys.apply_T(g, n), h))) v += c * d;
    s.centered.push_back(v - s.product);
    s.values.push_back(std::move(v));
  }
  if (classify_dual(sys).ergodic) {
    std::vector<DualElement> support;
    for (const auto& [g, c] : a.terms) support.push_back(g);
    for (const auto& [h, d] : b.terms) support.push_back(h);
    s.escape_bound = index_span(sys, support);
  }
  return s;
}

void PairCombination::add(const DualElement& g, const DualElement& h, const GaussianRational& c) {
  auto [it, fresh] = terms.emplace(std::make_pair(g, h), c);
  if (!fresh) it->second += c;
  if (it->second.is_zero()) terms.erase(it);
}

Rational PairCombination::norm2_squared() const {
  Rational s = 0;
  for (const auto& [gh, c] : terms) s += c.norm();
  return s;
}

PairCombination parse_pair_combination(const DualSystem& sys, const std::string& text) {
  PairCombination out;
  for (const std::string& raw : split(text, ';')) {
    const std::string term = trim(raw);
    if (term.empty()) continue;
    auto [c, pair] = split_coefficient(term);
    const auto bar = pair.find('|');
    if (bar == std::string::npos) throw InputError("pair term needs \"g|h\": \"" + term + "\"");
    out.add(sys.parse(pair.substr(0, bar)), sys.parse(pair.substr(bar + 1)), c);
  }
  return out;
}

std::string format(const DualSystem& sys, const PairCombination& c) {
  if (c.terms.empty()) return "0";
  std::string out;
  for (const auto& [gh, coef] : c.terms) {
    if (!out.empty()) out += "; ";
    out += to_string(coef) + ":" + sys.format(gh.first) + "|" + sys.format(gh.second);
  }
  return out;
}

bool delta_indicator(const DualSystem& sys, const DualElement& g, const DualElement& h, long long n) {
  return sys.apply_T(g, n) == h;
}

DeltaValue delta_n_eval(const DualSystem& sys, const PairCombination& c, long long n) {
  DeltaValue out;
  out.product = c.norm2_squared();
  for (const auto& [gh, coef] : c.terms)
    if (delta_indicator(sys, gh.first, gh.second, n)) out.value += coef;
  // c^* c = sum conj(c_t) c_t' lambda(g^-1 g') (x) rho(h^-1 h').
  GaussianRational cc;
  for (const auto& [t, ct] : c.terms)
    for (const auto& [u, cu] : c.terms) {
      const DualElement g = sys.multiply(sys.inverse(t.first), u.first);
      const DualElement h = sys.multiply(sys.inverse(t.second), u.second);
      if (delta_indicator(sys, g, h, n)) cc += ct.conj() * cu;
    }
  if (cc.imag() != 0 || cc.real() < 0) throw InvariantViolation("Delta_n(c^* c) is not a nonnegative real");
  out.value_cstar_c = cc.real();
  return out;
}

long long index_span(const DualSystem& sys, const std::vector<DualElement>& support) {
  std::optional<long long> lo, hi;
  for (const DualElement& g : support)
    for (const Letter& s : sys.letters_of(g))
      if (sys.tracks()[std::size_t(s.track)].kind == Track::Kind::Shift) {
        lo = lo ? std::min(*lo, s.index) : s.index;
        hi = hi ? std::max(*hi, s.index) : s.index;
      }
  return lo ? *hi - *lo : 0;
}

DualOrnsteinScan ornstein_scan_dual(const DualSystem& sys, const std::vector<DualTestElement>& tests, long long first,
                                    long long last) {
  if (last < first) throw PreconditionError("empty window");
  DualOrnsteinScan scan;
  scan.first = first;
  scan.last = last;
  scan.strongly_mixing = classify_dual(sys).strongly_mixing;
  for (const DualTestElement& test : tests) {
    DualOrnsteinRow row;
    row.label = test.label;
    row.product = test.c.norm2_squared();
    if (row.product == 0) {
      row.skipped = true;
      scan.notes.push_back("skipped degenerate test element " + test.label);
      scan.rows.push_back(std::move(row));
      continue;
    }
    auto ratio = [&](long long n) { return Rational(delta_n_eval(sys, test.c, n).value_cstar_c / row.product); };
    for (long long n = first; n <= last; ++n) row.ratios.push_back(ratio(n));

    // Pairs whose difference g^-1 g' escapes contribute at most once, at an n
    // no larger than the index span; the rest are periodic.
    std::vector<DualElement> support;
    for (const auto& [gh, coef] : test.c.terms) {
      support.push_back(gh.first);
      support.push_back(gh.second);
    }
    row.escape_bound = index_span(sys, support);
    for (const auto& [t, ct] : test.c.terms)
      for (const auto& [u, cu] : test.c.terms) {
        const OrbitCertificate o = orbit_length(sys, sys.multiply(sys.inverse(t.first), u.first));
        if (o.finite) row.period = lcm_capped(row.period, o.period);
      }
    row.limsup = ratio(row.escape_bound + 1);
    for (long long n = row.escape_bound + 2; n <= row.escape_bound + row.period; ++n) row.limsup = std::max(row.limsup, ratio(n));
    if (scan.strongly_mixing && row.limsup != 1) scan.consistent = false;
    scan.rows.push_back(std::move(row));
  }
  if (!scan.consistent) scan.notes.push_back("strongly mixing system with a limsup different from 1");
  return scan;
}

PairCombination sample_pair_combination(const DualSystem& sys, std::mt19937_64& rng, int max_terms) {
  std::uniform_int_distribution<int> terms(1, max_terms);
  std::uniform_int_distribution<int> coef(-2, 2);
  PairCombination c;
  const int n = terms(rng);
  while (int(c.terms.size()) < n) {
    const DualElement g = sys.sample(rng, 3, 4);
    const DualElement h = sys.sample(rng, 3, 4);
    GaussianRational z(coef(rng), coef(rng));
    if (z.is_zero()) z = 1;
    if (!c.terms.count({g, h})) c.add(g, h, z);
  }
  return c;
}

// ---------------------------------------------------------------------------

Rational OppositeGroupJoining::operator()(const DualElement& g, const DualElement& h) const {
  if (!subsystem.contains(h)) throw PreconditionError("second leg must lie in the finite-orbit subgroup");
  return g == h ? 1 : 0;
}

DualElement OppositeGroupJoining::opposite_multiply(const DualElement& g, const DualElement& h) const {
  return subsystem.parent.multiply(h, g);
}

static std::optional<DualElement> finite_orbit_witness(const DualSystem& sys) {
  std::vector<Letter> cycle_letters;
  for (std::size_t t = 0; t < sys.tracks().size(); ++t)
    if (sys.tracks()[t].kind == Track::Kind::Cycle)
      for (long long k = 0; k < sys.tracks()[t].m && cycle_letters.size() < 2; ++k)
        cycle_letters.push_back(sys.letter(int(t), k));
  if (sys.family() == DualFamily::FreeGroup) {
    if (cycle_letters.empty()) return std::nullopt;
    return sys.generator(cycle_letters[0]);
  }
  if (cycle_letters.size() < 2) return std::nullopt;
  return FinitaryPermutation::cycle(cycle_letters);
}

OppositeGroupJoining opposite_group_joining(const DualSystem& sys, std::uint64_t seed, int samples) {
  OppositeGroupJoining j;
  j.subsystem = finite_orbit_subsystem(sys);
  j.trivial = j.subsystem.trivial;
  j.witness = finite_orbit_witness(sys);
  if (j.witness) {
    j.witness_value = j(*j.witness, *j.witness);
    // mu(lambda(w)) mu~(rho(w)) with w != 1.
    j.witness_product_value = sys.is_identity(*j.witness) ? 1 : 0;
  }
  std::mt19937_64 rng(seed);
  for (int k = 0; k < samples; ++k) {
    const DualElement g = sys.sample(rng, 4);
    DualElement h = g;
    if (k % 2 == 1 || !j.subsystem.contains(h)) {
      h = j.witness && (k % 3 == 0) ? *j.witness : sys.identity();
      const DualElement candidate = sys.sample(rng, 4);
      if (j.subsystem.contains(candidate)) h = candidate;
    }
    ++j.samples;
    if (j(sys.apply_T(g, 1), sys.apply_T(h, 1)) != j(g, h)) ++j.invariance_failures;
  }
  j.consistent_with_classification = (classify_dual(sys).ergodic == j.trivial) && (j.trivial == !j.witness.has_value());
  return j;
}

std::vector<Rational> commutator_profile_2norm(const DualSystem& sys, const Combination& a, const Combination& b, int n) {
  std::vector<Rational> out;
  for (int k = 1; k <= n; ++k) {
    const Combination bk = apply_T(sys, b, k);
    Combination comm = multiply(sys, a, bk);
    for (const auto& [g, c] : multiply(sys, bk, a).terms) comm.add(g, -c);
    out.push_back(comm.norm2_squared());
  }
  return out;
}

// ---------------------------------------------------------------------------

DualPropertyReport dual_property_checks(const DualSystem& sys, std::uint64_t seed, int samples) {
  DualPropertyReport r;
  r.samples = samples;
  std::mt19937_64 rng(seed);
  auto check = [&](bool ok, const std::string& what) {
    ++r.checks;
    if (!ok && std::find(r.failures.begin(), r.failures.end(), what) == r.failures.end()) r.failures.push_back(what);
  };
  const DualClassification cls = classify_dual(sys);
  const FiniteOrbitSubsystem sub = finite_orbit_subsystem(sys);
  check(classify_dual(sub.restricted).compact, "finite-orbit subsystem is not compact");

  std::vector<DualElement> pool;
  if (auto w = finite_orbit_witness(sys)) pool.push_back(*w);
  for (std::size_t t = 0; t < sys.tracks().size(); ++t)
    if (sys.tracks()[t].kind == Track::Kind::Shift) {
      if (sys.family() == DualFamily::FreeGroup)
        pool.push_back(sys.generator(sys.letter(int(t), 0)));
      else
        pool.push_back(FinitaryPermutation::cycle({sys.letter(int(t), 0), sys.letter(int(t), 1)}));
    }
  for (int k = 0; k < samples; ++k) pool.push_back(sys.sample(rng, 5));

  bool nonidentity_finite = false;
  bool infinite = false;
  for (std::size_t k = 0; k < pool.size(); ++k) {
    const DualElement& g = pool[k];
    const DualElement& h = pool[(k * 7 + 3) % pool.size()];
    const DualElement& f = pool[(k * 13 + 5) % pool.size()];

    check(sys.multiply(sys.multiply(g, h), f) == sys.multiply(g, sys.multiply(h, f)), "associativity");
    check(sys.is_identity(sys.multiply(g, sys.inverse(g))), "g g^-1 = 1");
    check(sys.inverse(sys.inverse(g)) == g, "(g^-1)^-1 = g");
    if (sys.family() == DualFamily::FreeGroup) {
      const auto& w = std::get<FreeWord>(g);
      check(FreeWord(w.letters()) == w, "reduction idempotent");
    }
    check(sys.apply_T(sys.multiply(g, h), 1) == sys.multiply(sys.apply_T(g, 1), sys.apply_T(h, 1)), "T(gh) = T(g)T(h)");
    check(sys.apply_T(sys.inverse(g), 1) == sys.inverse(sys.apply_T(g, 1)), "T(g^-1) = T(g)^-1");
    check(sys.apply_T(g, 5) == sys.apply_T(sys.apply_T(g, 2), 3), "T^5 = T^3 T^2");
    check(sys.apply_T(sys.apply_T(g, 4), -4) == g, "T^-4 T^4 = id");

    const OrbitCertificate o = orbit_length(sys, g);
    if (o.finite) {
      check(sys.apply_T(g, o.period) == g, "finite orbit returns at its period");
      if (o.period <= 1000)
        for (long long j = 1; j < o.period; ++j) check(sys.apply_T(g, j) != g, "finite orbit period is minimal");
      if (!sys.is_identity(g)) nonidentity_finite = true;
      check(sub.contains(g), "finite-orbit element outside E");
    } else {
      infinite = true;
      const Letter s = *o.escaping;
      long long previous = s.index;
      for (long long n = 1; n <= 50; ++n) {
        const Letter moved = sys.advance(s, n);
        const auto letters = sys.letters_of(sys.apply_T(g, n));
        check(moved.index > previous && std::find(letters.begin(), letters.end(), moved) != letters.end(),
              "escaping letter index grows strictly");
        check(sys.apply_T(g, n) != g, "infinite orbit never returns");
        previous = moved.index;
      }
    }

    if (sub.contains(g) && sub.contains(h)) {
      check(sub.contains(sys.multiply(g, h)), "E closed under products");
      check(sub.contains(sys.inverse(g)), "E closed under inverses");
    }

    // Correlations and Delta_n against the mixing flags.
    const long long span = index_span(sys, {g, h});
    const bool unit_pair = sys.is_identity(g) && sys.is_identity(h);
    if (cls.strongly_mixing) {
      for (long long n = span + 1; n <= span + 10; ++n) {
        check(delta_indicator(sys, g, h, n) == unit_pair, "Delta_n reaches [g=1][h=1] past the escape bound");
        check(sys.is_identity(sys.multiply(sys.apply_T(g, n), h)) == unit_pair,
              "correlation vanishes past the escape bound");
      }
    } else if (o.finite && !sys.is_identity(g)) {
      for (long long q = 1; q <= 5; ++q)
        check(delta_indicator(sys, g, g, q * o.period), "Delta_n of a finite-orbit pair keeps returning");
    }
  }
  check(cls.ergodic == !nonidentity_finite, "ergodic iff every nonidentity orbit is infinite");
  check(cls.compact == !infinite, "compact iff every orbit is finite");
  check(cls.ergodic == sub.trivial, "ergodic iff the finite-orbit subgroup is trivial");
  return r;
}

// ---------------------------------------------------------------------------

static bool valid_track_id(const std::string& id) {
  if (id.empty()) return false;
  for (char c : id)
    if (std::isdigit(static_cast<unsigned char>(c)) || std::isspace(static_cast<unsigned char>(c)) ||
        std::string("-^()|;:~").find(c) != std::string::npos)
      return false;
  return true;
}

DualSystem dual_system_from_json(const json& j) {
  if (!j.is_object()) throw InputError("dual system must be a JSON object");
  if (!j.contains("family") || !j["family"].is_string()) throw InputError("missing string \"family\"");
  const std::string fam = j["family"].get<std::string>();
  DualFamily family;
  if (fam == "free")
    family = DualFamily::FreeGroup;
  else if (fam == "finperm")
    family = DualFamily::FinitaryPermutations;
  else
    throw InputError("\"family\" must be \"free\" or \"finperm\"");

  std::vector<Track> tracks;
  if (j.contains("tracks")) {
    if (!j["tracks"].is_array()) throw InputError("\"tracks\" must be an array");
    for (const json& t : j["tracks"]) {
      if (!t.is_object() || !t.contains("id") || !t["id"].is_string() || !t.contains("kind") || !t["kind"].is_string())
        throw InputError("each track needs string \"id\" and \"kind\"");
      Track tr;
      tr.id = t["id"].get<std::string>();
      if (!valid_track_id(tr.id)) throw InputError("track id \"" + tr.id + "\" may not contain digits or -^()|;:~");
      const std::string kind = t["kind"].get<std::string>();
      if (kind == "shift") {
        tr.kind = Track::Kind::Shift;
      } else if (kind == "cycle") {
        tr.kind = Track::Kind::Cycle;
        if (!t.contains("m") || !t["m"].is_number_integer() || t["m"].get<long long>() < 1)
          throw InputError("cycle track \"" + tr.id + "\" needs a positive integer \"m\"");
        tr.m = t["m"].get<long long>();
      } else {
        throw InputError("track kind must be \"shift\" or \"cycle\"");
      }
      tracks.push_back(std::move(tr));
    }
  }

  // Cycles of an explicit alphabet permutation become cycle tracks.
  std::map<std::string, Letter> aliases;
  if (j.contains("h")) {
    const json& h = j["h"];
    if (!h.is_object() || !h.contains("cycles") || !h["cycles"].is_array())
      throw InputError("\"h\" must be {\"cycles\": [[names...], ...]}");
    for (const json& cyc : h["cycles"]) {
      if (!cyc.is_array() || cyc.empty()) throw InputError("each cycle of \"h\" must be a nonempty array of names");
      Track tr;
      tr.kind = Track::Kind::Cycle;
      tr.m = static_cast<long long>(cyc.size());
      for (std::size_t k = 0; k < cyc.size(); ++k) {
        if (!cyc[k].is_string() || cyc[k].get<std::string>().empty()) throw InputError("letter names must be strings");
        const std::string name = cyc[k].get<std::string>();
        if (aliases.count(name)) throw InputError("letter \"" + name + "\" appears twice in \"h\"");
        aliases[name] = {int(tracks.size()), static_cast<long long>(k)};
      }
      tr.id = "~" + cyc[0].get<std::string>();
      tracks.push_back(std::move(tr));
    }
  }
  if (tracks.empty()) throw InputError("a dual system needs at least one track");
  DualSystem sys;
  try {
    sys = DualSystem(family, std::move(tracks), std::move(aliases));
  } catch (const PreconditionError& e) {
    throw InputError(e.what());
  }
  if (j.contains("name") && j["name"].is_string()) sys.name = j["name"].get<std::string>();
  return sys;
}

json dual_system_to_json(const DualSystem& sys) {
  json j;
  if (!sys.name.empty()) j["name"] = sys.name;
  j["family"] = sys.family() == DualFamily::FreeGroup ? "free" : "finperm";
  json tracks = json::array();
  json cycles = json::array();
  for (std::size_t t = 0; t < sys.tracks().size(); ++t) {
    const Track& tr = sys.tracks()[t];
    if (tr.id[0] == '~') {
      json cyc = json::array();
      for (long long k = 0; k < tr.m; ++k) cyc.push_back(sys.format(sys.letter(int(t), k)));
      cycles.push_back(cyc);
    } else if (tr.kind == Track::Kind::Shift) {
      tracks.push_back({{"id", tr.id}, {"kind", "shift"}});
    } else {
      tracks.push_back({{"id", tr.id}, {"kind", "cycle"}, {"m", tr.m}});
    }
  }
  j["tracks"] = tracks;
  if (!cycles.empty()) j["h"] = {{"cycles", cycles}};
  return j;
}

DualSystem load_dual_system(const std::filesystem::path& path) {
  DualSystem sys = dual_system_from_json(read_json_file(path));
  if (sys.name.empty()) sys.name = path.stem().string();
  return sys;
}

}  // namespace ncjoin
