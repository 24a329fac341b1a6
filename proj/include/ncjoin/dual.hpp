#pragma once

// Dual systems: a discrete group Gamma (free group or finitary permutations
// of a letter set) with an automorphism T, acting on the group von Neumann
// algebra by lambda(g) -> lambda(T g) and carrying the trace state
// mu(lambda(g)) = [g = 1]. Letters are organised in tracks on which T
// advances the index by one: modulo m on a cycle track, by +1 on a shift
// track. Everything here is exact.

#include "ncjoin/algebra.hpp"
#include "ncjoin/exact.hpp"

#include <json.hpp>

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace ncjoin {

struct Track {
  enum class Kind { Shift, Cycle };
  std::string id;
  Kind kind = Kind::Shift;
  /// Cycle length; unused for shift tracks.
  long long m = 0;
};

struct Letter {
  int track = 0;
  long long index = 0;
  auto operator<=>(const Letter&) const = default;
};

struct SignedLetter {
  Letter letter;
  int exponent = 1;
  auto operator<=>(const SignedLetter&) const = default;
};

/// Reduced word in the free group on the letters.
class FreeWord {
 public:
  FreeWord() = default;
  /// Reduces the input.
  explicit FreeWord(const std::vector<SignedLetter>& letters);

  const std::vector<SignedLetter>& letters() const { return letters_; }
  std::size_t length() const { return letters_.size(); }
  bool empty() const { return letters_.empty(); }

  FreeWord inverse() const;
  friend FreeWord operator*(const FreeWord& a, const FreeWord& b);
  auto operator<=>(const FreeWord&) const = default;

 private:
  std::vector<SignedLetter> letters_;
};

/// Bijection of the letters moving finitely many, stored on its support.
/// Composition is (g * h)(s) = g(h(s)).
class FinitaryPermutation {
 public:
  FinitaryPermutation() = default;
  /// Throws PreconditionError unless `images` is a bijection of its keys.
  explicit FinitaryPermutation(std::map<Letter, Letter> images);
  static FinitaryPermutation cycle(const std::vector<Letter>& points);

  Letter operator()(const Letter& s) const;
  const std::map<Letter, Letter>& images() const { return images_; }
  std::vector<Letter> support() const;
  bool empty() const { return images_.empty(); }

  FinitaryPermutation inverse() const;
  friend FinitaryPermutation operator*(const FinitaryPermutation& g, const FinitaryPermutation& h);
  auto operator<=>(const FinitaryPermutation&) const = default;

 private:
  std::map<Letter, Letter> images_;
};

using DualElement = std::variant<FreeWord, FinitaryPermutation>;

enum class DualFamily { FreeGroup, FinitaryPermutations };

class DualSystem {
 public:
  DualSystem() = default;
  /// `aliases` gives extra names for letters (used for relabelled alphabets).
  DualSystem(DualFamily family, std::vector<Track> tracks, std::map<std::string, Letter> aliases = {});

  DualFamily family() const { return family_; }
  const std::vector<Track>& tracks() const { return tracks_; }
  const std::map<std::string, Letter>& aliases() const { return aliases_; }
  std::string name;

  bool has_shift_track() const;
  bool has_cycle_track() const;
  /// Number of letters on cycle tracks.
  long long cycle_letter_count() const;

  /// Letter with the index reduced modulo m on cycle tracks.
  Letter letter(int track, long long index) const;
  Letter advance(const Letter& s, long long n) const;

  DualElement identity() const;
  bool is_identity(const DualElement& g) const;
  DualElement multiply(const DualElement& a, const DualElement& b) const;
  DualElement inverse(const DualElement& g) const;
  /// T^n for any integer n.
  DualElement apply_T(const DualElement& g, long long n) const;
  /// Free family: the one-letter word.
  DualElement generator(const Letter& s) const;

  /// Letters of a word, or support points of a permutation.
  std::vector<Letter> letters_of(const DualElement& g) const;

  /// Words like "x0 y2^-1 x5"; permutations in cycle notation "(x0 x1)(y0 y1 y2)".
  /// "1" or "" is the identity. Throws InputError.
  DualElement parse(const std::string& text) const;
  std::string format(const DualElement& g) const;
  std::string format(const Letter& s) const;

  /// Random element built from at most `max_factors` letters (free family) or
  /// transpositions (permutations), with indices drawn from [-window, window].
  DualElement sample(std::mt19937_64& rng, int max_factors, long long window = 6) const;

 private:
  void check_element(const DualElement& g) const;

  DualFamily family_ = DualFamily::FreeGroup;
  std::vector<Track> tracks_;
  std::map<std::string, Letter> aliases_;
};

/// Finite(period) or Infinite(escaping letter whose index grows under T).
struct OrbitCertificate {
  bool finite = false;
  long long period = 0;
  std::optional<Letter> escaping;
};

OrbitCertificate orbit_length(const DualSystem& sys, const DualElement& g);

struct DualClassification {
  bool ergodic = false;
  bool weakly_mixing = false;
  bool strongly_mixing = false;
  bool compact = false;
  /// Only finitary permutation groups of finitely many letters are finite.
  bool group_finite = false;
  std::optional<Rational> group_order;
  /// The finite-orbit subgroup is {1}.
  bool finite_orbit_trivial = false;
  std::vector<std::string> notes;
};

DualClassification classify_dual(const DualSystem& sys);

/// E = {g : T-orbit of g finite}, a subgroup. `restricted` is the system on
/// the cycle-track letters, whose group is E.
struct FiniteOrbitSubsystem {
  std::string description;
  bool trivial = false;
  DualSystem restricted;
  DualSystem parent;
  bool contains(const DualElement& g) const;
};

FiniteOrbitSubsystem finite_orbit_subsystem(const DualSystem& sys);

/// Finite combination sum_g c_g lambda(g).
struct Combination {
  std::map<DualElement, GaussianRational> terms;

  void add(const DualElement& g, const GaussianRational& c);
  /// mu(x^* x) = sum |c_g|^2
  Rational norm2_squared() const;
  GaussianRational coefficient(const DualElement& g) const;
};

Combination multiply(const DualSystem& sys, const Combination& a, const Combination& b);
Combination apply_T(const DualSystem& sys, const Combination& a, long long n);
/// Haar state: the coefficient of the identity.
GaussianRational haar_state(const DualSystem& sys, const Combination& a);

/// Terms "coef:word" separated by ';', coefficient optional: "x0; 1/2+i:y1^-1".
Combination parse_combination(const DualSystem& sys, const std::string& text);
std::string format(const DualSystem& sys, const Combination& c);

struct CorrelationSeries {
  long long first = 0;
  /// mu(alpha^n(a) b) for n = first, first + 1, ...
  std::vector<GaussianRational> values;
  GaussianRational product;
  /// values[k] - product
  std::vector<GaussianRational> centered;
  /// |a|_2^2 |b|_2^2, the Cauchy-Schwarz bound on |values|^2.
  Rational cauchy_schwarz_squared;
  /// Ergodic systems: centered values vanish for every n > escape_bound.
  std::optional<long long> escape_bound;
};

CorrelationSeries correlation_series(const DualSystem& sys, const Combination& a, const Combination& b, long long first,
                                     long long last);

/// Finite combination sum c_{g,h} lambda(g) (x) rho(h).
struct PairCombination {
  std::map<std::pair<DualElement, DualElement>, GaussianRational> terms;
  void add(const DualElement& g, const DualElement& h, const GaussianRational& c);
  Rational norm2_squared() const;
};

/// Terms "coef:g|h" separated by ';'.
PairCombination parse_pair_combination(const DualSystem& sys, const std::string& text);
std::string format(const DualSystem& sys, const PairCombination& c);

/// Delta_n(lambda(g) (x) rho(h)) = [T^n(g) = h].
bool delta_indicator(const DualSystem& sys, const DualElement& g, const DualElement& h, long long n);

struct DeltaValue {
  GaussianRational value;
  /// Delta_n(c^* c), real and nonnegative.
  Rational value_cstar_c;
  /// (mu (x) mu~)(c^* c) = sum |c_{g,h}|^2
  Rational product;
};

DeltaValue delta_n_eval(const DualSystem& sys, const PairCombination& c, long long n);

/// Largest minus smallest shift-track index over the letters of all elements
/// in the support; 0 when there are none.
long long index_span(const DualSystem& sys, const std::vector<DualElement>& support);

struct DualOrnsteinRow {
  std::string label;
  bool skipped = false;
  Rational product;
  /// Delta_n(c^* c) / product over the window.
  std::vector<Rational> ratios;
  /// Beyond it only finite-orbit pairs contribute and the ratio is periodic.
  long long escape_bound = 0;
  long long period = 1;
  /// Exact limsup: max of the ratio over one period past the escape bound.
  Rational limsup;
};

struct DualOrnsteinScan {
  long long first = 0;
  long long last = 0;
  std::vector<DualOrnsteinRow> rows;
  bool strongly_mixing = false;
  /// Strongly mixing systems have every limsup equal to 1.
  bool consistent = true;
  std::vector<std::string> notes;
};

struct DualTestElement {
  std::string label;
  PairCombination c;
};

DualOrnsteinScan ornstein_scan_dual(const DualSystem& sys, const std::vector<DualTestElement>& tests, long long first,
                                    long long last);

/// Random test element with at most `max_terms` terms and small integer coefficients.
PairCombination sample_pair_combination(const DualSystem& sys, std::mt19937_64& rng, int max_terms);

/// The joining of A with its finite-orbit part built on the opposite group:
/// omega(lambda(g) (x) rho_F(h)) = [g = h] for h in E.
struct OppositeGroupJoining {
  FiniteOrbitSubsystem subsystem;
  bool trivial = false;
  /// Nontrivial case: an element w of E with omega(lambda(w) (x) rho(w)) = 1
  /// while the product state gives 0.
  std::optional<DualElement> witness;
  Rational witness_value;
  Rational witness_product_value;
  /// Sampled pairs where omega(T g (x) T h) != omega(g (x) h); always 0.
  int invariance_failures = 0;
  int samples = 0;
  bool consistent_with_classification = true;

  Rational operator()(const DualElement& g, const DualElement& h) const;
  /// Product in the opposite group: g . h = h g.
  DualElement opposite_multiply(const DualElement& g, const DualElement& h) const;
};

OppositeGroupJoining opposite_group_joining(const DualSystem& sys, std::uint64_t seed = 1, int samples = 200);

/// |[a, alpha^k(b)]|_2^2 for k = 1..n in the trace-state 2-norm.
std::vector<Rational> commutator_profile_2norm(const DualSystem& sys, const Combination& a, const Combination& b, int n);

struct DualPropertyReport {
  int samples = 0;
  /// Each entry is a failed check; empty when everything holds.
  std::vector<std::string> failures;
  int checks = 0;
};

/// Group axioms, the automorphism property of T, orbit certificate soundness
/// and the coherence of classify_dual with orbits, correlations, Delta_n and
/// the finite-orbit subsystem, all on seeded random samples.
DualPropertyReport dual_property_checks(const DualSystem& sys, std::uint64_t seed, int samples = 1000);

/// Schema: {"family":"free"|"finperm", "tracks":[{"id":"x","kind":"shift"} |
/// {"id":"y","kind":"cycle","m":3}], "h": {"cycles":[["a","b"],...]}}.
/// Cycles of "h" become extra cycle tracks whose letters keep their names.
DualSystem dual_system_from_json(const nlohmann::json& j);
nlohmann::json dual_system_to_json(const DualSystem& sys);
DualSystem load_dual_system(const std::filesystem::path& path);

}  // namespace ncjoin
