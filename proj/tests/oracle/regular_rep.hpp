#pragma once

// Left/right regular representation of the symmetric group on n points,
// built by enumerating all n! permutations. Used to evaluate
// Delta_n(c^* c) = |pi_n(c) delta_e|^2 with pi_n(lambda(g) (x) rho(h)) =
// lambda(T^n g) rho(h) and T g = s g s^-1 for the rotation s: i -> i+1.

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <map>
#include <numeric>
#include <vector>

namespace oracle {

using Perm = std::vector<int>;

inline Perm compose(const Perm& g, const Perm& h) {
  Perm out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[std::size_t(h[i])];
  return out;
}

inline Perm invert(const Perm& g) {
  Perm out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) out[std::size_t(g[i])] = int(i);
  return out;
}

struct SymmetricGroup {
  explicit SymmetricGroup(int n) {
    Perm p(static_cast<std::size_t>(n));
    std::iota(p.begin(), p.end(), 0);
    do {
      index[p] = int(elements.size());
      elements.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
    rotation.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) rotation[std::size_t(i)] = (i + 1) % n;
  }

  Perm T(const Perm& g, int n) const {
    Perm s(g.size());
    std::iota(s.begin(), s.end(), 0);
    for (int k = 0; k < n; ++k) s = compose(rotation, s);
    return compose(compose(s, g), invert(s));
  }

  Eigen::MatrixXcd left(const Perm& g) const {
    const auto d = Eigen::Index(elements.size());
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(d, d);
    for (std::size_t k = 0; k < elements.size(); ++k) m(index.at(compose(g, elements[k])), Eigen::Index(k)) = 1.0;
    return m;
  }

  Eigen::MatrixXcd right(const Perm& h) const {
    const auto d = Eigen::Index(elements.size());
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(d, d);
    for (std::size_t k = 0; k < elements.size(); ++k)
      m(index.at(compose(elements[k], invert(h))), Eigen::Index(k)) = 1.0;
    return m;
  }

  std::vector<Perm> elements;
  std::map<Perm, int> index;
  Perm rotation;
};

struct PairTerm {
  std::complex<double> c;
  Perm g;
  Perm h;
};

inline double delta_cstar_c(const SymmetricGroup& grp, const std::vector<PairTerm>& terms, int n) {
  const auto d = Eigen::Index(grp.elements.size());
  Eigen::MatrixXcd x = Eigen::MatrixXcd::Zero(d, d);
  for (const PairTerm& t : terms) x += t.c * grp.left(grp.T(t.g, n)) * grp.right(t.h);
  Eigen::VectorXcd e = Eigen::VectorXcd::Zero(d);
  e(0) = 1.0;  // the identity permutation is enumerated first
  return (x * e).squaredNorm();
}

}  // namespace oracle
