#pragma once

// Exact rationals and Gaussian rationals for dual-system quantities.

#include <boost/multiprecision/cpp_int.hpp>

#include <string>

namespace ncjoin {

using Rational = boost::multiprecision::cpp_rational;

std::string to_string(const Rational& q);
/// "3", "-1/2"; throws InputError otherwise.
Rational parse_rational(const std::string& s);

class GaussianRational {
 public:
  GaussianRational() = default;
  GaussianRational(Rational re, Rational im = 0) : re_(std::move(re)), im_(std::move(im)) {}
  GaussianRational(long long n) : re_(n) {}

  const Rational& real() const { return re_; }
  const Rational& imag() const { return im_; }
  bool is_zero() const { return re_ == 0 && im_ == 0; }

  GaussianRational conj() const { return {re_, -im_}; }
  /// |z|^2
  Rational norm() const { return re_ * re_ + im_ * im_; }

  GaussianRational operator-() const { return {-re_, -im_}; }
  GaussianRational& operator+=(const GaussianRational& o);
  GaussianRational& operator-=(const GaussianRational& o);
  GaussianRational& operator*=(const GaussianRational& o);

  friend GaussianRational operator+(GaussianRational a, const GaussianRational& b) { return a += b; }
  friend GaussianRational operator-(GaussianRational a, const GaussianRational& b) { return a -= b; }
  friend GaussianRational operator*(GaussianRational a, const GaussianRational& b) { return a *= b; }
  friend bool operator==(const GaussianRational& a, const GaussianRational& b) {
    return a.re_ == b.re_ && a.im_ == b.im_;
  }

 private:
  Rational re_ = 0;
  Rational im_ = 0;
};

std::string to_string(const GaussianRational& z);
/// Accepts "a", "bi", "a+bi", "a-bi" with a, b rationals; "i" and "-i" alone.
GaussianRational parse_gaussian(const std::string& s);

}  // namespace ncjoin
