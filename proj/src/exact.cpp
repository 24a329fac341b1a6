#include "ncjoin/exact.hpp"

#include "ncjoin/system_io.hpp"

#include <cctype>

namespace ncjoin {

std::string to_string(const Rational& q) { return q.str(); }

static bool is_integer_text(const std::string& s) {
  std::size_t start = (!s.empty() && (s[0] == '-' || s[0] == '+')) ? 1 : 0;
  if (start == s.size()) return false;
  for (std::size_t i = start; i < s.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  return true;
}

Rational parse_rational(const std::string& s) {
  const auto slash = s.find('/');
  const std::string num = s.substr(0, slash);
  if (!is_integer_text(num)) throw InputError("not a rational number: \"" + s + "\"");
  boost::multiprecision::cpp_int n(num[0] == '+' ? num.substr(1) : num);
  if (slash == std::string::npos) return Rational(n);
  const std::string den = s.substr(slash + 1);
  if (!is_integer_text(den) || den[0] == '-' || den[0] == '+') throw InputError("not a rational number: \"" + s + "\"");
  boost::multiprecision::cpp_int d(den);
  if (d == 0) throw InputError("zero denominator in \"" + s + "\"");
  return Rational(n, d);
}

GaussianRational& GaussianRational::operator+=(const GaussianRational& o) {
  re_ += o.re_;
  im_ += o.im_;
  return *this;
}

GaussianRational& GaussianRational::operator-=(const GaussianRational& o) {
  re_ -= o.re_;
  im_ -= o.im_;
  return *this;
}

GaussianRational& GaussianRational::operator*=(const GaussianRational& o) {
  Rational re = re_ * o.re_ - im_ * o.im_;
  im_ = re_ * o.im_ + im_ * o.re_;
  re_ = std::move(re);
  return *this;
}

std::string to_string(const GaussianRational& z) {
  if (z.imag() == 0) return to_string(z.real());
  std::string im;
  if (z.imag() == 1)
    im = "i";
  else if (z.imag() == -1)
    im = "-i";
  else
    im = to_string(z.imag()) + "i";
  if (z.real() == 0) return im;
  return to_string(z.real()) + (im[0] == '-' ? "" : "+") + im;
}

static Rational imaginary_coefficient(const std::string& s, const std::string& whole) {
  if (s.empty() || s == "+") return 1;
  if (s == "-") return -1;
  try {
    return parse_rational(s);
  } catch (const InputError&) {
    throw InputError("not a Gaussian rational: \"" + whole + "\"");
  }
}

GaussianRational parse_gaussian(const std::string& text) {
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s += c;
  if (s.empty()) throw InputError("empty coefficient");
  if (s.back() != 'i') return parse_rational(s);
  s.pop_back();
  // Split at the last sign that is not the leading one.
  std::size_t split = std::string::npos;
  for (std::size_t k = s.size(); k-- > 1;)
    if (s[k] == '+' || s[k] == '-') {
      split = k;
      break;
    }
  if (split == std::string::npos) return {0, imaginary_coefficient(s, text)};
  return {parse_rational(s.substr(0, split)), imaginary_coefficient(s.substr(split), text)};
}

}  // namespace ncjoin
