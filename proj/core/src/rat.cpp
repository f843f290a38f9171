#include "cartomdp/rat.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

namespace cartomdp {

std::optional<Rat> rat_parse(const std::string& text) {
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s += c;
  if (s.empty()) return std::nullopt;

  // Scientific notation: mantissa scaled by a power of ten.
  auto epos = s.find_first_of("eE");
  if (epos != std::string::npos && s.find('/') == std::string::npos) {
    auto mant = rat_parse(s.substr(0, epos));
    if (!mant) return std::nullopt;
    std::string es = s.substr(epos + 1);
    if (es.empty()) return std::nullopt;
    bool neg = es[0] == '-';
    if (es[0] == '-' || es[0] == '+') es = es.substr(1);
    if (es.empty() || es.size() > 6) return std::nullopt;
    for (char c : es)
      if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    long k = std::stol(es);
    mpz_class scale;
    mpz_ui_pow_ui(scale.get_mpz_t(), 10, static_cast<unsigned long>(k));
    Rat r = neg ? Rat(mant->get_num(), mant->get_den() * scale)
                : Rat(mant->get_num() * scale, mant->get_den());
    r.canonicalize();
    return r;
  }

  auto is_int = [](const std::string& t) {
    if (t.empty()) return false;
    size_t i = (t[0] == '-' || t[0] == '+') ? 1 : 0;
    if (i == t.size()) return false;
    for (; i < t.size(); ++i)
      if (!std::isdigit(static_cast<unsigned char>(t[i]))) return false;
    return true;
  };

  auto slash = s.find('/');
  if (slash != std::string::npos) {
    std::string num = s.substr(0, slash), den = s.substr(slash + 1);
    if (!is_int(num) || !is_int(den)) return std::nullopt;
    mpz_class d(den);
    if (d == 0) return std::nullopt;
    Rat r(mpz_class(num), d);
    r.canonicalize();
    return r;
  }

  auto dot = s.find('.');
  if (dot != std::string::npos) {
    std::string ip = s.substr(0, dot), fp = s.substr(dot + 1);
    bool neg = !ip.empty() && ip[0] == '-';
    if (!ip.empty() && (ip[0] == '-' || ip[0] == '+')) ip = ip.substr(1);
    if (ip.empty() && fp.empty()) return std::nullopt;
    for (char c : ip + fp)
      if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    mpz_class scale = 1;
    for (size_t i = 0; i < fp.size(); ++i) scale *= 10;
    mpz_class whole = ip.empty() ? mpz_class(0) : mpz_class(ip);
    mpz_class frac = fp.empty() ? mpz_class(0) : mpz_class(fp);
    Rat r(whole * scale + frac, scale);
    r.canonicalize();
    if (neg) r = -r;
    return r;
  }

  if (!is_int(s)) return std::nullopt;
  return Rat(mpz_class(s));
}

std::string rat_str(const Rat& r) {
  if (r.get_den() == 1) return r.get_num().get_str();
  return r.get_num().get_str() + "/" + r.get_den().get_str();
}

long rat_floor(const Rat& r) {
  mpz_class q;
  mpz_fdiv_q(q.get_mpz_t(), r.get_num().get_mpz_t(), r.get_den().get_mpz_t());
  return q.get_si();
}

long rat_ceil(const Rat& r) {
  mpz_class q;
  mpz_cdiv_q(q.get_mpz_t(), r.get_num().get_mpz_t(), r.get_den().get_mpz_t());
  return q.get_si();
}

Rat rat_round_to_denominator(double x, unsigned long denom) {
  double scaled = x * static_cast<double>(denom);
  double nearest = std::nearbyint(scaled);
  Rat r(static_cast<long>(nearest), static_cast<long>(denom));
  r.canonicalize();
  return r;
}

double rat_double(const Rat& r) { return r.get_d(); }

bool ExtValue::operator<(const ExtValue& o) const {
  if (tag == Tag::MinusInfinity) return o.tag != Tag::MinusInfinity;
  if (tag == Tag::PlusInfinity) return false;
  if (o.tag == Tag::PlusInfinity) return true;
  if (o.tag == Tag::MinusInfinity) return false;
  return value < o.value;
}

std::string ext_str(const ExtValue& v) {
  switch (v.tag) {
    case ExtValue::Tag::PlusInfinity: return "+inf";
    case ExtValue::Tag::MinusInfinity: return "-inf";
    default: return rat_str(v.value);
  }
}

}  // namespace cartomdp
