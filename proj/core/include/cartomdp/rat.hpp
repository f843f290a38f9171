#pragma once

#include <gmpxx.h>

#include <optional>
#include <string>

namespace cartomdp {

// Exact rational number used throughout the model and the solvers.
// Floats appear only inside the gradient solver.
using Rat = mpq_class;

// Parses "p/q", "-3", "2.1", ".5" etc. into an exact rational.
// Decimal strings are parsed exactly (2.1 == 21/10).
std::optional<Rat> rat_parse(const std::string& text);

// Canonical form: "p" for integers, "p/q" otherwise, q > 0, gcd(p,q) = 1.
std::string rat_str(const Rat& r);

long rat_floor(const Rat& r);
long rat_ceil(const Rat& r);

// Canonicalized fraction (mpq_class's two-argument constructor does not
// reduce, and GMP arithmetic assumes reduced operands).
inline Rat make_rat(long num, long den) {
  Rat r(num, den);
  r.canonicalize();
  return r;
}

// Smallest rational k/d >= r (used when snapping float output to rationals).
Rat rat_round_to_denominator(double x, unsigned long denom);

double rat_double(const Rat& r);

// Extended value: a rational or one of the two infinities. Used for
// stochastic-shortest-path values and truncated-sum expectations.
struct ExtValue {
  enum class Tag { MinusInfinity, Finite, PlusInfinity };
  Tag tag = Tag::Finite;
  Rat value = 0;

  static ExtValue finite(Rat v) { return {Tag::Finite, std::move(v)}; }
  static ExtValue plus_infinity() { return {Tag::PlusInfinity, 0}; }
  static ExtValue minus_infinity() { return {Tag::MinusInfinity, 0}; }

  bool is_finite() const { return tag == Tag::Finite; }
  bool is_plus_infinity() const { return tag == Tag::PlusInfinity; }
  bool is_minus_infinity() const { return tag == Tag::MinusInfinity; }

  bool operator==(const ExtValue& o) const {
    return tag == o.tag && (tag != Tag::Finite || value == o.value);
  }
  // Strict order with -inf < finite < +inf.
  bool operator<(const ExtValue& o) const;
};

std::string ext_str(const ExtValue& v);

}  // namespace cartomdp
