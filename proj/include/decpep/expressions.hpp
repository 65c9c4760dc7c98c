#pragma once

#include <map>
#include <utility>

namespace decpep {

/// Index of a basis point (a column of the factor P with G = P'P).
struct Point {
  int id = -1;
  bool valid() const { return id >= 0; }
  friend bool operator==(Point a, Point b) { return a.id == b.id; }
  friend auto operator<=>(Point a, Point b) { return a.id <=> b.id; }
};

/// Index into the vector of function values.
struct FValue {
  int id = -1;
  bool valid() const { return id >= 0; }
  friend bool operator==(FValue a, FValue b) { return a.id == b.id; }
};

/// Abstract vector: a linear combination of basis points. The ambient
/// dimension is symbolic; only scalar products are ever materialized.
/// Zero coefficients are never stored; the zero vector is the empty map.
class VectorExpr {
 public:
  VectorExpr() = default;
  explicit VectorExpr(Point p) { coeffs_[p.id] = 1.0; }

  static VectorExpr zero() { return {}; }

  const std::map<int, double>& coeffs() const { return coeffs_; }
  bool is_zero() const { return coeffs_.empty(); }

  VectorExpr& operator+=(const VectorExpr& o) {
    for (const auto& [p, c] : o.coeffs_) add(p, c);
    return *this;
  }
  VectorExpr& operator-=(const VectorExpr& o) {
    for (const auto& [p, c] : o.coeffs_) add(p, -c);
    return *this;
  }
  VectorExpr& operator*=(double s) {
    if (s == 0.0) {
      coeffs_.clear();
      return *this;
    }
    for (auto& [p, c] : coeffs_) c *= s;
    return *this;
  }

  friend VectorExpr operator+(VectorExpr a, const VectorExpr& b) { return a += b; }
  friend VectorExpr operator-(VectorExpr a, const VectorExpr& b) { return a -= b; }
  friend VectorExpr operator*(double s, VectorExpr a) { return a *= s; }
  friend VectorExpr operator*(VectorExpr a, double s) { return a *= s; }
  friend VectorExpr operator/(VectorExpr a, double s) { return a *= 1.0 / s; }
  friend VectorExpr operator-(VectorExpr a) { return a *= -1.0; }
  friend bool operator==(const VectorExpr& a, const VectorExpr& b) {
    return a.coeffs_ == b.coeffs_;
  }

 private:
  void add(int p, double c) {
    auto [it, fresh] = coeffs_.emplace(p, c);
    if (!fresh) {
      it->second += c;
      if (it->second == 0.0) coeffs_.erase(it);
    }
  }
  std::map<int, double> coeffs_;
};

/// Affine functional of the Gram entries G_{pq} and the function values:
///   sum over unordered pairs {p,q} of  g_{pq} * G_{pq}
/// + sum over k of  f_k * fval_k  +  constant.
class ScalarExpr {
 public:
  using PairKey = std::pair<int, int>;  // p <= q

  ScalarExpr() = default;
  explicit ScalarExpr(double c) : constant_(c) {}
  explicit ScalarExpr(FValue f) { f_coeffs_[f.id] = 1.0; }

  const std::map<PairKey, double>& gram_coeffs() const { return gram_coeffs_; }
  const std::map<int, double>& f_coeffs() const { return f_coeffs_; }
  double constant() const { return constant_; }
  bool has_support() const { return !gram_coeffs_.empty() || !f_coeffs_.empty(); }

  void add_gram(int p, int q, double c) {
    if (c == 0.0) return;
    PairKey k = p <= q ? PairKey{p, q} : PairKey{q, p};
    auto [it, fresh] = gram_coeffs_.emplace(k, c);
    if (!fresh) {
      it->second += c;
      if (it->second == 0.0) gram_coeffs_.erase(it);
    }
  }
  void add_f(int k, double c) {
    if (c == 0.0) return;
    auto [it, fresh] = f_coeffs_.emplace(k, c);
    if (!fresh) {
      it->second += c;
      if (it->second == 0.0) f_coeffs_.erase(it);
    }
  }

  ScalarExpr& operator+=(const ScalarExpr& o) {
    for (const auto& [k, c] : o.gram_coeffs_) {
      auto [it, fresh] = gram_coeffs_.emplace(k, c);
      if (!fresh) {
        it->second += c;
        if (it->second == 0.0) gram_coeffs_.erase(it);
      }
    }
    for (const auto& [k, c] : o.f_coeffs_) add_f(k, c);
    constant_ += o.constant_;
    return *this;
  }
  ScalarExpr& operator-=(const ScalarExpr& o) { return *this += (-1.0) * o; }
  ScalarExpr& operator*=(double s) {
    if (s == 0.0) {
      gram_coeffs_.clear();
      f_coeffs_.clear();
      constant_ = 0.0;
      return *this;
    }
    for (auto& [k, c] : gram_coeffs_) c *= s;
    for (auto& [k, c] : f_coeffs_) c *= s;
    constant_ *= s;
    return *this;
  }

  friend ScalarExpr operator+(ScalarExpr a, const ScalarExpr& b) { return a += b; }
  friend ScalarExpr operator-(ScalarExpr a, const ScalarExpr& b) { return a -= b; }
  friend ScalarExpr operator*(double s, ScalarExpr a) { return a *= s; }
  friend ScalarExpr operator*(ScalarExpr a, double s) { return a *= s; }
  friend ScalarExpr operator+(ScalarExpr a, double c) {
    a.constant_ += c;
    return a;
  }
  friend ScalarExpr operator-(ScalarExpr a, double c) {
    a.constant_ -= c;
    return a;
  }
  friend ScalarExpr operator-(ScalarExpr a) { return a *= -1.0; }

 private:
  std::map<PairKey, double> gram_coeffs_;
  std::map<int, double> f_coeffs_;
  double constant_ = 0.0;
};

/// Bilinear expansion of <u, v> into Gram coefficients; symmetric in its
/// arguments.
ScalarExpr inner(const VectorExpr& u, const VectorExpr& v);

/// <u, u>.
inline ScalarExpr sq_norm(const VectorExpr& u) { return inner(u, u); }

}  // namespace decpep
