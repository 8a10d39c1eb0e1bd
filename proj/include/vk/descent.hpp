#pragma once

// Descent data over a base map, in the concrete family-of-bijections form:
// a carrier gamma: I -> L, a base p: L -> B, and for every ordered pair
// (e, e') in ker(p) a bijection between the gamma-fibres over e and e',
// subject to the neutrality law (the diagonal components are identities)
// and the cocycle law (components compose along ker(p)).
//
// canonical_descent extracts this structure from a pullback square, realize
// rebuilds a pullback square from it by a coequalizer, and the two are
// exact inverses on valid data.

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vk/finset.hpp"
#include "vk/limits.hpp"

namespace vk {

using ElemPair = std::pair<std::string, std::string>;
using FiberMap = std::map<std::string, std::string>;

struct DescentData {
  FinMap carrier;  // gamma: I -> L
  FinMap base;     // p: L -> B
  std::map<ElemPair, FiberMap> family;

  const FiberMap& component(const std::string& e, const std::string& e2) const {
    auto it = family.find({e, e2});
    detail::require(it != family.end(),
                    "DescentData: no component for (" + e + "," + e2 + ")");
    return it->second;
  }

  const std::string& apply(const std::string& e, const std::string& e2,
                           const std::string& x) const {
    const FiberMap& m = component(e, e2);
    auto it = m.find(x);
    detail::require(it != m.end(), "DescentData: component (" + e + "," + e2 +
                                       ") undefined at '" + x + "'");
    return it->second;
  }

  friend bool operator==(const DescentData&, const DescentData&) = default;
};

struct DescentViolation {
  enum class Kind { NotTotal, NotBijective, Neutrality, Cocycle };
  Kind kind;
  std::vector<std::string> witness;  // offending base elements / carrier element
  std::string detail;
};

inline const char* to_string(DescentViolation::Kind k) {
  switch (k) {
    case DescentViolation::Kind::NotTotal: return "not-total";
    case DescentViolation::Kind::NotBijective: return "not-bijective";
    case DescentViolation::Kind::Neutrality: return "neutrality";
    case DescentViolation::Kind::Cocycle: return "cocycle";
  }
  return "?";
}

/// Checks all DescentData invariants; returns the first violation in
/// block-then-pair lexicographic scan order, or nullopt when valid.
inline std::optional<DescentViolation> validate(const DescentData& dd) {
  using V = DescentViolation;
  Partition ker = kernel_pair(dd.base);
  auto pairs = ker.ordered_pairs();

  // The family must be indexed by exactly the ordered pairs of ker(base).
  if (dd.family.size() != pairs.size()) {
    for (const auto& [key, m] : dd.family) {
      bool in_ker = ker.carrier().contains(key.first) && ker.carrier().contains(key.second) &&
                    ker.same_block(key.first, key.second);
      if (!in_ker)
        return V{V::Kind::NotTotal, {key.first, key.second},
                 "family component outside ker(base)"};
    }
  }
  for (const auto& [e, e2] : pairs) {
    if (!dd.family.count({e, e2}))
      return V{V::Kind::NotTotal, {e, e2}, "missing family component"};
  }

  std::map<std::string, std::vector<std::string>> fibers;
  for (const auto& x : dd.carrier.dom().elements()) fibers[dd.carrier.at(x)].push_back(x);
  for (const auto& e : dd.base.dom().elements()) fibers[e];  // ensure empty fibres exist

  for (const auto& [e, e2] : pairs) {
    const FiberMap& m = dd.family.at({e, e2});
    const auto& from = fibers.at(e);
    const auto& to = fibers.at(e2);
    for (const auto& x : from)
      if (!m.count(x))
        return V{V::Kind::NotTotal, {e, e2, x}, "component undefined on fibre element"};
    if (m.size() != from.size())
      return V{V::Kind::NotTotal, {e, e2}, "component defined outside its fibre"};
    std::vector<std::string> seen;
    for (const auto& x : from) {
      const std::string& y = m.at(x);
      if (std::find(to.begin(), to.end(), y) == to.end())
        return V{V::Kind::NotBijective, {e, e2, x}, "value outside target fibre"};
      seen.push_back(y);
    }
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end() || seen.size() != to.size())
      return V{V::Kind::NotBijective, {e, e2}, "component is not a bijection"};
  }

  for (const auto& b : ker.blocks())
    for (const auto& e : b) {
      const FiberMap& m = dd.family.at({e, e});
      for (const auto& x : fibers.at(e))
        if (m.at(x) != x) return V{V::Kind::Neutrality, {e, x}, "diagonal component not identity"};
    }

  for (const auto& b : ker.blocks())
    for (const auto& e : b)
      for (const auto& e2 : b)
        for (const auto& e3 : b) {
          const FiberMap& m12 = dd.family.at({e, e2});
          const FiberMap& m23 = dd.family.at({e2, e3});
          const FiberMap& m13 = dd.family.at({e, e3});
          for (const auto& x : fibers.at(e))
            if (m23.at(m12.at(x)) != m13.at(x))
              return V{V::Kind::Cocycle, {e, e2, e3, x}, "cocycle law fails"};
        }

  return std::nullopt;
}

inline bool is_valid(const DescentData& dd) { return !validate(dd).has_value(); }

/// The canonical descent data of a pullback square (left = gamma, top = q,
/// bottom = p): the component at (e, e') sends x in the fibre over e to the
/// unique y in the fibre over e' with q(y) = q(x).
inline DescentData canonical_descent(const CommutingSquare& sq) {
  detail::require(is_pullback(sq), "canonical_descent: square is not a pullback");
  DescentData dd;
  dd.carrier = sq.left;
  dd.base = sq.bottom;
  const FinMap& q = sq.top;

  std::map<std::string, std::vector<std::string>> fibers;
  for (const auto& x : dd.carrier.dom().elements()) fibers[dd.carrier.at(x)].push_back(x);
  for (const auto& e : dd.base.dom().elements()) fibers[e];

  Partition ker = kernel_pair(dd.base);
  for (const auto& [e, e2] : ker.ordered_pairs()) {
    FiberMap m;
    for (const auto& x : fibers.at(e)) {
      const std::string* found = nullptr;
      for (const auto& y : fibers.at(e2))
        if (q.at(y) == q.at(x)) {
          detail::require(found == nullptr,
                          "canonical_descent: fibre correspondence not unique (corrupted input)");
          found = &y;
        }
      detail::require(found != nullptr,
                      "canonical_descent: fibre correspondence has no image (corrupted input)");
      m[x] = *found;
    }
    dd.family[{e, e2}] = std::move(m);
  }
  return dd;
}

/// The partition of dom(carrier) whose pairs are exactly the graphs of all
/// family components.
inline Partition kernel_of_realization(const DescentData& dd) {
  auto bad = validate(dd);
  detail::require(!bad.has_value(), "kernel_of_realization: invalid descent data");
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& [key, m] : dd.family)
    for (const auto& [x, y] : m) pairs.emplace_back(x, y);
  return Partition::from_pairs(dd.carrier.dom(), pairs);
}

/// Rebuilds the pullback square (carrier, c, alpha, base) where c is the
/// coequalizer identifying each x with its images under the family and alpha
/// mediates base . carrier.
inline CommutingSquare realize(const DescentData& dd) {
  Partition ker = kernel_of_realization(dd);
  std::vector<std::string> reps;
  for (const auto& b : ker.blocks()) reps.push_back(b.front());
  FinSet quotient(std::move(reps));
  FinMap c = FinMap::from_fn(dd.carrier.dom(), quotient, [&](const std::string& x) {
    return ker.representative(x);
  });
  FinMap alpha = FinMap::from_fn(quotient, dd.base.cod(), [&](const std::string& rep) {
    return dd.base.at(dd.carrier.at(rep));
  });
  return CommutingSquare(dd.carrier, c, alpha, dd.base);
}

/// Restriction along a factorization base = g . f: keeps the sub-family
/// indexed by ker(f) (a subset of ker(base)); the carrier is unchanged and
/// the result is descent data over f.
inline DescentData restrict_descent(const DescentData& dd, const FinMap& f, const FinMap& g) {
  detail::require(compose(g, f) == dd.base, "restrict_descent: base mismatch (g.f != base)");
  DescentData out;
  out.carrier = dd.carrier;
  out.base = f;
  for (const auto& [e, e2] : kernel_pair(f).ordered_pairs())
    out.family[{e, e2}] = dd.component(e, e2);
  return out;
}

}  // namespace vk
