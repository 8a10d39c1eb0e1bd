#pragma once

// Chosen pullbacks, pushouts and coequalizers in the category of finite
// sets, plus the commuting-square type shared by all higher layers.
//
// Square orientation used throughout:
//
//         top
//      X -----> Z
// left |        | right        right . top == bottom . left
//      v        v
//      Y -----> W
//        bottom
//
// Read as a pullback, X is the apex over the cospan (bottom, right).
// Read as a pushout, W is the apex under the span (left, top).

#include <string>
#include <utility>
#include <vector>

#include "vk/finset.hpp"

namespace vk {

/// Canonical name of a matched pair in a chosen pullback apex.
inline std::string pair_elem(const std::string& x, const std::string& y) {
  return "(" + x + "," + y + ")";
}

struct CommutingSquare {
  FinMap left, top, right, bottom;

  CommutingSquare() = default;

  CommutingSquare(FinMap left_, FinMap top_, FinMap right_, FinMap bottom_)
      : left(std::move(left_)),
        top(std::move(top_)),
        right(std::move(right_)),
        bottom(std::move(bottom_)) {
    detail::require(left.dom() == top.dom(), "CommutingSquare: left/top domain mismatch");
    detail::require(top.cod() == right.dom(), "CommutingSquare: top/right mismatch");
    detail::require(left.cod() == bottom.dom(), "CommutingSquare: left/bottom mismatch");
    detail::require(right.cod() == bottom.cod(), "CommutingSquare: right/bottom codomain mismatch");
    for (const auto& x : left.dom().elements())
      detail::require(right.at(top.at(x)) == bottom.at(left.at(x)),
                      "CommutingSquare: does not commute at '" + x + "'");
  }

  friend bool operator==(const CommutingSquare&, const CommutingSquare&) = default;
};

/// The chosen pullback of a cospan (f, g): the literal matched-pair set
/// { (x,y) | f(x) = g(y) } with coordinate projections.
struct ChosenPullback {
  FinSet apex;
  FinMap proj1, proj2;   // to dom(f), dom(g)
  FinMap along_f, along_g;  // the cospan the pullback was taken over
};

inline ChosenPullback pullback(const FinMap& f, const FinMap& g) {
  detail::require(f.cod() == g.cod(), "pullback: codomain mismatch");
  std::vector<std::string> apex_elems;
  std::map<std::string, std::string> p1, p2;
  for (const auto& x : f.dom().elements())
    for (const auto& y : g.dom().elements())
      if (f.at(x) == g.at(y)) {
        std::string e = pair_elem(x, y);
        apex_elems.push_back(e);
        p1[e] = x;
        p2[e] = y;
      }
  FinSet apex(std::move(apex_elems));
  return ChosenPullback{apex, FinMap(apex, f.dom(), p1), FinMap(apex, g.dom(), p2), f, g};
}

struct ChosenPushout {
  FinSet apex;
  FinMap inj1, inj2;  // from cod(f), cod(g)
};

/// The chosen pushout of a span (f, g) with common domain: quotient of the
/// tagged disjoint union cod(f) + cod(g) by the closure of f(x) ~ g(x).
/// Class representatives are least tagged elements, tag "L:" before "R:".
inline ChosenPushout pushout(const FinMap& f, const FinMap& g) {
  detail::require(f.dom() == g.dom(), "pushout: domain mismatch");
  std::vector<std::string> tagged;
  tagged.reserve(f.cod().size() + g.cod().size());
  for (const auto& y : f.cod().elements()) tagged.push_back("L:" + y);
  for (const auto& y : g.cod().elements()) tagged.push_back("R:" + y);
  FinSet carrier(std::move(tagged));
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& x : f.dom().elements())
    pairs.emplace_back("L:" + f.at(x), "R:" + g.at(x));
  Partition classes = Partition::from_pairs(carrier, pairs);
  std::vector<std::string> reps;
  for (const auto& b : classes.blocks()) reps.push_back(b.front());
  FinSet apex(std::move(reps));
  FinMap inj1 = FinMap::from_fn(f.cod(), apex, [&](const std::string& y) {
    return classes.representative("L:" + y);
  });
  FinMap inj2 = FinMap::from_fn(g.cod(), apex, [&](const std::string& y) {
    return classes.representative("R:" + y);
  });
  return ChosenPushout{apex, inj1, inj2};
}

/// The chosen coequalizer of parallel maps: the quotient map of cod(f) by the
/// closure of f(x) ~ g(x), with least-element representatives.
inline FinMap coequalizer(const FinMap& f, const FinMap& g) {
  detail::require(f.dom() == g.dom() && f.cod() == g.cod(), "coequalizer: shape mismatch");
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& x : f.dom().elements()) pairs.emplace_back(f.at(x), g.at(x));
  Partition classes = Partition::from_pairs(f.cod(), pairs);
  std::vector<std::string> reps;
  for (const auto& b : classes.blocks()) reps.push_back(b.front());
  FinSet quotient(std::move(reps));
  return FinMap::from_fn(f.cod(), quotient, [&](const std::string& y) {
    return classes.representative(y);
  });
}

/// True iff the comparison X -> apex of the chosen pullback of the square's
/// cospan, x |-> (left x, top x), is a bijection.
inline bool is_pullback(const CommutingSquare& sq) {
  ChosenPullback pb = pullback(sq.bottom, sq.right);
  if (sq.left.dom().size() != pb.apex.size()) return false;
  std::vector<std::string> hit;
  hit.reserve(pb.apex.size());
  for (const auto& x : sq.left.dom().elements())
    hit.push_back(pair_elem(sq.left.at(x), sq.top.at(x)));
  std::sort(hit.begin(), hit.end());
  hit.erase(std::unique(hit.begin(), hit.end()), hit.end());
  return hit.size() == pb.apex.size() && FinSet(std::move(hit)) == pb.apex;
}

/// True iff the comparison from the chosen pushout apex of the square's span
/// to W is a bijection.
inline bool is_pushout(const CommutingSquare& sq) {
  ChosenPushout po = pushout(sq.left, sq.top);
  if (po.apex.size() != sq.bottom.cod().size()) return false;
  // The comparison u with u . inj1 = bottom, u . inj2 = right, evaluated on
  // class representatives.
  std::vector<std::string> hit;
  hit.reserve(po.apex.size());
  for (const auto& rep : po.apex.elements()) {
    std::string raw = rep.substr(2);
    hit.push_back(rep[0] == 'L' ? sq.bottom.at(raw) : sq.right.at(raw));
  }
  std::sort(hit.begin(), hit.end());
  hit.erase(std::unique(hit.begin(), hit.end()), hit.end());
  return hit.size() == po.apex.size() && FinSet(std::move(hit)) == sq.bottom.cod();
}

}  // namespace vk
