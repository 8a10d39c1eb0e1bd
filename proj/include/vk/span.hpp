#pragma once

// Pullback spans and completed instance cubes.
//
// A pullback span is the pair of rear faces of the amalgamation cube: two
// pullback squares over the legs a: L -> A and r: L -> R sharing one
// carrier gamma: I -> L. An instance cube adds the bottom face, an apex
// instance sigma: K -> S and the three mediating maps that complete the
// cube.

#include <utility>

#include "vk/descent.hpp"
#include "vk/finset.hpp"
#include "vk/limits.hpp"

namespace vk {

struct PullbackSpan {
  FinMap base_a;  // a: L -> A
  FinMap base_r;  // r: L -> R
  FinMap carrier; // gamma: I -> L
  CommutingSquare left;   // (gamma, a', tau, a)
  CommutingSquare right;  // (gamma, r', beta, r)

  const FinMap& a_prime() const { return left.top; }    // I -> J
  const FinMap& tau() const { return left.right; }      // J -> A
  const FinMap& r_prime() const { return right.top; }   // I -> H
  const FinMap& beta() const { return right.right; }    // H -> R

  friend bool operator==(const PullbackSpan&, const PullbackSpan&) = default;
};

inline void validate_span(const PullbackSpan& span) {
  detail::require(span.base_a.dom() == span.base_r.dom(),
                  "PullbackSpan: legs have different domains");
  detail::require(span.left.left == span.carrier && span.right.left == span.carrier,
                  "PullbackSpan: squares do not share the carrier");
  detail::require(span.left.bottom == span.base_a, "PullbackSpan: left square not over a");
  detail::require(span.right.bottom == span.base_r, "PullbackSpan: right square not over r");
  detail::require(is_pullback(span.left), "PullbackSpan: left square is not a pullback");
  detail::require(is_pullback(span.right), "PullbackSpan: right square is not a pullback");
}

struct InstanceCube {
  PullbackSpan span;
  CommutingSquare bottom;  // (a, r, abar, rbar), apex S = cod(sigma)
  FinMap sigma;            // K -> S
  FinMap s_prime;          // I -> K  (diagonal of the top face)
  FinMap abar_prime;       // H -> K
  FinMap rbar_prime;       // J -> K

  CommutingSquare top_face() const {
    return CommutingSquare(span.a_prime(), span.r_prime(), abar_prime, rbar_prime);
  }
  CommutingSquare front_face() const {  // over rbar: A -> S
    return CommutingSquare(span.tau(), rbar_prime, sigma, bottom.bottom);
  }
  CommutingSquare right_face() const {  // over abar: R -> S
    return CommutingSquare(span.beta(), abar_prime, sigma, bottom.right);
  }

  friend bool operator==(const InstanceCube&, const InstanceCube&) = default;
};

/// Checks every face of the cube: the four side faces and the rear faces are
/// pullbacks, all faces commute, the diagonal factors both ways, and the top
/// face is a pushout whenever the bottom face is.
inline void validate_cube(const InstanceCube& cube) {
  validate_span(cube.span);
  detail::require(cube.bottom.left == cube.span.base_a && cube.bottom.top == cube.span.base_r,
                  "InstanceCube: bottom face does not sit under the span");
  CommutingSquare top = cube.top_face();        // commutation checked by ctor
  CommutingSquare front = cube.front_face();
  CommutingSquare right = cube.right_face();
  detail::require(is_pullback(front), "InstanceCube: front face is not a pullback");
  detail::require(is_pullback(right), "InstanceCube: right face is not a pullback");
  detail::require(compose(cube.abar_prime, cube.span.r_prime()) == cube.s_prime,
                  "InstanceCube: abar' . r' != s'");
  detail::require(compose(cube.rbar_prime, cube.span.a_prime()) == cube.s_prime,
                  "InstanceCube: rbar' . a' != s'");
  FinMap s = compose(cube.bottom.bottom, cube.bottom.left);
  detail::require(compose(cube.sigma, cube.s_prime) == compose(s, cube.span.carrier),
                  "InstanceCube: diagonal face does not commute");
  if (is_pushout(cube.bottom))
    detail::require(is_pushout(top), "InstanceCube: top face is not a pushout");
}

}  // namespace vk
