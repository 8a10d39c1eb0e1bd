#pragma once

// Independent brute-force reference procedures. Everything here decides by
// exhaustive enumeration and isomorphism search only; none of it shares a
// code path with the kernel-join algorithms it is used to cross-check.

#include <algorithm>
#include <chrono>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "vk/descent.hpp"
#include "vk/finset.hpp"
#include "vk/graph.hpp"
#include "vk/limits.hpp"
#include "vk/span.hpp"
#include "vk/vankampen.hpp"

namespace vk::oracle {

struct SearchBudget {
  std::size_t max_apex_size = 16;
  std::size_t max_fiber_size = 2;
  double time_limit_seconds = 120.0;
};

enum class Outcome { Found, NoneWithinBound, BudgetExceeded };
enum class Decision { Yes, No, OutOfBudget };

struct ReachabilitySearch {
  Outcome outcome = Outcome::NoneWithinBound;
  std::optional<FinMap> sigma;
};

namespace impl {

using Perm = std::vector<std::size_t>;

inline Perm identity_perm(std::size_t n) {
  Perm p(n);
  std::iota(p.begin(), p.end(), 0);
  return p;
}

inline Perm compose_perm(const Perm& p, const Perm& q) {  // (p.q)(i) = p(q(i))
  Perm r(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) r[i] = p[q[i]];
  return r;
}

inline Perm invert_perm(const Perm& p) {
  Perm r(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) r[p[i]] = i;
  return r;
}

inline std::vector<Perm> all_perms(std::size_t n) {
  std::vector<Perm> out;
  Perm p = identity_perm(n);
  do {
    out.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

class Deadline {
 public:
  explicit Deadline(double seconds)
      : end_(std::chrono::steady_clock::now() +
             std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                 std::chrono::duration<double>(seconds))) {}
  bool expired() const { return std::chrono::steady_clock::now() > end_; }

 private:
  std::chrono::steady_clock::time_point end_;
};

}  // namespace impl

// ---------------------------------------------------------------------------
// PB(sigma): the pullback span an apex instance induces over a bottom square

/// Pulls sigma back along the diagonal s = rbar . a and decomposes through
/// the chosen pullbacks along rbar and abar; the mediators to those
/// decompositions are the rear faces of the induced span.
inline PullbackSpan pullback_span_of(const FinMap& sigma, const CommutingSquare& bottom) {
  const FinMap& a = bottom.left;
  const FinMap& r = bottom.top;
  const FinMap& rbar = bottom.bottom;
  const FinMap& abar = bottom.right;
  detail::require(sigma.cod() == rbar.cod(), "pullback_span_of: sigma not over the apex");
  FinMap s = compose(rbar, a);

  ChosenPullback diag = pullback(s, sigma);   // elements (x, k)
  ChosenPullback pj = pullback(rbar, sigma);  // elements (alpha, k)
  ChosenPullback ph = pullback(abar, sigma);  // elements (rho, k)

  FinMap to_j = FinMap::from_fn(diag.apex, pj.apex, [&](const std::string& i) {
    return pair_elem(a.at(diag.proj1.at(i)), diag.proj2.at(i));
  });
  FinMap to_h = FinMap::from_fn(diag.apex, ph.apex, [&](const std::string& i) {
    return pair_elem(r.at(diag.proj1.at(i)), diag.proj2.at(i));
  });
  CommutingSquare left(diag.proj1, to_j, pj.proj1, a);
  CommutingSquare right(diag.proj1, to_h, ph.proj1, r);
  return PullbackSpan{a, r, diag.proj1, left, right};
}

// ---------------------------------------------------------------------------
// Span isomorphism

/// Backtracking search for bijections over J, I and H commuting with the
/// carriers, the tops and both legs; the base span must agree literally.
inline bool spans_isomorphic(const PullbackSpan& s1, const PullbackSpan& s2) {
  if (s1.base_a != s2.base_a || s1.base_r != s2.base_r) return false;

  const FinSet& l = s1.base_a.dom();
  std::vector<std::vector<std::string>> fib1, fib2;
  for (const auto& x : l.elements()) {
    fib1.push_back(s1.carrier.fiber(x));
    fib2.push_back(s2.carrier.fiber(x));
    if (fib1.back().size() != fib2.back().size()) return false;
  }
  for (const auto& alpha : s1.base_a.cod().elements())
    if (s1.tau().fiber(alpha).size() != s2.tau().fiber(alpha).size()) return false;
  for (const auto& rho : s1.base_r.cod().elements())
    if (s1.beta().fiber(rho).size() != s2.beta().fiber(rho).size()) return false;

  // phi maps carrier elements of s1 to carrier elements of s2, fibrewise.
  std::map<std::string, std::string> phi;
  std::vector<std::string> assigned;

  auto consistent = [&](const std::string& i) {
    for (const auto& i2 : assigned) {
      bool ka1 = s1.a_prime().at(i) == s1.a_prime().at(i2);
      bool ka2 = s2.a_prime().at(phi.at(i)) == s2.a_prime().at(phi.at(i2));
      if (ka1 != ka2) return false;
      bool kr1 = s1.r_prime().at(i) == s1.r_prime().at(i2);
      bool kr2 = s2.r_prime().at(phi.at(i)) == s2.r_prime().at(phi.at(i2));
      if (kr1 != kr2) return false;
    }
    return true;
  };

  auto solve = [&](auto&& self, std::size_t fiber_idx) -> bool {
    if (fiber_idx == fib1.size()) return true;
    const auto& from = fib1[fiber_idx];
    const auto& to = fib2[fiber_idx];
    if (from.empty()) return self(self, fiber_idx + 1);
    impl::Perm p = impl::identity_perm(to.size());
    do {
      std::size_t mark = assigned.size();
      bool ok = true;
      for (std::size_t i = 0; i < from.size() && ok; ++i) {
        phi[from[i]] = to[p[i]];
        assigned.push_back(from[i]);
        ok = consistent(from[i]);
      }
      if (ok && self(self, fiber_idx + 1)) return true;
      while (assigned.size() > mark) {
        phi.erase(assigned.back());
        assigned.pop_back();
      }
    } while (std::next_permutation(p.begin(), p.end()));
    return false;
  };

  return solve(solve, 0);
}

// ---------------------------------------------------------------------------
// brute_reachable

/// Exhaustive search for an apex instance sigma: K -> S with PB(sigma)
/// isomorphic to the span. Fibre cardinalities of any witness are forced
/// pointwise by the span (PB(sigma) could not be isomorphic otherwise), so
/// candidates with other cardinalities are skipped; the surviving candidate
/// is tested by full isomorphism search, making "none" exhaustive rather
/// than heuristic.
inline ReachabilitySearch brute_reachable(const PullbackSpan& span,
                                          const CommutingSquare& bottom,
                                          const SearchBudget& budget) {
  validate_span(span);
  detail::require(bottom.left == span.base_a && bottom.top == span.base_r,
                  "brute_reachable: bottom square does not extend the span legs");
  impl::Deadline deadline(budget.time_limit_seconds);

  const FinMap& rbar = bottom.bottom;
  const FinMap& abar = bottom.right;
  FinMap s = compose(rbar, span.base_a);
  const FinSet& apex_s = rbar.cod();

  std::map<std::string, std::size_t> need;
  auto pin = [&](const std::string& t, std::size_t n) {
    auto [it, inserted] = need.emplace(t, n);
    return inserted || it->second == n;
  };
  for (const auto& x : s.dom().elements())
    if (!pin(s.at(x), span.carrier.fiber(x).size())) return {Outcome::NoneWithinBound, {}};
  for (const auto& alpha : span.base_a.cod().elements())
    if (!pin(rbar.at(alpha), span.tau().fiber(alpha).size()))
      return {Outcome::NoneWithinBound, {}};
  for (const auto& rho : span.base_r.cod().elements())
    if (!pin(abar.at(rho), span.beta().fiber(rho).size()))
      return {Outcome::NoneWithinBound, {}};

  std::size_t total = 0;
  for (const auto& t : apex_s.elements()) total += need.count(t) ? need.at(t) : 0;
  if (total > budget.max_apex_size) return {Outcome::BudgetExceeded, {}};
  if (deadline.expired()) return {Outcome::BudgetExceeded, {}};

  std::vector<std::string> k_elems;
  std::map<std::string, std::string> assign;
  std::size_t counter = 0;
  for (const auto& t : apex_s.elements()) {
    std::size_t n = need.count(t) ? need.at(t) : 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::string kk = "k" + std::to_string(++counter);
      k_elems.push_back(kk);
      assign[kk] = t;
    }
  }
  FinMap sigma(FinSet(std::move(k_elems)), apex_s, assign);
  PullbackSpan candidate = pullback_span_of(sigma, bottom);
  if (spans_isomorphic(candidate, span)) return {Outcome::Found, sigma};
  return {Outcome::NoneWithinBound, {}};
}

// ---------------------------------------------------------------------------
// brute_witness

/// Enumerates every family of fibre bijections indexed by the kernel of the
/// canonical diagonal s (the join of ker(a) and ker(r) on L), keeps the ones
/// that are valid descent data and restrict to the canonical descent data of
/// both rear faces. Factorial in the fibre sizes; desk scale only.
inline std::vector<DescentData> brute_witness(const PullbackSpan& span) {
  validate_span(span);
  DescentData xi_tau = canonical_descent(span.left);
  DescentData xi_beta = canonical_descent(span.right);

  ChosenPushout po = pushout(span.base_a, span.base_r);
  FinMap s = compose(po.inj1, span.base_a);
  Partition ker_s = kernel_pair(s);

  std::map<std::string, std::vector<std::string>> fibers;
  for (const auto& i : span.carrier.dom().elements())
    fibers[span.carrier.at(i)].push_back(i);
  for (const auto& x : s.dom().elements()) fibers[x];

  // Per block: generator bijections fibre(x1) -> fibre(xi); the rest of the
  // family follows from the cocycle law, and every valid family arises from
  // exactly one generator tuple.
  struct BlockGen {
    std::vector<std::string> elems;
    std::size_t fiber_size = 0;
    std::vector<impl::Perm> perms;  // current generator per element (index 0 = identity)
  };
  std::vector<BlockGen> blocks;
  for (const auto& b : ker_s.blocks()) {
    BlockGen bg;
    bg.elems = b;
    bg.fiber_size = fibers.at(b.front()).size();
    for (const auto& x : b)
      if (fibers.at(x).size() != bg.fiber_size) return {};  // no bijections possible
    bg.perms.assign(b.size(), impl::identity_perm(bg.fiber_size));
    blocks.push_back(std::move(bg));
  }

  std::vector<DescentData> out;
  auto emit = [&]() {
    DescentData dd;
    dd.carrier = span.carrier;
    dd.base = s;
    for (const auto& bg : blocks) {
      for (std::size_t i = 0; i < bg.elems.size(); ++i)
        for (std::size_t j = 0; j < bg.elems.size(); ++j) {
          impl::Perm comp = impl::compose_perm(bg.perms[j], impl::invert_perm(bg.perms[i]));
          FiberMap m;
          const auto& from = fibers.at(bg.elems[i]);
          const auto& to = fibers.at(bg.elems[j]);
          for (std::size_t c = 0; c < from.size(); ++c) m[from[c]] = to[comp[c]];
          dd.family[{bg.elems[i], bg.elems[j]}] = std::move(m);
        }
    }
    if (validate(dd)) return;  // defensive: generator tuples are always valid
    for (const auto& [key, m] : xi_tau.family)
      if (dd.family.at(key) != m) return;
    for (const auto& [key, m] : xi_beta.family)
      if (dd.family.at(key) != m) return;
    out.push_back(std::move(dd));
  };

  // Odometer over all generator tuples (identity fixed at each block's first
  // element).
  std::vector<std::pair<std::size_t, std::size_t>> slots;  // (block, element index >= 1)
  for (std::size_t b = 0; b < blocks.size(); ++b)
    for (std::size_t i = 1; i < blocks[b].elems.size(); ++i) slots.emplace_back(b, i);
  std::vector<std::vector<impl::Perm>> choices;
  for (const auto& [b, i] : slots) choices.push_back(impl::all_perms(blocks[b].fiber_size));

  auto walk = [&](auto&& self, std::size_t slot) -> void {
    if (slot == slots.size()) {
      emit();
      return;
    }
    auto [b, i] = slots[slot];
    for (const auto& p : choices[slot]) {
      blocks[b].perms[i] = p;
      self(self, slot + 1);
    }
  };
  walk(walk, 0);
  return out;
}

// ---------------------------------------------------------------------------
// Exhaustive span enumeration over a bottom square

namespace impl {

// Extends a realized pullback square with free fibres over codomain elements
// outside the image of the bottom leg.
inline CommutingSquare extend_with_free_fibers(
    const CommutingSquare& sq, const std::map<std::string, std::size_t>& free_sizes) {
  if (free_sizes.empty()) return sq;
  std::set<std::string> used(sq.top.cod().elements().begin(), sq.top.cod().elements().end());
  std::vector<std::string> top_elems(sq.top.cod().elements());
  std::map<std::string, std::string> right_assign;
  for (const auto& j : sq.top.cod().elements()) right_assign[j] = sq.right.at(j);
  for (const auto& [alpha, n] : free_sizes)
    for (std::size_t i = 1; i <= n; ++i) {
      std::string name = vk::detail::fresh_name(std::to_string(i) + ":" + alpha, used);
      used.insert(name);
      top_elems.push_back(name);
      right_assign[name] = alpha;
    }
  FinSet top_cod(std::move(top_elems));
  FinMap top = FinMap::from_fn(sq.top.dom(), top_cod,
                               [&](const std::string& x) { return sq.top.at(x); });
  FinMap right(top_cod, sq.right.cod(), right_assign);
  return CommutingSquare(sq.left, top, right, sq.bottom);
}

struct SpanShape {
  // Everything that determines a span over a fixed bottom, in integer form,
  // so that conjugation by fibrewise permutations is cheap.
  std::vector<std::size_t> fiber;                // per join class
  std::vector<std::vector<Perm>> a_gens, r_gens; // per kernel block: generators
  std::vector<std::size_t> free_a, free_r;       // per free codomain element

  std::vector<std::size_t> key() const {
    std::vector<std::size_t> k;
    k.insert(k.end(), fiber.begin(), fiber.end());
    auto push_gens = [&](const std::vector<std::vector<Perm>>& gens) {
      for (const auto& block : gens)
        for (const auto& p : block) k.insert(k.end(), p.begin(), p.end());
    };
    push_gens(a_gens);
    push_gens(r_gens);
    k.insert(k.end(), free_a.begin(), free_a.end());
    k.insert(k.end(), free_r.begin(), free_r.end());
    return k;
  }
};

}  // namespace impl

/// All pullback spans over the given bottom square with gamma-fibres bounded
/// by fiber_bound, deduplicated up to span isomorphism (fibrewise
/// conjugation of the descent families). Free fibres over codomain elements
/// outside the leg images are enumerated pointwise.
inline std::vector<PullbackSpan> enumerate_spans(const CommutingSquare& bottom,
                                                 std::size_t fiber_bound) {
  detail::require(fiber_bound <= 9, "enumerate_spans: fibre bound above 9 not supported");
  const FinMap& a = bottom.left;
  const FinMap& r = bottom.top;
  const FinSet& l = a.dom();

  Partition ka = kernel_pair(a);
  Partition kr = kernel_pair(r);
  Partition jn = join(ka, kr);
  std::size_t m = jn.blocks().size();

  std::vector<std::string> free_a_elems, free_r_elems;
  {
    FinSet im_a = a.image(), im_r = r.image();
    for (const auto& alpha : a.cod().elements())
      if (!im_a.contains(alpha)) free_a_elems.push_back(alpha);
    for (const auto& rho : r.cod().elements())
      if (!im_r.contains(rho)) free_r_elems.push_back(rho);
  }

  std::vector<PullbackSpan> out;
  std::set<std::vector<std::size_t>> seen;

  std::vector<std::size_t> fiber(m, 0);
  auto fiber_of = [&](const std::string& x) { return fiber[jn.block_index(x)]; };

  // Enumerate fibre vectors with an odometer.
  while (true) {
    // Carrier: copies "1:x".."n:x".
    std::vector<std::string> labels;
    for (std::size_t i = 1; i <= fiber_bound; ++i) labels.push_back(std::to_string(i));
    std::vector<std::string> carrier_elems;
    for (const auto& x : l.elements())
      for (std::size_t c = 1; c <= fiber_of(x); ++c)
        carrier_elems.push_back(std::to_string(c) + ":" + x);
    FinSet carrier_dom(std::move(carrier_elems));
    FinMap carrier = FinMap::from_fn(carrier_dom, l, [](const std::string& e) {
      return e.substr(e.find(':') + 1);
    });

    // Generator slots for each side.
    auto make_blocks = [&](const Partition& kp) {
      std::vector<std::vector<std::string>> blocks;
      for (const auto& b : kp.blocks()) blocks.push_back(b);
      return blocks;
    };
    auto a_blocks = make_blocks(ka);
    auto r_blocks = make_blocks(kr);

    struct Slot {
      bool a_side;
      std::size_t block, idx, fiber_size;
    };
    std::vector<Slot> slots;
    for (std::size_t b = 0; b < a_blocks.size(); ++b)
      for (std::size_t i = 1; i < a_blocks[b].size(); ++i)
        slots.push_back({true, b, i, fiber_of(a_blocks[b][i])});
    for (std::size_t b = 0; b < r_blocks.size(); ++b)
      for (std::size_t i = 1; i < r_blocks[b].size(); ++i)
        slots.push_back({false, b, i, fiber_of(r_blocks[b][i])});

    impl::SpanShape shape;
    shape.fiber = fiber;
    shape.a_gens.resize(a_blocks.size());
    shape.r_gens.resize(r_blocks.size());
    for (std::size_t b = 0; b < a_blocks.size(); ++b)
      shape.a_gens[b].assign(a_blocks[b].size(),
                             impl::identity_perm(fiber_of(a_blocks[b][0])));
    for (std::size_t b = 0; b < r_blocks.size(); ++b)
      shape.r_gens[b].assign(r_blocks[b].size(),
                             impl::identity_perm(fiber_of(r_blocks[b][0])));
    shape.free_a.assign(free_a_elems.size(), 0);
    shape.free_r.assign(free_r_elems.size(), 0);

    // The conjugation group: one permutation per element of L with nonzero
    // fibre; acting on both family sides simultaneously.
    std::vector<std::string> conj_elems;
    std::size_t group_size = 1;
    for (const auto& x : l.elements())
      if (fiber_of(x) >= 2) {
        conj_elems.push_back(x);
        std::size_t f = 1;
        for (std::size_t i = 2; i <= fiber_of(x); ++i) f *= i;
        group_size *= f;
      }
    bool dedup = group_size <= 20736;

    auto canonical_key = [&](const impl::SpanShape& sh) {
      std::vector<std::size_t> best = sh.key();
      if (!dedup) return best;
      std::map<std::string, std::vector<impl::Perm>> hperms;
      for (const auto& x : conj_elems) hperms[x] = impl::all_perms(fiber_of(x));
      std::vector<std::size_t> odo(conj_elems.size(), 0);
      while (true) {
        std::map<std::string, const impl::Perm*> h;
        for (std::size_t i = 0; i < conj_elems.size(); ++i)
          h[conj_elems[i]] = &hperms[conj_elems[i]][odo[i]];
        auto act = [&](const std::vector<std::vector<std::string>>& blocks,
                       const std::vector<std::vector<impl::Perm>>& gens) {
          std::vector<std::vector<impl::Perm>> out_g = gens;
          for (std::size_t b = 0; b < blocks.size(); ++b) {
            if (fiber_of(blocks[b][0]) == 0) continue;
            for (std::size_t i = 0; i < blocks[b].size(); ++i) {
              const impl::Perm* hx = h.count(blocks[b][i]) ? h.at(blocks[b][i]) : nullptr;
              const impl::Perm* h0 = h.count(blocks[b][0]) ? h.at(blocks[b][0]) : nullptr;
              impl::Perm g = gens[b][i];
              if (hx) g = impl::compose_perm(*hx, g);
              if (h0) g = impl::compose_perm(g, impl::invert_perm(*h0));
              out_g[b][i] = g;
            }
          }
          return out_g;
        };
        impl::SpanShape moved = sh;
        moved.a_gens = act(a_blocks, sh.a_gens);
        moved.r_gens = act(r_blocks, sh.r_gens);
        best = std::min(best, moved.key());
        // advance odometer
        std::size_t i = 0;
        for (; i < odo.size(); ++i) {
          if (++odo[i] < hperms[conj_elems[i]].size()) break;
          odo[i] = 0;
        }
        if (i == odo.size()) break;
        if (conj_elems.empty()) break;
      }
      return best;
    };

    auto build_and_emit = [&]() {
      auto k = canonical_key(shape);
      if (!seen.insert(k).second) return;

      auto build_dd = [&](const FinMap& base, const Partition& kp,
                          const std::vector<std::vector<std::string>>& blocks,
                          const std::vector<std::vector<impl::Perm>>& gens) {
        DescentData dd;
        dd.carrier = carrier;
        dd.base = base;
        for (std::size_t b = 0; b < blocks.size(); ++b)
          for (std::size_t i = 0; i < blocks[b].size(); ++i)
            for (std::size_t j = 0; j < blocks[b].size(); ++j) {
              impl::Perm comp =
                  impl::compose_perm(gens[b][j], impl::invert_perm(gens[b][i]));
              FiberMap mm;
              for (std::size_t c = 0; c < comp.size(); ++c)
                mm[labels[c] + ":" + blocks[b][i]] = labels[comp[c]] + ":" + blocks[b][j];
              dd.family[{blocks[b][i], blocks[b][j]}] = std::move(mm);
            }
        return dd;
      };
      DescentData dd_a = build_dd(a, ka, a_blocks, shape.a_gens);
      DescentData dd_r = build_dd(r, kr, r_blocks, shape.r_gens);
      std::map<std::string, std::size_t> fa, fr;
      for (std::size_t i = 0; i < free_a_elems.size(); ++i)
        if (shape.free_a[i] > 0) fa[free_a_elems[i]] = shape.free_a[i];
      for (std::size_t i = 0; i < free_r_elems.size(); ++i)
        if (shape.free_r[i] > 0) fr[free_r_elems[i]] = shape.free_r[i];
      CommutingSquare left = impl::extend_with_free_fibers(realize(dd_a), fa);
      CommutingSquare right = impl::extend_with_free_fibers(realize(dd_r), fr);
      out.push_back(PullbackSpan{a, r, carrier, left, right});
    };

    // Odometer over generator slots and free fibre sizes.
    auto walk_free = [&](auto&& self, std::size_t idx) -> void {
      if (idx == shape.free_a.size() + shape.free_r.size()) {
        build_and_emit();
        return;
      }
      std::size_t* cell = idx < shape.free_a.size()
                              ? &shape.free_a[idx]
                              : &shape.free_r[idx - shape.free_a.size()];
      for (std::size_t n = 0; n <= fiber_bound; ++n) {
        *cell = n;
        self(self, idx + 1);
      }
      *cell = 0;
    };
    auto walk_slots = [&](auto&& self, std::size_t slot) -> void {
      if (slot == slots.size()) {
        walk_free(walk_free, 0);
        return;
      }
      const Slot& sl = slots[slot];
      for (const auto& p : impl::all_perms(sl.fiber_size)) {
        (sl.a_side ? shape.a_gens : shape.r_gens)[sl.block][sl.idx] = p;
        self(self, slot + 1);
      }
    };
    walk_slots(walk_slots, 0);

    // Advance the fibre vector odometer.
    std::size_t i = 0;
    for (; i < m; ++i) {
      if (++fiber[i] <= fiber_bound) break;
      fiber[i] = 0;
    }
    if (i == m) break;
    if (m == 0) break;
  }
  return out;
}

/// Decides the Van Kampen property by checking that every rear pullback span
/// with bounded fibres is reachable. The apex bound any witness can need is
/// |I| plus the free parts of J and H, so a "no" from the inner search is
/// definitive.
inline Decision brute_van_kampen(const CommutingSquare& sq, const SearchBudget& budget) {
  detail::require(is_pushout(sq), "brute_van_kampen: square is not a pushout");
  impl::Deadline deadline(budget.time_limit_seconds);
  for (const auto& span : enumerate_spans(sq, budget.max_fiber_size)) {
    if (deadline.expired()) return Decision::OutOfBudget;
    std::size_t needed = span.carrier.dom().size();
    needed += span.tau().dom().size() - span.a_prime().image().size();
    needed += span.beta().dom().size() - span.r_prime().image().size();
    if (needed > budget.max_apex_size) return Decision::OutOfBudget;
    SearchBudget inner = budget;
    inner.max_apex_size = needed;
    ReachabilitySearch rs = brute_reachable(span, sq, inner);
    if (rs.outcome == Outcome::BudgetExceeded) return Decision::OutOfBudget;
    if (rs.outcome == Outcome::NoneWithinBound) return Decision::No;
  }
  return Decision::Yes;
}

// ---------------------------------------------------------------------------
// Graph-level oracle

/// PB(sigma) in the category of graphs: componentwise chosen pullbacks with
/// the mediating decompositions as rear faces.
inline GraphSpan graph_pullback_span_of(const GraphHom& sigma, const GraphSquare& bottom) {
  const GraphHom& a = bottom.left;
  const GraphHom& r = bottom.top;
  const GraphHom& rbar = bottom.bottom;
  const GraphHom& abar = bottom.right;
  GraphHom s = compose(rbar, a);

  GraphPullback diag = graph_pullback(s, sigma);
  GraphPullback pj = graph_pullback(rbar, sigma);
  GraphPullback ph = graph_pullback(abar, sigma);

  auto mediator = [&](const GraphPullback& target, const GraphHom& leg) {
    FinMap mv = FinMap::from_fn(
        diag.apex.vertices, target.apex.vertices, [&](const std::string& i) {
          return pair_elem(leg.on_vertices.at(diag.proj1.on_vertices.at(i)),
                           diag.proj2.on_vertices.at(i));
        });
    FinMap me = FinMap::from_fn(diag.apex.edges, target.apex.edges, [&](const std::string& i) {
      return pair_elem(leg.on_edges.at(diag.proj1.on_edges.at(i)),
                       diag.proj2.on_edges.at(i));
    });
    return GraphHom(diag.apex, target.apex, mv, me);
  };
  GraphSquare left(diag.proj1, mediator(pj, a), pj.proj1, a);
  GraphSquare right(diag.proj1, mediator(ph, r), ph.proj1, r);
  return GraphSpan{a, r, diag.proj1, left, right};
}

/// Isomorphism of graph spans over a common base: bijections over J, I, H
/// respecting carriers, tops, legs and src/tgt. Backtracking over carrier
/// vertex fibres, then carrier edge fibres, then the free parts of J and H.
inline bool graph_spans_isomorphic(const GraphSpan& s1, const GraphSpan& s2) {
  if (s1.base_a != s2.base_a || s1.base_r != s2.base_r) return false;
  const FinGraph& l = s1.base_a.dom;

  std::vector<std::vector<std::string>> vf1, vf2, ef1, ef2;
  for (const auto& v : l.vertices.elements()) {
    vf1.push_back(s1.carrier.on_vertices.fiber(v));
    vf2.push_back(s2.carrier.on_vertices.fiber(v));
    if (vf1.back().size() != vf2.back().size()) return false;
  }
  for (const auto& e : l.edges.elements()) {
    ef1.push_back(s1.carrier.on_edges.fiber(e));
    ef2.push_back(s2.carrier.on_edges.fiber(e));
    if (ef1.back().size() != ef2.back().size()) return false;
  }
  for (const auto& av : s1.base_a.cod.vertices.elements())
    if (s1.left.right.on_vertices.fiber(av).size() !=
        s2.left.right.on_vertices.fiber(av).size())
      return false;
  for (const auto& ae : s1.base_a.cod.edges.elements())
    if (s1.left.right.on_edges.fiber(ae).size() != s2.left.right.on_edges.fiber(ae).size())
      return false;
  for (const auto& rv : s1.base_r.cod.vertices.elements())
    if (s1.right.right.on_vertices.fiber(rv).size() !=
        s2.right.right.on_vertices.fiber(rv).size())
      return false;
  for (const auto& re : s1.base_r.cod.edges.elements())
    if (s1.right.right.on_edges.fiber(re).size() != s2.right.right.on_edges.fiber(re).size())
      return false;

  std::map<std::string, std::string> phiv, phie;
  std::vector<std::string> av_list, ae_list;

  auto vertex_consistent = [&](const std::string& i) {
    const FinMap& a1 = s1.left.top.on_vertices;
    const FinMap& a2 = s2.left.top.on_vertices;
    const FinMap& r1 = s1.right.top.on_vertices;
    const FinMap& r2 = s2.right.top.on_vertices;
    for (const auto& i2 : av_list) {
      if ((a1.at(i) == a1.at(i2)) != (a2.at(phiv.at(i)) == a2.at(phiv.at(i2)))) return false;
      if ((r1.at(i) == r1.at(i2)) != (r2.at(phiv.at(i)) == r2.at(phiv.at(i2)))) return false;
    }
    return true;
  };
  auto edge_consistent = [&](const std::string& e) {
    const FinGraph& g1 = s1.carrier.dom;
    const FinGraph& g2 = s2.carrier.dom;
    if (g2.src.at(phie.at(e)) != phiv.at(g1.src.at(e))) return false;
    if (g2.tgt.at(phie.at(e)) != phiv.at(g1.tgt.at(e))) return false;
    const FinMap& a1 = s1.left.top.on_edges;
    const FinMap& a2 = s2.left.top.on_edges;
    const FinMap& r1 = s1.right.top.on_edges;
    const FinMap& r2 = s2.right.top.on_edges;
    for (const auto& e2 : ae_list) {
      if ((a1.at(e) == a1.at(e2)) != (a2.at(phie.at(e)) == a2.at(phie.at(e2)))) return false;
      if ((r1.at(e) == r1.at(e2)) != (r2.at(phie.at(e)) == r2.at(phie.at(e2)))) return false;
    }
    return true;
  };

  // Existence of the J-side (or H-side) bijection once the carrier is
  // matched: the image part is forced; free vertices are matched per fibre
  // by backtracking, free edges by multiset comparison of attachment types.
  auto side_ok = [&](const GraphHom& top1, const GraphHom& top2, const GraphHom& leg1,
                     const GraphHom& leg2) -> bool {
    const FinGraph& j1 = top1.cod;
    const FinGraph& j2 = top2.cod;
    std::map<std::string, std::string> phi_jv;
    for (const auto& i : s1.carrier.dom.vertices.elements())
      phi_jv[top1.on_vertices.at(i)] = top2.on_vertices.at(phiv.at(i));

    std::map<std::string, std::vector<std::string>> free1, free2;
    for (const auto& jv : j1.vertices.elements())
      if (!phi_jv.count(jv)) free1[leg1.on_vertices.at(jv)].push_back(jv);
    {
      std::set<std::string> im2;
      for (const auto& [k, v] : phi_jv) im2.insert(v);
      for (const auto& jv : j2.vertices.elements())
        if (!im2.count(jv)) free2[leg2.on_vertices.at(jv)].push_back(jv);
    }
    if (free1.size() != free2.size()) return false;
    for (const auto& [av, lst] : free1) {
      if (!free2.count(av) || free2.at(av).size() != lst.size()) return false;
    }

    std::set<std::string> im_e1;
    for (const auto& i : s1.carrier.dom.edges.elements()) im_e1.insert(top1.on_edges.at(i));
    std::set<std::string> im_e2;
    for (const auto& i : s2.carrier.dom.edges.elements()) im_e2.insert(top2.on_edges.at(i));
    std::vector<std::string> fe1, fe2;
    for (const auto& je : j1.edges.elements())
      if (!im_e1.count(je)) fe1.push_back(je);
    for (const auto& je : j2.edges.elements())
      if (!im_e2.count(je)) fe2.push_back(je);
    if (fe1.size() != fe2.size()) return false;

    std::vector<std::pair<std::string, std::vector<std::string>*>> fkeys;
    for (auto& [av, lst] : free1) fkeys.emplace_back(av, &lst);

    auto edges_match = [&]() {
      std::vector<std::string> t1, t2;
      for (const auto& je : fe1)
        t1.push_back(leg1.on_edges.at(je) + "|" + phi_jv.at(j1.src.at(je)) + "|" +
                     phi_jv.at(j1.tgt.at(je)));
      for (const auto& je : fe2)
        t2.push_back(leg2.on_edges.at(je) + "|" + j2.src.at(je) + "|" + j2.tgt.at(je));
      std::sort(t1.begin(), t1.end());
      std::sort(t2.begin(), t2.end());
      return t1 == t2;
    };

    auto match_free = [&](auto&& self, std::size_t idx) -> bool {
      if (idx == fkeys.size()) return edges_match();
      const auto& from = *fkeys[idx].second;
      const auto& to = free2.at(fkeys[idx].first);
      impl::Perm p = impl::identity_perm(to.size());
      do {
        for (std::size_t i = 0; i < from.size(); ++i) phi_jv[from[i]] = to[p[i]];
        if (self(self, idx + 1)) return true;
        for (const auto& x : from) phi_jv.erase(x);
      } while (std::next_permutation(p.begin(), p.end()));
      return false;
    };
    return match_free(match_free, 0);
  };

  auto solve_edges = [&](auto&& self, std::size_t idx) -> bool {
    if (idx == ef1.size()) {
      return side_ok(s1.left.top, s2.left.top, s1.left.right, s2.left.right) &&
             side_ok(s1.right.top, s2.right.top, s1.right.right, s2.right.right);
    }
    const auto& from = ef1[idx];
    const auto& to = ef2[idx];
    if (from.empty()) return self(self, idx + 1);
    impl::Perm p = impl::identity_perm(to.size());
    do {
      std::size_t mark = ae_list.size();
      bool ok = true;
      for (std::size_t i = 0; i < from.size() && ok; ++i) {
        phie[from[i]] = to[p[i]];
        ae_list.push_back(from[i]);
        ok = edge_consistent(from[i]);
      }
      if (ok && self(self, idx + 1)) return true;
      while (ae_list.size() > mark) {
        phie.erase(ae_list.back());
        ae_list.pop_back();
      }
    } while (std::next_permutation(p.begin(), p.end()));
    return false;
  };

  auto solve_vertices = [&](auto&& self, std::size_t idx) -> bool {
    if (idx == vf1.size()) return solve_edges(solve_edges, 0);
    const auto& from = vf1[idx];
    const auto& to = vf2[idx];
    if (from.empty()) return self(self, idx + 1);
    impl::Perm p = impl::identity_perm(to.size());
    do {
      std::size_t mark = av_list.size();
      bool ok = true;
      for (std::size_t i = 0; i < from.size() && ok; ++i) {
        phiv[from[i]] = to[p[i]];
        av_list.push_back(from[i]);
        ok = vertex_consistent(from[i]);
      }
      if (ok && self(self, idx + 1)) return true;
      while (av_list.size() > mark) {
        phiv.erase(av_list.back());
        av_list.pop_back();
      }
    } while (std::next_permutation(p.begin(), p.end()));
    return false;
  };

  return solve_vertices(solve_vertices, 0);
}

struct GraphReachabilitySearch {
  Outcome outcome = Outcome::NoneWithinBound;
  std::optional<GraphHom> sigma;
};

/// Exhaustive search for a graph instance sigma over the pushout apex whose
/// induced span is isomorphic to the given one. Vertex and edge fibre
/// cardinalities are forced pointwise; the remaining freedom (src/tgt of the
/// apex edges) is enumerated exhaustively, deduplicated up to fibrewise
/// renaming of the apex.
inline GraphReachabilitySearch graph_brute_reachable(const GraphSpan& span,
                                                     const GraphSquare& bottom,
                                                     const SearchBudget& budget) {
  validate_graph_span(span);
  detail::require(bottom.left == span.base_a && bottom.top == span.base_r,
                  "graph_brute_reachable: bottom square does not extend the span legs");
  impl::Deadline deadline(budget.time_limit_seconds);

  const GraphHom& rbar = bottom.bottom;
  const GraphHom& abar = bottom.right;
  GraphHom s = compose(rbar, bottom.left);
  const FinGraph& gs = rbar.cod;

  auto pin_counts = [&](const FinMap& s_cmp, const FinMap& rbar_cmp, const FinMap& abar_cmp,
                        const FinMap& carrier_cmp, const FinMap& tau_cmp,
                        const FinMap& beta_cmp,
                        std::map<std::string, std::size_t>& need) -> bool {
    auto pin = [&](const std::string& t, std::size_t n) {
      auto [it, inserted] = need.emplace(t, n);
      return inserted || it->second == n;
    };
    for (const auto& x : s_cmp.dom().elements())
      if (!pin(s_cmp.at(x), carrier_cmp.fiber(x).size())) return false;
    for (const auto& alpha : rbar_cmp.dom().elements())
      if (!pin(rbar_cmp.at(alpha), tau_cmp.fiber(alpha).size())) return false;
    for (const auto& rho : abar_cmp.dom().elements())
      if (!pin(abar_cmp.at(rho), beta_cmp.fiber(rho).size())) return false;
    return true;
  };

  std::map<std::string, std::size_t> need_v, need_e;
  if (!pin_counts(s.on_vertices, rbar.on_vertices, abar.on_vertices,
                  span.carrier.on_vertices, span.left.right.on_vertices,
                  span.right.right.on_vertices, need_v))
    return {Outcome::NoneWithinBound, {}};
  if (!pin_counts(s.on_edges, rbar.on_edges, abar.on_edges, span.carrier.on_edges,
                  span.left.right.on_edges, span.right.right.on_edges, need_e))
    return {Outcome::NoneWithinBound, {}};

  std::size_t total_v = 0, total_e = 0;
  for (const auto& [t, n] : need_v) total_v += n;
  for (const auto& [t, n] : need_e) total_e += n;
  if (total_v > budget.max_apex_size || total_e > budget.max_apex_size)
    return {Outcome::BudgetExceeded, {}};

  // Canonical apex skeleton.
  std::vector<std::string> kv_elems, ke_elems;
  std::map<std::string, std::string> sv_assign, se_assign;
  std::map<std::string, std::vector<std::string>> kv_fiber;
  std::size_t cv = 0, ce = 0;
  for (const auto& t : gs.vertices.elements()) {
    std::size_t n = need_v.count(t) ? need_v.at(t) : 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::string kk = "kv" + std::to_string(++cv);
      kv_elems.push_back(kk);
      sv_assign[kk] = t;
      kv_fiber[t].push_back(kk);
    }
  }
  struct KEdge {
    std::string name, over;  // over = S-edge
  };
  std::vector<KEdge> kedges;
  for (const auto& t : gs.edges.elements()) {
    std::size_t n = need_e.count(t) ? need_e.at(t) : 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::string kk = "ke" + std::to_string(++ce);
      ke_elems.push_back(kk);
      se_assign[kk] = t;
      kedges.push_back({kk, t});
    }
  }
  FinSet kv_set(kv_elems), ke_set(ke_elems);
  FinMap sigma_v(kv_set, gs.vertices, sv_assign);
  FinMap sigma_e(ke_set, gs.edges, se_assign);

  // Enumerate src/tgt choices per apex edge within the typed vertex fibres.
  std::vector<std::vector<std::string>> src_choices, tgt_choices;
  for (const auto& ke : kedges) {
    auto sf = kv_fiber.find(gs.src.at(ke.over));
    auto tf = kv_fiber.find(gs.tgt.at(ke.over));
    if (sf == kv_fiber.end() || tf == kv_fiber.end())
      return {Outcome::NoneWithinBound, {}};  // an edge over an empty vertex fibre
    src_choices.push_back(sf->second);
    tgt_choices.push_back(tf->second);
  }

  // Apex candidates are deduplicated up to fibrewise renaming of K: the key
  // relabels endpoints by a vertex-fibre permutation and sorts edges within
  // each sigma_e fibre.
  std::set<std::vector<std::string>> seen;
  std::vector<std::pair<std::string, std::vector<impl::Perm>>> vgroups;
  std::size_t group_size = 1;
  for (const auto& [t, fib] : kv_fiber)
    if (fib.size() >= 2) {
      vgroups.emplace_back(t, impl::all_perms(fib.size()));
      std::size_t f = 1;
      for (std::size_t i = 2; i <= fib.size(); ++i) f *= i;
      group_size *= f;
    }
  bool dedup = group_size <= 10000;

  std::vector<std::size_t> pick(kedges.size(), 0);
  while (true) {
    if (deadline.expired()) return {Outcome::BudgetExceeded, {}};

    // Decode the flat pick into (src, tgt) pairs: pick[i] indexes the
    // cartesian product of the two choice lists.
    std::map<std::string, std::string> src_assign, tgt_assign;
    for (std::size_t i = 0; i < kedges.size(); ++i) {
      std::size_t ns = src_choices[i].size();
      src_assign[kedges[i].name] = src_choices[i][pick[i] % ns];
      tgt_assign[kedges[i].name] = tgt_choices[i][pick[i] / ns];
    }

    std::vector<std::string> canon;
    if (dedup) {
      std::vector<std::size_t> odo(vgroups.size(), 0);
      while (true) {
        std::map<std::string, std::string> relabel;
        for (std::size_t gi = 0; gi < vgroups.size(); ++gi) {
          const auto& fib = kv_fiber.at(vgroups[gi].first);
          const impl::Perm& p = vgroups[gi].second[odo[gi]];
          for (std::size_t i = 0; i < fib.size(); ++i) relabel[fib[i]] = fib[p[i]];
        }
        auto rl = [&](const std::string& v) {
          auto it = relabel.find(v);
          return it == relabel.end() ? v : it->second;
        };
        std::map<std::string, std::vector<std::string>> per_fiber;
        for (std::size_t i = 0; i < kedges.size(); ++i)
          per_fiber[kedges[i].over].push_back(rl(src_assign.at(kedges[i].name)) + ">" +
                                              rl(tgt_assign.at(kedges[i].name)));
        std::vector<std::string> key;
        for (auto& [t, lst] : per_fiber) {
          std::sort(lst.begin(), lst.end());
          key.push_back(t + "=");
          key.insert(key.end(), lst.begin(), lst.end());
        }
        if (canon.empty() || key < canon) canon = key;
        std::size_t gi = 0;
        for (; gi < odo.size(); ++gi) {
          if (++odo[gi] < vgroups[gi].second.size()) break;
          odo[gi] = 0;
        }
        if (gi == odo.size()) break;
      }
    } else {
      for (std::size_t i = 0; i < kedges.size(); ++i)
        canon.push_back(kedges[i].over + "=" + src_assign.at(kedges[i].name) + ">" +
                        tgt_assign.at(kedges[i].name));
    }

    if (seen.insert(canon).second) {
      FinGraph apex(kv_set, ke_set, FinMap(ke_set, kv_set, src_assign),
                    FinMap(ke_set, kv_set, tgt_assign));
      GraphHom sigma(apex, gs, sigma_v, sigma_e);
      GraphSpan candidate = graph_pullback_span_of(sigma, bottom);
      if (graph_spans_isomorphic(candidate, span)) return {Outcome::Found, sigma};
    }

    // Advance the odometer over the per-edge cartesian products.
    std::size_t i = 0;
    for (; i < kedges.size(); ++i) {
      if (++pick[i] < src_choices[i].size() * tgt_choices[i].size()) break;
      pick[i] = 0;
    }
    if (i == kedges.size()) break;
  }
  return {Outcome::NoneWithinBound, {}};
}

namespace impl {

/// Extends a realized graph pullback square with free vertices and free
/// edges of J over codomain elements outside the leg images. free_edges
/// entries carry resolved endpoint names in the extended vertex set.
inline GraphSquare extend_graph_square_with_free(
    const GraphSquare& sq, const std::map<std::string, std::size_t>& free_vertices,
    const std::vector<std::tuple<std::string, std::string, std::string>>& free_edges) {
  if (free_vertices.empty() && free_edges.empty()) return sq;
  const FinGraph& j = sq.top.cod;

  std::set<std::string> used_v(j.vertices.elements().begin(), j.vertices.elements().end());
  std::vector<std::string> v_elems(j.vertices.elements());
  std::map<std::string, std::string> legv_assign;
  for (const auto& v : j.vertices.elements()) legv_assign[v] = sq.right.on_vertices.at(v);
  for (const auto& [av, n] : free_vertices)
    for (std::size_t i = 1; i <= n; ++i) {
      std::string name = vk::detail::fresh_name(std::to_string(i) + ":" + av, used_v);
      used_v.insert(name);
      v_elems.push_back(name);
      legv_assign[name] = av;
    }
  FinSet jv(std::move(v_elems));

  std::set<std::string> used_e(j.edges.elements().begin(), j.edges.elements().end());
  std::vector<std::string> e_elems(j.edges.elements());
  std::map<std::string, std::string> lege_assign, src_assign, tgt_assign;
  for (const auto& e : j.edges.elements()) {
    lege_assign[e] = sq.right.on_edges.at(e);
    src_assign[e] = j.src.at(e);
    tgt_assign[e] = j.tgt.at(e);
  }
  std::map<std::string, std::size_t> counter;
  for (const auto& [ae, sv, tv] : free_edges) {
    std::string name =
        vk::detail::fresh_name(std::to_string(++counter[ae]) + ":" + ae, used_e);
    used_e.insert(name);
    e_elems.push_back(name);
    lege_assign[name] = ae;
    src_assign[name] = sv;
    tgt_assign[name] = tv;
  }
  FinSet je(std::move(e_elems));

  FinGraph extended(jv, je, FinMap(je, jv, src_assign), FinMap(je, jv, tgt_assign));
  GraphHom top(sq.left.dom, extended,
               FinMap::from_fn(sq.top.on_vertices.dom(), jv,
                               [&](const std::string& x) { return sq.top.on_vertices.at(x); }),
               FinMap::from_fn(sq.top.on_edges.dom(), je,
                               [&](const std::string& x) { return sq.top.on_edges.at(x); }));
  GraphHom right(extended, sq.right.cod, FinMap(jv, sq.right.cod.vertices, legv_assign),
                 FinMap(je, sq.right.cod.edges, lege_assign));
  return GraphSquare(sq.left, top, right, sq.bottom);
}

}  // namespace impl

/// All graph pullback spans over the given bottom square with fibre sizes
/// bounded by fiber_bound, deduplicated up to isomorphism on the carrier
/// part (fibrewise conjugation); free parts are enumerated pointwise.
inline std::vector<GraphSpan> enumerate_graph_spans(const GraphSquare& bottom,
                                                    std::size_t fiber_bound) {
  detail::require(fiber_bound <= 9, "enumerate_graph_spans: fibre bound above 9 not supported");
  const GraphHom& a = bottom.left;
  const GraphHom& r = bottom.top;
  const FinGraph& l = a.dom;
  const auto& lv = l.vertices.elements();
  const auto& le = l.edges.elements();

  Partition kav = kernel_pair(a.on_vertices), krv = kernel_pair(r.on_vertices);
  Partition kae = kernel_pair(a.on_edges), kre = kernel_pair(r.on_edges);
  Partition jnv = join(kav, krv), jne = join(kae, kre);

  std::vector<std::string> free_av, free_rv, free_ae, free_re;
  {
    FinSet ia = a.on_vertices.image(), ir = r.on_vertices.image();
    for (const auto& v : a.cod.vertices.elements())
      if (!ia.contains(v)) free_av.push_back(v);
    for (const auto& v : r.cod.vertices.elements())
      if (!ir.contains(v)) free_rv.push_back(v);
    FinSet iae = a.on_edges.image(), ire = r.on_edges.image();
    for (const auto& e : a.cod.edges.elements())
      if (!iae.contains(e)) free_ae.push_back(e);
    for (const auto& e : r.cod.edges.elements())
      if (!ire.contains(e)) free_re.push_back(e);
  }

  std::vector<GraphSpan> out;
  std::set<std::vector<std::size_t>> seen_cores;

  std::vector<std::size_t> fv(jnv.blocks().size(), 0);
  std::vector<std::size_t> fe(jne.blocks().size(), 0);
  auto fv_of = [&](const std::string& v) { return fv[jnv.block_index(v)]; };
  auto fe_of = [&](const std::string& e) { return fe[jne.block_index(e)]; };

  auto vblocks_of = [](const Partition& p) {
    std::vector<std::vector<std::string>> b;
    for (const auto& blk : p.blocks()) b.push_back(blk);
    return b;
  };
  auto a_vblocks = vblocks_of(kav), r_vblocks = vblocks_of(krv);
  auto a_eblocks = vblocks_of(kae), r_eblocks = vblocks_of(kre);

  // Per-edge lift choices: lift[e][c] = (src fibre index, tgt fibre index).
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> lift(le.size());
  std::vector<std::vector<impl::Perm>> a_vgens, r_vgens, a_egens, r_egens;

  auto vgen_component = [&](const std::vector<std::vector<std::string>>& blocks,
                            const std::vector<std::vector<impl::Perm>>& gens,
                            const Partition& kp, const std::string& u,
                            const std::string& w) -> impl::Perm {
    std::size_t b = 0;
    for (; b < blocks.size(); ++b)
      if (kp.block_index(blocks[b][0]) == kp.block_index(u)) break;
    std::size_t iu = 0, iw = 0;
    for (std::size_t i = 0; i < blocks[b].size(); ++i) {
      if (blocks[b][i] == u) iu = i;
      if (blocks[b][i] == w) iw = i;
    }
    return impl::compose_perm(gens[b][iw], impl::invert_perm(gens[b][iu]));
  };

  auto edge_perm_natural = [&](bool a_side, std::size_t block, std::size_t idx,
                               const impl::Perm& p) -> bool {
    const auto& eblocks = a_side ? a_eblocks : r_eblocks;
    const std::string& e0 = eblocks[block][0];
    const std::string& ei = eblocks[block][idx];
    auto e0_pos = std::find(le.begin(), le.end(), e0) - le.begin();
    auto ei_pos = std::find(le.begin(), le.end(), ei) - le.begin();
    const auto& vblocks = a_side ? a_vblocks : r_vblocks;
    const auto& vgens = a_side ? a_vgens : r_vgens;
    const Partition& kvp = a_side ? kav : krv;
    impl::Perm sv = vgen_component(vblocks, vgens, kvp, l.src.at(e0), l.src.at(ei));
    impl::Perm tv = vgen_component(vblocks, vgens, kvp, l.tgt.at(e0), l.tgt.at(ei));
    for (std::size_t c = 0; c < p.size(); ++c) {
      if (lift[ei_pos][p[c]].first != sv[lift[e0_pos][c].first]) return false;
      if (lift[ei_pos][p[c]].second != tv[lift[e0_pos][c].second]) return false;
    }
    return true;
  };

  auto core_key = [&]() {
    std::vector<std::size_t> k;
    k.insert(k.end(), fv.begin(), fv.end());
    k.insert(k.end(), fe.begin(), fe.end());
    for (const auto& lf : lift)
      for (const auto& [si, ti] : lf) {
        k.push_back(si);
        k.push_back(ti);
      }
    for (const auto* gens : {&a_vgens, &r_vgens, &a_egens, &r_egens})
      for (const auto& blk : *gens)
        for (const auto& p : blk) k.insert(k.end(), p.begin(), p.end());
    return k;
  };

  // Conjugation group: one permutation per L-vertex / L-edge with fibre >= 2.
  auto canonical_core_key = [&]() {
    std::vector<std::string> cv, ce;
    std::size_t group_size = 1;
    for (const auto& v : lv)
      if (fv_of(v) >= 2) {
        cv.push_back(v);
        for (std::size_t i = 2; i <= fv_of(v); ++i) group_size *= i;
      }
    for (const auto& e : le)
      if (fe_of(e) >= 2) {
        ce.push_back(e);
        for (std::size_t i = 2; i <= fe_of(e); ++i) group_size *= i;
      }
    std::vector<std::size_t> best = core_key();
    if (group_size > 20736 || group_size == 1) return best;

    std::map<std::string, std::vector<impl::Perm>> hv, he;
    for (const auto& v : cv) hv[v] = impl::all_perms(fv_of(v));
    for (const auto& e : ce) he[e] = impl::all_perms(fe_of(e));
    std::vector<std::size_t> odo(cv.size() + ce.size(), 0);
    auto saved_lift = lift;
    auto saved = std::make_tuple(a_vgens, r_vgens, a_egens, r_egens);
    while (true) {
      std::map<std::string, const impl::Perm*> h_v, h_e;
      for (std::size_t i = 0; i < cv.size(); ++i) h_v[cv[i]] = &hv[cv[i]][odo[i]];
      for (std::size_t i = 0; i < ce.size(); ++i)
        h_e[ce[i]] = &he[ce[i]][odo[cv.size() + i]];
      auto hperm_of = [&](const std::map<std::string, const impl::Perm*>& hs,
                          const std::string& x, std::size_t n) {
        auto it = hs.find(x);
        return it == hs.end() ? impl::identity_perm(n) : *it->second;
      };
      // act on lifts
      for (std::size_t ei = 0; ei < le.size(); ++ei) {
        std::size_t n = fe_of(le[ei]);
        if (n == 0) continue;
        impl::Perm pe = hperm_of(h_e, le[ei], n);
        impl::Perm ps = hperm_of(h_v, l.src.at(le[ei]), fv_of(l.src.at(le[ei])));
        impl::Perm pt = hperm_of(h_v, l.tgt.at(le[ei]), fv_of(l.tgt.at(le[ei])));
        for (std::size_t c = 0; c < n; ++c)
          lift[ei][pe[c]] = {ps[saved_lift[ei][c].first], pt[saved_lift[ei][c].second]};
      }
      auto act_gens = [&](std::vector<std::vector<impl::Perm>>& gens,
                          const std::vector<std::vector<impl::Perm>>& base,
                          const std::vector<std::vector<std::string>>& blocks,
                          const std::map<std::string, const impl::Perm*>& hs,
                          auto&& size_of) {
        for (std::size_t b = 0; b < blocks.size(); ++b) {
          std::size_t n = size_of(blocks[b][0]);
          if (n == 0) continue;
          impl::Perm h0 = hperm_of(hs, blocks[b][0], n);
          impl::Perm h0i = impl::invert_perm(h0);
          for (std::size_t i = 0; i < blocks[b].size(); ++i) {
            impl::Perm hx = hperm_of(hs, blocks[b][i], n);
            gens[b][i] = impl::compose_perm(hx, impl::compose_perm(base[b][i], h0i));
          }
        }
      };
      act_gens(a_vgens, std::get<0>(saved), a_vblocks, h_v, fv_of);
      act_gens(r_vgens, std::get<1>(saved), r_vblocks, h_v, fv_of);
      act_gens(a_egens, std::get<2>(saved), a_eblocks, h_e, fe_of);
      act_gens(r_egens, std::get<3>(saved), r_eblocks, h_e, fe_of);
      best = std::min(best, core_key());
      std::size_t gi = 0;
      for (; gi < odo.size(); ++gi) {
        std::size_t lim = gi < cv.size() ? hv[cv[gi]].size() : he[ce[gi - cv.size()]].size();
        if (++odo[gi] < lim) break;
        odo[gi] = 0;
      }
      if (gi == odo.size()) break;
    }
    lift = saved_lift;
    std::tie(a_vgens, r_vgens, a_egens, r_egens) = saved;
    return best;
  };

  auto build_carrier = [&]() {
    std::vector<std::string> velems, eelems;
    for (const auto& v : lv)
      for (std::size_t c = 1; c <= fv_of(v); ++c) velems.push_back(std::to_string(c) + ":" + v);
    for (const auto& e : le)
      for (std::size_t c = 1; c <= fe_of(e); ++c) eelems.push_back(std::to_string(c) + ":" + e);
    FinSet vs(std::move(velems)), es(std::move(eelems));
    std::map<std::string, std::string> src_assign, tgt_assign;
    for (std::size_t ei = 0; ei < le.size(); ++ei)
      for (std::size_t c = 0; c < fe_of(le[ei]); ++c) {
        std::string name = std::to_string(c + 1) + ":" + le[ei];
        src_assign[name] =
            std::to_string(lift[ei][c].first + 1) + ":" + l.src.at(le[ei]);
        tgt_assign[name] =
            std::to_string(lift[ei][c].second + 1) + ":" + l.tgt.at(le[ei]);
      }
    return FinGraph(vs, es, FinMap(es, vs, src_assign), FinMap(es, vs, tgt_assign));
  };

  auto build_dd = [&](const FinGraph& carrier, const FinMap& carrier_cmp, const FinMap& base,
                      const std::vector<std::vector<std::string>>& blocks,
                      const std::vector<std::vector<impl::Perm>>& gens,
                      auto&& size_of) {
    DescentData dd;
    dd.carrier = carrier_cmp;
    dd.base = base;
    for (std::size_t b = 0; b < blocks.size(); ++b)
      for (std::size_t i = 0; i < blocks[b].size(); ++i)
        for (std::size_t j = 0; j < blocks[b].size(); ++j) {
          impl::Perm comp = impl::compose_perm(gens[b][j], impl::invert_perm(gens[b][i]));
          FiberMap mm;
          for (std::size_t c = 0; c < comp.size(); ++c)
            mm[std::to_string(c + 1) + ":" + blocks[b][i]] =
                std::to_string(comp[c] + 1) + ":" + blocks[b][j];
          dd.family[{blocks[b][i], blocks[b][j]}] = std::move(mm);
        }
    (void)carrier;
    (void)size_of;
    return dd;
  };

  // Free configurations on one side: vertex counts, then edge attachments.
  auto emit_with_frees = [&](const FinGraph& carrier, const GraphSquare& left_core,
                             const GraphSquare& right_core) {
    auto side_configs = [&](const GraphSquare& core, const std::vector<std::string>& fverts,
                            const std::vector<std::string>& fedges, const FinGraph& codg) {
      std::vector<GraphSquare> results;
      std::vector<std::size_t> vcount(fverts.size(), 0);
      while (true) {
        std::map<std::string, std::size_t> vmap;
        for (std::size_t i = 0; i < fverts.size(); ++i)
          if (vcount[i] > 0) vmap[fverts[i]] = vcount[i];
        GraphSquare with_v = impl::extend_graph_square_with_free(core, vmap, {});
        // Fibres of the extended J over codomain vertices.
        auto jfiber = [&](const std::string& av) {
          return with_v.right.on_vertices.fiber(av);
        };
        // Enumerate free-edge counts and endpoint choices.
        std::vector<std::vector<std::tuple<std::string, std::string, std::string>>> eoptions;
        bool impossible = false;
        for (const auto& ae : fedges) {
          std::vector<std::tuple<std::string, std::string, std::string>> single;
          auto sfib = jfiber(codg.src.at(ae));
          auto tfib = jfiber(codg.tgt.at(ae));
          for (const auto& sv : sfib)
            for (const auto& tv : tfib) single.emplace_back(ae, sv, tv);
          eoptions.push_back(std::move(single));
          (void)impossible;
        }
        // counts per free edge with endpoint multichoice: enumerate multisets
        // of size 0..fiber_bound of the endpoint options.
        std::vector<std::vector<std::vector<std::tuple<std::string, std::string, std::string>>>>
            per_edge_choices;
        for (const auto& opts : eoptions) {
          std::vector<std::vector<std::tuple<std::string, std::string, std::string>>> menus;
          std::vector<std::tuple<std::string, std::string, std::string>> curm;
          auto rec = [&](auto&& self, std::size_t start, std::size_t left_cnt) -> void {
            menus.push_back(curm);
            if (left_cnt == 0) return;
            for (std::size_t i = start; i < opts.size(); ++i) {
              curm.push_back(opts[i]);
              self(self, i, left_cnt - 1);
              curm.pop_back();
            }
          };
          rec(rec, 0, fiber_bound);
          per_edge_choices.push_back(std::move(menus));
        }
        std::vector<std::size_t> pick(per_edge_choices.size(), 0);
        while (true) {
          std::vector<std::tuple<std::string, std::string, std::string>> chosen;
          bool valid = true;
          for (std::size_t i = 0; i < pick.size(); ++i) {
            const auto& menu = per_edge_choices[i][pick[i]];
            chosen.insert(chosen.end(), menu.begin(), menu.end());
          }
          if (valid) results.push_back(impl::extend_graph_square_with_free(with_v, {}, chosen));
          std::size_t i = 0;
          for (; i < pick.size(); ++i) {
            if (++pick[i] < per_edge_choices[i].size()) break;
            pick[i] = 0;
          }
          if (i == pick.size()) break;
        }
        std::size_t i = 0;
        for (; i < vcount.size(); ++i) {
          if (++vcount[i] <= fiber_bound) break;
          vcount[i] = 0;
        }
        if (i == vcount.size()) break;
      }
      return results;
    };

    auto lefts = side_configs(left_core, free_av, free_ae, a.cod);
    auto rights = side_configs(right_core, free_rv, free_re, r.cod);
    GraphHom carrier_hom(carrier, l, left_core.left.on_vertices, left_core.left.on_edges);
    for (const auto& lf : lefts)
      for (const auto& rt : rights)
        out.push_back(GraphSpan{a, r, carrier_hom, lf, rt});
  };

  auto build_core = [&]() {
    auto key = canonical_core_key();
    if (!seen_cores.insert(key).second) return;
    FinGraph carrier = build_carrier();
    FinMap carrier_v = FinMap::from_fn(carrier.vertices, l.vertices, [](const std::string& x) {
      return x.substr(x.find(':') + 1);
    });
    FinMap carrier_e = FinMap::from_fn(carrier.edges, l.edges, [](const std::string& x) {
      return x.substr(x.find(':') + 1);
    });
    GraphHom carrier_hom(carrier, l, carrier_v, carrier_e);
    GraphDescent gdd_a{build_dd(carrier, carrier_v, a.on_vertices, a_vblocks, a_vgens, fv_of),
                       build_dd(carrier, carrier_e, a.on_edges, a_eblocks, a_egens, fe_of)};
    GraphDescent gdd_r{build_dd(carrier, carrier_v, r.on_vertices, r_vblocks, r_vgens, fv_of),
                       build_dd(carrier, carrier_e, r.on_edges, r_eblocks, r_egens, fe_of)};
    GraphSquare left_core = graph_realize(carrier, a, gdd_a);
    GraphSquare right_core = graph_realize(carrier, r, gdd_r);
    emit_with_frees(carrier, left_core, right_core);
  };

  // Nested odometers: vertex fibres, edge fibres, lifts, vertex generators,
  // edge generators (naturality-filtered).
  auto walk_egens = [&](auto&& self, std::vector<std::tuple<bool, std::size_t, std::size_t>>& slots,
                        std::size_t idx) -> void {
    if (idx == slots.size()) {
      build_core();
      return;
    }
    auto [a_side, b, i] = slots[idx];
    auto& gens = a_side ? a_egens : r_egens;
    std::size_t n = gens[b][i].size();
    for (const auto& p : impl::all_perms(n)) {
      if (!edge_perm_natural(a_side, b, i, p)) continue;
      gens[b][i] = p;
      self(self, slots, idx + 1);
    }
    gens[b][i] = impl::identity_perm(n);
  };

  auto walk_vgens = [&](auto&& self, std::vector<std::tuple<bool, std::size_t, std::size_t>>& vslots,
                        std::vector<std::tuple<bool, std::size_t, std::size_t>>& eslots,
                        std::size_t idx) -> void {
    if (idx == vslots.size()) {
      walk_egens(walk_egens, eslots, 0);
      return;
    }
    auto [a_side, b, i] = vslots[idx];
    auto& gens = a_side ? a_vgens : r_vgens;
    std::size_t n = gens[b][i].size();
    for (const auto& p : impl::all_perms(n)) {
      gens[b][i] = p;
      self(self, vslots, eslots, idx + 1);
    }
    gens[b][i] = impl::identity_perm(n);
  };

  auto walk_lifts = [&](auto&& self, std::size_t ei, std::size_t c) -> void {
    if (ei == le.size()) {
      // generators: reset and enumerate
      a_vgens.assign(a_vblocks.size(), {});
      r_vgens.assign(r_vblocks.size(), {});
      a_egens.assign(a_eblocks.size(), {});
      r_egens.assign(r_eblocks.size(), {});
      for (std::size_t b = 0; b < a_vblocks.size(); ++b)
        a_vgens[b].assign(a_vblocks[b].size(), impl::identity_perm(fv_of(a_vblocks[b][0])));
      for (std::size_t b = 0; b < r_vblocks.size(); ++b)
        r_vgens[b].assign(r_vblocks[b].size(), impl::identity_perm(fv_of(r_vblocks[b][0])));
      for (std::size_t b = 0; b < a_eblocks.size(); ++b)
        a_egens[b].assign(a_eblocks[b].size(), impl::identity_perm(fe_of(a_eblocks[b][0])));
      for (std::size_t b = 0; b < r_eblocks.size(); ++b)
        r_egens[b].assign(r_eblocks[b].size(), impl::identity_perm(fe_of(r_eblocks[b][0])));
      std::vector<std::tuple<bool, std::size_t, std::size_t>> vslots, eslots;
      for (std::size_t b = 0; b < a_vblocks.size(); ++b)
        for (std::size_t i = 1; i < a_vblocks[b].size(); ++i) vslots.emplace_back(true, b, i);
      for (std::size_t b = 0; b < r_vblocks.size(); ++b)
        for (std::size_t i = 1; i < r_vblocks[b].size(); ++i) vslots.emplace_back(false, b, i);
      for (std::size_t b = 0; b < a_eblocks.size(); ++b)
        for (std::size_t i = 1; i < a_eblocks[b].size(); ++i) eslots.emplace_back(true, b, i);
      for (std::size_t b = 0; b < r_eblocks.size(); ++b)
        for (std::size_t i = 1; i < r_eblocks[b].size(); ++i) eslots.emplace_back(false, b, i);
      walk_vgens(walk_vgens, vslots, eslots, 0);
      return;
    }
    if (c == fe_of(le[ei])) {
      self(self, ei + 1, 0);
      return;
    }
    std::size_t ns = fv_of(l.src.at(le[ei]));
    std::size_t nt = fv_of(l.tgt.at(le[ei]));
    if (ns == 0 || nt == 0) return;  // an edge copy cannot attach: no span here
    for (std::size_t si = 0; si < ns; ++si)
      for (std::size_t ti = 0; ti < nt; ++ti) {
        lift[ei][c] = {si, ti};
        self(self, ei, c + 1);
      }
  };

  // Outer odometers over the fibre vectors.
  while (true) {
    while (true) {
      for (std::size_t ei = 0; ei < le.size(); ++ei)
        lift[ei].assign(fe_of(le[ei]), {0, 0});
      walk_lifts(walk_lifts, 0, 0);
      std::size_t i = 0;
      for (; i < fe.size(); ++i) {
        if (++fe[i] <= fiber_bound) break;
        fe[i] = 0;
      }
      if (i == fe.size()) break;
    }
    std::size_t i = 0;
    for (; i < fv.size(); ++i) {
      if (++fv[i] <= fiber_bound) break;
      fv[i] = 0;
    }
    if (i == fv.size()) break;
  }
  return out;
}

/// Graph-level Van Kampen decision by exhaustive span enumeration and
/// reachability search; the apex bound argument is componentwise.
inline Decision graph_brute_van_kampen(const GraphSquare& sq, const SearchBudget& budget) {
  detail::require(is_graph_pushout(sq), "graph_brute_van_kampen: square is not a pushout");
  impl::Deadline deadline(budget.time_limit_seconds);
  for (const auto& span : enumerate_graph_spans(sq, budget.max_fiber_size)) {
    if (deadline.expired()) return Decision::OutOfBudget;
    std::size_t needed_v = span.carrier.dom.vertices.size();
    needed_v += span.left.top.cod.vertices.size() - span.left.top.on_vertices.image().size();
    needed_v += span.right.top.cod.vertices.size() - span.right.top.on_vertices.image().size();
    std::size_t needed_e = span.carrier.dom.edges.size();
    needed_e += span.left.top.cod.edges.size() - span.left.top.on_edges.image().size();
    needed_e += span.right.top.cod.edges.size() - span.right.top.on_edges.image().size();
    std::size_t needed = std::max(needed_v, needed_e);
    if (needed > budget.max_apex_size) return Decision::OutOfBudget;
    SearchBudget inner = budget;
    inner.max_apex_size = needed;
    GraphReachabilitySearch rs = graph_brute_reachable(span, sq, inner);
    if (rs.outcome == Outcome::BudgetExceeded) return Decision::OutOfBudget;
    if (rs.outcome == Outcome::NoneWithinBound) return Decision::No;
  }
  return Decision::Yes;
}

// ---------------------------------------------------------------------------
// Misc enumeration helpers

/// All partitions of a finite set (restricted-growth enumeration).
inline std::vector<Partition> all_partitions(const FinSet& s) {
  std::vector<Partition> out;
  std::size_t n = s.size();
  if (n == 0) {
    out.push_back(Partition(s, {}));
    return out;
  }
  std::vector<std::size_t> rgs(n, 0);
  auto emit = [&]() {
    std::size_t nblocks = *std::max_element(rgs.begin(), rgs.end()) + 1;
    std::vector<std::vector<std::string>> blocks(nblocks);
    for (std::size_t i = 0; i < n; ++i) blocks[rgs[i]].push_back(s.elements()[i]);
    out.push_back(Partition(s, std::move(blocks)));
  };
  auto walk = [&](auto&& self, std::size_t i, std::size_t maxv) -> void {
    if (i == n) {
      emit();
      return;
    }
    for (std::size_t v = 0; v <= maxv + 1 && v <= i; ++v) {
      rgs[i] = v;
      self(self, i + 1, std::max(maxv, v));
    }
  };
  rgs[0] = 0;
  walk(walk, 1, 0);
  return out;
}

}  // namespace vk::oracle
