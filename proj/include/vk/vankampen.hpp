#pragma once

// Decision procedures for pullback spans over a common span (a, r):
//
//  - domain cycles and the separated-kernels test (incidence multigraph),
//  - the Van Kampen decision for pushout squares,
//  - coherence witnesses via the least upper bound of the lifted kernels,
//  - fibred amalgamation (completing the cube),
//  - alternating-sequence evaluation and the cycle composite condition,
//  - the twisted-fibre generator that turns any proper domain cycle into an
//    unreachable pullback span.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "vk/descent.hpp"
#include "vk/finset.hpp"
#include "vk/limits.hpp"
#include "vk/span.hpp"

namespace vk {

// ---------------------------------------------------------------------------
// Domain cycles

/// A cyclic sequence (x_0, ..., x_{2k+1}) in L, consecutive elements
/// distinct, even-start pairs in ker(a) and odd-start pairs in ker(r),
/// indices mod 2k+2.
struct DomainCycle {
  std::vector<std::string> elements;

  std::size_t length() const { return elements.size(); }
  std::size_t k() const { return elements.size() / 2 - 1; }

  friend bool operator==(const DomainCycle&, const DomainCycle&) = default;
};

inline bool is_domain_cycle(const FinMap& a, const FinMap& r, const DomainCycle& c) {
  const auto& xs = c.elements;
  if (xs.size() < 2 || xs.size() % 2 != 0) return false;
  for (const auto& x : xs)
    if (!a.dom().contains(x)) return false;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    const std::string& cur = xs[j];
    const std::string& nxt = xs[(j + 1) % xs.size()];
    if (cur == nxt) return false;
    const FinMap& side = (j % 2 == 0) ? a : r;
    if (side.at(cur) != side.at(nxt)) return false;
  }
  return true;
}

inline bool is_proper(const DomainCycle& c) {
  std::set<std::string> seen(c.elements.begin(), c.elements.end());
  return seen.size() == c.elements.size();
}

namespace detail {

// All valid representations of a proper domain cycle: even rotations of the
// sequence and of its reversal (x1, x0, x_{2k+1}, ..., x2).
inline std::vector<std::vector<std::string>> cycle_representations(
    const std::vector<std::string>& xs) {
  std::vector<std::vector<std::string>> reps;
  std::size_t n = xs.size();
  std::vector<std::string> rev;
  rev.push_back(xs[1]);
  rev.push_back(xs[0]);
  for (std::size_t i = n - 1; i >= 2; --i) rev.push_back(xs[i]);
  for (std::size_t shift = 0; shift < n; shift += 2) {
    std::vector<std::string> f, b;
    for (std::size_t i = 0; i < n; ++i) {
      f.push_back(xs[(shift + i) % n]);
      b.push_back(rev[(shift + i) % n]);
    }
    reps.push_back(std::move(f));
    reps.push_back(std::move(b));
  }
  return reps;
}

inline DomainCycle normalize_cycle(std::vector<std::string> xs) {
  auto reps = cycle_representations(xs);
  return DomainCycle{*std::min_element(reps.begin(), reps.end())};
}

}  // namespace detail

/// Looks for a proper domain cycle of (a, r) via the incidence multigraph:
/// one node per block of ker(a) and of ker(r), one edge per element of L
/// joining its two blocks. A domain cycle exists iff this multigraph has a
/// cycle; the cycle's edge sequence is the element sequence.
inline std::optional<DomainCycle> find_domain_cycle(const FinMap& a, const FinMap& r) {
  detail::require(a.dom() == r.dom(), "find_domain_cycle: domain mismatch");
  Partition ka = kernel_pair(a);
  Partition kr = kernel_pair(r);
  std::size_t na = ka.blocks().size();
  std::size_t nodes = na + kr.blocks().size();
  detail::UnionFind uf(nodes);
  // forest adjacency: node -> (neighbour, connecting element)
  std::vector<std::vector<std::pair<std::size_t, std::string>>> adj(nodes);

  for (const auto& x : a.dom().elements()) {
    std::size_t u = ka.block_index(x);
    std::size_t v = na + kr.block_index(x);
    if (uf.unite(u, v)) {
      adj[u].emplace_back(v, x);
      adj[v].emplace_back(u, x);
      continue;
    }
    // u and v already connected: the forest path from u to v plus this edge
    // closes a simple cycle. DFS for the path, recording edge elements.
    std::vector<std::string> path;
    std::vector<bool> visited(nodes, false);
    std::vector<std::string> stack_edges;
    auto dfs = [&](auto&& self, std::size_t cur) -> bool {
      if (cur == v) {
        path = stack_edges;
        return true;
      }
      visited[cur] = true;
      for (const auto& [nxt, elem] : adj[cur]) {
        if (visited[nxt]) continue;
        stack_edges.push_back(elem);
        if (self(self, nxt)) return true;
        stack_edges.pop_back();
      }
      return false;
    };
    bool found = dfs(dfs, u);
    detail::require(found, "find_domain_cycle: internal forest inconsistency");
    std::vector<std::string> xs;
    xs.push_back(x);  // x joins the r-node v back to the a-node u
    for (const auto& e : path) xs.push_back(e);
    return detail::normalize_cycle(std::move(xs));
  }
  return std::nullopt;
}

inline bool has_separated_kernels(const FinMap& a, const FinMap& r) {
  return !find_domain_cycle(a, r).has_value();
}

/// Extracts the shortest proper subcycle of a (possibly improper) domain
/// cycle, deterministically: elements are restricted to the given cycle's
/// elements, shortest length first, lexicographically least sequence.
inline DomainCycle proper_subcycle(const FinMap& a, const FinMap& r, const DomainCycle& c);

/// A pushout square is a Van Kampen square iff its span legs have separated
/// kernels.
inline bool is_van_kampen(const CommutingSquare& sq) {
  detail::require(is_pushout(sq), "is_van_kampen: square is not a pushout");
  return has_separated_kernels(sq.left, sq.top);
}

// ---------------------------------------------------------------------------
// Alternating sequences

enum class BaseLeg { A, R };

struct AlternatingSequence {
  std::vector<std::string> elements;  // (y_0, ..., y_m)
  BaseLeg start = BaseLeg::A;
};

inline bool is_alternating_sequence(const FinMap& a, const FinMap& r,
                                    const AlternatingSequence& seq) {
  if (seq.elements.empty()) return false;
  for (const auto& y : seq.elements)
    if (!a.dom().contains(y)) return false;
  for (std::size_t i = 0; i + 1 < seq.elements.size(); ++i) {
    bool a_step = (i % 2 == 0) == (seq.start == BaseLeg::A);
    const FinMap& side = a_step ? a : r;
    if (side.at(seq.elements[i]) != side.at(seq.elements[i + 1])) return false;
  }
  return true;
}

namespace detail {

inline FiberMap evaluate_alternating_with(const PullbackSpan& span, const DescentData& xi_tau,
                                          const DescentData& xi_beta,
                                          const AlternatingSequence& seq) {
  require(is_alternating_sequence(span.base_a, span.base_r, seq),
          "evaluate_alternating: invalid sequence");
  FiberMap acc;
  for (const auto& i : span.carrier.fiber(seq.elements.front())) acc[i] = i;
  for (std::size_t i = 0; i + 1 < seq.elements.size(); ++i) {
    bool a_step = (i % 2 == 0) == (seq.start == BaseLeg::A);
    const DescentData& dd = a_step ? xi_tau : xi_beta;
    const FiberMap& step = dd.component(seq.elements[i], seq.elements[i + 1]);
    for (auto& [x, y] : acc) y = step.at(y);
  }
  return acc;
}

}  // namespace detail

/// Composes the canonical fibre bijections of the span along an alternating
/// sequence: ker(a)-steps use the left face's descent data, ker(r)-steps the
/// right face's. A length-0 sequence yields the identity.
inline FiberMap evaluate_alternating(const PullbackSpan& span, const AlternatingSequence& seq) {
  validate_span(span);
  DescentData xi_tau = canonical_descent(span.left);
  DescentData xi_beta = canonical_descent(span.right);
  return detail::evaluate_alternating_with(span, xi_tau, xi_beta, seq);
}

/// Every proper domain cycle of (a, r), each rotation/direction listed once
/// per starting element (exhaustive search; desk scale).
inline std::vector<DomainCycle> all_proper_domain_cycles(const FinMap& a, const FinMap& r) {
  detail::require(a.dom() == r.dom(), "all_proper_domain_cycles: domain mismatch");
  Partition ka = kernel_pair(a);
  Partition kr = kernel_pair(r);
  std::vector<DomainCycle> out;
  std::vector<std::string> cur;
  std::set<std::string> used;

  auto dfs = [&](auto&& self, const std::string& x0) -> void {
    const std::string& last = cur.back();
    bool a_step = cur.size() % 2 == 1;  // step from position size-1
    const Partition& side = a_step ? ka : kr;
    if (!a_step && cur.size() >= 2 && side.same_block(last, x0)) {
      out.push_back(DomainCycle{cur});  // close with an r-step back to x0
    }
    for (const auto& y : side.block_of(last)) {
      if (y == last || used.count(y)) continue;
      cur.push_back(y);
      used.insert(y);
      self(self, x0);
      used.erase(y);
      cur.pop_back();
    }
  };

  for (const auto& x0 : a.dom().elements()) {
    cur = {x0};
    used = {x0};
    dfs(dfs, x0);
  }
  return out;
}

inline DomainCycle proper_subcycle(const FinMap& a, const FinMap& r, const DomainCycle& c) {
  detail::require(is_domain_cycle(a, r, c), "proper_subcycle: not a domain cycle of (a, r)");
  std::set<std::string> allowed(c.elements.begin(), c.elements.end());
  std::optional<DomainCycle> best;
  for (const auto& cand : all_proper_domain_cycles(a, r)) {
    bool inside = true;
    for (const auto& x : cand.elements)
      if (!allowed.count(x)) { inside = false; break; }
    if (!inside) continue;
    if (!best || cand.length() < best->length() ||
        (cand.length() == best->length() && cand.elements < best->elements))
      best = cand;
  }
  detail::require(best.has_value(), "proper_subcycle: no proper subcycle found");
  return *best;
}

/// True iff the composite fibre bijection around every proper domain cycle
/// is the identity. Exhaustive in the cycles; intended for desk scale.
inline bool cycle_condition_holds(const PullbackSpan& span) {
  validate_span(span);
  DescentData xi_tau = canonical_descent(span.left);
  DescentData xi_beta = canonical_descent(span.right);
  for (const auto& c : all_proper_domain_cycles(span.base_a, span.base_r)) {
    AlternatingSequence seq;
    seq.elements = c.elements;
    seq.elements.push_back(c.elements.front());
    seq.start = BaseLeg::A;
    FiberMap fb = detail::evaluate_alternating_with(span, xi_tau, xi_beta, seq);
    for (const auto& [x, y] : fb)
      if (x != y) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Coherence and amalgamation

struct CoherenceObstruction {
  std::vector<std::string> block;  // join block violating the fibre condition
  std::string base_element;       // x in L with |block ^ fibre(x)| != 1
  std::size_t count = 0;
};

struct CoherenceResult {
  std::optional<DescentData> witness;
  bool bottom_is_pushout = false;
  std::optional<CoherenceObstruction> obstruction;

  bool ok() const { return witness.has_value(); }
};

/// Decides coherence of the span over the given bottom square: forms the
/// least upper bound of ker(a') and ker(r') on the carrier domain and checks
/// that every block meets every fibre over its ker(s)-class exactly once.
/// On success the induced descent data over s = rbar . a is returned; it
/// restricts to the canonical descent data of both rear faces.
inline CoherenceResult coherence_witness(const PullbackSpan& span,
                                         const CommutingSquare& bottom) {
  validate_span(span);
  detail::require(bottom.left == span.base_a && bottom.top == span.base_r,
                  "coherence_witness: bottom square does not extend the span legs");
  CoherenceResult res;
  res.bottom_is_pushout = is_pushout(bottom);

  FinMap s = compose(bottom.bottom, span.base_a);
  Partition lub = join(kernel_pair(span.a_prime()), kernel_pair(span.r_prime()));
  Partition ker_s = kernel_pair(s);

  std::map<std::string, std::vector<std::string>> fibers;
  for (const auto& i : span.carrier.dom().elements())
    fibers[span.carrier.at(i)].push_back(i);
  for (const auto& x : s.dom().elements()) fibers[x];

  for (const auto& block : lub.blocks()) {
    const auto& s_class = ker_s.block_of(span.carrier.at(block.front()));
    for (const auto& x : s_class) {
      std::size_t count = 0;
      for (const auto& i : block)
        if (span.carrier.at(i) == x) ++count;
      if (count != 1) {
        res.obstruction = CoherenceObstruction{block, x, count};
        return res;
      }
    }
    for (const auto& i : block)
      detail::require(ker_s.same_block(span.carrier.at(i), span.carrier.at(block.front())),
                      "coherence_witness: join block crosses ker(s) classes");
  }

  DescentData witness;
  witness.carrier = span.carrier;
  witness.base = s;
  for (const auto& [x, x2] : ker_s.ordered_pairs()) {
    FiberMap m;
    for (const auto& i : fibers.at(x)) {
      const std::string* partner = nullptr;
      for (const auto& j : lub.block_of(i))
        if (span.carrier.at(j) == x2) { partner = &j; break; }
      detail::require(partner != nullptr, "coherence_witness: internal partner lookup failed");
      m[i] = *partner;
    }
    witness.family[{x, x2}] = std::move(m);
  }
  res.witness = std::move(witness);
  return res;
}

namespace detail {

inline std::string fresh_name(std::string base, const std::set<std::string>& used) {
  while (used.count(base)) base += "'";
  return base;
}

}  // namespace detail

/// Completes the cube over a pushout bottom: the apex instance is the
/// realization of the coherence witness extended by the parts of J and H
/// that sit over elements outside the images of a and r. All cube
/// postconditions are verified explicitly before returning.
inline std::optional<InstanceCube> amalgamate(const PullbackSpan& span,
                                              const CommutingSquare& bottom) {
  detail::require(is_pushout(bottom), "amalgamate: bottom square is not a pushout");
  CoherenceResult coh = coherence_witness(span, bottom);
  if (!coh.ok()) return std::nullopt;

  CommutingSquare diag = realize(*coh.witness);  // (gamma, c, sigma0, s)
  const FinMap& c = diag.top;
  const FinMap& sigma0 = diag.right;
  const FinMap& rbar = bottom.bottom;  // A -> S
  const FinMap& abar = bottom.right;   // R -> S

  FinSet im_a_prime = span.a_prime().image();
  FinSet im_r_prime = span.r_prime().image();
  std::set<std::string> used(c.cod().elements().begin(), c.cod().elements().end());
  std::map<std::string, std::string> j_fresh, h_fresh;
  std::vector<std::string> k_elems(c.cod().elements());
  for (const auto& j : span.tau().dom().elements())
    if (!im_a_prime.contains(j)) {
      std::string n = detail::fresh_name("J:" + j, used);
      used.insert(n);
      j_fresh[j] = n;
      k_elems.push_back(n);
    }
  for (const auto& h : span.beta().dom().elements())
    if (!im_r_prime.contains(h)) {
      std::string n = detail::fresh_name("H:" + h, used);
      used.insert(n);
      h_fresh[h] = n;
      k_elems.push_back(n);
    }
  FinSet apex(std::move(k_elems));

  FinMap sigma = FinMap::from_fn(apex, bottom.bottom.cod(), [&](const std::string& kk) {
    if (c.cod().contains(kk)) return sigma0.at(kk);
    for (const auto& [j, n] : j_fresh)
      if (n == kk) return rbar.at(span.tau().at(j));
    for (const auto& [h, n] : h_fresh)
      if (n == kk) return abar.at(span.beta().at(h));
    throw std::logic_error("amalgamate: unreachable apex element");
  });

  FinMap s_prime = FinMap::from_fn(span.carrier.dom(), apex,
                                   [&](const std::string& i) { return c.at(i); });

  // Mediators through the rear coequalizers; fresh elements on the free parts.
  std::map<std::string, std::string> rbar_assign, abar_assign;
  for (const auto& i : span.carrier.dom().elements()) {
    auto [jit, jnew] = rbar_assign.emplace(span.a_prime().at(i), s_prime.at(i));
    detail::require(jnew || jit->second == s_prime.at(i),
                    "amalgamate: rbar' not well defined");
    auto [hit, hnew] = abar_assign.emplace(span.r_prime().at(i), s_prime.at(i));
    detail::require(hnew || hit->second == s_prime.at(i),
                    "amalgamate: abar' not well defined");
  }
  for (const auto& [j, n] : j_fresh) rbar_assign[j] = n;
  for (const auto& [h, n] : h_fresh) abar_assign[h] = n;
  FinMap rbar_prime(span.tau().dom(), apex, rbar_assign);
  FinMap abar_prime(span.beta().dom(), apex, abar_assign);

  InstanceCube cube{span, bottom, sigma, s_prime, abar_prime, rbar_prime};
  try {
    validate_cube(cube);
  } catch (const std::invalid_argument& e) {
    throw std::logic_error(std::string("amalgamate: postcondition failed: ") + e.what());
  }
  return cube;
}

// ---------------------------------------------------------------------------
// Constructions over a doubled carrier

namespace detail {

inline FinMap copy_carrier(const FinSet& base_dom, const std::vector<std::string>& labels) {
  std::vector<std::string> elems;
  for (const auto& lbl : labels)
    for (const auto& x : base_dom.elements()) elems.push_back(lbl + ":" + x);
  FinSet dom(std::move(elems));
  return FinMap::from_fn(dom, base_dom, [](const std::string& e) {
    return e.substr(e.find(':') + 1);
  });
}

inline DescentData identity_lift(const FinMap& carrier, const FinMap& base,
                                 const std::vector<std::string>& labels) {
  DescentData dd;
  dd.carrier = carrier;
  dd.base = base;
  for (const auto& [x, x2] : kernel_pair(base).ordered_pairs()) {
    FiberMap m;
    for (const auto& lbl : labels) m[lbl + ":" + x] = lbl + ":" + x2;
    dd.family[{x, x2}] = std::move(m);
  }
  return dd;
}

}  // namespace detail

/// The split span over (a, r): `copies` uniform fibres lifted identically on
/// both sides. Always coherent; the reachable counterpart of the twisted
/// construction below.
inline PullbackSpan uniform_lift_span(const FinMap& a, const FinMap& r, std::size_t copies) {
  detail::require(a.dom() == r.dom(), "uniform_lift_span: domain mismatch");
  std::vector<std::string> labels;
  for (std::size_t i = 1; i <= copies; ++i) labels.push_back(std::to_string(i));
  FinMap carrier = detail::copy_carrier(a.dom(), labels);
  DescentData dd_a = detail::identity_lift(carrier, a, labels);
  DescentData dd_r = detail::identity_lift(carrier, r, labels);
  return PullbackSpan{a, r, carrier, realize(dd_a), realize(dd_r)};
}

/// Builds a pullback span over (a, r) that is certifiably unreachable, from
/// a proper domain cycle: the carrier is the projection {0,1} x L -> L, the
/// ker(r) family lifts identically, and the ker(a) family twists the fibre
/// transition from the cycle's first element to its second.
inline PullbackSpan unreachable_span_for_cycle(const FinMap& a, const FinMap& r,
                                               const DomainCycle& cycle) {
  detail::require(is_domain_cycle(a, r, cycle),
                  "unreachable_span_for_cycle: not a domain cycle of (a, r)");
  detail::require(is_proper(cycle), "unreachable_span_for_cycle: cycle is not proper");
  const std::string& x0 = cycle.elements[0];
  const std::string& x1 = cycle.elements[1];
  std::vector<std::string> labels = {"0", "1"};
  FinMap carrier = detail::copy_carrier(a.dom(), labels);
  DescentData dd_r = detail::identity_lift(carrier, r, labels);

  Partition ker_a = kernel_pair(a);
  const auto& block0 = ker_a.block_of(x0);

  // xi_{x0, x}: twisted on x1, identity elsewhere; the rest of the block's
  // components follow by the cocycle law.
  auto from_x0 = [&](const std::string& x, const std::string& lbl) -> std::string {
    if (x == x1) return (lbl == "0" ? "1" : "0") + (":" + x);
    return lbl + ":" + x;
  };
  auto to_x0 = [&](const std::string& x, const std::string& lbl) -> std::string {
    if (x == x1) return (lbl == "0" ? "1" : "0") + (":" + x0);
    return lbl + ":" + x0;
  };

  DescentData dd_a;
  dd_a.carrier = carrier;
  dd_a.base = a;
  for (const auto& [x, x2] : ker_a.ordered_pairs()) {
    FiberMap m;
    bool in_block0 = ker_a.same_block(x, x0);
    for (const auto& lbl : labels) {
      if (!in_block0) {
        m[lbl + ":" + x] = lbl + ":" + x2;
      } else {
        // xi_{x, x2} = xi_{x0, x2} . (xi_{x0, x})^{-1}
        std::string mid = to_x0(x, lbl);
        std::string mid_lbl = mid.substr(0, mid.find(':'));
        m[lbl + ":" + x] = from_x0(x2, mid_lbl);
      }
    }
    dd_a.family[{x, x2}] = std::move(m);
  }

  return PullbackSpan{a, r, carrier, realize(dd_a), realize(dd_r)};
}

}  // namespace vk
