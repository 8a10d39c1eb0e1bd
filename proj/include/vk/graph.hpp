#pragma once

// Directed multigraphs and graph homomorphisms, with componentwise chosen
// (co)limits and the graph-level Van Kampen decision. A graph square is a
// pushout/pullback exactly when both its vertex and edge components are, and
// the separated-kernels criterion is applied to both components.

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vk/descent.hpp"
#include "vk/finset.hpp"
#include "vk/limits.hpp"
#include "vk/span.hpp"
#include "vk/vankampen.hpp"

namespace vk {

struct FinGraph {
  FinSet vertices;
  FinSet edges;
  FinMap src, tgt;  // edges -> vertices

  FinGraph() = default;

  FinGraph(FinSet vertices_, FinSet edges_, FinMap src_, FinMap tgt_)
      : vertices(std::move(vertices_)),
        edges(std::move(edges_)),
        src(std::move(src_)),
        tgt(std::move(tgt_)) {
    detail::require(src.dom() == edges && tgt.dom() == edges,
                    "FinGraph: src/tgt not total on edges");
    detail::require(src.cod() == vertices && tgt.cod() == vertices,
                    "FinGraph: src/tgt do not land in the vertices");
  }

  static FinGraph discrete(FinSet vertices) {
    FinSet none;
    FinMap empty(none, vertices, {});
    return FinGraph(std::move(vertices), none, empty, empty);
  }

  friend bool operator==(const FinGraph&, const FinGraph&) = default;
};

struct GraphHom {
  FinGraph dom, cod;
  FinMap on_vertices, on_edges;

  GraphHom() = default;

  GraphHom(FinGraph dom_, FinGraph cod_, FinMap on_vertices_, FinMap on_edges_)
      : dom(std::move(dom_)),
        cod(std::move(cod_)),
        on_vertices(std::move(on_vertices_)),
        on_edges(std::move(on_edges_)) {
    detail::require(on_vertices.dom() == dom.vertices && on_vertices.cod() == cod.vertices,
                    "GraphHom: vertex component shape mismatch");
    detail::require(on_edges.dom() == dom.edges && on_edges.cod() == cod.edges,
                    "GraphHom: edge component shape mismatch");
    for (const auto& e : dom.edges.elements()) {
      detail::require(cod.src.at(on_edges.at(e)) == on_vertices.at(dom.src.at(e)),
                      "GraphHom: does not commute with src at '" + e + "'");
      detail::require(cod.tgt.at(on_edges.at(e)) == on_vertices.at(dom.tgt.at(e)),
                      "GraphHom: does not commute with tgt at '" + e + "'");
    }
  }

  static GraphHom identity(const FinGraph& g) {
    return GraphHom(g, g, FinMap::identity(g.vertices), FinMap::identity(g.edges));
  }

  friend bool operator==(const GraphHom&, const GraphHom&) = default;
};

inline GraphHom compose(const GraphHom& g, const GraphHom& f) {
  detail::require(f.cod == g.dom, "compose: hom codomain/domain mismatch");
  return GraphHom(f.dom, g.cod, compose(g.on_vertices, f.on_vertices),
                  compose(g.on_edges, f.on_edges));
}

struct GraphSquare {
  GraphHom left, top, right, bottom;

  GraphSquare() = default;

  GraphSquare(GraphHom left_, GraphHom top_, GraphHom right_, GraphHom bottom_)
      : left(std::move(left_)),
        top(std::move(top_)),
        right(std::move(right_)),
        bottom(std::move(bottom_)) {
    detail::require(compose(right, top) == compose(bottom, left),
                    "GraphSquare: does not commute");
  }

  CommutingSquare vertex_square() const {
    return CommutingSquare(left.on_vertices, top.on_vertices, right.on_vertices,
                           bottom.on_vertices);
  }
  CommutingSquare edge_square() const {
    return CommutingSquare(left.on_edges, top.on_edges, right.on_edges, bottom.on_edges);
  }

  friend bool operator==(const GraphSquare&, const GraphSquare&) = default;
};

struct GraphPushout {
  FinGraph apex;
  GraphHom inj1, inj2;
};

/// Componentwise chosen pushout; src/tgt are induced on the quotients.
inline GraphPushout graph_pushout(const GraphHom& f, const GraphHom& g) {
  detail::require(f.dom == g.dom, "graph_pushout: domain mismatch");
  ChosenPushout pv = pushout(f.on_vertices, g.on_vertices);
  ChosenPushout pe = pushout(f.on_edges, g.on_edges);
  // Induced src on a representative "L:e" is inj1(src(e)); likewise for "R:".
  auto induced = [&](const FinMap& src_f, const FinMap& src_g) {
    return FinMap::from_fn(pe.apex, pv.apex, [&](const std::string& rep) {
      std::string raw = rep.substr(2);
      return rep[0] == 'L' ? pv.inj1.at(src_f.at(raw)) : pv.inj2.at(src_g.at(raw));
    });
  };
  FinGraph apex(pv.apex, pe.apex, induced(f.cod.src, g.cod.src),
                induced(f.cod.tgt, g.cod.tgt));
  GraphHom inj1(f.cod, apex, pv.inj1, pe.inj1);
  GraphHom inj2(g.cod, apex, pv.inj2, pe.inj2);
  return GraphPushout{apex, inj1, inj2};
}

struct GraphPullback {
  FinGraph apex;
  GraphHom proj1, proj2;
};

/// Componentwise chosen pullback; src/tgt act coordinatewise on matched pairs.
inline GraphPullback graph_pullback(const GraphHom& f, const GraphHom& g) {
  detail::require(f.cod == g.cod, "graph_pullback: codomain mismatch");
  ChosenPullback pv = pullback(f.on_vertices, g.on_vertices);
  ChosenPullback pe = pullback(f.on_edges, g.on_edges);
  auto induced = [&](const FinMap& src_f, const FinMap& src_g) {
    return FinMap::from_fn(pe.apex, pv.apex, [&](const std::string& e) {
      return pair_elem(src_f.at(pe.proj1.at(e)), src_g.at(pe.proj2.at(e)));
    });
  };
  FinGraph apex(pv.apex, pe.apex, induced(f.dom.src, g.dom.src),
                induced(f.dom.tgt, g.dom.tgt));
  GraphHom proj1(apex, f.dom, pv.proj1, pe.proj1);
  GraphHom proj2(apex, g.dom, pv.proj2, pe.proj2);
  return GraphPullback{apex, proj1, proj2};
}

inline bool is_graph_pushout(const GraphSquare& sq) {
  return is_pushout(sq.vertex_square()) && is_pushout(sq.edge_square());
}

inline bool is_graph_pullback(const GraphSquare& sq) {
  return is_pullback(sq.vertex_square()) && is_pullback(sq.edge_square());
}

/// A graph pushout is a Van Kampen square iff both the vertex and the edge
/// components of its legs have separated kernels.
inline bool is_van_kampen_graph(const GraphSquare& sq) {
  detail::require(is_graph_pushout(sq), "is_van_kampen_graph: square is not a pushout");
  return has_separated_kernels(sq.left.on_vertices, sq.top.on_vertices) &&
         has_separated_kernels(sq.left.on_edges, sq.top.on_edges);
}

// ---------------------------------------------------------------------------
// Graph descent data

/// Descent data in the category of graphs: componentwise descent data whose
/// edge components commute with src/tgt through the vertex components.
struct GraphDescent {
  DescentData vertices, edges;

  friend bool operator==(const GraphDescent&, const GraphDescent&) = default;
};

inline void validate_graph_descent(const FinGraph& carrier_graph, const GraphHom& base_hom,
                                   const GraphDescent& gdd) {
  detail::require(gdd.vertices.base == base_hom.on_vertices &&
                      gdd.edges.base == base_hom.on_edges,
                  "GraphDescent: base components do not match the base hom");
  detail::require(gdd.vertices.carrier.dom() == carrier_graph.vertices &&
                      gdd.edges.carrier.dom() == carrier_graph.edges,
                  "GraphDescent: carrier components do not match the carrier graph");
  auto bad_v = validate(gdd.vertices);
  detail::require(!bad_v, "GraphDescent: vertex component invalid");
  auto bad_e = validate(gdd.edges);
  detail::require(!bad_e, "GraphDescent: edge component invalid");
  // Naturality: the edge family commutes with src and tgt via the vertex
  // family on the corresponding kernel pairs.
  const FinMap& base_src = base_hom.dom.src;
  const FinMap& base_tgt = base_hom.dom.tgt;
  for (const auto& [key, m] : gdd.edges.family) {
    for (const auto& [ie, je] : m) {
      std::string sv = gdd.vertices.apply(base_src.at(key.first), base_src.at(key.second),
                                          carrier_graph.src.at(ie));
      detail::require(carrier_graph.src.at(je) == sv,
                      "GraphDescent: edge family does not commute with src");
      std::string tv = gdd.vertices.apply(base_tgt.at(key.first), base_tgt.at(key.second),
                                          carrier_graph.tgt.at(ie));
      detail::require(carrier_graph.tgt.at(je) == tv,
                      "GraphDescent: edge family does not commute with tgt");
    }
  }
}

/// Rebuilds the graph pullback square of a graph descent datum: both
/// components are realized and the quotient inherits src/tgt.
inline GraphSquare graph_realize(const FinGraph& carrier_graph, const GraphHom& base_hom,
                                 const GraphDescent& gdd) {
  validate_graph_descent(carrier_graph, base_hom, gdd);
  CommutingSquare vsq = realize(gdd.vertices);
  CommutingSquare esq = realize(gdd.edges);
  std::map<std::string, std::string> src_assign, tgt_assign;
  for (const auto& ie : carrier_graph.edges.elements()) {
    const std::string& eq = esq.top.at(ie);
    auto [sit, snew] = src_assign.emplace(eq, vsq.top.at(carrier_graph.src.at(ie)));
    detail::require(snew || sit->second == vsq.top.at(carrier_graph.src.at(ie)),
                    "graph_realize: induced src not well defined");
    auto [tit, tnew] = tgt_assign.emplace(eq, vsq.top.at(carrier_graph.tgt.at(ie)));
    detail::require(tnew || tit->second == vsq.top.at(carrier_graph.tgt.at(ie)),
                    "graph_realize: induced tgt not well defined");
  }
  FinGraph quotient(vsq.top.cod(), esq.top.cod(), FinMap(esq.top.cod(), vsq.top.cod(), src_assign),
                    FinMap(esq.top.cod(), vsq.top.cod(), tgt_assign));
  GraphHom carrier_hom(carrier_graph, base_hom.dom, gdd.vertices.carrier, gdd.edges.carrier);
  GraphHom quotient_hom(carrier_graph, quotient, vsq.top, esq.top);
  GraphHom mediator(quotient, base_hom.cod, vsq.right, esq.right);
  return GraphSquare(carrier_hom, quotient_hom, mediator, base_hom);
}

// ---------------------------------------------------------------------------
// Graph pullback spans and amalgamation

struct GraphSpan {
  GraphHom base_a;  // a: L -> A
  GraphHom base_r;  // r: L -> R
  GraphHom carrier; // gamma: I -> L
  GraphSquare left, right;

  PullbackSpan vertex_span() const {
    return PullbackSpan{base_a.on_vertices, base_r.on_vertices, carrier.on_vertices,
                        left.vertex_square(), right.vertex_square()};
  }
  PullbackSpan edge_span() const {
    return PullbackSpan{base_a.on_edges, base_r.on_edges, carrier.on_edges,
                        left.edge_square(), right.edge_square()};
  }

  friend bool operator==(const GraphSpan&, const GraphSpan&) = default;
};

inline void validate_graph_span(const GraphSpan& span) {
  detail::require(span.left.left == span.carrier && span.right.left == span.carrier,
                  "GraphSpan: squares do not share the carrier");
  detail::require(span.left.bottom == span.base_a && span.right.bottom == span.base_r,
                  "GraphSpan: squares not over the base span");
  validate_span(span.vertex_span());
  validate_span(span.edge_span());
}

struct GraphCube {
  GraphSpan span;
  GraphSquare bottom;
  GraphHom sigma;       // K -> S
  GraphHom s_prime;     // I -> K
  GraphHom abar_prime;  // H -> K
  GraphHom rbar_prime;  // J -> K

  friend bool operator==(const GraphCube&, const GraphCube&) = default;
};

inline void validate_graph_cube(const GraphCube& cube) {
  validate_graph_span(cube.span);
  GraphSquare top(cube.span.left.top, cube.span.right.top, cube.abar_prime,
                  cube.rbar_prime);
  GraphSquare front(cube.span.left.right, cube.rbar_prime, cube.sigma, cube.bottom.bottom);
  GraphSquare rightf(cube.span.right.right, cube.abar_prime, cube.sigma, cube.bottom.right);
  detail::require(is_graph_pullback(front), "GraphCube: front face is not a pullback");
  detail::require(is_graph_pullback(rightf), "GraphCube: right face is not a pullback");
  detail::require(compose(cube.abar_prime, cube.span.right.top) == cube.s_prime,
                  "GraphCube: abar' . r' != s'");
  detail::require(compose(cube.rbar_prime, cube.span.left.top) == cube.s_prime,
                  "GraphCube: rbar' . a' != s'");
  if (is_graph_pushout(cube.bottom))
    detail::require(is_graph_pushout(top), "GraphCube: top face is not a pushout");
}

/// Componentwise coherence and amalgamation, then the graph structure of the
/// apex is assembled and every face verified. Fails (returns nullopt) iff a
/// component fails coherence; a well-definedness failure of the induced
/// src/tgt would signal a genuinely non-amalgamable span and throws.
inline std::optional<GraphCube> amalgamate_graph(const GraphSpan& span,
                                                 const GraphSquare& bottom) {
  detail::require(is_graph_pushout(bottom), "amalgamate_graph: bottom is not a pushout");
  validate_graph_span(span);
  detail::require(bottom.left == span.base_a && bottom.top == span.base_r,
                  "amalgamate_graph: bottom square does not extend the span legs");

  CommutingSquare vbottom = bottom.vertex_square();
  CommutingSquare ebottom = bottom.edge_square();
  auto vcube = amalgamate(span.vertex_span(), vbottom);
  if (!vcube) return std::nullopt;
  auto ecube = amalgamate(span.edge_span(), ebottom);
  if (!ecube) return std::nullopt;

  // Induced src/tgt on the apex K: on the quotient part via s', on the free
  // parts via the mediators of the vertex cube.
  const FinSet& kv = vcube->sigma.dom();
  const FinSet& ke = ecube->sigma.dom();
  std::map<std::string, std::string> src_assign, tgt_assign;
  const FinGraph& gi = span.carrier.dom;
  for (const auto& ie : gi.edges.elements()) {
    const std::string& kedge = ecube->s_prime.at(ie);
    std::string sv = vcube->s_prime.at(gi.src.at(ie));
    std::string tv = vcube->s_prime.at(gi.tgt.at(ie));
    auto [sit, snew] = src_assign.emplace(kedge, sv);
    detail::require(snew || sit->second == sv,
                    "amalgamate_graph: induced src not well defined");
    auto [tit, tnew] = tgt_assign.emplace(kedge, tv);
    detail::require(tnew || tit->second == tv,
                    "amalgamate_graph: induced tgt not well defined");
  }
  const FinGraph& gj = span.left.top.cod;  // J
  for (const auto& je : gj.edges.elements()) {
    const std::string& kedge = ecube->rbar_prime.at(je);
    if (src_assign.count(kedge)) continue;  // already covered via the carrier
    src_assign[kedge] = vcube->rbar_prime.at(gj.src.at(je));
    tgt_assign[kedge] = vcube->rbar_prime.at(gj.tgt.at(je));
  }
  const FinGraph& gh = span.right.top.cod;  // H
  for (const auto& he : gh.edges.elements()) {
    const std::string& kedge = ecube->abar_prime.at(he);
    if (src_assign.count(kedge)) continue;
    src_assign[kedge] = vcube->abar_prime.at(gh.src.at(he));
    tgt_assign[kedge] = vcube->abar_prime.at(gh.tgt.at(he));
  }
  detail::require(src_assign.size() == ke.size() && tgt_assign.size() == ke.size(),
                  "amalgamate_graph: apex edge not reached by any mediator");

  FinGraph apex(kv, ke, FinMap(ke, kv, src_assign), FinMap(ke, kv, tgt_assign));
  const FinGraph& gs = bottom.bottom.cod;  // S
  GraphCube cube{span,
                 bottom,
                 GraphHom(apex, gs, vcube->sigma, ecube->sigma),
                 GraphHom(gi, apex, vcube->s_prime, ecube->s_prime),
                 GraphHom(gh, apex, vcube->abar_prime, ecube->abar_prime),
                 GraphHom(gj, apex, vcube->rbar_prime, ecube->rbar_prime)};
  try {
    validate_graph_cube(cube);
  } catch (const std::invalid_argument& e) {
    throw std::logic_error(std::string("amalgamate_graph: postcondition failed: ") + e.what());
  }
  return cube;
}

}  // namespace vk
