#pragma once

// Finite sets, total maps and partitions -- the ambient exact category
// everything else in this library is built on. All values are immutable
// after construction and canonically ordered, so structural equality is
// semantic equality.

#include <algorithm>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vk {

namespace detail {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace detail

/// A finite set of named elements, kept sorted so equal sets compare equal.
class FinSet {
 public:
  FinSet() = default;

  explicit FinSet(std::vector<std::string> elements) : elems_(std::move(elements)) {
    std::sort(elems_.begin(), elems_.end());
    auto dup = std::adjacent_find(elems_.begin(), elems_.end());
    detail::require(dup == elems_.end(),
                    "FinSet: duplicate element '" + (dup == elems_.end() ? "" : *dup) + "'");
  }

  FinSet(std::initializer_list<std::string> elements)
      : FinSet(std::vector<std::string>(elements)) {}

  const std::vector<std::string>& elements() const { return elems_; }
  std::size_t size() const { return elems_.size(); }
  bool empty() const { return elems_.empty(); }

  bool contains(const std::string& x) const {
    return std::binary_search(elems_.begin(), elems_.end(), x);
  }

  std::optional<std::size_t> index_of(const std::string& x) const {
    auto it = std::lower_bound(elems_.begin(), elems_.end(), x);
    if (it == elems_.end() || *it != x) return std::nullopt;
    return static_cast<std::size_t>(it - elems_.begin());
  }

  bool subset_of(const FinSet& other) const {
    return std::includes(other.elems_.begin(), other.elems_.end(), elems_.begin(),
                         elems_.end());
  }

  friend bool operator==(const FinSet&, const FinSet&) = default;
  friend bool operator<(const FinSet& a, const FinSet& b) { return a.elems_ < b.elems_; }

 private:
  std::vector<std::string> elems_;
};

/// A total map between finite sets with a designated codomain.
class FinMap {
 public:
  FinMap() = default;

  FinMap(FinSet dom, FinSet cod, const std::map<std::string, std::string>& assignment)
      : dom_(std::move(dom)), cod_(std::move(cod)) {
    img_.reserve(dom_.size());
    for (const auto& x : dom_.elements()) {
      auto it = assignment.find(x);
      detail::require(it != assignment.end(), "FinMap: no image for '" + x + "'");
      detail::require(cod_.contains(it->second),
                      "FinMap: image '" + it->second + "' of '" + x + "' not in codomain");
      img_.push_back(it->second);
    }
    detail::require(assignment.size() == dom_.size(),
                    "FinMap: assignment mentions elements outside the domain");
  }

  template <typename F>
  static FinMap from_fn(FinSet dom, FinSet cod, F&& f) {
    std::map<std::string, std::string> assign;
    for (const auto& x : dom.elements()) assign[x] = f(x);
    return FinMap(std::move(dom), std::move(cod), assign);
  }

  static FinMap identity(FinSet s) {
    FinSet cod = s;
    return from_fn(std::move(s), std::move(cod), [](const std::string& x) { return x; });
  }

  const FinSet& dom() const { return dom_; }
  const FinSet& cod() const { return cod_; }

  const std::string& at(const std::string& x) const {
    auto idx = dom_.index_of(x);
    detail::require(idx.has_value(), "FinMap: '" + x + "' not in domain");
    return img_[*idx];
  }

  const std::string& at_index(std::size_t i) const { return img_[i]; }

  /// Preimage of y, sorted.
  std::vector<std::string> fiber(const std::string& y) const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < img_.size(); ++i)
      if (img_[i] == y) out.push_back(dom_.elements()[i]);
    return out;
  }

  FinSet image() const {
    std::vector<std::string> vals = img_;
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    return FinSet(std::move(vals));
  }

  bool injective() const {
    std::vector<std::string> vals = img_;
    std::sort(vals.begin(), vals.end());
    return std::adjacent_find(vals.begin(), vals.end()) == vals.end();
  }

  bool surjective() const { return image() == cod_; }
  bool bijective() const { return injective() && surjective(); }

  friend bool operator==(const FinMap&, const FinMap&) = default;
  friend bool operator<(const FinMap& a, const FinMap& b) {
    return std::tie(a.dom_, a.cod_, a.img_) < std::tie(b.dom_, b.cod_, b.img_);
  }

 private:
  FinSet dom_, cod_;
  std::vector<std::string> img_;  // parallel to dom_.elements()
};

inline FinMap compose(const FinMap& g, const FinMap& f) {
  detail::require(f.cod() == g.dom(), "compose: codomain/domain mismatch");
  return FinMap::from_fn(f.dom(), g.cod(),
                         [&](const std::string& x) { return g.at(f.at(x)); });
}

struct MapClass {
  bool mono = false;
  bool epi = false;
  bool iso = false;
};

inline MapClass classify(const FinMap& f) {
  MapClass c;
  c.mono = f.injective();
  c.epi = f.surjective();
  c.iso = c.mono && c.epi;
  return c;
}

/// f = m . e with e surjective onto the (canonically ordered) image and m the
/// inclusion of the image into cod(f).
inline std::pair<FinMap, FinMap> epi_mono_factorize(const FinMap& f) {
  FinSet img = f.image();
  FinMap e = FinMap::from_fn(f.dom(), img, [&](const std::string& x) { return f.at(x); });
  FinMap m = FinMap::from_fn(img, f.cod(), [](const std::string& y) { return y; });
  return {e, m};
}

/// An equivalence relation on a finite carrier, in canonical block form:
/// blocks are sorted internally and listed by their least element.
class Partition {
 public:
  Partition() = default;

  Partition(FinSet carrier, std::vector<std::vector<std::string>> blocks)
      : carrier_(std::move(carrier)) {
    std::size_t covered = 0;
    for (auto& b : blocks) {
      detail::require(!b.empty(), "Partition: empty block");
      std::sort(b.begin(), b.end());
      detail::require(std::adjacent_find(b.begin(), b.end()) == b.end(),
                      "Partition: duplicate element within a block");
      for (const auto& x : b)
        detail::require(carrier_.contains(x), "Partition: '" + x + "' not in carrier");
      covered += b.size();
    }
    detail::require(covered == carrier_.size(),
                    "Partition: blocks do not cover the carrier exactly once");
    std::sort(blocks.begin(), blocks.end());
    blocks_ = std::move(blocks);
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      for (const auto& x : blocks_[i]) block_index_[x] = i;
    detail::require(block_index_.size() == carrier_.size(),
                    "Partition: blocks overlap");
  }

  static Partition discrete(const FinSet& carrier) {
    std::vector<std::vector<std::string>> blocks;
    for (const auto& x : carrier.elements()) blocks.push_back({x});
    return Partition(carrier, std::move(blocks));
  }

  static Partition single_block(const FinSet& carrier) {
    if (carrier.empty()) return Partition(carrier, {});
    return Partition(carrier, {carrier.elements()});
  }

  /// Equivalence closure of the given pairs (union-find).
  static Partition from_pairs(const FinSet& carrier,
                              const std::vector<std::pair<std::string, std::string>>& pairs);

  const FinSet& carrier() const { return carrier_; }
  const std::vector<std::vector<std::string>>& blocks() const { return blocks_; }

  std::size_t block_index(const std::string& x) const {
    auto it = block_index_.find(x);
    detail::require(it != block_index_.end(), "Partition: '" + x + "' not in carrier");
    return it->second;
  }

  const std::vector<std::string>& block_of(const std::string& x) const {
    return blocks_[block_index(x)];
  }

  bool same_block(const std::string& x, const std::string& y) const {
    return block_index(x) == block_index(y);
  }

  const std::string& representative(const std::string& x) const {
    return block_of(x).front();
  }

  /// True when every block of this partition is contained in a block of other.
  bool refines(const Partition& other) const {
    detail::require(carrier_ == other.carrier_, "refines: carrier mismatch");
    for (const auto& b : blocks_)
      for (const auto& x : b)
        if (!other.same_block(b.front(), x)) return false;
    return true;
  }

  /// All ordered same-block pairs, diagonal included, in block-then-pair order.
  std::vector<std::pair<std::string, std::string>> ordered_pairs() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& b : blocks_)
      for (const auto& x : b)
        for (const auto& y : b) out.emplace_back(x, y);
    return out;
  }

  friend bool operator==(const Partition& a, const Partition& b) {
    return a.carrier_ == b.carrier_ && a.blocks_ == b.blocks_;
  }

 private:
  FinSet carrier_;
  std::vector<std::vector<std::string>> blocks_;
  std::map<std::string, std::size_t> block_index_;
};

namespace detail {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) {
    for (std::size_t i = 0; i < n; ++i) parent_[i] = i;
  }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  bool unite(std::size_t x, std::size_t y) {
    x = find(x);
    y = find(y);
    if (x == y) return false;
    if (rank_[x] < rank_[y]) std::swap(x, y);
    parent_[y] = x;
    if (rank_[x] == rank_[y]) ++rank_[x];
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> rank_;
};

}  // namespace detail

inline Partition Partition::from_pairs(
    const FinSet& carrier, const std::vector<std::pair<std::string, std::string>>& pairs) {
  detail::UnionFind uf(carrier.size());
  for (const auto& [x, y] : pairs) {
    auto ix = carrier.index_of(x);
    auto iy = carrier.index_of(y);
    detail::require(ix && iy, "Partition::from_pairs: pair element not in carrier");
    uf.unite(*ix, *iy);
  }
  std::map<std::size_t, std::vector<std::string>> by_root;
  for (std::size_t i = 0; i < carrier.size(); ++i)
    by_root[uf.find(i)].push_back(carrier.elements()[i]);
  std::vector<std::vector<std::string>> blocks;
  blocks.reserve(by_root.size());
  for (auto& [root, block] : by_root) blocks.push_back(std::move(block));
  return Partition(carrier, std::move(blocks));
}

/// ker(f): x ~ y iff f(x) = f(y).
inline Partition kernel_pair(const FinMap& f) {
  std::map<std::string, std::vector<std::string>> fibers;
  for (const auto& x : f.dom().elements()) fibers[f.at(x)].push_back(x);
  std::vector<std::vector<std::string>> blocks;
  for (auto& [y, block] : fibers) blocks.push_back(std::move(block));
  return Partition(f.dom(), std::move(blocks));
}

/// Least upper bound in the partition lattice: the equivalence closure of
/// p1 together with p2.
inline Partition join(const Partition& p1, const Partition& p2) {
  detail::require(p1.carrier() == p2.carrier(), "join: carrier mismatch");
  detail::UnionFind uf(p1.carrier().size());
  auto add = [&](const Partition& p) {
    for (const auto& b : p.blocks()) {
      auto first = p1.carrier().index_of(b.front());
      for (const auto& x : b) uf.unite(*first, *p1.carrier().index_of(x));
    }
  };
  add(p1);
  add(p2);
  std::map<std::size_t, std::vector<std::string>> by_root;
  for (std::size_t i = 0; i < p1.carrier().size(); ++i)
    by_root[uf.find(i)].push_back(p1.carrier().elements()[i]);
  std::vector<std::vector<std::string>> blocks;
  for (auto& [root, block] : by_root) blocks.push_back(std::move(block));
  return Partition(p1.carrier(), std::move(blocks));
}

}  // namespace vk
