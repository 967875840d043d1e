#pragma once

// ── Module-set posets ────────────────────────────────────────────────────────
// Elements are admissible subsets of the declared modules: S is admissible iff
// every omitted module is transitively weaker (via `<<`) than some member of
// S.  The order is strict subset inclusion.  Explicit posets supply the
// elements and order pairs directly for shapes the declaration cannot express.

#include <hydla/ast.hpp>

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace hydla {

using ModuleSet = std::set<std::string>;

inline std::string to_string(const ModuleSet& s) {
  std::string out = "{";
  bool first = true;
  for (const auto& m : s) {
    if (!first) out += ", ";
    out += m;
    first = false;
  }
  return out + "}";
}

struct ModuleSetPoset {
  std::vector<ModuleSet> elements;         // sorted by (size, lexicographic)
  std::vector<std::vector<bool>> less;     // less[i][j]: elements[i] ≺ elements[j]

  [[nodiscard]] int index_of(const ModuleSet& s) const {
    for (std::size_t i = 0; i < elements.size(); ++i)
      if (elements[i] == s) return static_cast<int>(i);
    return -1;
  }

  [[nodiscard]] std::vector<int> strictly_above(int i) const {
    std::vector<int> out;
    for (std::size_t j = 0; j < elements.size(); ++j)
      if (less[i][j]) out.push_back(static_cast<int>(j));
    return out;
  }

  [[nodiscard]] bool is_maximal(int i) const {
    for (std::size_t j = 0; j < elements.size(); ++j)
      if (less[i][j]) return false;
    return true;
  }

  /// Indices i in `candidates` with no j in `candidates` strictly above i.
  [[nodiscard]] std::vector<int> maximal_among(const std::vector<int>& candidates) const {
    std::vector<int> out;
    for (int i : candidates) {
      bool dominated = false;
      for (int j : candidates)
        if (less[i][j]) { dominated = true; break; }
      if (!dominated) out.push_back(i);
    }
    return out;
  }

  /// Hasse edges (covering relation), deterministic order.
  [[nodiscard]] std::vector<std::pair<int, int>> hasse_edges() const {
    std::vector<std::pair<int, int>> out;
    for (std::size_t i = 0; i < elements.size(); ++i)
      for (std::size_t j = 0; j < elements.size(); ++j) {
        if (!less[i][j]) continue;
        bool covering = true;
        for (std::size_t k = 0; k < elements.size(); ++k)
          if (less[i][k] && less[k][j]) { covering = false; break; }
        if (covering) out.emplace_back(static_cast<int>(i), static_cast<int>(j));
      }
    return out;
  }

  /// The union of all elements.
  [[nodiscard]] ModuleSet all_modules() const {
    ModuleSet out;
    for (const auto& e : elements) out.insert(e.begin(), e.end());
    return out;
  }
};

namespace detail {

inline void sort_elements_canonical(std::vector<ModuleSet>& elems) {
  std::sort(elems.begin(), elems.end(), [](const ModuleSet& a, const ModuleSet& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  });
}

inline ModuleSetPoset poset_from_subset_order(std::vector<ModuleSet> elems) {
  sort_elements_canonical(elems);
  ModuleSetPoset p;
  p.elements = std::move(elems);
  std::size_t n = p.elements.size();
  p.less.assign(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j &&
          std::includes(p.elements[j].begin(), p.elements[j].end(),
                        p.elements[i].begin(), p.elements[i].end()) &&
          p.elements[i].size() < p.elements[j].size())
        p.less[i][j] = true;
  return p;
}

/// Collects m ≺ m' pairs from a declaration: within a priority chain, every
/// module of a factor is weaker than every module of the next factor.
inline void collect_priority_pairs(const Decl& d,
                                   std::set<std::pair<std::string, std::string>>& out) {
  if (d.kind == Decl::Kind::priority) {
    for (std::size_t i = 0; i + 1 < d.children.size(); ++i) {
      std::vector<std::string> weak, strong;
      collect_modules(d.children[i], weak);
      collect_modules(d.children[i + 1], strong);
      for (const auto& w : weak)
        for (const auto& s : strong) out.emplace(w, s);
    }
  }
  if (d.kind != Decl::Kind::module_ref)
    for (const auto& ch : d.children) collect_priority_pairs(ch, out);
}

}  // namespace detail

/// Module-level priority relation (transitive closure of the `<<` pairs).
struct ModulePriority {
  std::vector<std::string> modules;          // sorted
  std::vector<std::vector<bool>> weaker;     // weaker[i][j]: modules[i] ≺ modules[j]

  [[nodiscard]] int index_of(const std::string& m) const {
    auto it = std::lower_bound(modules.begin(), modules.end(), m);
    if (it == modules.end() || *it != m) return -1;
    return static_cast<int>(it - modules.begin());
  }

  void close_transitively() {
    std::size_t n = modules.size();
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < n; ++i)
        if (weaker[i][k])
          for (std::size_t j = 0; j < n; ++j)
            if (weaker[k][j]) weaker[i][j] = true;
    for (std::size_t i = 0; i < n; ++i)
      if (weaker[i][i])
        throw std::invalid_argument("priority relation has a cycle involving '" +
                                    modules[i] + "'");
  }
};

inline ModulePriority priority_from_decl(const Decl& d) {
  ModulePriority p;
  std::vector<std::string> mods;
  collect_modules(d, mods);
  std::sort(mods.begin(), mods.end());
  mods.erase(std::unique(mods.begin(), mods.end()), mods.end());
  p.modules = std::move(mods);
  std::size_t n = p.modules.size();
  p.weaker.assign(n, std::vector<bool>(n, false));
  std::set<std::pair<std::string, std::string>> pairs;
  detail::collect_priority_pairs(d, pairs);
  for (const auto& [w, s] : pairs) {
    if (w == s) continue;
    p.weaker[p.index_of(w)][p.index_of(s)] = true;
  }
  p.close_transitively();
  return p;
}

/// Enumerates admissible subsets of a module priority relation.
/// S is admissible iff every omitted module has a strictly stronger member in S.
inline std::vector<ModuleSet> admissible_sets(const ModulePriority& pr) {
  std::size_t n = pr.modules.size();
  if (n > 20)
    throw std::invalid_argument("poset derivation over " + std::to_string(n) +
                                " modules is not supported; supply an explicit poset");
  std::vector<ModuleSet> out;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    bool ok = true;
    for (std::size_t m = 0; m < n && ok; ++m) {
      if (mask & (1u << m)) continue;
      bool justified = false;
      for (std::size_t s = 0; s < n; ++s)
        if ((mask & (1u << s)) && pr.weaker[m][s]) { justified = true; break; }
      if (!justified) ok = false;
    }
    if (!ok) continue;
    ModuleSet set;
    for (std::size_t m = 0; m < n; ++m)
      if (mask & (1u << m)) set.insert(pr.modules[m]);
    out.push_back(std::move(set));
  }
  return out;
}

inline ModuleSetPoset derive_module_poset(const Decl& d) {
  return detail::poset_from_subset_order(admissible_sets(priority_from_decl(d)));
}

/// Explicit poset: element sets plus order pairs (weaker index, stronger index).
/// The transitive closure is taken; reflexive pairs and cycles are rejected.
inline ModuleSetPoset make_explicit_poset(std::vector<ModuleSet> elements,
                                          const std::vector<std::pair<int, int>>& order) {
  for (std::size_t i = 0; i < elements.size(); ++i)
    for (std::size_t j = i + 1; j < elements.size(); ++j)
      if (elements[i] == elements[j])
        throw std::invalid_argument("explicit poset repeats an element");
  std::vector<ModuleSet> original = elements;
  detail::sort_elements_canonical(elements);
  // Map supplied indices (over the original order) to canonical positions.
  std::vector<std::size_t> remap(original.size());
  for (std::size_t o = 0; o < original.size(); ++o)
    for (std::size_t i = 0; i < elements.size(); ++i)
      if (elements[i] == original[o]) {
        remap[o] = i;
        break;
      }
  auto canonical_index = [&](int orig) -> std::size_t {
    if (orig < 0 || orig >= static_cast<int>(remap.size()))
      throw std::invalid_argument("explicit poset order index out of range");
    return remap[static_cast<std::size_t>(orig)];
  };
  ModuleSetPoset p;
  p.elements = std::move(elements);
  std::size_t n = p.elements.size();
  p.less.assign(n, std::vector<bool>(n, false));
  for (const auto& [w, s] : order) {
    std::size_t i = canonical_index(w), j = canonical_index(s);
    if (i == j) throw std::invalid_argument("explicit poset order pair (S,S) violates irreflexivity");
    p.less[i][j] = true;
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      if (p.less[i][k])
        for (std::size_t j = 0; j < n; ++j)
          if (p.less[k][j]) p.less[i][j] = true;
  for (std::size_t i = 0; i < n; ++i)
    if (p.less[i][i]) throw std::invalid_argument("explicit poset order has a cycle");
  return p;
}

}  // namespace hydla
