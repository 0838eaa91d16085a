#include "mmgn/canonical.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <tuple>

namespace mmgn::smiles {

namespace {

constexpr int kRefinementRounds = 10;

int bond_key(const Bond& b) { return b.aromatic ? 4 : b.order; }

// Dense ranks of arbitrary sortable keys, 0-based.
template <typename Key>
std::vector<int> dense_ranks(const std::vector<Key>& keys) {
  std::vector<std::size_t> order(keys.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  std::vector<int> ranks(keys.size(), 0);
  int rank = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i > 0 && keys[order[i - 1]] < keys[order[i]]) ++rank;
    ranks[order[i]] = rank;
  }
  return ranks;
}

struct Writer {
  const MoleculeGraph& g;
  const std::vector<int>& ranks;
  std::vector<std::vector<int>> adj;
  std::vector<int> disc;                 // discovery order, -1 unvisited
  std::vector<int> tree_parent_bond;
  std::vector<bool> is_back_edge;
  // back-edge digit bookkeeping
  std::map<int, int> edge_digit;          // bond index -> allocated digit
  std::vector<bool> digit_in_use;
  std::string out;

  explicit Writer(const MoleculeGraph& graph, const std::vector<int>& r)
      : g(graph), ranks(r), adj(graph.adjacency()),
        disc(graph.atoms.size(), -1),
        tree_parent_bond(graph.atoms.size(), -1),
        is_back_edge(graph.bonds.size(), false),
        digit_in_use(100, false) {}

  int other_end(int bond_index, int atom) const {
    const Bond& b = g.bonds[static_cast<std::size_t>(bond_index)];
    return b.a == atom ? b.b : b.a;
  }

  // Neighbor visit order: rank, then bond key, then input index as the
  // final (automorphism-safe) tie-break.
  std::vector<int> ordered_bonds(int atom) const {
    std::vector<int> bonds = adj[static_cast<std::size_t>(atom)];
    std::sort(bonds.begin(), bonds.end(), [&](int x, int y) {
      const int nx = other_end(x, atom), ny = other_end(y, atom);
      return std::make_tuple(ranks[static_cast<std::size_t>(nx)],
                             bond_key(g.bonds[static_cast<std::size_t>(x)]), nx) <
             std::make_tuple(ranks[static_cast<std::size_t>(ny)],
                             bond_key(g.bonds[static_cast<std::size_t>(y)]), ny);
    });
    return bonds;
  }

  // Pass 1: classify tree vs back edges, record discovery order.
  void classify(int root) {
    int timer = 0;
    std::vector<std::pair<int, std::size_t>> stack;  // atom, next position
    std::vector<std::vector<int>> order(g.atoms.size());
    disc[static_cast<std::size_t>(root)] = timer++;
    order[static_cast<std::size_t>(root)] = ordered_bonds(root);
    stack.push_back({root, 0});
    while (!stack.empty()) {
      auto& [u, pos] = stack.back();
      auto& edges = order[static_cast<std::size_t>(u)];
      if (pos >= edges.size()) {
        stack.pop_back();
        continue;
      }
      const int bi = edges[pos++];
      if (bi == tree_parent_bond[static_cast<std::size_t>(u)]) continue;
      const int v = other_end(bi, u);
      if (disc[static_cast<std::size_t>(v)] == -1) {
        disc[static_cast<std::size_t>(v)] = timer++;
        tree_parent_bond[static_cast<std::size_t>(v)] = bi;
        order[static_cast<std::size_t>(v)] = ordered_bonds(v);
        stack.push_back({v, 0});
      } else if (disc[static_cast<std::size_t>(v)] < disc[static_cast<std::size_t>(u)]) {
        is_back_edge[static_cast<std::size_t>(bi)] = true;
      }
    }
  }

  std::string bond_symbol(const Bond& b) const {
    if (b.aromatic) {
      const bool both = g.atoms[static_cast<std::size_t>(b.a)].aromatic &&
                        g.atoms[static_cast<std::size_t>(b.b)].aromatic;
      return both ? "" : ":";
    }
    switch (b.order) {
      case 2: return "=";
      case 3: return "#";
      default: {
        const bool both = g.atoms[static_cast<std::size_t>(b.a)].aromatic &&
                          g.atoms[static_cast<std::size_t>(b.b)].aromatic;
        return both ? "-" : "";  // explicit single between aromatic atoms
      }
    }
  }

  std::string atom_token(int idx) const {
    const Atom& a = g.atoms[static_cast<std::size_t>(idx)];
    std::string symbol = a.element;
    if (a.aromatic) {
      for (char& c : symbol) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    bool bare_ok = a.charge == 0 && a.element != "H";
    if (bare_ok) {
      // Bare form is only correct when a re-parse recomputes the same
      // hydrogen count.
      int bonded = 0;
      for (int bi : adj[static_cast<std::size_t>(idx)]) {
        const Bond& b = g.bonds[static_cast<std::size_t>(bi)];
        bonded += b.aromatic ? 1 : b.order;
      }
      const std::vector<int>& valences = element_valences(a.element);
      int max_allowed = 0;
      for (int v : valences) max_allowed = std::max(max_allowed, v);
      int total = bonded;
      if (a.aromatic && total + 1 <= max_allowed) total += 1;
      const int h = implied_hydrogens(a.element, 0, total);
      bare_ok = h == a.implicit_h;
    }
    if (bare_ok) return symbol;
    std::string tok = "[" + symbol;
    if (a.implicit_h == 1) {
      tok += "H";
    } else if (a.implicit_h > 1) {
      tok += "H" + std::to_string(a.implicit_h);
    }
    if (a.charge > 0) tok += a.charge == 1 ? "+" : "+" + std::to_string(a.charge);
    if (a.charge < 0) tok += a.charge == -1 ? "-" : "-" + std::to_string(-a.charge);
    return tok + "]";
  }

  std::string digit_token(int digit) const {
    if (digit < 10) return std::to_string(digit);
    return "%" + std::to_string(digit);
  }

  void emit_ring_digits(int u) {
    // All incident back edges, ordered by the other endpoint's discovery
    // index so the emission is independent of input atom order.
    std::vector<int> backs;
    for (int bi : adj[static_cast<std::size_t>(u)]) {
      if (is_back_edge[static_cast<std::size_t>(bi)]) backs.push_back(bi);
    }
    std::sort(backs.begin(), backs.end(), [&](int x, int y) {
      return disc[static_cast<std::size_t>(other_end(x, u))] <
             disc[static_cast<std::size_t>(other_end(y, u))];
    });
    for (int bi : backs) {
      const Bond& b = g.bonds[static_cast<std::size_t>(bi)];
      auto it = edge_digit.find(bi);
      int digit;
      if (it == edge_digit.end()) {
        digit = 1;
        while (digit < 100 && digit_in_use[static_cast<std::size_t>(digit)]) ++digit;
        digit_in_use[static_cast<std::size_t>(digit)] = true;
        edge_digit[bi] = digit;
      } else {
        digit = it->second;
        digit_in_use[static_cast<std::size_t>(digit)] = false;
      }
      out += bond_symbol(b);
      out += digit_token(digit);
    }
  }

  // Pass 2: emit in the same DFS order.
  void emit(int root) {
    struct Frame {
      int atom;
      std::vector<int> children;  // tree bond indices in visit order
      std::size_t next = 0;
      bool parenthesized = false;
    };
    std::vector<Frame> stack;
    const auto make_frame = [&](int u) {
      Frame f;
      f.atom = u;
      for (int bi : ordered_bonds(u)) {
        if (bi == tree_parent_bond[static_cast<std::size_t>(u)]) continue;
        if (is_back_edge[static_cast<std::size_t>(bi)]) continue;
        const int v = other_end(bi, u);
        if (tree_parent_bond[static_cast<std::size_t>(v)] == bi) f.children.push_back(bi);
      }
      return f;
    };
    out += atom_token(root);
    emit_ring_digits(root);
    stack.push_back(make_frame(root));
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next >= f.children.size()) {
        if (f.parenthesized) out += ")";
        stack.pop_back();
        continue;
      }
      const int bi = f.children[f.next++];
      const bool needs_paren = f.next < f.children.size();
      const int v = other_end(bi, f.atom);
      if (needs_paren) out += "(";
      out += bond_symbol(g.bonds[static_cast<std::size_t>(bi)]);
      out += atom_token(v);
      emit_ring_digits(v);
      Frame child = make_frame(v);
      child.parenthesized = needs_paren;
      stack.push_back(std::move(child));
    }
  }
};

}  // namespace

std::vector<int> canonical_ranks(const MoleculeGraph& g) {
  const std::size_t n = g.atoms.size();
  std::vector<std::tuple<std::string, int, int, int, bool>> seed(n);
  const auto adj = g.adjacency();
  for (std::size_t i = 0; i < n; ++i) {
    const Atom& a = g.atoms[i];
    seed[i] = {a.element, static_cast<int>(adj[i].size()), a.charge, a.implicit_h,
               a.aromatic};
  }
  std::vector<int> ranks = dense_ranks(seed);
  for (int round = 0; round < kRefinementRounds; ++round) {
    std::vector<std::pair<int, std::vector<std::pair<int, int>>>> keys(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::pair<int, int>> neigh;
      for (int bi : adj[i]) {
        const Bond& b = g.bonds[static_cast<std::size_t>(bi)];
        const int v = b.a == static_cast<int>(i) ? b.b : b.a;
        neigh.emplace_back(bond_key(b), ranks[static_cast<std::size_t>(v)]);
      }
      std::sort(neigh.begin(), neigh.end());
      keys[i] = {ranks[i], std::move(neigh)};
    }
    std::vector<int> refined = dense_ranks(keys);
    if (refined == ranks) break;
    ranks = std::move(refined);
  }
  return ranks;
}

std::string canonical_form(const MoleculeGraph& g) {
  if (g.atoms.empty()) return "";
  const std::vector<int> ranks = canonical_ranks(g);
  int root = 0;
  for (std::size_t i = 1; i < g.atoms.size(); ++i) {
    if (ranks[i] < ranks[static_cast<std::size_t>(root)]) root = static_cast<int>(i);
  }
  Writer w(g, ranks);
  w.classify(root);
  w.emit(root);
  return w.out;
}

}  // namespace mmgn::smiles
