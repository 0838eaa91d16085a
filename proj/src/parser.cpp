#include "mmgn/parser.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "mmgn/smiles.hpp"

namespace mmgn::smiles {

namespace {

const std::map<std::string, std::vector<int>>& valence_table() {
  static const std::map<std::string, std::vector<int>> table = {
      {"H", {1}},  {"B", {3}},     {"C", {4}},  {"N", {3}},  {"O", {2}},
      {"F", {1}},  {"P", {3, 5}},  {"S", {2, 4, 6}},         {"Cl", {1}},
      {"Br", {1}}, {"I", {1}},
  };
  return table;
}

bool is_organic_subset(const std::string& el) {
  static const std::vector<std::string> organic = {"B", "C", "N", "O", "P",
                                                   "S", "F", "Cl", "Br", "I"};
  return std::find(organic.begin(), organic.end(), el) != organic.end();
}

bool aromatic_capable(const std::string& el) {
  return el == "B" || el == "C" || el == "N" || el == "O" || el == "P" || el == "S";
}

struct PendingRing {
  int atom = -1;
  int order = 0;      // 0 = unspecified
  bool aromatic_bond = false;
};

struct ParserState {
  MoleculeGraph graph;
  std::vector<int> branch_stack;
  std::map<int, PendingRing> open_rings;
  int prev_atom = -1;
  int pending_order = 0;       // bond symbol seen, waiting for an atom/ring
  bool pending_aromatic = false;
  bool pending_bond = false;
};

int bond_order_total(const MoleculeGraph& g, int atom, bool& has_aromatic) {
  int total = 0;
  has_aromatic = false;
  for (const Bond& b : g.bonds) {
    if (b.a != atom && b.b != atom) continue;
    if (b.aromatic) {
      total += 1;
      has_aromatic = true;
    } else {
      total += b.order;
    }
  }
  return total;
}

void add_bond(ParserState& st, int a, int b, int order, bool aromatic) {
  if (a == b) throw ParseError("self-bond on atom " + std::to_string(a));
  for (const Bond& existing : st.graph.bonds) {
    if ((existing.a == a && existing.b == b) || (existing.a == b && existing.b == a)) {
      throw ParseError("duplicate bond between atoms " + std::to_string(a) + " and " +
                       std::to_string(b));
    }
  }
  st.graph.bonds.push_back({a, b, order, aromatic});
}

// Parses the inside of a bracket token "[...]" into an Atom.
Atom parse_bracket(const std::string& token) {
  Atom atom;
  atom.bracket = true;
  atom.declared_h = 0;
  std::size_t i = 1;                       // past '['
  const std::size_t end = token.size() - 1;  // at ']'
  if (i >= end) throw ParseError("empty bracket atom");
  if (std::isdigit(static_cast<unsigned char>(token[i]))) {
    throw ParseError("isotope specifications are not supported: " + token);
  }
  // Element symbol: one or two letters; lowercase single letter = aromatic.
  const char c0 = token[i];
  if (std::isupper(static_cast<unsigned char>(c0))) {
    std::string el(1, c0);
    if (i + 1 < end && std::islower(static_cast<unsigned char>(token[i + 1]))) {
      const std::string two = el + token[i + 1];
      if (valence_table().count(two)) {
        el = two;
        ++i;
      }
    }
    if (!valence_table().count(el)) throw ParseError("unsupported element '" + el + "'");
    atom.element = el;
    ++i;
  } else if (std::islower(static_cast<unsigned char>(c0))) {
    std::string el(1, static_cast<char>(std::toupper(static_cast<unsigned char>(c0))));
    if (!valence_table().count(el) || !aromatic_capable(el)) {
      throw ParseError("unsupported aromatic element '" + std::string(1, c0) + "'");
    }
    atom.element = el;
    atom.aromatic = true;
    ++i;
  } else {
    throw ParseError("malformed bracket atom " + token);
  }
  // Optional chirality markers, ignored.
  while (i < end && token[i] == '@') ++i;
  // Optional hydrogen count.
  if (i < end && token[i] == 'H') {
    ++i;
    int h = 1;
    if (i < end && std::isdigit(static_cast<unsigned char>(token[i]))) {
      h = token[i] - '0';
      ++i;
    }
    atom.declared_h = h;
  }
  // Optional charge: +, -, ++, --, +n, -n.
  if (i < end && (token[i] == '+' || token[i] == '-')) {
    const char sign = token[i];
    ++i;
    int magnitude = 1;
    if (i < end && std::isdigit(static_cast<unsigned char>(token[i]))) {
      magnitude = token[i] - '0';
      ++i;
    } else {
      while (i < end && token[i] == sign) {
        ++magnitude;
        ++i;
      }
    }
    atom.charge = sign == '+' ? magnitude : -magnitude;
  }
  if (i != end) throw ParseError("malformed bracket atom " + token);
  atom.implicit_h = atom.declared_h;
  return atom;
}

void attach_atom(ParserState& st, Atom atom) {
  const int idx = static_cast<int>(st.graph.atoms.size());
  st.graph.atoms.push_back(std::move(atom));
  if (st.prev_atom >= 0) {
    int order = 1;
    bool aromatic = false;
    if (st.pending_bond) {
      order = st.pending_order;
      aromatic = st.pending_aromatic;
      if (aromatic) order = 1;
    } else if (st.graph.atoms[static_cast<std::size_t>(st.prev_atom)].aromatic &&
               st.graph.atoms[static_cast<std::size_t>(idx)].aromatic) {
      aromatic = true;
    }
    add_bond(st, st.prev_atom, idx, order, aromatic);
  } else if (st.pending_bond) {
    throw ParseError("bond with no preceding atom");
  }
  st.pending_bond = false;
  st.pending_order = 0;
  st.pending_aromatic = false;
  st.prev_atom = idx;
}

void handle_ring_digit(ParserState& st, int digit) {
  if (st.prev_atom < 0) throw ParseError("ring closure digit before any atom");
  auto it = st.open_rings.find(digit);
  if (it == st.open_rings.end()) {
    PendingRing pending;
    pending.atom = st.prev_atom;
    if (st.pending_bond) {
      pending.order = st.pending_aromatic ? 0 : st.pending_order;
      pending.aromatic_bond = st.pending_aromatic;
    }
    st.open_rings[digit] = pending;
  } else {
    const PendingRing open = it->second;
    st.open_rings.erase(it);
    int order = 0;
    bool aromatic = false;
    if (st.pending_bond) {
      order = st.pending_aromatic ? 0 : st.pending_order;
      aromatic = st.pending_aromatic;
    }
    // Bond symbol may appear on either side; disagreeing sides are an error.
    if (open.order != 0 || open.aromatic_bond) {
      if ((order != 0 || aromatic) &&
          (order != open.order || aromatic != open.aromatic_bond)) {
        throw ParseError("conflicting bond orders on ring closure " + std::to_string(digit));
      }
      order = open.order;
      aromatic = open.aromatic_bond;
    }
    if (order == 0 && !aromatic) {
      const Atom& a = st.graph.atoms[static_cast<std::size_t>(open.atom)];
      const Atom& b = st.graph.atoms[static_cast<std::size_t>(st.prev_atom)];
      if (a.aromatic && b.aromatic) {
        aromatic = true;
      }
      order = 1;
    }
    if (order == 0) order = 1;
    add_bond(st, open.atom, st.prev_atom, order, aromatic);
    st.graph.ring_closures.emplace_back(open.atom, st.prev_atom);
  }
  st.pending_bond = false;
  st.pending_order = 0;
  st.pending_aromatic = false;
}

// Assign implicit hydrogens and check valences. Aromatic atoms receive one
// extra shared pi allocation when it fits within an allowed valence.
void finalize(MoleculeGraph& g) {
  for (std::size_t i = 0; i < g.atoms.size(); ++i) {
    Atom& atom = g.atoms[i];
    bool has_aromatic_bond = false;
    const int bonded = bond_order_total(g, static_cast<int>(i), has_aromatic_bond);
    if (atom.aromatic && !has_aromatic_bond) {
      throw ParseError("aromatic atom " + std::to_string(i) + " has no aromatic bonds");
    }
    const std::vector<int>& valences = element_valences(atom.element);
    int max_allowed = 0;
    for (int v : valences) max_allowed = std::max(max_allowed, v + atom.charge);
    max_allowed = std::max(max_allowed, 0);

    if (atom.bracket) {
      int total = bonded + atom.declared_h;
      if (atom.aromatic && total + 1 <= max_allowed) total += 1;
      if (total > max_allowed) {
        throw ParseError("valence overflow on atom " + std::to_string(i) + " (" +
                         atom.element + "): " + std::to_string(total) + " > " +
                         std::to_string(max_allowed));
      }
      atom.implicit_h = atom.declared_h;
    } else {
      int total = bonded;
      if (atom.aromatic && total + 1 <= max_allowed) total += 1;
      const int h = implied_hydrogens(atom.element, atom.charge, total);
      if (h < 0) {
        throw ParseError("valence overflow on atom " + std::to_string(i) + " (" +
                         atom.element + "): " + std::to_string(total) + " > " +
                         std::to_string(max_allowed));
      }
      atom.implicit_h = h;
    }
  }
}

}  // namespace

const std::vector<int>& element_valences(const std::string& element) {
  auto it = valence_table().find(element);
  if (it == valence_table().end()) {
    throw ParseError("unsupported element '" + element + "'");
  }
  return it->second;
}

int implied_hydrogens(const std::string& element, int charge, int bonded_total) {
  const std::vector<int>& valences = element_valences(element);
  for (int v : valences) {
    const int adjusted = v + charge;
    if (adjusted >= bonded_total) return adjusted - bonded_total;
  }
  return -1;
}

MoleculeGraph parse(const std::string& s) {
  const std::vector<std::string> tokens = lex(s);
  ParserState st;
  for (const std::string& tok : tokens) {
    if (tok.size() > 1 && tok[0] == '[') {
      attach_atom(st, parse_bracket(tok));
      continue;
    }
    if (tok.size() == 3 && tok[0] == '%') {
      handle_ring_digit(st, (tok[1] - '0') * 10 + (tok[2] - '0'));
      continue;
    }
    if (tok == "Cl" || tok == "Br") {
      Atom atom;
      atom.element = tok;
      attach_atom(st, std::move(atom));
      continue;
    }
    const char c = tok[0];
    if (std::isupper(static_cast<unsigned char>(c))) {
      std::string el(1, c);
      if (!is_organic_subset(el)) {
        throw ParseError("atom '" + el + "' requires brackets");
      }
      Atom atom;
      atom.element = el;
      attach_atom(st, std::move(atom));
    } else if (std::islower(static_cast<unsigned char>(c))) {
      std::string el(1, static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
      if (!is_organic_subset(el) || !aromatic_capable(el)) {
        throw ParseError("unsupported aromatic atom '" + std::string(1, c) + "'");
      }
      Atom atom;
      atom.element = el;
      atom.aromatic = true;
      attach_atom(st, std::move(atom));
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      handle_ring_digit(st, c - '0');
    } else {
      switch (c) {
        case '-':
          st.pending_bond = true;
          st.pending_order = 1;
          st.pending_aromatic = false;
          break;
        case '=':
          st.pending_bond = true;
          st.pending_order = 2;
          st.pending_aromatic = false;
          break;
        case '#':
          st.pending_bond = true;
          st.pending_order = 3;
          st.pending_aromatic = false;
          break;
        case ':':
          st.pending_bond = true;
          st.pending_order = 1;
          st.pending_aromatic = true;
          break;
        case '/':
        case '\\':
          // Stereo bonds parsed as single; stereochemistry is ignored.
          st.pending_bond = true;
          st.pending_order = 1;
          st.pending_aromatic = false;
          break;
        case '(':
          if (st.prev_atom < 0) throw ParseError("branch open with no preceding atom");
          if (st.pending_bond) throw ParseError("dangling bond before '('");
          st.branch_stack.push_back(st.prev_atom);
          break;
        case ')':
          if (st.branch_stack.empty()) throw ParseError("unbalanced ')'");
          if (st.pending_bond) throw ParseError("dangling bond before ')'");
          st.prev_atom = st.branch_stack.back();
          st.branch_stack.pop_back();
          break;
        default:
          throw ParseError("unexpected character '" + std::string(1, c) + "'");
      }
    }
  }
  if (st.pending_bond) throw ParseError("dangling bond at end of string");
  if (!st.branch_stack.empty()) throw ParseError("unbalanced '(' (unclosed branch)");
  if (!st.open_rings.empty()) {
    throw ParseError("unclosed ring digit " + std::to_string(st.open_rings.begin()->first));
  }
  if (st.graph.atoms.empty()) throw ParseError("no atoms in SMILES string");
  finalize(st.graph);
  return st.graph;
}

bool validate(const std::string& s) {
  try {
    parse(s);
    return true;
  } catch (const Error&) {
    return false;
  }
}

std::vector<std::vector<int>> MoleculeGraph::adjacency() const {
  std::vector<std::vector<int>> adj(atoms.size());
  for (std::size_t i = 0; i < bonds.size(); ++i) {
    adj[static_cast<std::size_t>(bonds[i].a)].push_back(static_cast<int>(i));
    adj[static_cast<std::size_t>(bonds[i].b)].push_back(static_cast<int>(i));
  }
  return adj;
}

// Bridges via iterative DFS lowpoint computation; every non-bridge lies on
// a cycle.
std::vector<bool> MoleculeGraph::ring_bond_mask() const {
  const std::size_t n = atoms.size();
  std::vector<bool> mask(bonds.size(), false);
  std::vector<int> disc(n, -1), low(n, 0);
  const auto adj = adjacency();
  int timer = 0;

  struct Frame {
    int atom;
    int parent_bond;
    std::size_t next_edge;
  };
  for (std::size_t root = 0; root < n; ++root) {
    if (disc[root] != -1) continue;
    std::vector<Frame> stack;
    stack.push_back({static_cast<int>(root), -1, 0});
    disc[root] = low[root] = timer++;
    while (!stack.empty()) {
      Frame& f = stack.back();
      const std::size_t u = static_cast<std::size_t>(f.atom);
      if (f.next_edge < adj[u].size()) {
        const int bi = adj[u][f.next_edge++];
        if (bi == f.parent_bond) continue;
        const Bond& b = bonds[static_cast<std::size_t>(bi)];
        const std::size_t v = static_cast<std::size_t>(b.a == f.atom ? b.b : b.a);
        if (disc[v] == -1) {
          disc[v] = low[v] = timer++;
          stack.push_back({static_cast<int>(v), bi, 0});
        } else {
          low[u] = std::min(low[u], disc[v]);
          mask[static_cast<std::size_t>(bi)] = true;  // back edge: on a cycle
        }
      } else {
        stack.pop_back();
        if (!stack.empty()) {
          const std::size_t p = static_cast<std::size_t>(stack.back().atom);
          low[p] = std::min(low[p], low[u]);
          if (low[u] > disc[p]) {
            // bridge; leave mask false
          } else {
            mask[static_cast<std::size_t>(f.parent_bond)] = true;
          }
        }
      }
    }
  }
  return mask;
}

}  // namespace mmgn::smiles
