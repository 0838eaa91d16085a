#include "mmgn/descriptors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>

namespace mmgn::desc {

namespace {

#ifndef MMGN_DATA_FILE
#define MMGN_DATA_FILE "data/descriptor_coefficients.txt"
#endif

std::unique_ptr<Tables>& tables_slot() {
  static std::unique_ptr<Tables> slot;
  return slot;
}

double clamp01(double x) { return std::max(0.0, std::min(1.0, x)); }

}  // namespace

const std::array<std::string, kFeatureDim>& feature_labels() {
  static const std::array<std::string, kFeatureDim> labels = {
      "MW",         "logP",
      "HBD",        "HBA",
      "TPSA",       "ring_count",
      "aromatic_atom_count",      "rotatable_bonds",
      "heavy_atom_count",         "logS"};
  return labels;
}

PropertyVector PropertyVector::from_features(const FeatureVector& f,
                                             const std::vector<std::size_t>& dims) {
  PropertyVector p;
  for (std::size_t d : dims) {
    if (d >= kFeatureDim) throw Error("PropertyVector: feature dim out of range");
    p.values.push_back(f.values[d]);
    p.labels.push_back(feature_labels()[d]);
  }
  return p;
}

Tables::Tables(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("descriptor tables: cannot open '" + path + "'");
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string kind, key;
    double value;
    if (!(ls >> kind)) continue;
    if (kind == "version") {
      ls >> version_;
      continue;
    }
    if (!(ls >> key >> value)) {
      throw Error("descriptor tables: malformed line '" + line + "'");
    }
    if (kind == "mass") {
      mass_[key] = value;
    } else if (kind == "logp") {
      if (key == "H") {
        logp_h_ = value;
      } else if (key == "charge") {
        logp_charge_ = value;
      } else {
        logp_[key] = value;
      }
    } else if (kind == "tpsa") {
      tpsa_[key] = value;
    } else if (kind == "esol") {
      esol_[key] = value;
    } else {
      throw Error("descriptor tables: unknown kind '" + kind + "'");
    }
  }
  if (version_ == 0 || mass_.empty() || logp_.empty() || tpsa_.empty() || esol_.empty()) {
    throw Error("descriptor tables: incomplete file '" + path + "'");
  }
}

const Tables& Tables::instance() {
  auto& slot = tables_slot();
  if (!slot) {
    const char* env = std::getenv("MMGN_DATA_FILE");
    slot.reset(new Tables(env != nullptr && *env != '\0' ? env : MMGN_DATA_FILE));
  }
  return *slot;
}

void Tables::load_from(const std::string& path) {
  tables_slot().reset(new Tables(path));
}

double Tables::mass(const std::string& element) const {
  auto it = mass_.find(element);
  if (it == mass_.end()) throw Error("descriptor tables: no mass for '" + element + "'");
  return it->second;
}

double Tables::logp_contribution(const std::string& element, bool aromatic) const {
  const std::string key = element + (aromatic ? ".aro" : ".ali");
  auto it = logp_.find(key);
  if (it == logp_.end()) throw Error("descriptor tables: no logP entry '" + key + "'");
  return it->second;
}

double Tables::tpsa_contribution(const std::string& cls) const {
  auto it = tpsa_.find(cls);
  if (it == tpsa_.end()) throw Error("descriptor tables: no TPSA entry '" + cls + "'");
  return it->second;
}

double Tables::esol(const std::string& term) const {
  auto it = esol_.find(term);
  if (it == esol_.end()) throw Error("descriptor tables: no ESOL term '" + term + "'");
  return it->second;
}

FeatureVector compute_features(const smiles::MoleculeGraph& g) {
  const Tables& t = Tables::instance();
  const auto adj = g.adjacency();
  const auto ring_mask = g.ring_bond_mask();

  double mw = 0.0, logp = 0.0, tpsa = 0.0;
  int hbd = 0, hba = 0, aromatic_atoms = 0;
  for (std::size_t i = 0; i < g.atoms.size(); ++i) {
    const smiles::Atom& a = g.atoms[i];
    mw += t.mass(a.element) + a.implicit_h * t.mass("H");
    logp += t.logp_contribution(a.element, a.aromatic) + a.implicit_h * t.logp_hydrogen() +
            std::abs(a.charge) * t.logp_charge_penalty();
    if (a.aromatic) ++aromatic_atoms;
    if (a.element == "N" || a.element == "O") {
      ++hba;
      if (a.implicit_h >= 1) ++hbd;
      bool has_double = false;
      for (int bi : adj[i]) {
        const smiles::Bond& b = g.bonds[static_cast<std::size_t>(bi)];
        if (!b.aromatic && b.order == 2) has_double = true;
      }
      if (a.element == "O") {
        if (a.aromatic) {
          tpsa += t.tpsa_contribution("O.aro");
        } else if (a.implicit_h >= 1) {
          tpsa += t.tpsa_contribution("O.H");
        } else if (has_double) {
          tpsa += t.tpsa_contribution("O.double");
        } else {
          tpsa += t.tpsa_contribution("O.ether");
        }
      } else {
        if (a.aromatic) {
          tpsa += t.tpsa_contribution(a.implicit_h >= 1 ? "N.aroH" : "N.aro");
        } else if (a.implicit_h >= 2) {
          tpsa += t.tpsa_contribution("N.prim");
        } else if (a.implicit_h == 1) {
          tpsa += t.tpsa_contribution("N.sec");
        } else {
          tpsa += t.tpsa_contribution("N.tert");
        }
      }
      if (a.charge != 0) tpsa += t.tpsa_contribution("charge");
    }
  }

  int rotatable = 0;
  for (std::size_t bi = 0; bi < g.bonds.size(); ++bi) {
    const smiles::Bond& b = g.bonds[bi];
    if (b.aromatic || b.order != 1 || ring_mask[bi]) continue;
    if (adj[static_cast<std::size_t>(b.a)].size() >= 2 &&
        adj[static_cast<std::size_t>(b.b)].size() >= 2) {
      ++rotatable;
    }
  }

  const double heavy = static_cast<double>(g.atoms.size());
  const double aromatic_proportion = heavy > 0 ? aromatic_atoms / heavy : 0.0;
  const double logs = t.esol("intercept") + t.esol("logp") * logp + t.esol("mw") * mw +
                      t.esol("rotatable") * rotatable +
                      t.esol("aromatic_proportion") * aromatic_proportion;

  FeatureVector f;
  f.values = {mw,
              logp,
              static_cast<double>(hbd),
              static_cast<double>(hba),
              tpsa,
              static_cast<double>(g.ring_count()),
              static_cast<double>(aromatic_atoms),
              static_cast<double>(rotatable),
              heavy,
              logs};
  return f;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Fingerprint fingerprint(const smiles::MoleculeGraph& g) {
  const std::size_t n = g.atoms.size();
  const auto adj = g.adjacency();
  std::vector<std::string> sig(n);
  for (std::size_t i = 0; i < n; ++i) {
    const smiles::Atom& a = g.atoms[i];
    sig[i] = a.element + "|" + std::to_string(adj[i].size()) + "|" +
             std::to_string(a.charge) + "|" + std::to_string(a.implicit_h) + "|" +
             (a.aromatic ? "a" : "-");
  }
  Fingerprint fp;
  for (std::size_t i = 0; i < n; ++i) {
    fp.set(fnv1a64(sig[i]) % kFingerprintBits);
  }
  for (int radius = 1; radius <= kFingerprintRadius; ++radius) {
    std::vector<std::string> next(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::string> parts;
      for (int bi : adj[i]) {
        const smiles::Bond& b = g.bonds[static_cast<std::size_t>(bi)];
        const int v = b.a == static_cast<int>(i) ? b.b : b.a;
        const int key = b.aromatic ? 4 : b.order;
        parts.push_back(std::to_string(key) + ":" + sig[static_cast<std::size_t>(v)]);
      }
      std::sort(parts.begin(), parts.end());
      std::string s = sig[i] + "(";
      for (const std::string& p : parts) s += p + ";";
      next[i] = s + ")";
      fp.set(fnv1a64(next[i]) % kFingerprintBits);
    }
    sig = std::move(next);
  }
  return fp;
}

double tanimoto(const Fingerprint& a, const Fingerprint& b) {
  const std::size_t inter = (a & b).count();
  const std::size_t uni = (a | b).count();
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double druglikeness_proxy(const smiles::MoleculeGraph& g) {
  const FeatureVector f = compute_features(g);
  const double mw_ramp = clamp01(1.0 - std::abs(f.mw() - 300.0) / 200.0);
  const double logp_ramp = clamp01(1.0 - std::abs(f.logp() - 2.5) / 2.5);
  const double hbd_ramp = clamp01(1.0 - std::max(0.0, f.hbd() - 5.0) / 5.0);
  const double hba_ramp = clamp01(1.0 - std::max(0.0, f.hba() - 10.0) / 10.0);
  return std::pow(mw_ramp * logp_ramp * hbd_ramp * hba_ramp, 0.25);
}

double synthesizability_proxy(const smiles::MoleculeGraph& g) {
  double charge_total = 0.0;
  double bracket_count = 0.0;
  for (const smiles::Atom& a : g.atoms) {
    charge_total += std::abs(a.charge);
    if (a.bracket) bracket_count += 1.0;
  }
  const double rings = static_cast<double>(g.ring_count());
  const double heavy = static_cast<double>(g.atoms.size());
  const double penalty = 0.15 * std::max(0.0, rings - 3.0) +
                         0.02 * std::max(0.0, heavy - 35.0) + 0.10 * charge_total +
                         0.05 * bracket_count;
  return clamp01(1.0 - penalty);
}

double solubility_score(double logs) { return clamp01((logs + 8.0) / 8.0); }

}  // namespace mmgn::desc
