#include "mmgn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mmgn/canonical.hpp"
#include "mmgn/parser.hpp"

#include <nlohmann/json.hpp>

namespace mmgn::metrics {

namespace {

using ordered_json = nlohmann::ordered_json;

std::vector<std::string> valid_strings(const std::vector<std::string>& generated) {
  std::vector<std::string> out;
  for (const std::string& s : generated) {
    if (smiles::validate(s)) out.push_back(s);
  }
  return out;
}

// Distinct canonical forms (insertion order preserved for determinism).
std::vector<std::string> distinct_canonical(const std::vector<std::string>& valid) {
  std::set<std::string> seen;
  std::vector<std::string> out;
  for (const std::string& s : valid) {
    std::string canon = smiles::canonical_form(smiles::parse(s));
    if (seen.insert(canon).second) out.push_back(std::move(canon));
  }
  return out;
}

double round4(double x) { return std::round(x * 10000.0) / 10000.0; }

}  // namespace

double validity(const std::vector<std::string>& generated) {
  if (generated.empty()) throw Error("validity: empty generation list");
  const auto valid = valid_strings(generated);
  return static_cast<double>(valid.size()) / static_cast<double>(generated.size());
}

double uniqueness(const std::vector<std::string>& generated) {
  const auto valid = valid_strings(generated);
  if (valid.empty()) throw Error("uniqueness: no valid molecules");
  return static_cast<double>(distinct_canonical(valid).size()) /
         static_cast<double>(valid.size());
}

double novelty(const std::vector<std::string>& generated,
               const std::set<std::string>& train_canonical) {
  const auto valid = valid_strings(generated);
  if (valid.empty()) throw Error("novelty: no valid molecules");
  const auto distinct = distinct_canonical(valid);
  std::size_t fresh = 0;
  for (const std::string& canon : distinct) {
    if (!train_canonical.count(canon)) ++fresh;
  }
  return static_cast<double>(fresh) / static_cast<double>(distinct.size());
}

double diversity(const std::vector<std::string>& generated, std::uint64_t seed) {
  const auto valid = valid_strings(generated);
  const auto distinct = distinct_canonical(valid);
  if (distinct.size() < 2) throw Error("diversity: needs >= 2 distinct valid molecules");
  std::vector<desc::Fingerprint> fps;
  fps.reserve(distinct.size());
  for (const std::string& canon : distinct) {
    fps.push_back(desc::fingerprint(smiles::parse(canon)));
  }
  const std::size_t n = fps.size();
  const std::size_t pairs = n * (n - 1) / 2;
  double sum = 0.0;
  std::size_t used = 0;
  if (pairs > 1000000) {
    Rng rng(seed);
    for (std::size_t k = 0; k < 1000; ++k) {
      const std::size_t i = static_cast<std::size_t>(rng.below(n));
      std::size_t j = static_cast<std::size_t>(rng.below(n - 1));
      if (j >= i) ++j;
      sum += desc::tanimoto(fps[i], fps[j]);
      ++used;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        sum += desc::tanimoto(fps[i], fps[j]);
        ++used;
      }
    }
  }
  return 1.0 - sum / static_cast<double>(used);
}

PropertyStats property_stats(const std::vector<std::string>& generated,
                             const desc::PropertyVector& target) {
  const auto valid = valid_strings(generated);
  if (valid.empty()) throw Error("property_stats: no valid molecules");
  const auto& labels = desc::feature_labels();
  std::vector<std::size_t> dims;
  for (const std::string& label : target.labels) {
    const auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) throw Error("property_stats: unknown property '" + label + "'");
    dims.push_back(static_cast<std::size_t>(it - labels.begin()));
  }

  PropertyStats stats;
  stats.labels = target.labels;
  stats.n_valid = valid.size();
  const std::size_t k = dims.size();
  std::vector<std::vector<double>> devs(k);
  for (const std::string& s : valid) {
    const desc::FeatureVector f = desc::compute_features(smiles::parse(s));
    for (std::size_t j = 0; j < k; ++j) {
      devs[j].push_back(f.values[dims[j]] - target.values[j]);
    }
  }
  for (std::size_t j = 0; j < k; ++j) {
    double mad = 0.0, mean = 0.0;
    for (double d : devs[j]) {
      mad += std::abs(d);
      mean += d;
    }
    const double n = static_cast<double>(devs[j].size());
    mad /= n;
    mean /= n;
    double var = 0.0;
    for (double d : devs[j]) var += (d - mean) * (d - mean);
    stats.mad.push_back(mad);
    stats.sd.push_back(std::sqrt(var / n));
  }
  return stats;
}

double cgsr(const std::vector<std::string>& generated, int target, HBondKind kind) {
  const auto valid = valid_strings(generated);
  if (valid.empty()) throw Error("cgsr: no valid molecules");
  std::size_t hits = 0;
  for (const std::string& s : valid) {
    const desc::FeatureVector f = desc::compute_features(smiles::parse(s));
    const int count =
        static_cast<int>(kind == HBondKind::kDonor ? f.hbd() : f.hba());
    if (count == target) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(valid.size());
}

std::vector<double> min_max_normalize(const std::vector<double>& values, bool lower_better) {
  if (values.empty()) return {};
  const double mn = *std::min_element(values.begin(), values.end());
  const double mx = *std::max_element(values.begin(), values.end());
  std::vector<double> out(values.size());
  if (mx == mn) {
    std::fill(out.begin(), out.end(), 0.5);
    return out;
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = lower_better ? (mx - values[i]) / (mx - mn) : (values[i] - mn) / (mx - mn);
  }
  return out;
}

std::vector<double> overall_score(const std::vector<ModelRow>& rows) {
  if (rows.empty()) throw Error("overall_score: no model rows");
  const std::size_t n = rows.size();
  std::vector<std::vector<double>> columns(7, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    columns[0][i] = rows[i].valid;
    columns[1][i] = rows[i].unique;
    columns[2][i] = rows[i].time_h;
    columns[3][i] = rows[i].diversity;
    columns[4][i] = rows[i].druglikeness;
    columns[5][i] = rows[i].synthesizability;
    columns[6][i] = rows[i].solubility;
  }
  std::vector<double> scores(n, 0.0);
  for (std::size_t c = 0; c < 7; ++c) {
    const bool lower_better = c == 2;  // Time
    const std::vector<double> normed = min_max_normalize(columns[c], lower_better);
    for (std::size_t i = 0; i < n; ++i) scores[i] += normed[i];
  }
  for (double& s : scores) s /= 7.0;
  return scores;
}

MetricReport evaluate(const std::vector<std::string>& generated,
                      const std::vector<std::string>& train_lines,
                      const EvaluateOptions& opts) {
  if (generated.empty()) throw Error("evaluate: empty generation list");
  MetricReport report;
  report.seed = opts.seed;
  report.time_h = opts.time_h;
  report.n_generated = generated.size();
  const auto valid = valid_strings(generated);
  report.n_valid = valid.size();
  report.valid = 100.0 * static_cast<double>(valid.size()) /
                 static_cast<double>(generated.size());
  if (valid.empty()) return report;

  report.unique = 100.0 * uniqueness(generated);
  if (!train_lines.empty()) {
    std::set<std::string> train_canonical;
    for (const std::string& s : train_lines) {
      if (smiles::validate(s)) {
        train_canonical.insert(smiles::canonical_form(smiles::parse(s)));
      }
    }
    report.novel = 100.0 * novelty(generated, train_canonical);
  }
  const auto distinct = distinct_canonical(valid);
  if (distinct.size() >= 2) report.diversity = diversity(generated, opts.seed);

  double drug = 0.0, synth = 0.0, sol = 0.0;
  for (const std::string& s : valid) {
    const smiles::MoleculeGraph g = smiles::parse(s);
    drug += desc::druglikeness_proxy(g);
    synth += desc::synthesizability_proxy(g);
    sol += desc::solubility_score(desc::compute_features(g).logs());
  }
  const double nv = static_cast<double>(valid.size());
  report.druglikeness = drug / nv;
  report.synthesizability = synth / nv;
  report.solubility = sol / nv;

  if (opts.target.has_value()) report.property = property_stats(generated, *opts.target);
  if (opts.target_hbd.has_value()) {
    report.cgsr_hbd = cgsr(generated, *opts.target_hbd, HBondKind::kDonor);
  }
  if (opts.target_hba.has_value()) {
    report.cgsr_hba = cgsr(generated, *opts.target_hba, HBondKind::kAcceptor);
  }
  return report;
}

std::string MetricReport::to_json() const {
  ordered_json j;
  j["n_generated"] = n_generated;
  j["n_valid"] = n_valid;
  j["valid"] = round4(valid);
  j["unique"] = unique.has_value() ? ordered_json(round4(*unique)) : ordered_json(nullptr);
  j["novelty"] = novel.has_value() ? ordered_json(round4(*novel)) : ordered_json(nullptr);
  j["time_h"] = time_h;
  j["diversity"] =
      diversity.has_value() ? ordered_json(round4(*diversity)) : ordered_json(nullptr);
  j["druglikeness"] =
      druglikeness.has_value() ? ordered_json(round4(*druglikeness)) : ordered_json(nullptr);
  j["synthesizability"] = synthesizability.has_value()
                              ? ordered_json(round4(*synthesizability))
                              : ordered_json(nullptr);
  j["solubility"] =
      solubility.has_value() ? ordered_json(round4(*solubility)) : ordered_json(nullptr);
  j["overall_score"] = round4(overall);
  if (property.has_value()) {
    ordered_json stats;
    for (std::size_t i = 0; i < property->labels.size(); ++i) {
      stats[property->labels[i]] = {{"mad", round4(property->mad[i])},
                                    {"sd", round4(property->sd[i])}};
    }
    j["property_deviation"] = stats;
  }
  if (cgsr_hbd.has_value()) j["cgsr_hbd"] = round4(*cgsr_hbd);
  if (cgsr_hba.has_value()) j["cgsr_hba"] = round4(*cgsr_hba);
  j["seed"] = seed;
  return j.dump(2);
}

}  // namespace mmgn::metrics
