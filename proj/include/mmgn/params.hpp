#pragma once

#include <map>
#include <string>
#include <vector>

#include "mmgn/array.hpp"
#include "mmgn/error.hpp"

namespace mmgn {

// Ordered collection of named trainable tensors. Order of insertion is the
// canonical order used by checkpoints and flat arithmetic.
class ParamSet {
 public:
  void add(const std::string& name, Array value) {
    if (index_.count(name)) throw Error("ParamSet: duplicate name '" + name + "'");
    index_[name] = entries_.size();
    entries_.push_back({name, std::move(value)});
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  Array& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("ParamSet: no parameter '" + name + "'");
    return entries_[it->second].second;
  }
  const Array& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("ParamSet: no parameter '" + name + "'");
    return entries_[it->second].second;
  }

  std::size_t size() const { return entries_.size(); }
  const std::pair<std::string, Array>& entry(std::size_t i) const { return entries_[i]; }
  std::pair<std::string, Array>& entry(std::size_t i) { return entries_[i]; }

  std::size_t total_scalars() const {
    std::size_t n = 0;
    for (const auto& [name, arr] : entries_) n += arr.numel();
    return n;
  }

  // Flat view in declared order.
  std::vector<double> flatten() const {
    std::vector<double> flat;
    flat.reserve(total_scalars());
    for (const auto& [name, arr] : entries_) {
      flat.insert(flat.end(), arr.values().begin(), arr.values().end());
    }
    return flat;
  }

  void assign_flat(const std::vector<double>& flat) {
    if (flat.size() != total_scalars()) {
      throw ShapeError("ParamSet: flat size mismatch");
    }
    std::size_t off = 0;
    for (auto& [name, arr] : entries_) {
      std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), arr.numel(),
                  arr.values().begin());
      off += arr.numel();
    }
  }

  // this += scale * other (shape congruent, elementwise).
  void axpy(double scale, const ParamSet& other) {
    check_congruent(other, "axpy");
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      auto& dst = entries_[i].second.values();
      const auto& src = other.entries_[i].second.values();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += scale * src[j];
    }
  }

  // Elementwise difference this - other, as a new set.
  ParamSet diff(const ParamSet& other) const {
    check_congruent(other, "diff");
    ParamSet out = *this;
    for (std::size_t i = 0; i < out.entries_.size(); ++i) {
      auto& dst = out.entries_[i].second.values();
      const auto& src = other.entries_[i].second.values();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] -= src[j];
    }
    return out;
  }

  bool bitwise_equal(const ParamSet& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].first != other.entries_[i].first) return false;
      if (entries_[i].second.values() != other.entries_[i].second.values()) return false;
    }
    return true;
  }

  void check_congruent(const ParamSet& other, const char* op) const {
    if (entries_.size() != other.entries_.size()) {
      throw ShapeError(std::string("ParamSet::") + op + ": entry count mismatch");
    }
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].first != other.entries_[i].first ||
          !entries_[i].second.same_shape(other.entries_[i].second)) {
        throw ShapeError(std::string("ParamSet::") + op + ": mismatch at '" +
                         entries_[i].first + "'");
      }
    }
  }

 private:
  std::vector<std::pair<std::string, Array>> entries_;
  std::map<std::string, std::size_t> index_;
};

// Gradients keyed by parameter name; same ordering contract as ParamSet.
using GradMap = std::map<std::string, Array>;

}  // namespace mmgn
