#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmgn/array.hpp"
#include "mmgn/model.hpp"
#include "mmgn/params.hpp"

namespace mmgn::ckpt {

constexpr std::uint16_t kFormatVersion = 1;

// Binary layout: magic "MMGN", u16 version, u16 reserved, payload, u32
// CRC-32 of the payload. The payload holds the vocabulary listing, the
// dimension table and every tensor as little-endian IEEE-754 f32.
struct Checkpoint {
  model::Dims dims;
  std::vector<std::string> vocab_tokens;
  ParamSet params;
  std::vector<double> stats_mu;
  std::vector<double> stats_sigma;
  Array reference_context;
  bool standardize_features = true;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
};

void save(const Checkpoint& ckpt, const std::string& path);
Checkpoint load(const std::string& path);

std::uint32_t crc32(const std::uint8_t* data, std::size_t len);

}  // namespace mmgn::ckpt
