#include "mmgn/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace mmgn::ckpt {

namespace {

const char kMagic[4] = {'M', 'M', 'G', 'N'};

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v & 0xFF));
    u8(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    u16(static_cast<std::uint16_t>(v & 0xFFFF));
    u16(static_cast<std::uint16_t>(v >> 16));
  }
  void u64(std::uint64_t v) {
    u32(static_cast<std::uint32_t>(v & 0xFFFFFFFFULL));
    u32(static_cast<std::uint32_t>(v >> 32));
  }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  void str(const std::string& s) {
    if (s.size() > 0xFFFF) throw CheckpointError("string too long for checkpoint");
    u16(static_cast<std::uint16_t>(s.size()));
    for (char c : s) u8(static_cast<std::uint8_t>(c));
  }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t len) : data_(data), len_(len) {}

  std::uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  std::uint16_t u16() {
    const std::uint16_t lo = u8();
    return static_cast<std::uint16_t>(lo | (static_cast<std::uint16_t>(u8()) << 8));
  }
  std::uint32_t u32() {
    const std::uint32_t lo = u16();
    return lo | (static_cast<std::uint32_t>(u16()) << 16);
  }
  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    return lo | (static_cast<std::uint64_t>(u32()) << 32);
  }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string str() {
    const std::uint16_t n = u16();
    need(n);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }
  bool exhausted() const { return pos_ == len_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > len_) throw CheckpointError("checkpoint truncated");
  }
  const std::uint8_t* data_;
  std::size_t len_;
  std::size_t pos_ = 0;
};

void write_tensor_header(ByteWriter& w, const std::string& name, const Array& a) {
  w.str(name);
  w.u8(static_cast<std::uint8_t>(a.rank()));
  for (std::size_t d : a.shape()) w.u32(static_cast<std::uint32_t>(d));
}

}  // namespace

std::uint32_t crc32(const std::uint8_t* data, std::size_t len) {
  static std::uint32_t table[256];
  static bool init = false;
  if (!init) {
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      table[i] = c;
    }
    init = true;
  }
  std::uint32_t c = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

void save(const Checkpoint& ckpt, const std::string& path) {
  ByteWriter payload;
  payload.u64(ckpt.seed);
  payload.u64(ckpt.config_hash);
  payload.u8(ckpt.standardize_features ? 1 : 0);

  payload.u32(static_cast<std::uint32_t>(ckpt.vocab_tokens.size()));
  for (const std::string& tok : ckpt.vocab_tokens) payload.str(tok);

  payload.u32(static_cast<std::uint32_t>(ckpt.dims.feature_dim));
  payload.u32(static_cast<std::uint32_t>(ckpt.dims.property_dim));
  payload.u32(static_cast<std::uint32_t>(ckpt.dims.encoder_hidden));
  payload.u32(static_cast<std::uint32_t>(ckpt.dims.latent));
  payload.u32(static_cast<std::uint32_t>(ckpt.dims.projector_hidden));
  payload.u32(static_cast<std::uint32_t>(ckpt.dims.vocab));
  payload.f32(static_cast<float>(ckpt.dims.dropout));

  // Dimension table: model tensors in declared order, then dataset tensors.
  std::vector<std::pair<std::string, const Array*>> tensors;
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
    const auto& [name, arr] = ckpt.params.entry(i);
    tensors.emplace_back(name, &arr);
  }
  const Array mu = Array::vector(std::vector<double>(ckpt.stats_mu));
  const Array sigma = Array::vector(std::vector<double>(ckpt.stats_sigma));
  tensors.emplace_back("dataset.mu", &mu);
  tensors.emplace_back("dataset.sigma", &sigma);
  tensors.emplace_back("dataset.context", &ckpt.reference_context);

  payload.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, arr] : tensors) write_tensor_header(payload, name, *arr);
  for (const auto& [name, arr] : tensors) {
    for (double v : arr->values()) payload.f32(static_cast<float>(v));
  }

  const std::uint32_t crc = crc32(payload.bytes().data(), payload.bytes().size());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open '" + path + "' for writing");
  out.write(kMagic, 4);
  ByteWriter head;
  head.u16(kFormatVersion);
  head.u16(0);
  out.write(reinterpret_cast<const char*>(head.bytes().data()),
            static_cast<std::streamsize>(head.bytes().size()));
  out.write(reinterpret_cast<const char*>(payload.bytes().data()),
            static_cast<std::streamsize>(payload.bytes().size()));
  ByteWriter tail;
  tail.u32(crc);
  out.write(reinterpret_cast<const char*>(tail.bytes().data()), 4);
  if (!out) throw CheckpointError("write failed for '" + path + "'");
}

Checkpoint load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() < 12) throw CheckpointError("checkpoint truncated");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError("bad magic: not a MMGN checkpoint");
  }
  ByteReader head(bytes.data() + 4, 4);
  const std::uint16_t version = head.u16();
  if (version != kFormatVersion) {
    throw CheckpointError("unsupported version " + std::to_string(version) + " (expected " +
                          std::to_string(kFormatVersion) + ")");
  }
  head.u16();  // reserved

  const std::size_t payload_len = bytes.size() - 12;
  const std::uint8_t* payload = bytes.data() + 8;
  ByteReader tail(bytes.data() + bytes.size() - 4, 4);
  const std::uint32_t stored_crc = tail.u32();
  const std::uint32_t actual = crc32(payload, payload_len);
  if (stored_crc != actual) {
    throw CheckpointError("CRC mismatch: stored " + std::to_string(stored_crc) + ", computed " +
                          std::to_string(actual));
  }

  ByteReader r(payload, payload_len);
  Checkpoint ckpt;
  ckpt.seed = r.u64();
  ckpt.config_hash = r.u64();
  ckpt.standardize_features = r.u8() != 0;

  const std::uint32_t vocab_count = r.u32();
  for (std::uint32_t i = 0; i < vocab_count; ++i) ckpt.vocab_tokens.push_back(r.str());

  ckpt.dims.feature_dim = r.u32();
  ckpt.dims.property_dim = r.u32();
  ckpt.dims.encoder_hidden = r.u32();
  ckpt.dims.latent = r.u32();
  ckpt.dims.projector_hidden = r.u32();
  ckpt.dims.vocab = r.u32();
  ckpt.dims.dropout = static_cast<double>(r.f32());

  struct TensorMeta {
    std::string name;
    std::vector<std::size_t> shape;
  };
  const std::uint32_t tensor_count = r.u32();
  std::vector<TensorMeta> metas;
  for (std::uint32_t i = 0; i < tensor_count; ++i) {
    TensorMeta m;
    m.name = r.str();
    const std::uint8_t rank = r.u8();
    for (std::uint8_t d = 0; d < rank; ++d) m.shape.push_back(r.u32());
    metas.push_back(std::move(m));
  }
  for (const TensorMeta& m : metas) {
    Array a(m.shape);
    for (double& v : a.values()) v = static_cast<double>(r.f32());
    if (m.name == "dataset.mu") {
      ckpt.stats_mu = a.values();
    } else if (m.name == "dataset.sigma") {
      ckpt.stats_sigma = a.values();
    } else if (m.name == "dataset.context") {
      ckpt.reference_context = std::move(a);
    } else {
      ckpt.params.add(m.name, std::move(a));
    }
  }
  if (!r.exhausted()) throw CheckpointError("trailing bytes after tensor data");
  if (ckpt.vocab_tokens.size() != ckpt.dims.vocab) {
    throw CheckpointError("vocabulary listing does not match declared size");
  }
  return ckpt;
}

}  // namespace mmgn::ckpt
