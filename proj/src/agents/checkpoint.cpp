#include "driftlab/agents/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "driftlab/errors.hpp"

namespace driftlab::agents {

namespace {

constexpr char kMagic[8] = {'S', 'S', 'I', 'L', 'C', 'K', 'P', 'T'};
constexpr std::size_t kHeaderSize = 8 + 4 + 4;

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

template <class T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw DataError("checkpoint truncated");
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string get_string(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw DataError("checkpoint truncated");
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(const char* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(data), static_cast<uInt>(n));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::string serialize_checkpoint(const ParamStore& params) {
  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& e : params.entries()) {
    if (e.name.size() > 0xFFFF) throw DataError("parameter name too long: " + e.name);
    put<std::uint16_t>(out, static_cast<std::uint16_t>(e.name.size()));
    out += e.name;
    const auto& shape = e.tensor.shape();
    if (shape.size() > 0xFF) throw DataError("tensor rank too large: " + e.name);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(shape.size()));
    for (std::size_t d : shape) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (double v : e.tensor.data()) put<double>(out, v);
  }
  put<std::uint32_t>(out, crc_of(out.data() + kHeaderSize, out.size() - kHeaderSize));
  return out;
}

ParamStore deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < kHeaderSize + 4 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw DataError("not a checkpoint (bad magic)");
  }
  const std::size_t payload_end = bytes.size() - 4;
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + payload_end, 4);
  if (stored_crc != crc_of(bytes.data() + kHeaderSize, payload_end - kHeaderSize)) {
    throw DataError("checkpoint CRC mismatch");
  }

  Reader in(bytes);
  in.get_string(sizeof kMagic);
  auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  auto count = in.get<std::uint32_t>();
  ParamStore params;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto name_len = in.get<std::uint16_t>();
    std::string name = in.get_string(name_len);
    auto rank = in.get<std::uint8_t>();
    ad::Shape shape(rank);
    for (auto& d : shape) d = in.get<std::uint32_t>();
    std::vector<double> values(ad::shape_numel(shape));
    for (double& v : values) v = in.get<double>();
    params.add(std::move(name), ad::Tensor::from(std::move(shape), std::move(values)));
  }
  if (in.pos() != payload_end) throw DataError("trailing bytes in checkpoint");
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  std::string bytes = serialize_checkpoint(params);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

ParamStore load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

void assign_values(ParamStore& target, const ParamStore& loaded) {
  if (!target.same_layout(loaded)) throw DataError("checkpoint layout does not match the model");
  auto dst = target.entries();
  auto src = loaded.entries();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    auto from = src[i].tensor.data();
    auto to = dst[i].tensor.data();
    std::copy(from.begin(), from.end(), to.begin());
  }
}

}  // namespace driftlab::agents
