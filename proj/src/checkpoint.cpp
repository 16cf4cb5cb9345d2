#include "ronet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "ronet/errors.hpp"

namespace ronet {
namespace {

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFFu));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  const char* take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError("checkpoint truncated while reading " + std::string(what) +
                            " at byte " + std::to_string(pos_));
    }
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint32_t u32(const char* what) {
    const auto* p = reinterpret_cast<const unsigned char*>(take(4, what));
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  }
  std::uint8_t u8(const char* what) { return static_cast<std::uint8_t>(*take(1, what)); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const ModelWeights& weights) {
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(weights.size()));
  for (const auto& [name, tensor] : weights) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    const Shape& shape = tensor.shape();
    if (shape.rank() > 255) throw CheckpointError("tensor '" + name + "' has rank > 255");
    out.push_back(static_cast<char>(shape.rank()));
    for (std::size_t d = 0; d < shape.rank(); ++d) {
      put_u32(out, static_cast<std::uint32_t>(shape[d]));
    }
    for (float v : tensor.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

ModelWeights deserialize_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  if (std::memcmp(in.take(sizeof kCheckpointMagic, "magic"), kCheckpointMagic,
                  sizeof kCheckpointMagic) != 0) {
    throw CheckpointError("bad checkpoint magic (expected RONETCK1)");
  }
  const std::uint32_t version = in.u32("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = in.u32("tensor count");
  ModelWeights out;
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::uint32_t len = in.u32("name length");
    std::string name(in.take(len, "name"), len);
    const std::uint8_t rank = in.u8("rank");
    std::vector<std::size_t> dims;
    std::size_t numel = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      dims.push_back(in.u32("dims"));
      numel *= dims.back();
    }
    if (numel > bytes.size() / 4) {
      throw CheckpointError("checkpoint truncated: tensor '" + name + "' claims " +
                            std::to_string(numel) + " values");
    }
    std::vector<float> values(numel);
    for (auto& v : values) v = std::bit_cast<float>(in.u32("values"));
    if (out.contains(name)) throw CheckpointError("duplicate tensor name '" + name + "'");
    out.add(std::move(name), Tensor(Shape(std::move(dims)), std::move(values)));
  }
  if (!in.done()) throw CheckpointError("trailing bytes after the last tensor");
  return out;
}

void save_checkpoint(const ModelWeights& weights, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(weights);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

ModelWeights load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  try {
    return deserialize_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError("'" + path.string() + "': " + e.what());
  }
}

}  // namespace ronet
