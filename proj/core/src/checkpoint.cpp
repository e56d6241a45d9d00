#include "pcdu/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "pcdu/errors.hpp"

namespace pcdu {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

const Tensor& Checkpoint::at(const std::string& name) const {
  if (const Tensor* t = find(name)) return *t;
  throw CheckpointError("checkpoint: missing tensor '" + name + "'");
}

void Checkpoint::put(std::string name, Tensor tensor) {
  for (auto& [n, t] : tensors) {
    if (n == name) {
      t = std::move(tensor);
      return;
    }
  }
  tensors.emplace_back(std::move(name), std::move(tensor));
}

namespace {

template <typename T>
void put_raw(std::vector<std::uint8_t>& out, T value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    if (pos_ + sizeof(T) > bytes_.size()) {
      throw CheckpointError(std::string("checkpoint: truncated file while reading ") + what);
    }
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string get_string(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw CheckpointError("checkpoint: truncated file while reading a tensor name");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.version != kCheckpointVersionF32 && ckpt.version != kCheckpointVersionF64) {
    throw CheckpointError("checkpoint: cannot write unknown version " + std::to_string(ckpt.version));
  }
  std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  put_raw<std::uint32_t>(out, ckpt.version);
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.size() > 0xffff) throw CheckpointError("checkpoint: tensor name too long: " + name);
    if (t.rank() == 0 || t.rank() > 0xff) throw CheckpointError("checkpoint: bad rank for " + name);
    put_raw<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_raw<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (Real v : t.values()) {
      if (ckpt.version == kCheckpointVersionF32) {
        put_raw<float>(out, static_cast<float>(v));
      } else {
        put_raw<double>(out, static_cast<double>(v));
      }
    }
  }
  out.insert(out.end(), ckpt.config_hash.begin(), ckpt.config_hash.end());
  put_raw<std::uint32_t>(out, ckpt.epoch);
  return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader in(bytes);
  char magic[4];
  for (char& c : magic) c = static_cast<char>(in.get<std::uint8_t>("magic"));
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw CheckpointError("checkpoint: bad magic bytes, expected \"PCDU\"");
  }
  Checkpoint ckpt;
  ckpt.version = in.get<std::uint32_t>("version");
  if (ckpt.version != kCheckpointVersionF32 && ckpt.version != kCheckpointVersionF64) {
    throw CheckpointError("checkpoint: unsupported version " + std::to_string(ckpt.version) + " (this build reads " +
                          std::to_string(kCheckpointVersionF32) + " and " + std::to_string(kCheckpointVersionF64) +
                          ")");
  }
  const auto count = in.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = in.get<std::uint16_t>("name length");
    std::string name = in.get_string(len);
    const auto rank = in.get<std::uint8_t>("rank");
    if (rank == 0) throw CheckpointError("checkpoint: tensor '" + name + "' has rank 0");
    Shape shape(rank);
    for (auto& d : shape) {
      d = in.get<std::uint32_t>("dimension");
      if (d == 0) throw CheckpointError("checkpoint: tensor '" + name + "' has a zero extent");
    }
    std::vector<Real> values(shape_size(shape));
    for (auto& v : values) {
      v = ckpt.version == kCheckpointVersionF32 ? static_cast<Real>(in.get<float>("tensor data"))
                                                : static_cast<Real>(in.get<double>("tensor data"));
    }
    ckpt.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  for (auto& b : ckpt.config_hash) b = in.get<std::uint8_t>("config hash");
  ckpt.epoch = in.get<std::uint32_t>("epoch");
  if (!in.done()) throw CheckpointError("checkpoint: trailing bytes after footer");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(ckpt);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("checkpoint: cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("checkpoint: failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace pcdu
