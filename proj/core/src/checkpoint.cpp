#include "rectnet/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <map>
#include <sstream>

namespace rectnet {

namespace {

constexpr char kMagic[8] = {'R', 'C', 'T', 'N', 'C', 'K', 'P', 'T'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_string(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string raw(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  [[nodiscard]] bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError("checkpoint truncated");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, kMagic + 8);
  put_u32(out, kCheckpointVersion);
  put_string(out, to_json(ckpt.config));
  put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    if (t.values.size() != shape_size(t.shape)) throw ShapeError("tensor " + t.name + " size does not match its shape");
    put_string(out, t.name);
    put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (const auto d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
  }
  for (const auto& t : ckpt.tensors) {
    for (const float v : t.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.raw(8) != std::string(kMagic, kMagic + 8)) throw FormatError("not a rectnet checkpoint (bad magic)");
  const auto version = r.u32();
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  try {
    ckpt.config = architecture_from_json(r.str());
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what());
  }
  const auto count = r.u32();
  ckpt.tensors.resize(count);
  for (auto& t : ckpt.tensors) {
    t.name = r.str();
    const auto rank = r.u32();
    if (rank > 4) throw FormatError("tensor rank above 4 in checkpoint");
    for (std::uint32_t i = 0; i < rank; ++i) t.shape.push_back(r.u32());
  }
  for (auto& t : ckpt.tensors) {
    t.values.resize(shape_size(t.shape));
    for (auto& v : t.values) v = std::bit_cast<float>(r.u32());
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint payload");
  return ckpt;
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

template <typename T>
Checkpoint to_checkpoint(const Network<T>& network) {
  Checkpoint ckpt;
  ckpt.config = network.config();
  for (const auto* p : network.parameters()) {
    NamedTensor t{p->name, p->shape, {}};
    t.values.reserve(p->size());
    for (const T v : p->value) t.values.push_back(static_cast<float>(v));
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

template <typename T>
std::size_t load_parameters(Network<T>& network, const Checkpoint& ckpt, std::string_view prefix) {
  std::map<std::string, const NamedTensor*, std::less<>> by_name;
  for (const auto& t : ckpt.tensors) by_name.emplace(t.name, &t);
  std::size_t loaded = 0;
  for (auto* p : network.parameters()) {
    if (p->name.rfind(prefix, 0) != 0) continue;
    const auto it = by_name.find(p->name);
    if (it == by_name.end()) throw FormatError("checkpoint lacks tensor " + p->name);
    if (it->second->shape != p->shape) throw ShapeError("checkpoint tensor " + p->name + " has a different shape");
    for (std::size_t i = 0; i < p->size(); ++i) p->value[i] = static_cast<T>(it->second->values[i]);
    ++loaded;
  }
  return loaded;
}

template <typename T>
std::unique_ptr<Network<T>> network_from_checkpoint(const Checkpoint& ckpt) {
  auto net = make_network<T>(ckpt.config, 0);
  const auto loaded = load_parameters(*net, ckpt);
  if (loaded != ckpt.tensors.size()) throw FormatError("checkpoint has tensors the architecture does not use");
  return net;
}

template Checkpoint to_checkpoint(const Network<float>&);
template Checkpoint to_checkpoint(const Network<double>&);
template std::size_t load_parameters(Network<float>&, const Checkpoint&, std::string_view);
template std::size_t load_parameters(Network<double>&, const Checkpoint&, std::string_view);
template std::unique_ptr<Network<float>> network_from_checkpoint(const Checkpoint&);
template std::unique_ptr<Network<double>> network_from_checkpoint(const Checkpoint&);

}  // namespace rectnet
