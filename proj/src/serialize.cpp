#include "tlab/serialize.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "tlab/errors.hpp"

namespace tlab {

namespace {

constexpr char kMagic[8] = {'T', 'L', 'A', 'B', 'N', 'E', 'T', '1'};

class Writer {
 public:
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void tensor(const Tensor& t) {
    u64(t.rank());
    for (auto d : t.shape()) u64(d);
    for (double v : t.values()) f64(v);
  }
  std::vector<unsigned char> bytes;
};

class Reader {
 public:
  explicit Reader(std::vector<unsigned char> b) : bytes_(std::move(b)) {}
  std::uint64_t u64() {
    if (pos_ + 8 > bytes_.size()) throw ParseError("truncated network file", pos_);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  Tensor tensor() {
    const std::size_t rank = u64();
    if (rank == 0) return Tensor();
    if (rank > 8) throw ParseError("implausible tensor rank", pos_);
    Shape shape(rank);
    for (auto& d : shape) d = u64();
    const std::size_t n = shape_size(shape);
    if (n > (bytes_.size() - pos_) / 8) throw ParseError("truncated tensor data", pos_);
    std::vector<double> data(n);
    for (auto& v : data) v = f64();
    return Tensor(shape, std::move(data));
  }
  void expect_magic() {
    if (bytes_.size() < 8 || std::memcmp(bytes_.data(), kMagic, 8) != 0) {
      throw ParseError("not a network snapshot", 0);
    }
    pos_ = 8;
  }
  bool done() const { return pos_ == bytes_.size(); }
  std::size_t pos() const { return pos_; }

 private:
  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_network(const std::filesystem::path& path, const Network& net) {
  Writer w;
  w.bytes.insert(w.bytes.end(), kMagic, kMagic + 8);
  w.u64(net.layers.size());
  for (const auto& l : net.layers) {
    w.u64(static_cast<std::uint64_t>(l.kind));
    w.u64(static_cast<std::uint64_t>(l.tag));
    w.u64(l.width);
    w.tensor(l.weight);
    w.tensor(l.bias);
    w.tensor(l.norm.running_mean);
    w.tensor(l.norm.running_var);
    w.f64(l.norm.scale);
    w.u64(l.norm.initialized ? 1 : 0);
  }
  // Write to a sibling file and rename so readers never see a partial snapshot.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(w.bytes.data()),
              static_cast<std::streamsize>(w.bytes.size()));
  }
  std::filesystem::rename(tmp, path);
}

Network load_network(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  Reader r(std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {}));
  r.expect_magic();
  Network net;
  const std::size_t count = r.u64();
  for (std::size_t i = 0; i < count; ++i) {
    Layer l;
    const auto kind = r.u64();
    const auto tag = r.u64();
    if (kind > 3 || tag > 1) throw ParseError("bad layer header", r.pos());
    l.kind = static_cast<LayerKind>(kind);
    l.tag = static_cast<ParamTag>(tag);
    l.width = r.u64();
    l.weight = r.tensor();
    l.bias = r.tensor();
    l.norm.running_mean = r.tensor();
    l.norm.running_var = r.tensor();
    l.norm.scale = r.f64();
    l.norm.initialized = r.u64() != 0;
    net.layers.push_back(std::move(l));
  }
  if (!r.done()) throw ParseError("trailing bytes in network file", r.pos());
  net.head_index();
  return net;
}

}  // namespace tlab
