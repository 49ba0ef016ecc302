#include "tlab/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>

#include "tlab/errors.hpp"
#include "tlab/network.hpp"

namespace tlab {

void Dataset::validate() const {
  if (sample_shape.empty()) throw ValidationError("dataset has no sample shape");
  if (classes < 1) throw ValidationError("dataset has no classes");
  if (labels.empty()) {
    if (!images.empty()) throw ValidationError("images without labels");
    return;
  }
  if (images.rows() != labels.size() || images.size() != labels.size() * sample_size()) {
    throw ValidationError("image tensor " + shape_string(images.shape()) + " does not hold " +
                          std::to_string(labels.size()) + " samples of " +
                          shape_string(sample_shape));
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw ValidationError("label " + std::to_string(labels[i]) + " of example " +
                            std::to_string(i) + " outside [0, " + std::to_string(classes) + ")");
    }
  }
  if (!images.all_finite()) throw ValidationError("non-finite image value");
}

namespace {

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset,
                        const std::filesystem::path& path) {
  if (offset + 4 > buf.size()) {
    throw ParseError(path.string() + ": truncated IDX header", buf.size());
  }
  return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
         (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

struct IdxPayload {
  std::vector<std::size_t> dims;
  std::size_t data_offset = 0;
};

IdxPayload parse_idx_header(const std::vector<unsigned char>& buf, std::uint32_t expected_magic,
                            const std::filesystem::path& path) {
  const std::uint32_t magic = read_be32(buf, 0, path);
  if (magic != expected_magic) {
    char text[64];
    std::snprintf(text, sizeof text, "bad IDX magic 0x%08X, expected 0x%08X", magic,
                  expected_magic);
    throw ParseError(path.string() + ": " + text, 0);
  }
  IdxPayload p;
  const std::size_t ndims = magic & 0xFFu;
  std::size_t offset = 4;
  for (std::size_t d = 0; d < ndims; ++d, offset += 4) {
    const std::uint32_t n = read_be32(buf, offset, path);
    if (n == 0) throw ParseError(path.string() + ": zero-length IDX dimension", offset);
    p.dims.push_back(n);
  }
  p.data_offset = offset;
  const std::size_t need = shape_size(p.dims);
  if (buf.size() - offset < need) {
    throw ParseError(path.string() + ": truncated IDX data, expected " + std::to_string(need) +
                         " bytes",
                     buf.size());
  }
  if (buf.size() - offset > need) {
    throw ParseError(path.string() + ": trailing bytes after IDX data", offset + need);
  }
  return p;
}

}  // namespace

Tensor load_idx_images(const std::filesystem::path& path) {
  const auto buf = read_all(path);
  const IdxPayload p = parse_idx_header(buf, 0x00000803u, path);
  std::vector<double> data(buf.begin() + static_cast<std::ptrdiff_t>(p.data_offset), buf.end());
  return Tensor({p.dims[0], p.dims[1], p.dims[2], 1}, std::move(data));
}

std::vector<int> load_idx_labels(const std::filesystem::path& path) {
  const auto buf = read_all(path);
  const IdxPayload p = parse_idx_header(buf, 0x00000801u, path);
  return std::vector<int>(buf.begin() + static_cast<std::ptrdiff_t>(p.data_offset), buf.end());
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::size_t classes, Split split) {
  Dataset ds;
  ds.images = load_idx_images(images);
  ds.labels = load_idx_labels(labels);
  ds.classes = classes;
  ds.split = split;
  ds.sample_shape = {ds.images.shape()[1], ds.images.shape()[2], 1};
  if (ds.labels.size() != ds.images.rows()) {
    throw ValidationError(std::to_string(ds.images.rows()) + " images but " +
                          std::to_string(ds.labels.size()) + " labels");
  }
  ds.validate();
  return ds;
}

Dataset load_cifar_bin(const std::filesystem::path& path, std::size_t classes,
                       std::size_t label_bytes, Split split) {
  constexpr std::size_t kSide = 32, kPlane = kSide * kSide, kPixels = 3 * kPlane;
  if (label_bytes != 1 && label_bytes != 2) throw ArgumentError("label_bytes must be 1 or 2");
  const auto buf = read_all(path);
  const std::size_t record = label_bytes + kPixels;
  if (buf.empty()) throw ParseError(path.string() + ": empty CIFAR file", 0);
  if (buf.size() % record != 0) {
    throw ParseError(path.string() + ": size " + std::to_string(buf.size()) +
                         " is not a multiple of the " + std::to_string(record) + "-byte record",
                     buf.size() - buf.size() % record);
  }
  const std::size_t m = buf.size() / record;
  Dataset ds;
  ds.classes = classes;
  ds.split = split;
  ds.sample_shape = {kSide, kSide, 3};
  ds.images = Tensor({m, kSide, kSide, 3});
  ds.labels.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t base = i * record;
    const int label = buf[base + label_bytes - 1];
    if (static_cast<std::size_t>(label) >= classes) {
      throw ValidationError(path.string() + ": label " + std::to_string(label) + " of record " +
                            std::to_string(i) + " is >= " + std::to_string(classes));
    }
    ds.labels[i] = label;
    const std::size_t px = base + label_bytes;
    double* out = &ds.images[i * kPixels];
    for (std::size_t ch = 0; ch < 3; ++ch)
      for (std::size_t p = 0; p < kPlane; ++p) out[p * 3 + ch] = buf[px + ch * kPlane + p];
  }
  return ds;
}

Dataset concat(const std::vector<Dataset>& parts) {
  if (parts.empty()) throw ArgumentError("concat of nothing");
  Dataset out = parts.front();
  std::vector<double> data(out.images.data());
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const Dataset& p = parts[i];
    if (p.sample_shape != out.sample_shape || p.classes != out.classes) {
      throw DimensionError("concat: incompatible datasets");
    }
    data.insert(data.end(), p.images.data().begin(), p.images.data().end());
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
  }
  Shape shape{out.labels.size()};
  shape.insert(shape.end(), out.sample_shape.begin(), out.sample_shape.end());
  out.images = out.labels.empty() ? Tensor() : Tensor(shape, std::move(data));
  return out;
}

Dataset synth_task(SeededRng& rng, std::size_t classes, std::size_t dim, std::size_t count,
                   double difficulty) {
  if (classes < 2) throw ArgumentError("synth_task needs at least 2 classes");
  if (count < classes) throw ArgumentError("synth_task needs at least one example per class");
  if (dim == 0) throw ArgumentError("synth_task needs a positive dimension");
  if (!(difficulty >= 0.0)) throw ArgumentError("synth_task difficulty must be >= 0");
  const double separation = 20.0 / (1.0 + difficulty);
  const double center_var = separation * separation / static_cast<double>(dim);
  const Tensor centers = normal_sample(rng, {classes, dim}, 0.0, center_var);

  Dataset ds;
  ds.classes = classes;
  ds.sample_shape = {dim};
  ds.images = Tensor({count, dim});
  ds.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t c = i % classes;
    ds.labels[i] = static_cast<int>(c);
    for (std::size_t d = 0; d < dim; ++d) ds.images(i, d) = centers(c, d) + rng.normal();
  }
  return ds;
}

Dataset normalize_channels(const Dataset& train, const Dataset& apply_to) {
  if (train.empty()) throw ArgumentError("normalize_channels: empty training split");
  if (train.sample_shape != apply_to.sample_shape) {
    throw DimensionError("normalize_channels: sample shapes differ");
  }
  const std::size_t ch = train.channels();
  std::vector<double> sum(ch, 0.0), mean(ch, 0.0), var(ch, 0.0);
  std::vector<std::size_t> cnt(ch, 0);
  const auto& v = train.images.data();
  for (std::size_t i = 0; i < v.size(); ++i) {
    sum[i % ch] += v[i];
    ++cnt[i % ch];
  }
  for (std::size_t c = 0; c < ch; ++c) mean[c] = sum[c] / static_cast<double>(cnt[c]);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = v[i] - mean[i % ch];
    var[i % ch] += d * d;
  }
  std::vector<double> sd(ch);
  for (std::size_t c = 0; c < ch; ++c) {
    sd[c] = std::sqrt(var[c] / static_cast<double>(cnt[c]));
    if (!(sd[c] > 0.0)) {
      throw ArgumentError("normalize_channels: channel " + std::to_string(c) +
                          " is constant over the training split");
    }
  }
  Dataset out = apply_to;
  for (std::size_t i = 0; i < out.images.size(); ++i) {
    const std::size_t c = i % ch;
    out.images[i] = (out.images[i] - mean[c]) / sd[c];
  }
  out.channel_mean = mean;
  out.channel_std = sd;
  return out;
}

Tensor augment_hflip(const Tensor& batch, SeededRng& rng, double p) {
  if (batch.rank() != 4) {
    throw DimensionError("augment_hflip expects N x H x W x C images, got " +
                         shape_string(batch.shape()));
  }
  const std::size_t n = batch.shape()[0], h = batch.shape()[1], w = batch.shape()[2],
                    ch = batch.shape()[3];
  Tensor out = batch;
  for (std::size_t i = 0; i < n; ++i) {
    if (!rng.bernoulli(p)) continue;
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c)
        for (std::size_t k = 0; k < ch; ++k) {
          out[((i * h + r) * w + c) * ch + k] = batch[((i * h + r) * w + (w - 1 - c)) * ch + k];
        }
  }
  return out;
}

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.classes = ds.classes;
  out.split = ds.split;
  out.sample_shape = ds.sample_shape;
  out.channel_mean = ds.channel_mean;
  out.channel_std = ds.channel_std;
  if (indices.empty()) return out;
  const std::size_t s = ds.sample_size();
  std::vector<double> data;
  data.reserve(indices.size() * s);
  out.labels.reserve(indices.size());
  for (std::size_t idx : indices) {
    if (idx >= ds.size()) throw ArgumentError("subset index out of range");
    const auto src = ds.images.values().subspan(idx * s, s);
    data.insert(data.end(), src.begin(), src.end());
    out.labels.push_back(ds.labels[idx]);
  }
  Shape shape{indices.size()};
  shape.insert(shape.end(), ds.sample_shape.begin(), ds.sample_shape.end());
  out.images = Tensor(shape, std::move(data));
  return out;
}

std::pair<Dataset, Dataset> split_random(const Dataset& ds, double p_test, SeededRng& rng) {
  if (!(p_test >= 0.0 && p_test < 1.0)) throw ArgumentError("split_random: p_test must be in [0, 1)");
  std::vector<std::vector<std::size_t>> by_class(ds.classes);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  std::vector<bool> to_test(ds.size(), false);
  for (const auto& members : by_class)
    for (std::size_t i : members) to_test[i] = rng.bernoulli(p_test);
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < ds.size(); ++i) (to_test[i] ? test_idx : train_idx).push_back(i);
  Dataset train = subset(ds, train_idx), test = subset(ds, test_idx);
  train.split = Split::train;
  test.split = Split::test;
  return {std::move(train), std::move(test)};
}

Dataset select_classes(const Dataset& ds, const std::vector<int>& keep) {
  if (keep.size() < 2) throw ArgumentError("select_classes: keep at least 2 classes");
  std::vector<int> remap(ds.classes, -1);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const int c = keep[k];
    if (c < 0 || static_cast<std::size_t>(c) >= ds.classes || remap[static_cast<std::size_t>(c)] >= 0) {
      throw ArgumentError("select_classes: bad or repeated class " + std::to_string(c));
    }
    remap[static_cast<std::size_t>(c)] = static_cast<int>(k);
  }
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (remap[static_cast<std::size_t>(ds.labels[i])] >= 0) idx.push_back(i);
  Dataset out = subset(ds, idx);
  for (int& l : out.labels) l = remap[static_cast<std::size_t>(l)];
  out.classes = keep.size();
  return out;
}

Batch gather(const Dataset& ds, const std::vector<std::size_t>& indices) {
  Dataset part = subset(ds, indices);
  return Batch{std::move(part.images), one_hot(part.labels, ds.classes), part.labels};
}

BatchSampler::BatchSampler(std::size_t count, std::size_t batch_size, SeededRng rng)
    : count_(count), batch_size_(std::min(batch_size, count)), rng_(rng) {
  if (count == 0 || batch_size == 0) throw ArgumentError("BatchSampler: empty dataset or batch");
  order_.resize(count_);
  reshuffle();
}

void BatchSampler::reshuffle() {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  for (std::size_t i = count_; i > 1; --i) std::swap(order_[i - 1], order_[rng_.below(i)]);
  cursor_ = 0;
}

std::vector<std::size_t> BatchSampler::next() {
  std::vector<std::size_t> out;
  out.reserve(batch_size_);
  while (out.size() < batch_size_) {
    if (cursor_ == count_) reshuffle();
    out.push_back(order_[cursor_++]);
  }
  return out;
}

}  // namespace tlab
