#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "tlab/rng.hpp"
#include "tlab/tensor.hpp"

namespace tlab {

enum class Split { train, test };

// Images are [M x H x W x ch] (channels last) or flat features [M x D].
// An empty dataset keeps its per-example geometry in `sample_shape`.
struct Dataset {
  Tensor images;
  std::vector<int> labels;
  std::size_t classes = 0;
  Split split = Split::train;
  Shape sample_shape;
  std::vector<double> channel_mean;  // set by normalize_channels
  std::vector<double> channel_std;

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }
  bool is_image() const noexcept { return sample_shape.size() == 3; }
  std::size_t channels() const noexcept { return is_image() ? sample_shape[2] : 1; }
  std::size_t sample_size() const { return shape_size(sample_shape); }

  // Labels in range, data finite, sizes consistent. Throws ValidationError.
  void validate() const;
};

struct Batch {
  Tensor x;
  Tensor y;  // one-hot
  std::vector<int> labels;
};

// IDX (big-endian) files: images carry magic 0x00000803, labels 0x00000801.
Tensor load_idx_images(const std::filesystem::path& path);
std::vector<int> load_idx_labels(const std::filesystem::path& path);
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::size_t classes = 10, Split split = Split::train);

// CIFAR binary records: `label_bytes` label bytes (1 for CIFAR-10; 2 for
// CIFAR-100, whose second byte is the fine label) then 3072 pixel bytes stored
// as three 32x32 planes R, G, B. Output images are 32x32x3, channels last.
Dataset load_cifar_bin(const std::filesystem::path& path, std::size_t classes = 10,
                       std::size_t label_bytes = 1, Split split = Split::train);
Dataset concat(const std::vector<Dataset>& parts);

// Balanced Gaussian class clusters in D dimensions. Class centers are drawn
// with per-coordinate standard deviation separation/sqrt(D), where
// separation = 20 / (1 + difficulty), around unit-variance noise. Examples
// are interleaved by class, so class i % C holds example i.
Dataset synth_task(SeededRng& rng, std::size_t classes, std::size_t dim, std::size_t count,
                   double difficulty);

// Standardizes `apply_to` with per-channel statistics taken from `train`.
Dataset normalize_channels(const Dataset& train, const Dataset& apply_to);

// Flips each image left-right with probability p.
Tensor augment_hflip(const Tensor& batch, SeededRng& rng, double p = 0.5);

// Independent Bernoulli(p_test) draw per example, category by category.
std::pair<Dataset, Dataset> split_random(const Dataset& ds, double p_test, SeededRng& rng);

// Keeps examples whose label is in `keep`, relabeled by position in `keep`.
Dataset select_classes(const Dataset& ds, const std::vector<int>& keep);

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices);
Batch gather(const Dataset& ds, const std::vector<std::size_t>& indices);

// Reshuffles the index order at every epoch boundary.
class BatchSampler {
 public:
  BatchSampler(std::size_t count, std::size_t batch_size, SeededRng rng);
  std::vector<std::size_t> next();

 private:
  void reshuffle();

  std::size_t count_;
  std::size_t batch_size_;
  SeededRng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

}  // namespace tlab
