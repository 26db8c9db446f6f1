#pragma once

// Loaders for the MNIST IDX and CIFAR-10 binary formats, seeded batching and
// stratified subsetting.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "blindlab/tensor.hpp"

namespace blindlab {

struct LabeledDataset {
  // (n, c, h, w) with every pixel in [0, 1].
  Tensor4 images;
  std::vector<int> labels;
  std::size_t classes = 10;

  std::size_t size() const { return labels.size(); }

  // Throws FormatError when a pixel leaves [0, 1], a label leaves
  // [0, classes), or the image and label counts disagree.
  void validate() const;

  friend bool operator==(const LabeledDataset&,
                         const LabeledDataset&) = default;
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

// Reads an IDX image/label file pair. Gzip-compressed files are detected and
// decompressed transparently. Pixels are divided by 255; labels must be < 10.
// Throws FormatError (naming the file and byte offset) for a bad magic
// number, truncated data, or disagreeing counts.
LabeledDataset load_mnist_idx(const std::filesystem::path& images,
                              const std::filesystem::path& labels);

// Writes an uncompressed IDX pair; pixel bytes are round(255 * v).
void save_mnist_idx(const LabeledDataset& dataset,
                    const std::filesystem::path& images,
                    const std::filesystem::path& labels);

inline constexpr std::size_t kCifarSide = 32;
inline constexpr std::size_t kCifarRecordBytes = 1 + 3 * kCifarSide * kCifarSide;

// Reads and concatenates CIFAR-10 binary batch files in the order given.
// Throws ConfigError for an empty path list and FormatError for a length
// that is not a multiple of 3073 bytes or a label above 9.
LabeledDataset load_cifar10_bin(std::span<const std::filesystem::path> files);

void save_cifar10_bin(const LabeledDataset& dataset,
                      const std::filesystem::path& file);

// Shuffled index slices for one epoch. The permutation is drawn from a
// stream seeded with derive_seed(shuffle_seed, epoch, 0); the final partial
// batch is kept. batch_size must be at least 1.
std::vector<std::vector<std::size_t>> batches(std::size_t count,
                                              std::size_t batch_size,
                                              std::uint64_t shuffle_seed,
                                              std::size_t epoch);

struct Batch {
  Tensor4 images;
  std::vector<int> labels;
};

Batch gather(const LabeledDataset& dataset, std::span<const std::size_t> indices);

// Seeded sample of `count` examples without replacement, stratified by
// class (largest-remainder quotas, so each class is within one example of
// its exact proportion). Examples keep their original relative order.
// Throws ConfigError when count exceeds the dataset size.
LabeledDataset subset(const LabeledDataset& dataset, std::size_t count,
                      std::uint64_t seed);

}  // namespace blindlab
