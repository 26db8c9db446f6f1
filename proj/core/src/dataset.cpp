#include "blindlab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>

#include <fmt/format.h>
#include <zlib.h>

#include "blindlab/errors.hpp"
#include "blindlab/rng.hpp"

namespace blindlab {

void LabeledDataset::validate() const {
  if (images.shape().n != labels.size()) {
    throw FormatError(fmt::format("{} images but {} labels", images.shape().n, labels.size()));
  }
  const auto pixels = images.data();
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    if (!(pixels[i] >= 0.0 && pixels[i] <= 1.0)) {
      throw FormatError(fmt::format("pixel {} = {} outside [0, 1]", i, pixels[i]));
    }
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw FormatError(fmt::format("label {} of example {} outside [0, {})", labels[i], i,
                                    classes));
    }
  }
}

namespace {

struct GzCloser {
  void operator()(gzFile file) const { gzclose(file); }
};
using GzHandle = std::unique_ptr<gzFile_s, GzCloser>;

// Whole file contents; gzip streams are inflated, plain files pass through.
std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  GzHandle file(gzopen(path.c_str(), "rb"));
  if (!file) throw FormatError(fmt::format("cannot open '{}'", path.string()));
  std::vector<unsigned char> bytes;
  unsigned char chunk[1 << 16];
  for (;;) {
    const int got = gzread(file.get(), chunk, sizeof chunk);
    if (got < 0) {
      int code = 0;
      const char* message = gzerror(file.get(), &code);
      throw FormatError(fmt::format("'{}': read failed at offset {}: {}", path.string(),
                                    bytes.size(), message));
    }
    if (got == 0) break;
    bytes.insert(bytes.end(), chunk, chunk + got);
  }
  return bytes;
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (bytes.size() < offset + 4) {
    throw FormatError(fmt::format("'{}': truncated header at offset {}", path.string(),
                                  bytes.size()));
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void check_magic(std::uint32_t got, std::uint32_t want, const std::filesystem::path& path) {
  if (got != want) {
    throw FormatError(fmt::format("'{}': bad magic 0x{:08x} at offset 0 (expected 0x{:08x})",
                                  path.string(), got, want));
  }
}

void check_length(std::size_t have, std::size_t need, std::size_t offset,
                  const std::filesystem::path& path) {
  if (have < need) {
    throw FormatError(fmt::format("'{}': truncated at offset {} ({} bytes expected)",
                                  path.string(), offset + have, offset + need));
  }
}

void write_be32(std::ofstream& out, std::uint32_t value) {
  const char bytes[4] = {static_cast<char>(value >> 24), static_cast<char>(value >> 16),
                         static_cast<char>(value >> 8), static_cast<char>(value)};
  out.write(bytes, 4);
}

char to_byte(double v) {
  return static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError(fmt::format("cannot write '{}'", path.string()));
  return out;
}

}  // namespace

LabeledDataset load_mnist_idx(const std::filesystem::path& images_path,
                              const std::filesystem::path& labels_path) {
  const std::vector<unsigned char> image_bytes = read_bytes(images_path);
  check_magic(read_be32(image_bytes, 0, images_path), kIdxImagesMagic, images_path);
  const std::size_t count = read_be32(image_bytes, 4, images_path);
  const std::size_t rows = read_be32(image_bytes, 8, images_path);
  const std::size_t cols = read_be32(image_bytes, 12, images_path);
  constexpr std::size_t kImageHeader = 16;
  check_length(image_bytes.size() - kImageHeader, count * rows * cols, kImageHeader,
               images_path);

  const std::vector<unsigned char> label_bytes = read_bytes(labels_path);
  check_magic(read_be32(label_bytes, 0, labels_path), kIdxLabelsMagic, labels_path);
  const std::size_t label_count = read_be32(label_bytes, 4, labels_path);
  if (label_count != count) {
    throw FormatError(fmt::format("'{}': label count {} at offset 4 does not match image count {}",
                                  labels_path.string(), label_count, count));
  }
  constexpr std::size_t kLabelHeader = 8;
  check_length(label_bytes.size() - kLabelHeader, count, kLabelHeader, labels_path);

  LabeledDataset dataset;
  dataset.images = Tensor4(Shape{count, 1, rows, cols});
  std::span<double> pixels = dataset.images.data();
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    pixels[i] = static_cast<double>(image_bytes[kImageHeader + i]) / 255.0;
  }
  dataset.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned char label = label_bytes[kLabelHeader + i];
    if (label >= dataset.classes) {
      throw FormatError(fmt::format("'{}': label {} at offset {} is not a digit",
                                    labels_path.string(), label, kLabelHeader + i));
    }
    dataset.labels[i] = label;
  }
  return dataset;
}

void save_mnist_idx(const LabeledDataset& dataset, const std::filesystem::path& images_path,
                    const std::filesystem::path& labels_path) {
  const Shape& s = dataset.images.shape();
  if (s.c != 1) throw DimensionError(fmt::format("IDX images need 1 channel, got {}", s.c));
  std::ofstream images = open_output(images_path);
  write_be32(images, kIdxImagesMagic);
  write_be32(images, static_cast<std::uint32_t>(s.n));
  write_be32(images, static_cast<std::uint32_t>(s.h));
  write_be32(images, static_cast<std::uint32_t>(s.w));
  for (double v : dataset.images.data()) images.put(to_byte(v));

  std::ofstream labels = open_output(labels_path);
  write_be32(labels, kIdxLabelsMagic);
  write_be32(labels, static_cast<std::uint32_t>(dataset.labels.size()));
  for (int label : dataset.labels) labels.put(static_cast<char>(label));
  if (!images || !labels) throw ConfigError("IDX write failed");
}

LabeledDataset load_cifar10_bin(std::span<const std::filesystem::path> files) {
  if (files.empty()) throw ConfigError("no CIFAR-10 batch files given");
  std::vector<std::vector<unsigned char>> contents;
  std::size_t total = 0;
  for (const auto& path : files) {
    contents.push_back(read_bytes(path));
    if (contents.back().size() % kCifarRecordBytes != 0) {
      throw FormatError(fmt::format(
          "'{}': length {} is not a multiple of {} (trailing record at offset {})",
          path.string(), contents.back().size(), kCifarRecordBytes,
          contents.back().size() / kCifarRecordBytes * kCifarRecordBytes));
    }
    total += contents.back().size() / kCifarRecordBytes;
  }

  LabeledDataset dataset;
  dataset.images = Tensor4(Shape{total, 3, kCifarSide, kCifarSide});
  dataset.labels.reserve(total);
  std::size_t example = 0;
  for (std::size_t f = 0; f < files.size(); ++f) {
    const auto& bytes = contents[f];
    for (std::size_t offset = 0; offset < bytes.size(); offset += kCifarRecordBytes) {
      if (bytes[offset] >= dataset.classes) {
        throw FormatError(fmt::format("'{}': label {} at offset {} outside [0, 10)",
                                      files[f].string(), bytes[offset], offset));
      }
      dataset.labels.push_back(bytes[offset]);
      std::span<double> pixels = dataset.images.sample(example++);
      for (std::size_t i = 0; i < pixels.size(); ++i) {
        pixels[i] = static_cast<double>(bytes[offset + 1 + i]) / 255.0;
      }
    }
  }
  return dataset;
}

void save_cifar10_bin(const LabeledDataset& dataset, const std::filesystem::path& file) {
  const Shape& s = dataset.images.shape();
  if (s.c != 3 || s.h != kCifarSide || s.w != kCifarSide) {
    throw DimensionError(fmt::format("CIFAR-10 records need (3, 32, 32) images, got {}",
                                     to_string(s)));
  }
  std::ofstream out = open_output(file);
  for (std::size_t n = 0; n < s.n; ++n) {
    out.put(static_cast<char>(dataset.labels[n]));
    for (double v : dataset.images.sample(n)) out.put(to_byte(v));
  }
  if (!out) throw ConfigError(fmt::format("write to '{}' failed", file.string()));
}

std::vector<std::vector<std::size_t>> batches(std::size_t count, std::size_t batch_size,
                                              std::uint64_t shuffle_seed, std::size_t epoch) {
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  RngStream rng(derive_seed(shuffle_seed, epoch, 0));
  for (std::size_t i = count; i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  std::vector<std::vector<std::size_t>> result;
  for (std::size_t start = 0; start < count; start += batch_size) {
    const std::size_t stop = std::min(count, start + batch_size);
    result.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                        order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return result;
}

Batch gather(const LabeledDataset& dataset, std::span<const std::size_t> indices) {
  Shape shape = dataset.images.shape();
  shape.n = indices.size();
  Batch batch{Tensor4(shape), std::vector<int>(indices.size())};
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= dataset.size()) {
      throw IndexError(fmt::format("example {} outside dataset of {}", indices[i],
                                   dataset.size()));
    }
    std::span<const double> src = dataset.images.sample(indices[i]);
    std::copy(src.begin(), src.end(), batch.images.sample(i).begin());
    batch.labels[i] = dataset.labels[indices[i]];
  }
  return batch;
}

LabeledDataset subset(const LabeledDataset& dataset, std::size_t count, std::uint64_t seed) {
  const std::size_t n = dataset.size();
  if (count > n) {
    throw ConfigError(fmt::format("subset of {} requested from {} examples", count, n));
  }
  std::vector<std::vector<std::size_t>> by_class(dataset.classes);
  for (std::size_t i = 0; i < n; ++i) {
    by_class.at(static_cast<std::size_t>(dataset.labels[i])).push_back(i);
  }

  // Largest-remainder quotas; ties go to the lower class index.
  std::vector<std::size_t> quota(by_class.size());
  std::vector<std::size_t> remainder(by_class.size());
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    const std::size_t scaled = count * by_class[c].size();
    quota[c] = n == 0 ? 0 : scaled / n;
    remainder[c] = n == 0 ? 0 : scaled % n;
    assigned += quota[c];
  }
  std::vector<std::size_t> order(by_class.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < count; ++k) {
    ++quota[order[k]];
    ++assigned;
  }

  RngStream rng(seed);
  std::vector<std::size_t> chosen;
  chosen.reserve(count);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    // Partial Fisher-Yates: the first quota[c] slots become the sample.
    for (std::size_t i = 0; i < quota[c]; ++i) {
      std::swap(members[i], members[i + rng.below(members.size() - i)]);
    }
    chosen.insert(chosen.end(), members.begin(),
                  members.begin() + static_cast<std::ptrdiff_t>(quota[c]));
  }
  std::sort(chosen.begin(), chosen.end());

  const Batch picked = gather(dataset, chosen);
  LabeledDataset result;
  result.images = picked.images;
  result.labels = picked.labels;
  result.classes = dataset.classes;
  return result;
}

}  // namespace blindlab
