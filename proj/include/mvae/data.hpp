#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mvae/matrix.hpp"

namespace mvae {

/// Features in [0, 1] with integer labels, before partitioning. Loaders
/// return one of these per source file (or file group).
struct LabeledData {
  std::string name;
  Matrix features;
  std::vector<int> labels;
  int class_count = 0;

  std::size_t size() const noexcept { return labels.size(); }
  void validate() const;
};

enum class Partition : std::uint8_t { train = 0, val = 1, test = 2, unused = 3 };

std::string_view to_string(Partition p);

/// A dataset with a per-row train/val/test tag.
struct DatasetSplit {
  std::string name;
  Matrix features;
  std::vector<int> labels;
  std::vector<Partition> partition;
  int class_count = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t count(Partition p) const;
  Matrix features_of(Partition p) const;
  std::vector<int> labels_of(Partition p) const;
  /// Throws ContractError if features leave [0,1], labels leave
  /// [0, class_count), or lengths disagree.
  void validate() const;

  friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

/// Partition sizes drawn from the front of a stratified shuffle.
struct SplitRule {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
  std::uint64_t seed = 0;
};

/// MNIST-family IDX pair (0x00000803 images, 0x00000801 labels). Pixels are
/// scaled by 1/255 and flattened row-major.
LabeledData load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// CIFAR binary batches: label_bytes label bytes (1 for CIFAR-10; 2 for
/// CIFAR-100, whose second byte is the fine label) followed by 3072
/// channel-major pixel bytes.
LabeledData load_cifar_bin(const std::vector<std::filesystem::path>& paths, int label_bytes = 1);

/// Whitespace-separated text, one sample per line, label in the last column.
LabeledData load_amat(const std::filesystem::path& path);

/// K Gaussian clusters in R^D squashed into [0, 1] by the logistic map.
/// Labels cycle 0..K-1 so classes are balanced.
LabeledData synth_blobs(std::uint64_t seed, int classes, std::size_t samples, std::size_t dim,
                        double spread);

/// Clamps every entry into [0, 1].
void normalize_unit(Matrix& features);

/// Stratified split of one pool: per-class shuffles interleaved so any prefix
/// holds each class in proportion, then train/val/test taken from the front.
/// Rows beyond train + val + test are tagged unused.
DatasetSplit apply_split(const LabeledData& pool, const SplitRule& rule);

/// Split of a pool plus a separate, fixed test fragment (e.g. an official
/// test file). rule.test must be zero.
DatasetSplit apply_split(const LabeledData& pool, const LabeledData& test, const SplitRule& rule);

/// Split sizes for the named benchmark datasets, if name is one of them.
/// Counts are for the training pool; the test partition comes from the
/// official test file.
std::optional<SplitRule> preset_split(const std::string& name);

/// Dataset cache in the shared binary container.
std::vector<std::uint8_t> encode_dataset(const DatasetSplit& data);
DatasetSplit decode_dataset(std::vector<std::uint8_t> bytes);
void save_dataset_cache(const std::filesystem::path& path, const DatasetSplit& data);
DatasetSplit load_dataset_cache(const std::filesystem::path& path);

enum class DataFormat { idx, cifar_bin, amat, synthetic, cache };

DataFormat parse_data_format(std::string_view s);
std::string_view to_string(DataFormat f);

/// Where a dataset comes from and how it is partitioned.
struct DatasetSpec {
  std::string name = "dataset";
  DataFormat format = DataFormat::synthetic;
  /// idx: {images, labels}; amat: {file}; cifar_bin: batch files; cache: {file}.
  std::vector<std::filesystem::path> train_files;
  /// Optional official test files, same layout as train_files.
  std::vector<std::filesystem::path> test_files;
  int cifar_label_bytes = 1;

  int synth_classes = 8;
  std::size_t synth_samples = 2000;
  std::size_t synth_dim = 16;
  double synth_spread = 0.5;

  /// If unset, the preset for name is used, else an error is raised.
  std::optional<SplitRule> split;
  std::uint64_t split_seed = 0;
};

/// Loads and partitions a dataset. Throws ConfigError for missing files or
/// an unusable split, FormatError for malformed files.
DatasetSplit load_dataset(const DatasetSpec& spec);

}  // namespace mvae
