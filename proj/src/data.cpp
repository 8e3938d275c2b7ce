#include "mvae/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mvae/container.hpp"
#include "mvae/error.hpp"
#include "mvae/rng.hpp"

namespace mvae {

namespace fs = std::filesystem;

namespace {

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
constexpr std::size_t kCifarPixels = 3072;

std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t at, const fs::path& path) {
  if (b.size() < at + 4) {
    throw FormatError(path.string() + ": truncated header at byte offset " + std::to_string(at), at);
  }
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

void check_payload(const std::vector<std::uint8_t>& b, std::size_t header, std::size_t payload,
                   const fs::path& path) {
  if (b.size() < header + payload) {
    throw FormatError(path.string() + ": truncated payload at byte offset " +
                          std::to_string(b.size()) + " (expected " +
                          std::to_string(header + payload) + " bytes)",
                      b.size());
  }
  if (b.size() > header + payload) {
    throw FormatError(path.string() + ": unexpected trailing data at byte offset " +
                          std::to_string(header + payload),
                      header + payload);
  }
}

std::vector<std::uint8_t> read_existing(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("dataset file not found: " + path.string());
  return read_file_bytes(path);
}

int max_label_plus_one(const std::vector<int>& labels) {
  int m = 0;
  for (int l : labels) m = std::max(m, l + 1);
  return m;
}

}  // namespace

void LabeledData::validate() const {
  if (features.rows() != labels.size()) {
    throw ContractError(name + ": " + std::to_string(features.rows()) + " feature rows but " +
                        std::to_string(labels.size()) + " labels");
  }
  for (double v : features.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw ContractError(name + ": feature outside [0,1]");
  }
  for (int l : labels) {
    if (l < 0 || l >= class_count) throw ContractError(name + ": label outside [0, K)");
  }
}

std::string_view to_string(Partition p) {
  switch (p) {
    case Partition::train: return "train";
    case Partition::val: return "val";
    case Partition::test: return "test";
    case Partition::unused: return "unused";
  }
  return "unknown";
}

std::size_t DatasetSplit::count(Partition p) const {
  return static_cast<std::size_t>(std::count(partition.begin(), partition.end(), p));
}

Matrix DatasetSplit::features_of(Partition p) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < partition.size(); ++i)
    if (partition[i] == p) idx.push_back(i);
  return gather_rows(features, idx);
}

std::vector<int> DatasetSplit::labels_of(Partition p) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < partition.size(); ++i)
    if (partition[i] == p) out.push_back(labels[i]);
  return out;
}

void DatasetSplit::validate() const {
  LabeledData{name, features, labels, class_count}.validate();
  if (partition.size() != labels.size()) {
    throw ContractError(name + ": partition tags do not cover every row");
  }
}

LabeledData load_idx(const fs::path& images, const fs::path& labels) {
  const auto ib = read_existing(images);
  const auto lb = read_existing(labels);

  if (const auto magic = read_be32(ib, 0, images); magic != kIdxImageMagic) {
    throw FormatError(images.string() + ": bad IDX image magic at byte offset 0", 0);
  }
  const std::size_t count = read_be32(ib, 4, images);
  const std::size_t rows = read_be32(ib, 8, images);
  const std::size_t cols = read_be32(ib, 12, images);
  const std::size_t dim = rows * cols;
  check_payload(ib, 16, count * dim, images);

  if (const auto magic = read_be32(lb, 0, labels); magic != kIdxLabelMagic) {
    throw FormatError(labels.string() + ": bad IDX label magic at byte offset 0", 0);
  }
  const std::size_t label_count = read_be32(lb, 4, labels);
  check_payload(lb, 8, label_count, labels);
  if (label_count != count) {
    throw FormatError(labels.string() + ": " + std::to_string(label_count) + " labels for " +
                          std::to_string(count) + " images (count at byte offset 4)",
                      4);
  }

  LabeledData out;
  out.name = images.stem().string();
  out.features = Matrix(count, dim);
  auto values = out.features.values();
  for (std::size_t i = 0; i < count * dim; ++i) values[i] = static_cast<double>(ib[16 + i]) / 255.0;
  out.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) out.labels[i] = lb[8 + i];
  out.class_count = std::max(10, max_label_plus_one(out.labels));
  return out;
}

LabeledData load_cifar_bin(const std::vector<fs::path>& paths, int label_bytes) {
  if (label_bytes != 1 && label_bytes != 2) {
    throw ContractError("load_cifar_bin: label_bytes must be 1 or 2");
  }
  const std::size_t record = static_cast<std::size_t>(label_bytes) + kCifarPixels;
  std::vector<std::vector<std::uint8_t>> files;
  std::size_t total = 0;
  for (const auto& p : paths) {
    auto bytes = read_existing(p);
    if (bytes.empty() || bytes.size() % record != 0) {
      const std::size_t at = bytes.size() - bytes.size() % record;
      throw FormatError(p.string() + ": length " + std::to_string(bytes.size()) +
                            " is not a positive multiple of the " + std::to_string(record) +
                            "-byte record (partial record at byte offset " + std::to_string(at) +
                            ")",
                        at);
    }
    total += bytes.size() / record;
    files.push_back(std::move(bytes));
  }

  LabeledData out;
  out.name = paths.empty() ? "cifar" : paths.front().stem().string();
  out.features = Matrix(total, kCifarPixels);
  out.labels.resize(total);
  out.class_count = label_bytes == 1 ? 10 : 100;
  std::size_t row = 0;
  for (const auto& bytes : files) {
    for (std::size_t at = 0; at < bytes.size(); at += record, ++row) {
      const int label = bytes[at + static_cast<std::size_t>(label_bytes) - 1];
      if (label >= out.class_count) {
        throw FormatError("label " + std::to_string(label) + " out of range at byte offset " +
                              std::to_string(at),
                          at);
      }
      out.labels[row] = label;
      auto dst = out.features.row(row);
      const std::uint8_t* px = bytes.data() + at + label_bytes;
      for (std::size_t j = 0; j < kCifarPixels; ++j) dst[j] = static_cast<double>(px[j]) / 255.0;
    }
  }
  return out;
}

LabeledData load_amat(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("dataset file not found: " + path.string());
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t width = 0;
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> row;
  while (std::getline(in, line)) {
    ++line_no;
    row.clear();
    const char* p = line.data();
    const char* end = p + line.size();
    while (p < end) {
      while (p < end && std::isspace(static_cast<unsigned char>(*p))) ++p;
      if (p == end) break;
      double v = 0.0;
      const auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc() || (next < end && !std::isspace(static_cast<unsigned char>(*next)))) {
        throw FormatError(path.string() + ": non-numeric token at line " + std::to_string(line_no),
                          line_no);
      }
      row.push_back(v);
      p = next;
    }
    if (row.empty()) continue;
    if (row.size() < 2) {
      throw FormatError(path.string() + ": line " + std::to_string(line_no) +
                            " needs at least one feature and a label",
                        line_no);
    }
    if (width == 0) width = row.size();
    if (row.size() != width) {
      throw FormatError(path.string() + ": ragged row at line " + std::to_string(line_no) + " (" +
                            std::to_string(row.size()) + " columns, expected " +
                            std::to_string(width) + ")",
                        line_no);
    }
    const double label = row.back();
    if (!std::isfinite(label) || label != std::floor(label) || label < 0.0 || label > 1e6) {
      throw FormatError(path.string() + ": non-integer label at line " + std::to_string(line_no),
                        line_no);
    }
    labels.push_back(static_cast<int>(label));
    for (std::size_t j = 0; j + 1 < row.size(); ++j) {
      if (!std::isfinite(row[j])) {
        throw FormatError(path.string() + ": non-finite feature at line " + std::to_string(line_no),
                          line_no);
      }
      values.push_back(row[j]);
    }
  }
  if (labels.empty()) throw FormatError(path.string() + ": no samples", 0);

  LabeledData out;
  out.name = path.stem().string();
  out.features = Matrix(labels.size(), width - 1, std::move(values));
  normalize_unit(out.features);
  out.labels = std::move(labels);
  out.class_count = max_label_plus_one(out.labels);
  return out;
}

LabeledData synth_blobs(std::uint64_t seed, int classes, std::size_t samples, std::size_t dim,
                        double spread) {
  if (classes < 1) throw ContractError("synth_blobs: need at least one class");
  if (samples < static_cast<std::size_t>(classes)) {
    throw ContractError("synth_blobs: need at least one sample per class");
  }
  if (dim < 1 || !(spread >= 0.0)) throw ContractError("synth_blobs: bad dim or spread");
  const Rng root(seed);
  Rng center_rng = root.derive("centers");
  Rng point_rng = root.derive("points");

  // Centers at scale 4 in logit space: well separated, and the squashed
  // features sit near 0 or 1 like ink on a background.
  Matrix centers(static_cast<std::size_t>(classes), dim);
  for (double& v : centers.values()) v = 4.0 * center_rng.normal();

  LabeledData out;
  out.name = "blobs";
  out.class_count = classes;
  out.features = Matrix(samples, dim);
  out.labels.resize(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    const int label = static_cast<int>(i % static_cast<std::size_t>(classes));
    out.labels[i] = label;
    auto dst = out.features.row(i);
    auto c = centers.row(static_cast<std::size_t>(label));
    for (std::size_t j = 0; j < dim; ++j) {
      dst[j] = 1.0 / (1.0 + std::exp(-(c[j] + spread * point_rng.normal())));
    }
  }
  return out;
}

void normalize_unit(Matrix& features) {
  for (double& v : features.values()) v = std::clamp(v, 0.0, 1.0);
}

namespace {

// Order of pool rows such that every prefix is class-balanced.
std::vector<std::size_t> stratified_order(const std::vector<int>& labels, int class_count,
                                          std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(class_count));
  for (std::size_t i = 0; i < labels.size(); ++i)
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);

  struct Slot {
    double position;
    std::size_t cls;
    std::size_t row;
  };
  std::vector<Slot> slots;
  slots.reserve(labels.size());
  const Rng root(seed);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& rows = by_class[c];
    Rng rng = root.derive("stratify", c);
    const auto perm = rng.permutation(rows.size());
    const double n = static_cast<double>(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      slots.push_back({(static_cast<double>(k) + 0.5) / n, c, rows[perm[k]]});
    }
  }
  std::sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) {
    if (a.position != b.position) return a.position < b.position;
    return a.cls < b.cls;
  });
  std::vector<std::size_t> order(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i) order[i] = slots[i].row;
  return order;
}

}  // namespace

DatasetSplit apply_split(const LabeledData& pool, const SplitRule& rule) {
  pool.validate();
  const std::size_t wanted = rule.train + rule.val + rule.test;
  if (wanted > pool.size()) {
    throw ContractError("apply_split: rule asks for " + std::to_string(wanted) + " rows but " +
                        pool.name + " has " + std::to_string(pool.size()));
  }
  const auto order = stratified_order(pool.labels, pool.class_count, rule.seed);
  DatasetSplit out;
  out.name = pool.name;
  out.class_count = pool.class_count;
  out.features = gather_rows(pool.features, order);
  out.labels.resize(order.size());
  out.partition.resize(order.size(), Partition::unused);
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.labels[i] = pool.labels[order[i]];
    if (i < rule.train) out.partition[i] = Partition::train;
    else if (i < rule.train + rule.val) out.partition[i] = Partition::val;
    else if (i < wanted) out.partition[i] = Partition::test;
  }
  return out;
}

DatasetSplit apply_split(const LabeledData& pool, const LabeledData& test, const SplitRule& rule) {
  if (rule.test != 0) {
    throw ContractError("apply_split: rule.test must be 0 when a test fragment is supplied");
  }
  test.validate();
  if (test.features.cols() != pool.features.cols()) {
    throw ContractError("apply_split: test fragment width differs from pool");
  }
  DatasetSplit out = apply_split(pool, rule);
  out.class_count = std::max(out.class_count, test.class_count);
  Matrix merged(out.size() + test.size(), pool.features.cols());
  std::copy(out.features.values().begin(), out.features.values().end(), merged.values().begin());
  std::copy(test.features.values().begin(), test.features.values().end(),
            merged.values().begin() + static_cast<std::ptrdiff_t>(out.features.size()));
  out.features = std::move(merged);
  out.labels.insert(out.labels.end(), test.labels.begin(), test.labels.end());
  out.partition.insert(out.partition.end(), test.size(), Partition::test);
  return out;
}

std::optional<SplitRule> preset_split(const std::string& name) {
  if (name == "mnist_basic" || name == "mnist_rotated" || name == "mnist_background_images" ||
      name == "mnist_background_random") {
    return SplitRule{10000, 2000, 0, 0};
  }
  if (name == "fashion_mnist") return SplitRule{50000, 10000, 0, 0};
  if (name == "cifar10" || name == "cifar100") return SplitRule{45000, 5000, 0, 0};
  return std::nullopt;
}

std::vector<std::uint8_t> encode_dataset(const DatasetSplit& data) {
  data.validate();
  ByteWriter w;
  write_container_preamble(w, ContainerKind::dataset);
  w.u32(static_cast<std::uint32_t>(data.class_count));
  w.u32(static_cast<std::uint32_t>(data.name.size()));
  w.raw(data.name.data(), data.name.size());
  w.u32(3);
  w.matrix(data.features);
  Matrix labels(data.size(), 1), partition(data.size(), 1);
  for (std::size_t i = 0; i < data.size(); ++i) {
    labels(i, 0) = data.labels[i];
    partition(i, 0) = static_cast<double>(data.partition[i]);
  }
  w.matrix(labels);
  w.matrix(partition);
  return w.bytes();
}

DatasetSplit decode_dataset(std::vector<std::uint8_t> bytes) {
  ByteReader r(std::move(bytes));
  read_container_preamble(r, ContainerKind::dataset);
  DatasetSplit out;
  out.class_count = static_cast<int>(r.u32());
  const std::uint32_t name_len = r.u32();
  out.name = r.raw(name_len);
  std::size_t at = r.offset();
  if (r.u32() != 3) throw FormatError("dataset cache must hold 3 matrices", at);
  out.features = r.matrix();
  at = r.offset();
  const Matrix labels = r.matrix();
  const Matrix partition = r.matrix();
  if (labels.rows() != out.features.rows() || labels.cols() != 1 ||
      partition.rows() != out.features.rows() || partition.cols() != 1) {
    throw FormatError("dataset cache label/partition columns disagree with feature rows", at);
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes in dataset cache", r.offset());
  out.labels.resize(labels.rows());
  out.partition.resize(labels.rows());
  for (std::size_t i = 0; i < labels.rows(); ++i) {
    out.labels[i] = static_cast<int>(labels(i, 0));
    const double p = partition(i, 0);
    if (p < 0.0 || p > 3.0 || p != std::floor(p)) throw FormatError("bad partition tag", at);
    out.partition[i] = static_cast<Partition>(static_cast<int>(p));
  }
  out.validate();
  return out;
}

void save_dataset_cache(const fs::path& path, const DatasetSplit& data) {
  write_file_bytes(path, encode_dataset(data));
}

DatasetSplit load_dataset_cache(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("dataset file not found: " + path.string());
  return decode_dataset(read_file_bytes(path));
}

DataFormat parse_data_format(std::string_view s) {
  if (s == "idx") return DataFormat::idx;
  if (s == "cifar_bin") return DataFormat::cifar_bin;
  if (s == "amat") return DataFormat::amat;
  if (s == "synthetic") return DataFormat::synthetic;
  if (s == "cache") return DataFormat::cache;
  throw ConfigError("unknown data format '" + std::string(s) + "'");
}

std::string_view to_string(DataFormat f) {
  switch (f) {
    case DataFormat::idx: return "idx";
    case DataFormat::cifar_bin: return "cifar_bin";
    case DataFormat::amat: return "amat";
    case DataFormat::synthetic: return "synthetic";
    case DataFormat::cache: return "cache";
  }
  return "unknown";
}

namespace {

LabeledData load_fragment(const DatasetSpec& spec, const std::vector<fs::path>& files) {
  switch (spec.format) {
    case DataFormat::idx:
      if (files.size() != 2) throw ConfigError("idx data needs an images file and a labels file");
      return load_idx(files[0], files[1]);
    case DataFormat::cifar_bin:
      if (files.empty()) throw ConfigError("cifar_bin data needs at least one batch file");
      return load_cifar_bin(files, spec.cifar_label_bytes);
    case DataFormat::amat:
      if (files.size() != 1) throw ConfigError("amat data needs exactly one file");
      return load_amat(files[0]);
    default:
      throw ConfigError("format has no file fragments");
  }
}

}  // namespace

DatasetSplit load_dataset(const DatasetSpec& spec) {
  if (spec.format == DataFormat::cache) {
    if (spec.train_files.size() != 1) throw ConfigError("cache data needs exactly one file");
    return load_dataset_cache(spec.train_files[0]);
  }

  LabeledData pool =
      spec.format == DataFormat::synthetic
          ? synth_blobs(spec.split_seed, spec.synth_classes, spec.synth_samples, spec.synth_dim,
                        spec.synth_spread)
          : load_fragment(spec, spec.train_files);
  pool.name = spec.name;

  std::optional<SplitRule> rule = spec.split ? spec.split : preset_split(spec.name);
  if (!rule) throw ConfigError("no split given for dataset '" + spec.name + "'");
  rule->seed = spec.split_seed;

  const auto too_big = [&](std::size_t have) {
    return ConfigError("split " + std::to_string(rule->train) + "/" + std::to_string(rule->val) +
                       "/" + std::to_string(rule->test) + " exceeds the " + std::to_string(have) +
                       " available samples of '" + spec.name + "'");
  };
  if (!spec.test_files.empty()) {
    LabeledData test = load_fragment(spec, spec.test_files);
    if (rule->train + rule->val > pool.size()) throw too_big(pool.size());
    return apply_split(pool, test, SplitRule{rule->train, rule->val, 0, rule->seed});
  }
  if (rule->train + rule->val + rule->test > pool.size()) throw too_big(pool.size());
  return apply_split(pool, *rule);
}

}  // namespace mvae
