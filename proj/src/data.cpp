#include "trixlab/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "trixlab/errors.hpp"
#include "trixlab/rng.hpp"

namespace trixlab {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;
constexpr double kEnvelope = 4.0;

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (offset + 4 > bytes.size()) {
    throw FormatError(path.string() + ": truncated at byte offset " + std::to_string(offset) +
                      " (file has " + std::to_string(bytes.size()) + " bytes)");
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                              static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b.data(), 4);
}

void check_magic(std::uint32_t magic, std::uint32_t expected, const std::filesystem::path& path) {
  if (magic == expected) return;
  std::ostringstream msg;
  msg << path.string() << ": bad magic 0x" << std::hex << magic << " at byte offset 0, expected 0x"
      << expected;
  if (magic == kLabelsMagic) msg << " (this is a label file)";
  if (magic == kImagesMagic) msg << " (this is an image file)";
  throw FormatError(msg.str());
}

// Standard normal truncated to [-kEnvelope, kEnvelope] by redrawing.
double truncated_normal(Rng& rng) {
  for (;;) {
    const double z = rng.normal();
    if (std::abs(z) <= kEnvelope) return z;
  }
}

std::size_t infer_classes(const std::vector<int>& labels, std::optional<std::size_t> num_classes) {
  if (num_classes) return *num_classes;
  const int top = labels.empty() ? 0 : *std::ranges::max_element(labels);
  return static_cast<std::size_t>(std::max(top + 1, 2));
}

}  // namespace

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (int y : labels) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

Tensor Dataset::gather_inputs(std::span<const std::size_t> indices) const {
  const std::size_t d = dim();
  std::vector<double> values;
  values.reserve(indices.size() * d);
  for (std::size_t idx : indices) {
    auto row = inputs.row(idx);
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor::matrix(indices.size(), d, std::move(values));
}

std::vector<int> Dataset::gather_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t idx : indices) out.push_back(labels[idx]);
  return out;
}

void Dataset::validate() const {
  if (labels.empty()) throw FormatError("dataset is empty");
  if (inputs.rank() != 2 || inputs.rows() != labels.size()) {
    throw FormatError("dataset inputs " + shape_string(inputs.shape()) + " do not match " +
                      std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw FormatError("label " + std::to_string(y) + " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
  for (double v : inputs.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw FormatError("input value outside [0, 1]");
  }
}

Dataset make_dataset(Tensor inputs, std::vector<int> labels, std::size_t num_classes) {
  Dataset data{std::move(inputs), std::move(labels), num_classes};
  data.validate();
  return data;
}

void SynthConfig::validate() const {
  if (num_classes < 2) throw ConfigError("synthetic data needs at least 2 classes");
  if (dim < 1) throw ConfigError("synthetic data needs dim >= 1");
  if (samples_per_class < 1) throw ConfigError("samples_per_class must be >= 1");
  if (!class_std.empty() && class_std.size() != num_classes) {
    throw ConfigError("class_std needs one entry per class");
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (!(std_of(c) > 0.0) || !std::isfinite(std_of(c))) throw ConfigError("class std must be positive");
  }
  if (!(layout_unit > 0.0) || !std::isfinite(layout_unit)) throw ConfigError("layout_unit must be positive");
  if (!centers.empty()) {
    if (centers.size() != num_classes) throw ConfigError("centers needs one row per class");
    for (const auto& c : centers) {
      if (c.size() != dim) throw ConfigError("every center needs dim coordinates");
      for (double v : c) {
        if (!std::isfinite(v)) throw ConfigError("centers must be finite to fit the squeeze envelope");
      }
    }
  }
}

std::vector<std::vector<double>> default_layout(const SynthConfig& cfg) {
  if (cfg.num_classes != 4 || cfg.dim < 3) {
    throw ConfigError("the default strong/weak layout needs 4 classes and dim >= 3; pass explicit centers");
  }
  const double sigma = cfg.layout_unit;
  std::vector<std::vector<double>> centers(4, std::vector<double>(cfg.dim, 0.0));
  centers[0][0] = -0.5 * cfg.strong_separation * sigma;
  centers[1][0] = 0.5 * cfg.strong_separation * sigma;
  centers[2][1] = -0.5 * cfg.weak_separation * sigma;
  centers[3][1] = 0.5 * cfg.weak_separation * sigma;
  centers[2][2] = cfg.pair_offset * sigma;
  centers[3][2] = cfg.pair_offset * sigma;
  return centers;
}

SqueezeMap squeeze_map(const SynthConfig& cfg) {
  cfg.validate();
  const auto centers = cfg.centers.empty() ? default_layout(cfg) : cfg.centers;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t c = 0; c < cfg.num_classes; ++c) {
    for (std::size_t d = 0; d < cfg.dim; ++d) {
      lo = std::min(lo, centers[c][d] - kEnvelope * cfg.std_of(c));
      hi = std::max(hi, centers[c][d] + kEnvelope * cfg.std_of(c));
    }
  }
  if (!(hi > lo) || !std::isfinite(hi - lo)) throw ConfigError("centers cannot fit the squeeze envelope");
  return {lo, 0.9 / (hi - lo)};
}

Dataset synth_gaussian_mixture(const SynthConfig& cfg) {
  cfg.validate();
  const auto centers = cfg.centers.empty() ? default_layout(cfg) : cfg.centers;
  const SqueezeMap map = squeeze_map(cfg);
  const std::size_t n = cfg.num_classes * cfg.samples_per_class;
  Tensor inputs = Tensor::zeros({n, cfg.dim});
  std::vector<int> labels(n);
  Rng rng(cfg.seed);
  std::size_t row = 0;
  for (std::size_t c = 0; c < cfg.num_classes; ++c) {
    for (std::size_t s = 0; s < cfg.samples_per_class; ++s, ++row) {
      labels[row] = static_cast<int>(c);
      for (std::size_t d = 0; d < cfg.dim; ++d) {
        const double raw = centers[c][d] + cfg.std_of(c) * truncated_normal(rng);
        inputs(row, d) = map.apply(raw);
      }
    }
  }
  return make_dataset(std::move(inputs), std::move(labels), cfg.num_classes);
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 std::optional<std::size_t> num_classes) {
  const auto image_bytes = read_bytes(images_path);
  const auto label_bytes = read_bytes(labels_path);

  check_magic(read_be32(image_bytes, 0, images_path), kImagesMagic, images_path);
  const std::uint32_t count = read_be32(image_bytes, 4, images_path);
  const std::uint32_t rows = read_be32(image_bytes, 8, images_path);
  const std::uint32_t cols = read_be32(image_bytes, 12, images_path);
  const std::size_t dim = std::size_t{rows} * cols;
  const std::size_t needed = 16 + std::size_t{count} * dim;
  if (image_bytes.size() < needed) {
    throw FormatError(images_path.string() + ": truncated pixel data at byte offset " +
                      std::to_string(image_bytes.size()) + ", expected " + std::to_string(needed) + " bytes");
  }

  check_magic(read_be32(label_bytes, 0, labels_path), kLabelsMagic, labels_path);
  const std::uint32_t label_count = read_be32(label_bytes, 4, labels_path);
  if (label_count != count) {
    throw FormatError("count mismatch: " + images_path.string() + " has " + std::to_string(count) +
                      " images (byte offset 4) but " + labels_path.string() + " has " +
                      std::to_string(label_count) + " labels (byte offset 4)");
  }
  if (label_bytes.size() < 8 + std::size_t{count}) {
    throw FormatError(labels_path.string() + ": truncated label data at byte offset " +
                      std::to_string(label_bytes.size()) + ", expected " + std::to_string(8 + count) + " bytes");
  }
  if (count == 0 || dim == 0) throw FormatError(images_path.string() + ": no images");

  std::vector<double> values(std::size_t{count} * dim);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = image_bytes[16 + i] / 255.0;
  std::vector<int> labels(count);
  for (std::size_t i = 0; i < count; ++i) labels[i] = label_bytes[8 + i];
  const std::size_t classes = infer_classes(labels, num_classes);
  return make_dataset(Tensor::matrix(count, dim, std::move(values)), std::move(labels), classes);
}

void write_idx(const Dataset& data, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
  std::ofstream images(images_path, std::ios::binary);
  std::ofstream labels(labels_path, std::ios::binary);
  if (!images || !labels) throw FormatError("cannot write IDX files");
  write_be32(images, kImagesMagic);
  write_be32(images, static_cast<std::uint32_t>(data.size()));
  write_be32(images, static_cast<std::uint32_t>(data.dim()));
  write_be32(images, 1);
  for (double v : data.inputs.values()) {
    images.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
  }
  write_be32(labels, kLabelsMagic);
  write_be32(labels, static_cast<std::uint32_t>(data.size()));
  for (int y : data.labels) labels.put(static_cast<char>(static_cast<unsigned char>(y)));
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "label";
  for (std::size_t d = 0; d < data.dim(); ++d) out << ",x" << d;
  out << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.labels[i];
    for (double v : data.inputs.row(i)) out << ',' << v;
    out << '\n';
  }
}

Dataset read_csv(const std::filesystem::path& path, std::optional<std::size_t> num_classes) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("label", 0) != 0) {
    throw FormatError(path.string() + ": expected header label,x0,...");
  }
  const std::size_t dim = static_cast<std::size_t>(std::ranges::count(line, ','));
  if (dim == 0) throw FormatError(path.string() + ": no feature columns");
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != dim + 1) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(dim + 1) + " columns");
    }
    try {
      labels.push_back(std::stoi(cells[0]));
      for (std::size_t d = 1; d <= dim; ++d) values.push_back(std::stod(cells[d]));
    } catch (const std::exception&) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": not a number");
    }
  }
  if (labels.empty()) throw FormatError(path.string() + ": no rows");
  const std::size_t classes = infer_classes(labels, num_classes);
  Tensor inputs = Tensor::matrix(labels.size(), dim, std::move(values));
  return make_dataset(std::move(inputs), std::move(labels), classes);
}

std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size, std::uint64_t epoch_seed) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(epoch_seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(order[i - 1], order[j]);
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

}  // namespace trixlab
