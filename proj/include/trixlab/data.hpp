#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trixlab/tensor.hpp"

namespace trixlab {

struct Dataset {
  Tensor inputs;            // N x D, every value in [0, 1]
  std::vector<int> labels;  // N entries in {0..C-1}
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return inputs.cols(); }
  std::vector<std::size_t> class_counts() const;

  // Rows at the given indices, in order.
  Tensor gather_inputs(std::span<const std::size_t> indices) const;
  std::vector<int> gather_labels(std::span<const std::size_t> indices) const;

  // Throws FormatError if any invariant is broken.
  void validate() const;
};

Dataset make_dataset(Tensor inputs, std::vector<int> labels, std::size_t num_classes);

// Gaussian mixture with one isotropic component per class. Centers and std are
// in raw units; samples are drawn, truncated to the +-4 std envelope, and then
// mapped by one affine squeeze (the same for every coordinate) of the envelope
// onto [0.05, 0.95].
struct SynthConfig {
  std::size_t num_classes = 4;
  std::size_t dim = 8;
  std::size_t samples_per_class = 500;
  std::vector<double> class_std;             // one per class; empty means 1.0 for all
  std::vector<std::vector<double>> centers;  // C x D; empty means the default strong/weak layout
  double layout_unit = 1.0;                  // distance unit of the default layout
  double strong_separation = 6.0;            // in layout units, default layout only
  double weak_separation = 1.5;
  double pair_offset = 3.0;                  // distance between the strong and weak pairs
  std::uint64_t seed = 0;

  void validate() const;
  double std_of(std::size_t c) const { return class_std.empty() ? 1.0 : class_std[c]; }
};

// Default 4-class layout: strong classes 0 and 1 separated along axis 0,
// weak classes 2 and 3 separated along axis 1 and offset from the strong pair
// along axis 2.
std::vector<std::vector<double>> default_layout(const SynthConfig& cfg);

struct SqueezeMap {
  double lo = 0.0;     // raw value mapped to 0.05
  double scale = 1.0;  // 0.9 / envelope width

  double apply(double raw) const { return 0.05 + (raw - lo) * scale; }
};

SqueezeMap squeeze_map(const SynthConfig& cfg);
Dataset synth_gaussian_mixture(const SynthConfig& cfg);

// IDX (big-endian, magic 0x00000803 for images / 0x00000801 for labels).
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 std::optional<std::size_t> num_classes = std::nullopt);
// Pixels are rounded to bytes; images are written as N x D x 1.
void write_idx(const Dataset& data, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path);

// CSV with header label,x0..x{D-1}.
void write_csv(const Dataset& data, const std::filesystem::path& path);
Dataset read_csv(const std::filesystem::path& path, std::optional<std::size_t> num_classes = std::nullopt);

// Seeded shuffle of 0..N-1 cut into consecutive batches; the last may be short.
std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size, std::uint64_t epoch_seed);

}  // namespace trixlab
