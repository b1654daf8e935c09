#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "alma/tensor.hpp"

namespace alma {

/// Labelled images sharing one shape, values in [0,1].
struct Dataset {
  Shape shape;
  std::vector<Tensor> images;
  std::vector<std::size_t> labels;

  std::size_t size() const { return images.size(); }
  /// Throws when images and labels disagree in count or shape.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Binary container: "ALMADS1\n", header lines count=, shape=, label_width=8, end,
/// then one length-prefixed f64 block per image, then one little-endian u64 per label.
std::string serialize_dataset(const Dataset& data);
Dataset parse_dataset(const std::string& bytes);
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& data, const std::filesystem::path& path);

/// Reads <root>/<label>/*.pgm|*.ppm (P2, P3, P5, P6). Grayscale images are
/// replicated to three channels when the directory also holds colour images.
/// Files are visited in lexicographic order.
Dataset import_image_directory(const std::filesystem::path& root);

/// Procedural 10-class 3x8x8 digit glyphs: dark random background, bright random
/// foreground, one-pixel jitter, Gaussian noise. Labels cycle 0..9.
Dataset make_desk_dataset(std::size_t count, std::uint64_t seed);

/// First `count` samples of a deterministic permutation of [0, n) (all of them when count >= n).
std::vector<std::size_t> select_samples(std::size_t n, std::size_t count, std::uint64_t seed);

}  // namespace alma
