#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "alsn/rng.hpp"
#include "alsn/tensor.hpp"

namespace alsn {

// 8-bit single-channel raster, row-major.
struct GrayImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, fill) {}

  std::uint8_t& at(int y, int x) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  bool inside(int y, int x) const { return y >= 0 && y < height && x >= 0 && x < width; }
  std::size_t count_nonzero() const;
  bool operator==(const GrayImage&) const = default;
};

// Image plus skeleton mask (255 = skeleton, 0 = background).
struct Sample {
  GrayImage image;
  GrayImage mask;
  bool operator==(const Sample&) const = default;
};

enum class ShapeKind { kRectangle, kEllipse, kPolyline };

struct ShapeSpec {
  ShapeKind kind = ShapeKind::kRectangle;
  double cx = 0, cy = 0;       // centre (rectangle, ellipse)
  double half_w = 0, half_h = 0;  // half extents / semi-axes
  double angle = 0;            // radians
  std::vector<std::pair<double, double>> points;  // polyline vertices (x, y)
  double radius = 0;           // polyline half thickness
  int fill = 200;
  std::uint64_t texture_seed = 0;
};

// Foreground raster of one primitive (255 inside, pixel-centre test).
GrayImage rasterize(const ShapeSpec& shape, int height, int width);

// Classic two-subiteration Zhang-Suen thinning, iterated to a fixed point.
// Input: nonzero = foreground. Output: 0/255.
GrayImage zhang_suen_thin(const GrayImage& foreground);

// Number of 8-connected components of the nonzero pixels.
int count_components8(const GrayImage& map);

struct SynthOptions {
  int min_shapes = 1;
  int max_shapes = 3;
  int noise_amplitude = 10;  // uniform noise in [-a, a] gray levels
};

// Renders 1-3 non-overlapping primitives over a noisy flat background; the
// mask is the thinned union of the primitives. Sample i depends only on
// (seed, i).
Sample generate_sample(std::uint64_t seed, int index, int size, const SynthOptions& opt = {});
std::vector<Sample> generate(std::uint64_t seed, int count, int size, const SynthOptions& opt = {});

// Foreground union used to draw sample `index` (for oracle checks).
GrayImage generate_foreground(std::uint64_t seed, int index, int size, const SynthOptions& opt = {});

// Renders an explicit list of shapes with the given background level.
Sample render_shapes(const std::vector<ShapeSpec>& shapes, int size, int background, int noise_amplitude,
                     std::uint64_t noise_seed);

enum class Flip { kNone, kLeftRight, kUpDown };

struct Augmentation {
  double scale = 1.0;   // 0.8, 1.0 or 1.2
  int quarter_turns = 0;  // counter-clockwise 90 degree steps
  Flip flip = Flip::kNone;
  bool operator==(const Augmentation&) const = default;
};

// The 36 combinations of {0.8, 1.0, 1.2} x {0, 90, 180, 270} x {none, lr, ud}.
std::vector<Augmentation> all_augmentations();
Augmentation sample_augmentation(Rng& rng);
// Scale (bilinear image, nearest mask), rotate, flip, then centre pad/crop
// back to the input size. The mask is re-binarized.
Sample apply_augmentation(const Sample& s, const Augmentation& a);
Sample augment(const Sample& s, Rng& rng);

// Binary PGM (P5, maxval 255).
GrayImage read_pgm(const std::filesystem::path& path);
GrayImage parse_pgm(const std::string& bytes, const std::string& origin = "<memory>");
void write_pgm(const GrayImage& image, const std::filesystem::path& path);
std::string format_pgm(const GrayImage& image);

// images/NNNN.pgm, masks/NNNN.pgm, manifest.txt.
void write_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples);
std::vector<Sample> read_dataset(const std::filesystem::path& dir);

// Deterministic split: the last floor(n * val_fraction) samples validate.
struct DatasetSplit {
  std::vector<Sample> train;
  std::vector<Sample> val;
};
DatasetSplit split_dataset(std::vector<Sample> samples, double val_fraction);

template <typename T>
Tensor<T> image_tensor(const GrayImage& img);  // 1 x H x W, values / 255
template <typename T>
Tensor<T> mask_tensor(const GrayImage& mask);  // 1 x H x W, 0 or 1

}  // namespace alsn
