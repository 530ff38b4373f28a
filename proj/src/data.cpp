#include "alsn/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace alsn {

std::size_t GrayImage::count_nonzero() const {
  return static_cast<std::size_t>(std::count_if(pixels.begin(), pixels.end(), [](std::uint8_t v) { return v != 0; }));
}

// ---- rasterization ----

namespace {

double segment_distance(double px, double py, std::pair<double, double> a, std::pair<double, double> b) {
  const double dx = b.first - a.first, dy = b.second - a.second;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((px - a.first) * dx + (py - a.second) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = a.first + t * dx - px, ey = a.second + t * dy - py;
  return std::sqrt(ex * ex + ey * ey);
}

}  // namespace

GrayImage rasterize(const ShapeSpec& shape, int height, int width) {
  GrayImage out(height, width);
  const double c = std::cos(shape.angle), s = std::sin(shape.angle);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      bool in = false;
      if (shape.kind == ShapeKind::kPolyline) {
        for (std::size_t i = 0; i + 1 < shape.points.size() && !in; ++i)
          in = segment_distance(x, y, shape.points[i], shape.points[i + 1]) <= shape.radius;
      } else {
        const double dx = x - shape.cx, dy = y - shape.cy;
        const double u = c * dx + s * dy, v = -s * dx + c * dy;
        if (shape.kind == ShapeKind::kRectangle) {
          in = std::abs(u) < shape.half_w && std::abs(v) < shape.half_h;
        } else {
          const double a = u / shape.half_w, b = v / shape.half_h;
          in = a * a + b * b <= 1.0;
        }
      }
      if (in) out.at(y, x) = 255;
    }
  }
  return out;
}

// ---- thinning ----

GrayImage zhang_suen_thin(const GrayImage& foreground) {
  const int h = foreground.height, w = foreground.width;
  std::vector<std::uint8_t> on(foreground.pixels.size());
  for (std::size_t i = 0; i < on.size(); ++i) on[i] = foreground.pixels[i] ? 1 : 0;
  auto px = [&](int y, int x) -> int {
    return (y >= 0 && y < h && x >= 0 && x < w) ? on[static_cast<std::size_t>(y) * w + x] : 0;
  };

  std::vector<std::size_t> marked;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      marked.clear();
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (!px(y, x)) continue;
          // P2..P9 clockwise from north.
          const int p[8] = {px(y - 1, x), px(y - 1, x + 1), px(y, x + 1), px(y + 1, x + 1),
                            px(y + 1, x), px(y + 1, x - 1), px(y, x - 1), px(y - 1, x - 1)};
          int b = 0, a = 0;
          for (int i = 0; i < 8; ++i) {
            b += p[i];
            if (p[i] == 0 && p[(i + 1) % 8] == 1) ++a;
          }
          if (b < 2 || b > 6 || a != 1) continue;
          const int p2 = p[0], p4 = p[2], p6 = p[4], p8 = p[6];
          if (pass == 0) {
            if (p2 * p4 * p6 != 0 || p4 * p6 * p8 != 0) continue;
          } else {
            if (p2 * p4 * p8 != 0 || p2 * p6 * p8 != 0) continue;
          }
          marked.push_back(static_cast<std::size_t>(y) * w + x);
        }
      }
      for (std::size_t i : marked) on[i] = 0;
      if (!marked.empty()) changed = true;
    }
  }
  GrayImage out(h, w);
  for (std::size_t i = 0; i < on.size(); ++i) out.pixels[i] = on[i] ? 255 : 0;
  return out;
}

int count_components8(const GrayImage& map) {
  const int h = map.height, w = map.width;
  std::vector<int> label(map.pixels.size(), 0);
  std::vector<std::pair<int, int>> stack;
  int count = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!map.at(y, x) || label[static_cast<std::size_t>(y) * w + x]) continue;
      ++count;
      stack.push_back({y, x});
      label[static_cast<std::size_t>(y) * w + x] = count;
      while (!stack.empty()) {
        auto [cy, cx] = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int ny = cy + dy, nx = cx + dx;
            if (!map.inside(ny, nx) || !map.at(ny, nx)) continue;
            int& l = label[static_cast<std::size_t>(ny) * w + nx];
            if (l) continue;
            l = count;
            stack.push_back({ny, nx});
          }
        }
      }
    }
  }
  return count;
}

// ---- synthesis ----

namespace {

constexpr int kMargin = 2;
constexpr int kGap = 2;

struct Scene {
  std::vector<ShapeSpec> shapes;
  int background = 0;
  std::uint64_t noise_seed = 0;
};

ShapeSpec random_shape(Rng& rng, int size) {
  ShapeSpec s;
  const double pi = std::numbers::pi;
  s.kind = static_cast<ShapeKind>(rng.uniform_int(3));
  s.fill = rng.uniform_range(140, 230);
  s.texture_seed = rng.next();
  const double span = size * 0.25;
  switch (s.kind) {
    case ShapeKind::kRectangle:
      s.half_w = rng.uniform(4.0, std::max(5.0, span * 0.9));
      s.half_h = rng.uniform(2.5, 6.0);
      s.angle = rng.uniform(0.0, pi);
      s.cx = rng.uniform(kMargin, size - 1 - kMargin);
      s.cy = rng.uniform(kMargin, size - 1 - kMargin);
      break;
    case ShapeKind::kEllipse:
      s.half_w = rng.uniform(5.0, std::max(6.0, span * 0.9));
      s.half_h = rng.uniform(3.0, std::min(s.half_w, 9.0));
      s.angle = rng.uniform(0.0, pi);
      s.cx = rng.uniform(kMargin, size - 1 - kMargin);
      s.cy = rng.uniform(kMargin, size - 1 - kMargin);
      break;
    case ShapeKind::kPolyline: {
      s.radius = rng.uniform(1.6, 2.6);
      const int segments = rng.uniform_range(1, 3);
      double x = rng.uniform(kMargin, size - 1 - kMargin);
      double y = rng.uniform(kMargin, size - 1 - kMargin);
      double heading = rng.uniform(0.0, 2 * pi);
      s.points.push_back({x, y});
      for (int i = 0; i < segments; ++i) {
        const double len = rng.uniform(size * 0.15, size * 0.4);
        x += len * std::cos(heading);
        y += len * std::sin(heading);
        s.points.push_back({x, y});
        heading += rng.uniform(-pi / 2, pi / 2);
      }
      break;
    }
  }
  return s;
}

bool fits(const GrayImage& raster, const GrayImage& occupied) {
  const int h = raster.height, w = raster.width;
  bool any = false;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!raster.at(y, x)) continue;
      any = true;
      if (y < kMargin || x < kMargin || y >= h - kMargin || x >= w - kMargin) return false;
      for (int dy = -kGap; dy <= kGap; ++dy)
        for (int dx = -kGap; dx <= kGap; ++dx)
          if (occupied.inside(y + dy, x + dx) && occupied.at(y + dy, x + dx)) return false;
    }
  }
  return any;
}

Scene build_scene(std::uint64_t seed, int index, int size, const SynthOptions& opt, GrayImage* foreground) {
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(index)}));
  Scene scene;
  scene.background = rng.uniform_range(20, 70);
  scene.noise_seed = rng.next();
  const int wanted = rng.uniform_range(opt.min_shapes, opt.max_shapes);
  GrayImage occupied(size, size);
  for (int attempt = 0; attempt < 200 && static_cast<int>(scene.shapes.size()) < wanted; ++attempt) {
    ShapeSpec s = random_shape(rng, size);
    const GrayImage r = rasterize(s, size, size);
    if (!fits(r, occupied)) continue;
    // Near-round blobs can thin away to nothing; such shapes are redrawn.
    if (count_components8(zhang_suen_thin(r)) != count_components8(r)) continue;
    for (std::size_t i = 0; i < r.pixels.size(); ++i)
      if (r.pixels[i]) occupied.pixels[i] = 255;
    scene.shapes.push_back(std::move(s));
  }
  if (scene.shapes.empty()) {
    // Always reachable on canvases >= 16: a centred bar.
    ShapeSpec s;
    s.kind = ShapeKind::kRectangle;
    s.cx = s.cy = (size - 1) / 2.0;
    s.half_w = size / 4.0;
    s.half_h = 3;
    s.fill = 200;
    scene.shapes.push_back(s);
    occupied = rasterize(s, size, size);
  }
  if (foreground) *foreground = occupied;
  return scene;
}

}  // namespace

Sample render_shapes(const std::vector<ShapeSpec>& shapes, int size, int background, int noise_amplitude,
                     std::uint64_t noise_seed) {
  std::vector<int> level(static_cast<std::size_t>(size) * size, background);
  GrayImage fg(size, size);
  for (const auto& s : shapes) {
    const GrayImage r = rasterize(s, size, size);
    for (std::size_t i = 0; i < r.pixels.size(); ++i) {
      if (!r.pixels[i]) continue;
      level[i] = s.fill;
      fg.pixels[i] = 255;
    }
  }
  Rng noise(noise_seed);
  Sample out;
  out.image = GrayImage(size, size);
  for (std::size_t i = 0; i < level.size(); ++i) {
    const int n = noise_amplitude > 0 ? noise.uniform_range(-noise_amplitude, noise_amplitude) : 0;
    out.image.pixels[i] = static_cast<std::uint8_t>(std::clamp(level[i] + n, 0, 255));
  }
  out.mask = zhang_suen_thin(fg);
  return out;
}

GrayImage generate_foreground(std::uint64_t seed, int index, int size, const SynthOptions& opt) {
  GrayImage fg;
  build_scene(seed, index, size, opt, &fg);
  return fg;
}

Sample generate_sample(std::uint64_t seed, int index, int size, const SynthOptions& opt) {
  if (size < 16) throw std::invalid_argument("canvas size must be at least 16, got " + std::to_string(size));
  const Scene scene = build_scene(seed, index, size, opt, nullptr);
  return render_shapes(scene.shapes, size, scene.background, opt.noise_amplitude, scene.noise_seed);
}

std::vector<Sample> generate(std::uint64_t seed, int count, int size, const SynthOptions& opt) {
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i) out.push_back(generate_sample(seed, i, size, opt));
  return out;
}

// ---- augmentation ----

namespace {

GrayImage resize_bilinear(const GrayImage& in, int oh, int ow) {
  GrayImage out(oh, ow);
  const double sy = static_cast<double>(in.height) / oh, sx = static_cast<double>(in.width) / ow;
  for (int y = 0; y < oh; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, in.height - 1.0);
    const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, in.height - 1);
    const double ly = fy - y0;
    for (int x = 0; x < ow; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, in.width - 1.0);
      const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, in.width - 1);
      const double lx = fx - x0;
      const double v = (1 - ly) * ((1 - lx) * in.at(y0, x0) + lx * in.at(y0, x1)) +
                       ly * ((1 - lx) * in.at(y1, x0) + lx * in.at(y1, x1));
      out.at(y, x) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return out;
}

GrayImage resize_nearest(const GrayImage& in, int oh, int ow) {
  GrayImage out(oh, ow);
  for (int y = 0; y < oh; ++y) {
    const int sy = std::min(static_cast<int>((y + 0.5) * in.height / oh), in.height - 1);
    for (int x = 0; x < ow; ++x) {
      const int sx = std::min(static_cast<int>((x + 0.5) * in.width / ow), in.width - 1);
      out.at(y, x) = in.at(sy, sx);
    }
  }
  return out;
}

GrayImage rotate_ccw(const GrayImage& in) {
  GrayImage out(in.width, in.height);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) out.at(y, x) = in.at(x, in.width - 1 - y);
  return out;
}

GrayImage flip(const GrayImage& in, Flip f) {
  if (f == Flip::kNone) return in;
  GrayImage out(in.height, in.width);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x)
      out.at(y, x) = f == Flip::kLeftRight ? in.at(y, in.width - 1 - x) : in.at(in.height - 1 - y, x);
  return out;
}

// Centre pad (edge-replicated or zero) or crop to h x w.
GrayImage fit_canvas(const GrayImage& in, int h, int w, bool replicate) {
  if (in.height == h && in.width == w) return in;
  GrayImage out(h, w);
  const int oy = (in.height - h) / 2, ox = (in.width - w) / 2;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int sy = y + oy, sx = x + ox;
      if (!in.inside(sy, sx)) {
        if (!replicate) continue;
        sy = std::clamp(sy, 0, in.height - 1);
        sx = std::clamp(sx, 0, in.width - 1);
      }
      out.at(y, x) = in.at(sy, sx);
    }
  }
  return out;
}

}  // namespace

std::vector<Augmentation> all_augmentations() {
  std::vector<Augmentation> out;
  for (double s : {0.8, 1.0, 1.2})
    for (int r = 0; r < 4; ++r)
      for (Flip f : {Flip::kNone, Flip::kLeftRight, Flip::kUpDown}) out.push_back({s, r, f});
  return out;
}

Augmentation sample_augmentation(Rng& rng) {
  static const std::vector<Augmentation> combos = all_augmentations();
  return combos[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(combos.size())))];
}

Sample apply_augmentation(const Sample& s, const Augmentation& a) {
  const int h = s.image.height, w = s.image.width;
  GrayImage img = s.image, mask = s.mask;
  if (a.scale != 1.0) {
    const int nh = std::max(1, static_cast<int>(std::lround(h * a.scale)));
    const int nw = std::max(1, static_cast<int>(std::lround(w * a.scale)));
    img = resize_bilinear(img, nh, nw);
    mask = resize_nearest(mask, nh, nw);
  }
  for (int r = 0; r < ((a.quarter_turns % 4) + 4) % 4; ++r) {
    img = rotate_ccw(img);
    mask = rotate_ccw(mask);
  }
  img = flip(img, a.flip);
  mask = flip(mask, a.flip);
  Sample out{fit_canvas(img, h, w, true), fit_canvas(mask, h, w, false)};
  for (auto& v : out.mask.pixels) v = v >= 128 ? 255 : 0;
  return out;
}

Sample augment(const Sample& s, Rng& rng) { return apply_augmentation(s, sample_augmentation(rng)); }

// ---- PGM ----

std::string format_pgm(const GrayImage& image) {
  std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
  return out;
}

void write_pgm(const GrayImage& image, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const std::string bytes = format_pgm(image);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

GrayImage parse_pgm(const std::string& bytes, const std::string& origin) {
  std::size_t pos = 0;
  auto fail = [&](const std::string& msg) -> void { throw std::runtime_error(origin + ": " + msg); };
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&](const char* what) {
    skip_space();
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) fail(std::string("expected ") + what + " in PGM header");
    return std::stol(bytes.substr(start, pos - start));
  };

  if (bytes.size() < 2 || bytes[0] != 'P') fail("not a PGM file (missing 'P' magic)");
  const std::string magic = bytes.substr(0, 2);
  if (magic != "P5") fail("unsupported PNM variant " + magic + "; only binary P5 is accepted");
  pos = 2;
  const long width = read_int("width");
  const long height = read_int("height");
  const long maxval = read_int("maxval");
  if (width <= 0 || height <= 0) fail("invalid dimensions " + std::to_string(width) + "x" + std::to_string(height));
  if (maxval != 255) fail("maxval " + std::to_string(maxval) + " is not supported; expected 255");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    fail("missing whitespace after maxval");
  ++pos;
  const std::size_t expected = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  const std::size_t actual = bytes.size() - pos;
  if (actual < expected)
    fail("truncated payload: expected " + std::to_string(expected) + " bytes, got " + std::to_string(actual));
  if (actual > expected)
    fail("trailing data: expected " + std::to_string(expected) + " bytes, got " + std::to_string(actual));
  GrayImage img(static_cast<int>(height), static_cast<int>(width));
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end(), img.pixels.begin());
  return img;
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_pgm(bytes, path.string());
}

// ---- dataset directories ----

namespace {

std::string sample_id(int i) {
  std::ostringstream os;
  os << std::setw(4) << std::setfill('0') << i;
  return os.str();
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples) {
  if (samples.size() > 10000) throw std::invalid_argument("dataset ids are 4 digits; at most 10000 samples");
  std::filesystem::create_directories(dir / "images");
  std::filesystem::create_directories(dir / "masks");
  std::ofstream manifest(dir / "manifest.txt", std::ios::binary | std::ios::trunc);
  if (!manifest) throw std::runtime_error("cannot write " + (dir / "manifest.txt").string());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::string id = sample_id(static_cast<int>(i));
    write_pgm(samples[i].image, dir / "images" / (id + ".pgm"));
    write_pgm(samples[i].mask, dir / "masks" / (id + ".pgm"));
    manifest << id << '\n';
  }
}

std::vector<Sample> read_dataset(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest) throw std::runtime_error("dataset " + dir.string() + " has no manifest.txt");
  std::vector<Sample> out;
  std::string id;
  while (std::getline(manifest, id)) {
    if (id.empty()) continue;
    Sample s{read_pgm(dir / "images" / (id + ".pgm")), read_pgm(dir / "masks" / (id + ".pgm"))};
    if (s.image.height != s.mask.height || s.image.width != s.mask.width)
      throw std::runtime_error("sample " + id + ": image and mask sizes differ");
    for (auto v : s.mask.pixels)
      if (v != 0 && v != 255) throw std::runtime_error("sample " + id + ": mask is not binary (0/255)");
    out.push_back(std::move(s));
  }
  if (out.empty()) throw std::runtime_error("dataset " + dir.string() + " is empty");
  return out;
}

DatasetSplit split_dataset(std::vector<Sample> samples, double val_fraction) {
  if (val_fraction < 0 || val_fraction >= 1) throw std::invalid_argument("validation fraction must be in [0, 1)");
  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(samples.size()) * val_fraction));
  DatasetSplit split;
  const auto cut = static_cast<std::ptrdiff_t>(samples.size() - n_val);
  split.train.assign(std::make_move_iterator(samples.begin()), std::make_move_iterator(samples.begin() + cut));
  split.val.assign(std::make_move_iterator(samples.begin() + cut), std::make_move_iterator(samples.end()));
  return split;
}

template <typename T>
Tensor<T> image_tensor(const GrayImage& img) {
  Tensor<T> t({1, img.height, img.width});
  for (std::size_t i = 0; i < img.pixels.size(); ++i) t.values[i] = static_cast<T>(img.pixels[i]) / T(255);
  return t;
}

template <typename T>
Tensor<T> mask_tensor(const GrayImage& mask) {
  Tensor<T> t({1, mask.height, mask.width});
  for (std::size_t i = 0; i < mask.pixels.size(); ++i) t.values[i] = mask.pixels[i] ? T(1) : T(0);
  return t;
}

template Tensor<float> image_tensor<float>(const GrayImage&);
template Tensor<double> image_tensor<double>(const GrayImage&);
template Tensor<float> mask_tensor<float>(const GrayImage&);
template Tensor<double> mask_tensor<double>(const GrayImage&);

}  // namespace alsn
