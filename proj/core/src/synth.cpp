/* Copyright 2026 The SemiSeg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "semiseg/synth.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "semiseg/rng.hpp"

namespace semiseg {

namespace {

constexpr int kMinClassPixels = 16;
constexpr int kMaxAttempts = 100;

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  const double i = std::floor(h * 6.0);
  const double f = h * 6.0 - i;
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - f * s);
  const double t = v * (1.0 - (1.0 - f) * s);
  switch (static_cast<int>(i) % 6) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

// Golden-ratio hue spacing keeps any class count distinct; background is a
// neutral gray.
std::array<double, 3> base_color(int cls) {
  if (cls == 0) return {0.45, 0.45, 0.45};
  return hsv_to_rgb(std::fmod(0.61803398875 * cls, 1.0), 0.55, 0.8);
}

struct Shape {
  int cls = 0;
  int family = 0;  // 0 disk, 1 square, 2 triangle, 3 ring
  double cx = 0.0, cy = 0.0, r = 0.0;
};

bool inside_shape(const Shape& s, double x, double y) {
  const double dx = x - s.cx;
  const double dy = y - s.cy;
  switch (s.family) {
    case 0:
      return dx * dx + dy * dy <= s.r * s.r;
    case 1:
      return std::abs(dx) <= s.r && std::abs(dy) <= s.r;
    case 2: {
      // Isoceles triangle: apex up, base at cy + r.
      if (dy < -s.r || dy > s.r) return false;
      const double half_width = (dy + s.r) * 0.5;  // 0 at apex, r at base
      return std::abs(dx) <= half_width;
    }
    default: {
      const double d2 = dx * dx + dy * dy;
      const double ri = 0.55 * s.r;
      return d2 <= s.r * s.r && d2 >= ri * ri;
    }
  }
}

}  // namespace

std::string scene_id(long long index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%06lld", index);
  return buf;
}

SegmentationSample generate_scene(const SceneSpec& spec, long long index) {
  if (index < 0) throw std::invalid_argument("generate_scene: negative index");
  if (spec.num_classes < 1 || spec.height < 8 || spec.width < 8 ||
      spec.shapes_min > spec.shapes_max || spec.shapes_min < 0 || spec.texture_noise < 0.0 ||
      spec.color_jitter < 0.0)
    throw std::invalid_argument("generate_scene: bad scene spec");

  const int h = spec.height, w = spec.width, nc = spec.num_classes;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng(mix_seed(mix_seed(spec.seed, static_cast<std::uint64_t>(index)),
                     static_cast<std::uint64_t>(attempt)));

    // Per-scene, per-class color jitter (fixed draw count per attempt).
    std::vector<std::array<double, 3>> colors(static_cast<std::size_t>(nc));
    for (int c = 0; c < nc; ++c) {
      colors[c] = base_color(c);
      for (int ch = 0; ch < 3; ++ch)
        colors[c][ch] =
            clamp01(colors[c][ch] + rng.uniform(-spec.color_jitter, spec.color_jitter));
    }

    const int count =
        spec.shapes_min +
        (spec.shapes_max > spec.shapes_min
             ? static_cast<int>(rng.uniform_int(
                   static_cast<std::uint64_t>(spec.shapes_max - spec.shapes_min + 1)))
             : 0);

    std::vector<Shape> shapes;
    const double rmin = h / 8.0, rmax = h / 5.0;
    for (int k = 0; k < count && nc > 1; ++k) {
      Shape s;
      s.cls = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(nc - 1)));
      s.family = (s.cls - 1) % 4;
      s.r = rng.uniform(rmin, rmax);
      s.cx = rng.uniform(s.r, w - 1 - s.r);
      s.cy = rng.uniform(s.r, h - 1 - s.r);
      shapes.push_back(s);
    }

    // Later shapes overdraw earlier ones; mask and image share this exact
    // rasterization, so their boundaries coincide.
    Mask mask(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (const Shape& s : shapes)
          if (inside_shape(s, x, y)) mask.at(y, x) = static_cast<std::uint8_t>(s.cls);

    std::vector<int> pix(static_cast<std::size_t>(nc), 0);
    for (std::uint8_t c : mask.v) ++pix[c];
    bool ok = pix[0] >= kMinClassPixels;
    for (int c = 1; c < nc; ++c)
      if (pix[c] > 0 && pix[c] < kMinClassPixels) ok = false;
    if (!ok) continue;

    SegmentationSample sample;
    sample.id = scene_id(index);
    sample.image = Tensor(1, 3, h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const auto& col = colors[mask.at(y, x)];
        for (int ch = 0; ch < 3; ++ch) {
          const double v = clamp01(col[ch] + rng.normal(0.0, spec.texture_noise));
          sample.image.at(0, ch, y, x) = std::lround(v * 255.0) / 255.0;
        }
      }
    sample.mask = std::move(mask);
    sample.class_vector = derive_class_vector(*sample.mask, nc);
    return sample;
  }
  throw std::runtime_error("generate_scene: no valid scene after " +
                           std::to_string(kMaxAttempts) + " attempts");
}

std::vector<ManifestEntry> generate_dataset(const SceneSpec& spec, long long n) {
  if (n <= 0) throw std::invalid_argument("generate_dataset: n must be positive");
  std::vector<ManifestEntry> out;
  out.reserve(static_cast<std::size_t>(n));
  for (long long i = 0; i < n; ++i) {
    ManifestEntry e;
    e.id = scene_id(i);
    e.synth_index = i;
    out.push_back(std::move(e));
  }
  return out;
}

void write_dataset(const SceneSpec& spec, long long n, const std::string& dir) {
  if (n <= 0) throw std::invalid_argument("write_dataset: n must be positive");
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "masks");
  std::vector<ManifestEntry> entries;
  entries.reserve(static_cast<std::size_t>(n));
  for (long long i = 0; i < n; ++i) {
    const SegmentationSample s = generate_scene(spec, i);
    ManifestEntry e;
    e.id = s.id;
    e.image_path = "images/" + s.id + ".ppm";
    e.mask_path = "masks/" + s.id + ".pgm";
    write_ppm((fs::path(dir) / e.image_path).string(), s.image);
    write_pgm((fs::path(dir) / e.mask_path).string(), *s.mask);
    entries.push_back(std::move(e));
  }
  write_manifest((fs::path(dir) / "manifest.jsonl").string(), entries);
}

SynthDataset::SynthDataset(const SceneSpec& spec, long long n, bool cache)
    : spec_(spec), n_(n), cache_(cache) {
  if (n <= 0) throw std::invalid_argument("SynthDataset: n must be positive");
  if (cache_) cached_.resize(static_cast<std::size_t>(n));
}

std::vector<std::string> SynthDataset::ids() const {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(n_));
  for (long long i = 0; i < n_; ++i) out.push_back(scene_id(i));
  return out;
}

SegmentationSample SynthDataset::get(const std::string& id) const {
  long long index = -1;
  if (id.size() >= 12 && id.compare(0, 6, "scene_") == 0) {
    index = 0;
    for (std::size_t i = 6; i < id.size(); ++i) {
      if (id[i] < '0' || id[i] > '9') {
        index = -1;
        break;
      }
      index = index * 10 + (id[i] - '0');
    }
  }
  if (index < 0 || index >= n_) throw std::invalid_argument("SynthDataset: unknown id " + id);
  if (!cache_) return generate_scene(spec_, index);
  auto& slot = cached_[static_cast<std::size_t>(index)];
  if (!slot) slot = std::make_unique<SegmentationSample>(generate_scene(spec_, index));
  return *slot;
}

}  // namespace semiseg
