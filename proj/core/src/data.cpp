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
#include "semiseg/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"

namespace semiseg {

namespace {

using json = nlohmann::ordered_json;

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// Bilinear, half-pixel-center mapping.
Tensor resize_bilinear(const Tensor& src, int out_h, int out_w) {
  Tensor dst(src.n, src.c, out_h, out_w);
  const double sy = static_cast<double>(src.h) / out_h;
  const double sx = static_cast<double>(src.w) / out_w;
  for (int i = 0; i < src.n; ++i)
    for (int ic = 0; ic < src.c; ++ic)
      for (int y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::max(0.0, std::min(fy, static_cast<double>(src.h - 1)));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, src.h - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
          double fx = (x + 0.5) * sx - 0.5;
          fx = std::max(0.0, std::min(fx, static_cast<double>(src.w - 1)));
          const int x0 = static_cast<int>(fx);
          const int x1 = std::min(x0 + 1, src.w - 1);
          const double wx = fx - x0;
          const double v00 = src.at(i, ic, y0, x0);
          const double v01 = src.at(i, ic, y0, x1);
          const double v10 = src.at(i, ic, y1, x0);
          const double v11 = src.at(i, ic, y1, x1);
          dst.at(i, ic, y, x) =
              (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11);
        }
      }
  return dst;
}

Tensor crop(const Tensor& src, int oy, int ox, int ch, int cw) {
  Tensor out(src.n, src.c, ch, cw);
  for (int i = 0; i < src.n; ++i)
    for (int ic = 0; ic < src.c; ++ic)
      for (int y = 0; y < ch; ++y)
        for (int x = 0; x < cw; ++x) out.at(i, ic, y, x) = src.at(i, ic, oy + y, ox + x);
  return out;
}

Tensor augment_view(const Tensor& image, Rng& rng, const AugmentConfig& cfg) {
  Tensor view = image;
  if (cfg.flip && rng.bernoulli(0.5)) view = hflip_image(view);
  if (cfg.crop) {
    const double area = rng.uniform(cfg.crop_min_area, 1.0);
    const double side = std::sqrt(area);
    const int ch = std::max(1, static_cast<int>(std::lround(image.h * side)));
    const int cw = std::max(1, static_cast<int>(std::lround(image.w * side)));
    const int oy = rng.uniform_index(image.h - ch + 1);
    const int ox = rng.uniform_index(image.w - cw + 1);
    if (ch != image.h || cw != image.w || oy != 0 || ox != 0)
      view = resize_bilinear(crop(view, oy, ox, ch, cw), image.h, image.w);
  }
  if (cfg.noise_sigma > 0.0) {
    for (double& v : view.v) v = clamp01(v + rng.normal(0.0, cfg.noise_sigma));
  }
  return view;
}

}  // namespace

std::vector<std::uint8_t> derive_class_vector(const Mask& mask, int num_classes) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(num_classes), 0);
  for (std::uint8_t c : mask.v) {
    if (c >= num_classes)
      throw std::invalid_argument("derive_class_vector: mask entry " + std::to_string(c) +
                                  " out of range for " + std::to_string(num_classes) + " classes");
    out[c] = 1;
  }
  return out;
}

void validate_sample(const SegmentationSample& s, int num_classes) {
  if (s.image.n != 1 || s.image.c != 3)
    throw std::invalid_argument("sample " + s.id + ": image must be (1,3,H,W)");
  if (s.mask) {
    if (s.mask->h != s.image.h || s.mask->w != s.image.w)
      throw std::invalid_argument("sample " + s.id + ": mask/image shape mismatch");
    const auto derived = derive_class_vector(*s.mask, num_classes);
    if (s.class_vector && *s.class_vector != derived)
      throw std::invalid_argument("sample " + s.id + ": class_vector inconsistent with mask");
  }
  if (s.class_vector && static_cast<int>(s.class_vector->size()) != num_classes)
    throw std::invalid_argument("sample " + s.id + ": class_vector length mismatch");
}

SplitPlan make_split(const std::vector<std::string>& dataset_ids, double ratio,
                     std::uint64_t seed, double weak_fraction) {
  if (dataset_ids.empty()) throw std::invalid_argument("make_split: empty dataset");
  if (!(ratio > 0.0 && ratio <= 1.0))
    throw std::invalid_argument("make_split: ratio must be in (0,1]");
  if (weak_fraction < 0.0 || weak_fraction > 1.0 - ratio + 1e-12)
    throw std::invalid_argument("make_split: weak_fraction must be in [0, 1-ratio]");

  const auto n = static_cast<long long>(dataset_ids.size());
  long long labeled = std::max(1LL, std::llround(ratio * static_cast<double>(n)));
  labeled = std::min(labeled, n);
  long long weak = std::llround(weak_fraction * static_cast<double>(n));
  weak = std::min(weak, n - labeled);

  std::vector<std::string> shuffled = dataset_ids;
  Rng rng(seed);
  rng.shuffle(shuffled);

  SplitPlan plan;
  plan.ratio = ratio;
  plan.seed = seed;
  plan.labeled_ids.assign(shuffled.begin(), shuffled.begin() + labeled);
  plan.weak_ids.assign(shuffled.begin() + labeled, shuffled.begin() + labeled + weak);
  plan.unlabeled_ids.assign(shuffled.begin() + labeled + weak, shuffled.end());
  return plan;
}

AugmentedPair augment_pair(const SegmentationSample& sample, std::uint64_t seed,
                           const AugmentConfig& cfg) {
  AugmentedPair pair;
  pair.provenance = sample.id;
  Rng rng_a(mix_seed(seed, 0));
  Rng rng_b(mix_seed(seed, 1));
  pair.view_a = augment_view(sample.image, rng_a, cfg);
  pair.view_b = augment_view(sample.image, rng_b, cfg);
  return pair;
}

void augment_seg(Tensor& image, Mask& mask, Rng& rng) {
  if (rng.bernoulli(0.5)) {
    image = hflip_image(image);
    mask = hflip_mask(mask);
  }
}

Tensor hflip_image(const Tensor& image) {
  Tensor out = image;
  for (int i = 0; i < image.n; ++i)
    for (int ic = 0; ic < image.c; ++ic)
      for (int y = 0; y < image.h; ++y)
        for (int x = 0; x < image.w; ++x)
          out.at(i, ic, y, x) = image.at(i, ic, y, image.w - 1 - x);
  return out;
}

Mask hflip_mask(const Mask& mask) {
  Mask out(mask.h, mask.w);
  for (int y = 0; y < mask.h; ++y)
    for (int x = 0; x < mask.w; ++x) out.at(y, x) = mask.at(y, mask.w - 1 - x);
  return out;
}

// ---------------------------------------------------------------------------
// DataCycler
// ---------------------------------------------------------------------------

DataCycler::DataCycler(std::vector<std::string> ids, std::uint64_t seed)
    : ids_(std::move(ids)), rng_(seed) {
  order_.resize(ids_.size());
  std::iota(order_.begin(), order_.end(), 0);
  rng_.shuffle(order_);
}

const std::string& DataCycler::next() {
  if (ids_.empty()) throw std::logic_error("DataCycler: empty id list");
  if (cursor_ == static_cast<int>(ids_.size())) {
    rng_.shuffle(order_);
    cursor_ = 0;
  }
  return ids_[order_[cursor_++]];
}

DataCycler::State DataCycler::state() const {
  return State{order_, cursor_, rng_.save_state()};
}

void DataCycler::set_state(const State& s) {
  if (s.order.size() != ids_.size())
    throw std::invalid_argument("DataCycler: state order length mismatch");
  order_ = s.order;
  cursor_ = s.cursor;
  rng_.load_state(s.rng);
}

// ---------------------------------------------------------------------------
// Manifest IO
// ---------------------------------------------------------------------------

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  std::vector<ManifestEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    ManifestEntry e;
    if (!j.contains("id") || !j.contains("image"))
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": record must have id and image fields");
    e.id = j.at("id").get<std::string>();
    if (j.at("image").is_number_integer())
      e.synth_index = j.at("image").get<long long>();
    else
      e.image_path = j.at("image").get<std::string>();
    if (j.contains("mask") && !j.at("mask").is_null())
      e.mask_path = j.at("mask").get<std::string>();
    if (j.contains("classes") && !j.at("classes").is_null())
      e.classes = j.at("classes").get<std::vector<int>>();
    out.push_back(std::move(e));
  }
  return out;
}

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  for (const auto& e : entries) {
    json j;
    j["id"] = e.id;
    if (e.synth_index >= 0)
      j["image"] = e.synth_index;
    else
      j["image"] = e.image_path;
    if (!e.mask_path.empty()) j["mask"] = e.mask_path;
    if (e.classes) j["classes"] = *e.classes;
    out << j.dump() << '\n';
  }
  if (!out) throw std::runtime_error("failed writing manifest: " + path);
}

// ---------------------------------------------------------------------------
// Raster IO
// ---------------------------------------------------------------------------

namespace {

void read_pnm_header(std::istream& in, const std::string& magic, const std::string& path,
                     int& w, int& h) {
  std::string m;
  in >> m;
  if (m != magic) throw std::runtime_error(path + ": expected " + magic + " header");
  int maxval = 0;
  in >> w >> h >> maxval;
  if (!in || w <= 0 || h <= 0) throw std::runtime_error(path + ": bad raster dimensions");
  if (maxval != 255) throw std::runtime_error(path + ": only 8-bit rasters supported");
  in.get();  // single whitespace byte before pixel data
}

}  // namespace

void write_ppm(const std::string& path, const Tensor& image) {
  if (image.n != 1 || image.c != 3) throw std::invalid_argument("write_ppm: need (1,3,H,W)");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out << "P6\n" << image.w << ' ' << image.h << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(image.w) * 3);
  for (int y = 0; y < image.h; ++y) {
    for (int x = 0; x < image.w; ++x)
      for (int ic = 0; ic < 3; ++ic) {
        const double v = clamp01(image.at(0, ic, y, x));
        row[static_cast<std::size_t>(x) * 3 + ic] =
            static_cast<unsigned char>(std::lround(v * 255.0));
      }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw std::runtime_error("failed writing: " + path);
}

Tensor read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  int w = 0, h = 0;
  read_pnm_header(in, "P6", path, w, h);
  Tensor image(1, 3, h, w);
  std::vector<unsigned char> row(static_cast<std::size_t>(w) * 3);
  for (int y = 0; y < h; ++y) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
    if (!in) throw std::runtime_error(path + ": truncated pixel data");
    for (int x = 0; x < w; ++x)
      for (int ic = 0; ic < 3; ++ic)
        image.at(0, ic, y, x) = row[static_cast<std::size_t>(x) * 3 + ic] / 255.0;
  }
  return image;
}

void write_pgm(const std::string& path, const Mask& mask) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out << "P5\n" << mask.w << ' ' << mask.h << "\n255\n";
  out.write(reinterpret_cast<const char*>(mask.v.data()),
            static_cast<std::streamsize>(mask.v.size()));
  if (!out) throw std::runtime_error("failed writing: " + path);
}

Mask read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  int w = 0, h = 0;
  read_pnm_header(in, "P5", path, w, h);
  Mask mask(h, w);
  in.read(reinterpret_cast<char*>(mask.v.data()), static_cast<std::streamsize>(mask.v.size()));
  if (!in) throw std::runtime_error(path + ": truncated pixel data");
  return mask;
}

// ---------------------------------------------------------------------------
// FileDataset
// ---------------------------------------------------------------------------

FileDataset::FileDataset(std::string root, std::vector<ManifestEntry> entries, int num_classes)
    : root_(std::move(root)), entries_(std::move(entries)), num_classes_(num_classes) {
  for (const auto& e : entries_)
    if (e.synth_index >= 0)
      throw std::invalid_argument("FileDataset: entry " + e.id +
                                  " has a generator index, not a file path");
}

std::vector<std::string> FileDataset::ids() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.id);
  return out;
}

SegmentationSample FileDataset::get(const std::string& id) const {
  for (const auto& e : entries_) {
    if (e.id != id) continue;
    SegmentationSample s;
    s.id = id;
    s.image = read_ppm(root_.empty() ? e.image_path : root_ + "/" + e.image_path);
    if (!e.mask_path.empty()) {
      s.mask = read_pgm(root_.empty() ? e.mask_path : root_ + "/" + e.mask_path);
      s.class_vector = derive_class_vector(*s.mask, num_classes_);
    } else if (e.classes) {
      std::vector<std::uint8_t> cv(static_cast<std::size_t>(num_classes_), 0);
      for (int c : *e.classes) {
        if (c < 0 || c >= num_classes_)
          throw std::runtime_error("manifest entry " + id + ": class index out of range");
        cv[static_cast<std::size_t>(c)] = 1;
      }
      s.class_vector = std::move(cv);
    }
    validate_sample(s, num_classes_);
    return s;
  }
  throw std::invalid_argument("FileDataset: unknown id " + id);
}

}  // namespace semiseg
