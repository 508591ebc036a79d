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
#ifndef SEMISEG_DATA_HPP_
#define SEMISEG_DATA_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "semiseg/rng.hpp"
#include "semiseg/tensor.hpp"

namespace semiseg {

// Dense class-index label map, entries in {0,...,C-1}, class 0 = background.
struct Mask {
  int h = 0, w = 0;
  std::vector<std::uint8_t> v;

  Mask() = default;
  Mask(int h_, int w_) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, 0) {}

  std::uint8_t& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
  std::uint8_t at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }

  bool operator==(const Mask&) const = default;
};

struct SegmentationSample {
  std::string id;
  Tensor image;  // (1, 3, H, W), values in [0,1]
  std::optional<Mask> mask;
  std::optional<std::vector<std::uint8_t>> class_vector;  // multi-hot, length C
};

// Multi-hot presence vector: entry c is 1 iff class c occurs in the mask.
std::vector<std::uint8_t> derive_class_vector(const Mask& mask, int num_classes);

// Throws if an invariant is violated (mask entries out of range, class_vector
// inconsistent with mask, image not (1,3,H,W) matching the mask shape).
void validate_sample(const SegmentationSample& s, int num_classes);

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

struct SplitPlan {
  std::vector<std::string> labeled_ids;
  std::vector<std::string> unlabeled_ids;
  std::vector<std::string> weak_ids;  // image-level labels only
  double ratio = 0.0;
  std::uint64_t seed = 0;
};

// Random partition: max(1, round(ratio*N)) labeled, round(weak_fraction*N)
// weak, remainder unlabeled. Deterministic in (ids, ratio, seed).
SplitPlan make_split(const std::vector<std::string>& dataset_ids, double ratio,
                     std::uint64_t seed, double weak_fraction = 0.0);

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

struct AugmentConfig {
  bool flip = true;           // horizontal, p = 0.5
  double noise_sigma = 0.02;  // additive Gaussian pixel noise
  bool crop = true;           // random crop-and-resize
  double crop_min_area = 0.9;

  bool operator==(const AugmentConfig&) const = default;
};

struct AugmentedPair {
  Tensor view_a;  // student view
  Tensor view_b;  // teacher view
  std::string provenance;
};

// Two independently perturbed views of the same image; deterministic in seed.
// With all perturbations disabled both views equal the input.
AugmentedPair augment_pair(const SegmentationSample& sample, std::uint64_t seed,
                           const AugmentConfig& cfg = {});

// Joint horizontal flip (p = 0.5) of an image batch row and its mask; the
// label-preserving augmentation used on the segmentation branch.
void augment_seg(Tensor& image, Mask& mask, Rng& rng);

Tensor hflip_image(const Tensor& image);
Mask hflip_mask(const Mask& mask);

// ---------------------------------------------------------------------------
// Epoch cycling
// ---------------------------------------------------------------------------

// Iterates ids in shuffled epochs; reshuffles at each epoch boundary.
// Fully serializable so a resumed run continues the exact sequence.
class DataCycler {
 public:
  struct State {
    std::vector<int> order;
    int cursor = 0;
    std::string rng;
  };

  DataCycler() = default;
  DataCycler(std::vector<std::string> ids, std::uint64_t seed);

  bool empty() const { return ids_.empty(); }
  std::size_t size() const { return ids_.size(); }
  const std::string& next();

  State state() const;
  void set_state(const State& s);

 private:
  std::vector<std::string> ids_;
  std::vector<int> order_;
  int cursor_ = 0;
  Rng rng_;
};

// ---------------------------------------------------------------------------
// Manifest and raster IO
// ---------------------------------------------------------------------------

// One dataset record. `image` is either a file path or (for generated data)
// a scene index; `mask` is empty for unlabeled samples; `classes` is set only
// for weakly labeled samples.
struct ManifestEntry {
  std::string id;
  std::string image_path;       // empty when synth_index >= 0
  long long synth_index = -1;   // scene index when the image is generated
  std::string mask_path;        // empty if unlabeled
  std::optional<std::vector<int>> classes;
};

// Line-delimited records with fields: id, image, mask, classes.
std::vector<ManifestEntry> read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);

// Binary PPM (P6) / PGM (P5), 8-bit. Images are quantized to the k/255 grid,
// so write-then-read round-trips exactly for tensors already on that grid.
void write_ppm(const std::string& path, const Tensor& image);
Tensor read_ppm(const std::string& path);
void write_pgm(const std::string& path, const Mask& mask);
Mask read_pgm(const std::string& path);

// Sample store: id -> SegmentationSample.
class Dataset {
 public:
  virtual ~Dataset() = default;
  virtual std::vector<std::string> ids() const = 0;
  virtual SegmentationSample get(const std::string& id) const = 0;
  virtual int num_classes() const = 0;
};

// Manifest-backed dataset reading raster files relative to `root`.
class FileDataset : public Dataset {
 public:
  FileDataset(std::string root, std::vector<ManifestEntry> entries, int num_classes);
  std::vector<std::string> ids() const override;
  SegmentationSample get(const std::string& id) const override;
  int num_classes() const override { return num_classes_; }

 private:
  std::string root_;
  std::vector<ManifestEntry> entries_;
  int num_classes_ = 0;
};

}  // namespace semiseg

#endif  // SEMISEG_DATA_HPP_
