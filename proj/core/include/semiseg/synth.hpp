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
#ifndef SEMISEG_SYNTH_HPP_
#define SEMISEG_SYNTH_HPP_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "semiseg/data.hpp"

namespace semiseg {

// Scene recipe for the synthetic shapes benchmark. Class 0 is background;
// class c >= 1 renders shape family (c-1) mod 4: disk, square, triangle,
// ring. Colors are class-correlated but jittered per scene, so color alone
// is an unreliable cue across the dataset.
struct SceneSpec {
  int height = 64;
  int width = 64;
  int num_classes = 5;
  int shapes_min = 1;
  int shapes_max = 3;
  double texture_noise = 0.06;  // per-pixel Gaussian sigma
  double color_jitter = 0.15;   // per-scene, per-class uniform color shift
  std::uint64_t seed = 0;

  bool operator==(const SceneSpec&) const = default;
};

std::string scene_id(long long index);

// Deterministic function of (spec.seed, index). The mask is the exact
// rasterization of the rendered shapes; every present foreground class
// occupies at least 16 pixels (scenes violating that are re-rolled).
// Image values are quantized to the k/255 grid, so raster round-trips are
// exact.
SegmentationSample generate_scene(const SceneSpec& spec, long long index);

// Manifest rows for scenes 0..n-1, images referenced by generator index.
std::vector<ManifestEntry> generate_dataset(const SceneSpec& spec, long long n);

// Renders scenes 0..n-1 to dir/images/*.ppm and dir/masks/*.pgm and writes
// dir/manifest.jsonl with file paths.
void write_dataset(const SceneSpec& spec, long long n, const std::string& dir);

// In-memory dataset over generated scenes; caches samples on first access.
class SynthDataset : public Dataset {
 public:
  SynthDataset(const SceneSpec& spec, long long n, bool cache = true);

  std::vector<std::string> ids() const override;
  SegmentationSample get(const std::string& id) const override;
  int num_classes() const override { return spec_.num_classes; }
  const SceneSpec& spec() const { return spec_; }

 private:
  SceneSpec spec_;
  long long n_ = 0;
  bool cache_ = true;
  mutable std::vector<std::unique_ptr<SegmentationSample>> cached_;
};

}  // namespace semiseg

#endif  // SEMISEG_SYNTH_HPP_
