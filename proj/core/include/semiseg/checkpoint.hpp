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
#ifndef SEMISEG_CHECKPOINT_HPP_
#define SEMISEG_CHECKPOINT_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "semiseg/data.hpp"
#include "semiseg/tensor.hpp"

namespace semiseg {

// A checkpoint is a directory: header.json (structured metadata, RNG and
// cycler states) plus one binary blob per network holding named double
// arrays (parameters and optimizer buffers), bit-exact on round trip.

struct CheckpointHeader {
  int format = 1;
  long long s4_iter = 0;    // completed segmentation-branch iterations
  long long mlmt_iter = 0;  // completed classifier-branch iterations
  std::string config_text;  // canonical hyperparameter serialization
  std::uint64_t config_hash = 0;
  int num_classes = 0;
  int height = 0;
  int width = 0;
  std::map<std::string, std::string> state;  // rng / cycler states by name
  std::vector<std::string> nets;             // blob basenames present
};

void save_header(const std::string& dir, const CheckpointHeader& header);
CheckpointHeader load_header(const std::string& dir);

// Named-array blob IO. Writing is ordered; reading preserves file order.
void write_blob(const std::string& path,
                const std::vector<std::pair<std::string, const Tensor*>>& arrays);
std::vector<std::pair<std::string, Tensor>> read_blob(const std::string& path);

// Restores `arrays` (name -> destination) from a read blob; every name must
// be present with a matching shape, or this throws.
void restore_arrays(const std::vector<std::pair<std::string, Tensor>>& loaded,
                    const std::vector<std::pair<std::string, Tensor*>>& arrays,
                    const std::string& context);

// Compact text codec for DataCycler::State, stored in the header state map.
std::string encode_cycler(const DataCycler::State& s);
DataCycler::State decode_cycler(const std::string& text);

}  // namespace semiseg

#endif  // SEMISEG_CHECKPOINT_HPP_
