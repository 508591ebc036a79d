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
#ifndef SEMISEG_FORMAT_HPP_
#define SEMISEG_FORMAT_HPP_

#include <charconv>
#include <stdexcept>
#include <string>

namespace semiseg {

// Shortest decimal form that round-trips the exact double; locale-free, so
// emitted CSVs are byte-reproducible.
inline std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::logic_error("format_double failed");
  return std::string(buf, p);
}

}  // namespace semiseg

#endif  // SEMISEG_FORMAT_HPP_
