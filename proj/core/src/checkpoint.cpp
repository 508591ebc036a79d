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
#include "semiseg/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace semiseg {

namespace {

using json = nlohmann::ordered_json;

constexpr char kBlobMagic[8] = {'S', 'S', 'E', 'G', 'B', 'L', 'O', 'B'};
constexpr std::uint32_t kBlobVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& in, T& v, const std::string& path) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error(path + ": truncated blob");
}

}  // namespace

void save_header(const std::string& dir, const CheckpointHeader& header) {
  std::filesystem::create_directories(dir);
  json j;
  j["format"] = header.format;
  j["s4_iter"] = header.s4_iter;
  j["mlmt_iter"] = header.mlmt_iter;
  j["config"] = header.config_text;
  {
    std::ostringstream hex;
    hex << std::hex << header.config_hash;
    j["config_hash"] = hex.str();
  }
  j["num_classes"] = header.num_classes;
  j["height"] = header.height;
  j["width"] = header.width;
  j["state"] = header.state;
  j["nets"] = header.nets;
  std::ofstream out(std::filesystem::path(dir) / "header.json");
  if (!out) throw std::runtime_error("cannot write checkpoint header in " + dir);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing checkpoint header in " + dir);
}

CheckpointHeader load_header(const std::string& dir) {
  const std::string path = (std::filesystem::path(dir) / "header.json").string();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint header: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  CheckpointHeader h;
  h.format = j.at("format").get<int>();
  if (h.format != 1)
    throw std::runtime_error(path + ": unsupported checkpoint format " +
                             std::to_string(h.format));
  h.s4_iter = j.at("s4_iter").get<long long>();
  h.mlmt_iter = j.at("mlmt_iter").get<long long>();
  h.config_text = j.at("config").get<std::string>();
  h.config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
  h.num_classes = j.at("num_classes").get<int>();
  h.height = j.at("height").get<int>();
  h.width = j.at("width").get<int>();
  h.state = j.at("state").get<std::map<std::string, std::string>>();
  h.nets = j.at("nets").get<std::vector<std::string>>();
  return h;
}

void write_blob(const std::string& path,
                const std::vector<std::pair<std::string, const Tensor*>>& arrays) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write blob: " + path);
  out.write(kBlobMagic, sizeof(kBlobMagic));
  write_pod(out, kBlobVersion);
  write_pod(out, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& [name, t] : arrays) {
    write_pod(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod(out, t->n);
    write_pod(out, t->c);
    write_pod(out, t->h);
    write_pod(out, t->w);
    out.write(reinterpret_cast<const char*>(t->v.data()),
              static_cast<std::streamsize>(t->v.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("failed writing blob: " + path);
}

std::vector<std::pair<std::string, Tensor>> read_blob(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open blob: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(magic, magic + 8, kBlobMagic))
    throw std::runtime_error(path + ": not a parameter blob");
  std::uint32_t version = 0, count = 0;
  read_pod(in, version, path);
  if (version != kBlobVersion)
    throw std::runtime_error(path + ": unsupported blob version " + std::to_string(version));
  read_pod(in, count, path);
  std::vector<std::pair<std::string, Tensor>> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t name_len = 0;
    read_pod(in, name_len, path);
    if (name_len > 4096) throw std::runtime_error(path + ": implausible array name length");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw std::runtime_error(path + ": truncated blob");
    int n, c, h, w;
    read_pod(in, n, path);
    read_pod(in, c, path);
    read_pod(in, h, path);
    read_pod(in, w, path);
    if (n < 0 || c < 0 || h < 0 || w < 0) throw std::runtime_error(path + ": bad array shape");
    Tensor t(n, c, h, w);
    in.read(reinterpret_cast<char*>(t.v.data()),
            static_cast<std::streamsize>(t.v.size() * sizeof(double)));
    if (!in) throw std::runtime_error(path + ": truncated blob");
    out.emplace_back(std::move(name), std::move(t));
  }
  return out;
}

void restore_arrays(const std::vector<std::pair<std::string, Tensor>>& loaded,
                    const std::vector<std::pair<std::string, Tensor*>>& arrays,
                    const std::string& context) {
  if (loaded.size() != arrays.size())
    throw std::runtime_error(context + ": checkpoint holds " + std::to_string(loaded.size()) +
                             " arrays, expected " + std::to_string(arrays.size()));
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    if (loaded[i].first != arrays[i].first)
      throw std::runtime_error(context + ": array '" + loaded[i].first + "' where '" +
                               arrays[i].first + "' was expected (incompatible checkpoint)");
    if (!loaded[i].second.same_shape(*arrays[i].second))
      throw std::runtime_error(context + ": shape mismatch for array '" + loaded[i].first +
                               "' (incompatible checkpoint)");
    *arrays[i].second = loaded[i].second;
  }
}

std::string encode_cycler(const DataCycler::State& s) {
  std::ostringstream out;
  out << s.cursor << '|' << s.rng << '|';
  for (std::size_t i = 0; i < s.order.size(); ++i) {
    if (i) out << ',';
    out << s.order[i];
  }
  return out.str();
}

DataCycler::State decode_cycler(const std::string& text) {
  const std::size_t p1 = text.find('|');
  const std::size_t p2 = text.find('|', p1 == std::string::npos ? p1 : p1 + 1);
  if (p1 == std::string::npos || p2 == std::string::npos)
    throw std::runtime_error("decode_cycler: malformed state");
  DataCycler::State s;
  s.cursor = std::stoi(text.substr(0, p1));
  s.rng = text.substr(p1 + 1, p2 - p1 - 1);
  std::string rest = text.substr(p2 + 1);
  std::istringstream in(rest);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    if (!tok.empty()) s.order.push_back(std::stoi(tok));
  }
  return s;
}

}  // namespace semiseg
