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
#include "semiseg/hyperparams.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "semiseg/format.hpp"

namespace semiseg {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& v, const std::string& key, const std::string& origin) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw std::runtime_error(origin + ": bad numeric value for " + key + ": '" + v + "'");
  }
}

long long parse_int(const std::string& v, const std::string& key, const std::string& origin) {
  long long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw std::runtime_error(origin + ": bad integer value for " + key + ": '" + v + "'");
  return out;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "lambda_fm", "lambda_st", "lambda_cons", "gamma",      "tau",       "lr_seg",
      "lr_disc",   "pow",       "max_iter",    "batch_size", "ema_decay", "seed"};
  return keys;
}

std::vector<std::string> validate_hyperparams(const HyperParams& hp) {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument("hyperparams: " + msg);
  };
  require(hp.lambda_fm >= 0.0, "lambda_fm must be nonnegative");
  require(hp.lambda_st >= 0.0, "lambda_st must be nonnegative");
  require(hp.lambda_cons >= 0.0, "lambda_cons must be nonnegative");
  require(hp.gamma >= 0.0 && hp.gamma <= 1.0, "gamma must be in [0,1]");
  require(hp.tau >= 0.0 && hp.tau <= 1.0, "tau must be in [0,1]");
  require(hp.lr_seg > 0.0, "lr_seg must be positive");
  require(hp.lr_disc > 0.0, "lr_disc must be positive");
  require(hp.pow > 0.0, "pow must be positive");
  require(hp.max_iter > 0, "max_iter must be positive");
  require(hp.batch_size > 0, "batch_size must be positive");
  require(hp.ema_decay >= 0.0 && hp.ema_decay <= 1.0, "ema_decay must be in [0,1]");

  std::vector<std::string> warnings;
  if (hp.gamma < 0.5)
    warnings.push_back("gamma = " + format_double(hp.gamma) +
                       " is below chance level; the self-training gate will admit "
                       "pseudo-labels the discriminator scores as fake");
  return warnings;
}

void apply_config_text(HyperParams& hp, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(where + ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key == "lambda_fm")
      hp.lambda_fm = parse_double(val, key, where);
    else if (key == "lambda_st")
      hp.lambda_st = parse_double(val, key, where);
    else if (key == "lambda_cons")
      hp.lambda_cons = parse_double(val, key, where);
    else if (key == "gamma")
      hp.gamma = parse_double(val, key, where);
    else if (key == "tau")
      hp.tau = parse_double(val, key, where);
    else if (key == "lr_seg")
      hp.lr_seg = parse_double(val, key, where);
    else if (key == "lr_disc")
      hp.lr_disc = parse_double(val, key, where);
    else if (key == "pow")
      hp.pow = parse_double(val, key, where);
    else if (key == "max_iter")
      hp.max_iter = parse_int(val, key, where);
    else if (key == "batch_size")
      hp.batch_size = parse_int(val, key, where);
    else if (key == "ema_decay")
      hp.ema_decay = parse_double(val, key, where);
    else if (key == "seed")
      hp.seed = parse_int(val, key, where);
    else {
      std::string valid;
      for (const auto& k : config_keys()) valid += (valid.empty() ? "" : ", ") + k;
      throw std::runtime_error(where + ": unknown config key '" + key + "' (valid keys: " +
                               valid + ")");
    }
  }
}

void apply_config_file(HyperParams& hp, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_config_text(hp, ss.str(), path);
}

std::string serialize_config(const HyperParams& hp) {
  std::ostringstream out;
  out << "lambda_fm = " << format_double(hp.lambda_fm) << '\n';
  out << "lambda_st = " << format_double(hp.lambda_st) << '\n';
  out << "lambda_cons = " << format_double(hp.lambda_cons) << '\n';
  out << "gamma = " << format_double(hp.gamma) << '\n';
  out << "tau = " << format_double(hp.tau) << '\n';
  out << "lr_seg = " << format_double(hp.lr_seg) << '\n';
  out << "lr_disc = " << format_double(hp.lr_disc) << '\n';
  out << "pow = " << format_double(hp.pow) << '\n';
  out << "max_iter = " << hp.max_iter << '\n';
  out << "batch_size = " << hp.batch_size << '\n';
  out << "ema_decay = " << format_double(hp.ema_decay) << '\n';
  out << "seed = " << hp.seed << '\n';
  return out.str();
}

std::uint64_t config_hash(const HyperParams& hp) {
  // FNV-1a over the canonical serialization.
  const std::string s = serialize_config(hp);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace semiseg
