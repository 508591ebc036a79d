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
#include "semiseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <utility>

#include "semiseg/format.hpp"
#include "semiseg/fusion.hpp"
#include "semiseg/optim.hpp"
#include "semiseg/rng.hpp"

namespace fs = std::filesystem;

namespace semiseg {
namespace {

constexpr char kCsvHeader[] =
    "iter, lr, loss_ce, loss_fm, loss_st, loss_d, loss_cce, loss_cons, "
    "d_real_mean, d_fake_mean, miou_val";

// ---------------------------------------------------------------------------
// key=value;... codecs for architecture configs stored in checkpoint headers
// ---------------------------------------------------------------------------

std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.empty()) continue;
    auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("malformed config entry: " + item);
    }
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

const std::string& kv_get(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) {
    throw std::runtime_error("checkpoint config field missing: " + key);
  }
  return it->second;
}

double kv_double(const std::map<std::string, std::string>& kv, const std::string& key) {
  return std::stod(kv_get(kv, key));
}

int kv_int(const std::map<std::string, std::string>& kv, const std::string& key) {
  return static_cast<int>(std::stoll(kv_get(kv, key)));
}

std::string encode_gen_cfg(const SegNetConfig& c) {
  std::string s;
  s += "in_ch=" + std::to_string(c.in_ch);
  s += ";num_classes=" + std::to_string(c.num_classes);
  s += ";width=" + std::to_string(c.width);
  s += ";depth=" + std::to_string(c.depth);
  s += ";leaky_slope=" + format_double(c.leaky_slope);
  return s;
}

SegNetConfig decode_gen_cfg(const std::string& text) {
  auto kv = parse_kv(text);
  SegNetConfig c;
  c.in_ch = kv_int(kv, "in_ch");
  c.num_classes = kv_int(kv, "num_classes");
  c.width = kv_int(kv, "width");
  c.depth = kv_int(kv, "depth");
  c.leaky_slope = kv_double(kv, "leaky_slope");
  return c;
}

std::string encode_disc_cfg(const DiscNetConfig& c) {
  std::string s;
  s += "in_ch=" + std::to_string(c.in_ch);
  s += ";widths=" + std::to_string(c.widths[0]) + "," + std::to_string(c.widths[1]) + "," +
       std::to_string(c.widths[2]) + "," + std::to_string(c.widths[3]);
  s += ";kernel=" + std::to_string(c.kernel);
  s += ";leaky_slope=" + format_double(c.leaky_slope);
  s += ";dropout=" + format_double(c.dropout);
  return s;
}

[[maybe_unused]] DiscNetConfig decode_disc_cfg(const std::string& text) {
  auto kv = parse_kv(text);
  DiscNetConfig c;
  c.in_ch = kv_int(kv, "in_ch");
  {
    std::stringstream ss(kv_get(kv, "widths"));
    std::string item;
    int i = 0;
    while (std::getline(ss, item, ',')) {
      if (i >= 4) throw std::runtime_error("checkpoint disc widths: expected 4 entries");
      c.widths[i++] = static_cast<int>(std::stoll(item));
    }
    if (i != 4) throw std::runtime_error("checkpoint disc widths: expected 4 entries");
  }
  c.kernel = kv_int(kv, "kernel");
  c.leaky_slope = kv_double(kv, "leaky_slope");
  c.dropout = kv_double(kv, "dropout");
  return c;
}

std::string encode_clf_cfg(const ClfNetConfig& c) {
  std::string s;
  s += "in_ch=" + std::to_string(c.in_ch);
  s += ";num_classes=" + std::to_string(c.num_classes);
  s += ";width=" + std::to_string(c.width);
  s += ";depth=" + std::to_string(c.depth);
  s += ";leaky_slope=" + format_double(c.leaky_slope);
  return s;
}

ClfNetConfig decode_clf_cfg(const std::string& text) {
  auto kv = parse_kv(text);
  ClfNetConfig c;
  c.in_ch = kv_int(kv, "in_ch");
  c.num_classes = kv_int(kv, "num_classes");
  c.width = kv_int(kv, "width");
  c.depth = kv_int(kv, "depth");
  c.leaky_slope = kv_double(kv, "leaky_slope");
  return c;
}

// Identifies the data source and split so a resumed run can refuse a
// mismatched invocation.
std::string data_signature(const RunConfig& config) {
  std::string s;
  if (!config.manifest_path.empty()) {
    s += "manifest=" + config.manifest_path;
  } else {
    const SceneSpec& sp = config.scene;
    s += "synth=" + std::to_string(sp.height) + "x" + std::to_string(sp.width);
    s += ";classes=" + std::to_string(sp.num_classes);
    s += ";shapes=" + std::to_string(sp.shapes_min) + "," + std::to_string(sp.shapes_max);
    s += ";noise=" + format_double(sp.texture_noise);
    s += ";jitter=" + format_double(sp.color_jitter);
    s += ";data_seed=" + std::to_string(sp.seed);
    s += ";n_train=" + std::to_string(config.n_train);
  }
  s += ";n_val=" + std::to_string(config.n_val);
  s += ";labeled_ratio=" + format_double(config.labeled_ratio);
  s += ";weak_fraction=" + format_double(config.weak_fraction);
  return s;
}

// ---------------------------------------------------------------------------
// Batch assembly
// ---------------------------------------------------------------------------

Tensor pack_images(const std::vector<Tensor>& images) {
  if (images.empty()) return Tensor();
  const Tensor& first = images.front();
  Tensor out(static_cast<int>(images.size()), first.c, first.h, first.w);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].c != first.c || images[i].h != first.h || images[i].w != first.w) {
      throw std::runtime_error("pack_images: mixed image shapes in one batch");
    }
    std::copy(images[i].v.begin(), images[i].v.end(), out.sample(static_cast<int>(i)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

// Everything needed to score the validation split without re-running the
// networks per fusion variant.
struct ValCache {
  std::vector<Tensor> probs;             // per sample, (1, C, h, w)
  std::vector<std::vector<double>> clf;  // per sample class probabilities
  std::vector<Mask> gt;
};

ValCache build_val_cache(SegNet& gen, ClfNet* clf, const Dataset& dataset,
                         const std::vector<std::string>& ids, int batch) {
  if (batch < 1) batch = 1;
  ValCache cache;
  cache.probs.reserve(ids.size());
  cache.gt.reserve(ids.size());
  for (std::size_t begin = 0; begin < ids.size(); begin += batch) {
    std::size_t end = std::min(ids.size(), begin + batch);
    std::vector<Tensor> images;
    for (std::size_t i = begin; i < end; ++i) {
      SegmentationSample s = dataset.get(ids[i]);
      if (!s.mask) {
        throw std::runtime_error("validation sample has no mask: " + ids[i]);
      }
      cache.gt.push_back(*s.mask);
      images.push_back(std::move(s.image));
    }
    Tensor batch_images = pack_images(images);
    Tensor probs = gen.forward(batch_images, false, nullptr);
    for (int i = 0; i < probs.n; ++i) {
      cache.probs.push_back(slice_samples(probs, i, i + 1));
    }
    if (clf != nullptr) {
      Tensor cp = clf->forward(batch_images, false, nullptr);
      for (int i = 0; i < cp.n; ++i) {
        const double* row = cp.sample(i);
        cache.clf.emplace_back(row, row + cp.c);
      }
    }
  }
  return cache;
}

// Scores the cache with a per-sample prediction rule.
double cache_miou(const ValCache& cache, int num_classes,
                  const std::function<Mask(std::size_t)>& predict) {
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < cache.probs.size(); ++i) {
    confusion_update(cm, predict(i), cache.gt[i], std::nullopt);
  }
  return miou(cm);
}

double plain_miou(const ValCache& cache, int num_classes) {
  return cache_miou(cache, num_classes,
                    [&](std::size_t i) { return argmax_mask(cache.probs[i]); });
}

double fused_miou(const ValCache& cache, int num_classes, double tau) {
  return cache_miou(cache, num_classes, [&](std::size_t i) {
    return argmax_mask(fuse(cache.probs[i], cache.clf[i], tau));
  });
}

// ---------------------------------------------------------------------------
// Checkpoint array plumbing
// ---------------------------------------------------------------------------

std::vector<std::pair<std::string, Tensor*>> net_arrays(
    const std::vector<Param*>& params, std::vector<std::pair<std::string, Tensor*>> opt_state) {
  std::vector<std::pair<std::string, Tensor*>> out;
  out.reserve(params.size() + opt_state.size());
  for (Param* p : params) out.emplace_back(p->name, &p->value);
  for (auto& kv : opt_state) out.emplace_back(std::move(kv));
  return out;
}

void write_net_blob(const std::string& path,
                    const std::vector<std::pair<std::string, Tensor*>>& arrays) {
  std::vector<std::pair<std::string, const Tensor*>> view;
  view.reserve(arrays.size());
  for (const auto& kv : arrays) view.emplace_back(kv.first, kv.second);
  write_blob(path, view);
}

void read_net_blob(const std::string& path,
                   const std::vector<std::pair<std::string, Tensor*>>& arrays,
                   const std::string& context) {
  restore_arrays(read_blob(path), arrays, context);
}

// Lenient by-name restore for evaluation: optimizer buffers in the blob are
// ignored, but every requested parameter must be present.
void assign_params_from_blob(const std::vector<std::pair<std::string, Tensor>>& loaded,
                             const std::vector<Param*>& params, const std::string& context) {
  for (Param* p : params) {
    bool found = false;
    for (const auto& kv : loaded) {
      if (kv.first != p->name) continue;
      if (!kv.second.same_shape(p->value)) {
        throw std::runtime_error("incompatible checkpoint: shape mismatch for " + context + "/" +
                                 p->name);
      }
      p->value = kv.second;
      found = true;
      break;
    }
    if (!found) {
      throw std::runtime_error("incompatible checkpoint: missing array " + context + "/" + p->name);
    }
  }
}

const std::string& header_state(const CheckpointHeader& h, const std::string& key) {
  auto it = h.state.find(key);
  if (it == h.state.end()) {
    throw std::runtime_error("incompatible checkpoint: missing state entry " + key);
  }
  return it->second;
}

bool header_has_net(const CheckpointHeader& h, const std::string& name) {
  return std::find(h.nets.begin(), h.nets.end(), name) != h.nets.end();
}

}  // namespace

// ---------------------------------------------------------------------------
// Dataset plumbing
// ---------------------------------------------------------------------------

std::unique_ptr<Dataset> open_dataset(const RunConfig& config) {
  if (!config.manifest_path.empty()) {
    std::vector<ManifestEntry> entries = read_manifest(config.manifest_path);
    std::string root = config.data_root;
    if (root.empty()) {
      root = fs::path(config.manifest_path).parent_path().string();
    }
    return std::make_unique<FileDataset>(root, std::move(entries), config.gen.num_classes);
  }
  if (config.n_train < 1 || config.n_val < 0) {
    throw std::runtime_error("invalid dataset size: n_train must be >= 1 and n_val >= 0");
  }
  return std::make_unique<SynthDataset>(config.scene, config.n_train + config.n_val);
}

IdSplit dataset_id_split(const RunConfig& config, const Dataset& dataset) {
  std::vector<std::string> ids = dataset.ids();
  long long n_val = config.n_val;
  if (n_val < 0 || n_val >= static_cast<long long>(ids.size())) {
    throw std::runtime_error("n_val must be in [0, dataset size): got " + std::to_string(n_val) +
                             " of " + std::to_string(ids.size()));
  }
  IdSplit out;
  out.train.assign(ids.begin(), ids.end() - n_val);
  out.val.assign(ids.end() - n_val, ids.end());
  return out;
}

std::vector<long long> pixel_threshold_sweep(int height, int width) {
  if (height < 1 || width < 1) {
    throw std::runtime_error("pixel_threshold_sweep: invalid resolution");
  }
  // Reference sweep 1000..12000 at 321x321, rescaled to the working area.
  const double scale = static_cast<double>(height) * width / (321.0 * 321.0);
  std::vector<long long> out;
  out.reserve(12);
  for (int k = 1; k <= 12; ++k) {
    out.push_back(std::max<long long>(1, std::llround(1000.0 * k * scale)));
  }
  return out;
}

FusionMode parse_fusion_mode(const std::string& name) {
  if (name == "none") return FusionMode::kNone;
  if (name == "mlmt") return FusionMode::kMlmt;
  if (name == "cnn") return FusionMode::kCnn;
  if (name == "pixel_threshold") return FusionMode::kPixelThreshold;
  if (name == "classwise_pixel_threshold") return FusionMode::kClasswisePixelThreshold;
  throw std::runtime_error(
      "unknown fusion mode: " + name +
      " (expected none, mlmt, cnn, pixel_threshold, classwise_pixel_threshold)");
}

std::string to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::kNone: return "none";
    case FusionMode::kMlmt: return "mlmt";
    case FusionMode::kCnn: return "cnn";
    case FusionMode::kPixelThreshold: return "pixel_threshold";
    case FusionMode::kClasswisePixelThreshold: return "classwise_pixel_threshold";
  }
  throw std::runtime_error("unknown fusion mode value");
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

TrainSummary run_train(const RunConfig& config) {
  const HyperParams& hp = config.hp;
  validate_hyperparams(hp);

  std::unique_ptr<Dataset> dataset = open_dataset(config);
  const int num_classes = dataset->num_classes();
  if (config.gen.num_classes != num_classes) {
    throw std::runtime_error("generator num_classes (" + std::to_string(config.gen.num_classes) +
                             ") does not match dataset (" + std::to_string(num_classes) + ")");
  }
  if (config.mlmt_enabled && config.clf.num_classes != num_classes) {
    throw std::runtime_error("classifier num_classes (" + std::to_string(config.clf.num_classes) +
                             ") does not match dataset (" + std::to_string(num_classes) + ")");
  }

  IdSplit split_ids = dataset_id_split(config, *dataset);
  SplitPlan plan =
      make_split(split_ids.train, config.labeled_ratio, hp.seed, config.weak_fraction);
  const std::set<std::string> labeled_set(plan.labeled_ids.begin(), plan.labeled_ids.end());
  const std::set<std::string> weak_set(plan.weak_ids.begin(), plan.weak_ids.end());

  SegmentationSample probe = dataset->get(split_ids.train.front());
  const int height = probe.image.h;
  const int width = probe.image.w;
  if (probe.image.c != config.gen.in_ch) {
    throw std::runtime_error("generator in_ch (" + std::to_string(config.gen.in_ch) +
                             ") does not match image channels (" + std::to_string(probe.image.c) +
                             ")");
  }

  S4GanConfig s4cfg;
  s4cfg.gen = config.gen;
  s4cfg.disc = config.disc;
  s4cfg.disc.in_ch = config.gen.num_classes + config.gen.in_ch;
  s4cfg.fm_norm = config.fm_norm;
  s4cfg.sgan_generator_loss = config.sgan_generator_loss;
  S4ganTrainer s4(s4cfg, hp, hp.seed);

  std::optional<MlmtTrainer> mlmt;
  if (config.mlmt_enabled) {
    MlmtConfig mcfg;
    mcfg.clf = config.clf;
    // The classifier schedules (and validates) over its own budget, which
    // mlmt_max_iter may set apart from the segmentation horizon.
    HyperParams mlmt_hp = hp;
    mlmt_hp.max_iter = config.mlmt_max_iter >= 0 ? config.mlmt_max_iter : hp.max_iter;
    mlmt.emplace(mcfg, mlmt_hp, config.clf_lr, hp.seed);
  }

  // Unlabeled pool for the segmentation branch: image-level labels do not
  // provide masks, so weak samples train as unlabeled here.
  std::vector<std::string> unlabeled_pool = plan.unlabeled_ids;
  unlabeled_pool.insert(unlabeled_pool.end(), plan.weak_ids.begin(), plan.weak_ids.end());

  DataCycler labeled_cycler(plan.labeled_ids, mix_seed(hp.seed, 0xA01));
  DataCycler unlabeled_cycler(unlabeled_pool, mix_seed(hp.seed, 0xA02));
  DataCycler mlmt_cycler(split_ids.train, mix_seed(hp.seed, 0xA03));
  Rng seg_aug_rng(mix_seed(hp.seed, 0xA04));
  const std::uint64_t mlmt_seed_base = mix_seed(hp.seed, 0xA06);
  long long mlmt_sample_counter = 0;

  const long long mlmt_total =
      config.mlmt_enabled ? (config.mlmt_max_iter >= 0 ? config.mlmt_max_iter : hp.max_iter) : 0;
  long long s4_done = 0;
  long long mlmt_done = 0;

  const bool gan_on = !unlabeled_pool.empty() &&
                      (hp.lambda_fm > 0.0 || hp.lambda_st > 0.0 || config.sgan_generator_loss);

  const std::string gen_cfg_text = encode_gen_cfg(s4cfg.gen);
  const std::string disc_cfg_text = encode_disc_cfg(s4cfg.disc);
  const std::string clf_cfg_text = config.mlmt_enabled ? encode_clf_cfg(config.clf) : "";
  const std::string data_sig = data_signature(config);

  auto save_checkpoint = [&](const std::string& dir) {
    fs::create_directories(dir);
    CheckpointHeader h;
    h.s4_iter = s4_done;
    h.mlmt_iter = mlmt_done;
    h.config_text = serialize_config(hp);
    h.config_hash = config_hash(hp);
    h.num_classes = num_classes;
    h.height = height;
    h.width = width;
    h.state["data_signature"] = data_sig;
    h.state["gen_config"] = gen_cfg_text;
    h.state["disc_config"] = disc_cfg_text;
    h.state["fm_norm"] = s4cfg.fm_norm == FmNorm::kL1 ? "l1" : "l2";
    h.state["sgan_generator_loss"] = s4cfg.sgan_generator_loss ? "1" : "0";
    h.state["dropout_rng"] = s4.dropout_rng().save_state();
    h.state["seg_aug_rng"] = seg_aug_rng.save_state();
    h.state["labeled_cycler"] = encode_cycler(labeled_cycler.state());
    h.state["unlabeled_cycler"] = encode_cycler(unlabeled_cycler.state());
    h.state["disc_adam_t"] = std::to_string(s4.discriminator_opt().step_count());
    h.nets = {"generator", "discriminator"};
    if (mlmt) {
      h.state["clf_config"] = clf_cfg_text;
      h.state["clf_lr"] = format_double(config.clf_lr);
      h.state["mlmt_cycler"] = encode_cycler(mlmt_cycler.state());
      h.state["mlmt_sample_counter"] = std::to_string(mlmt_sample_counter);
      h.nets.push_back("clf_student");
      h.nets.push_back("clf_teacher");
    }
    save_header(dir, h);
    write_net_blob(dir + "/generator.bin",
                   net_arrays(s4.generator().params(), s4.generator_opt().state()));
    write_net_blob(dir + "/discriminator.bin",
                   net_arrays(s4.discriminator().params(), s4.discriminator_opt().state()));
    if (mlmt) {
      write_net_blob(dir + "/clf_student.bin",
                     net_arrays(mlmt->student().params(), mlmt->student_opt().state()));
      write_net_blob(dir + "/clf_teacher.bin", net_arrays(mlmt->teacher().params(), {}));
    }
  };

  if (!config.resume.empty()) {
    CheckpointHeader h = load_header(config.resume);
    if (h.config_text != serialize_config(hp) || h.config_hash != config_hash(hp)) {
      throw std::runtime_error(
          "incompatible checkpoint: hyperparameters differ from the resumed run");
    }
    if (header_state(h, "data_signature") != data_sig) {
      throw std::runtime_error("incompatible checkpoint: data source or split differs");
    }
    if (header_state(h, "gen_config") != gen_cfg_text ||
        header_state(h, "disc_config") != disc_cfg_text) {
      throw std::runtime_error("incompatible checkpoint: network architecture differs");
    }
    if (header_has_net(h, "clf_student") != config.mlmt_enabled) {
      throw std::runtime_error(
          "incompatible checkpoint: classifier branch presence differs from the resumed run");
    }
    if (mlmt && header_state(h, "clf_config") != clf_cfg_text) {
      throw std::runtime_error("incompatible checkpoint: classifier architecture differs");
    }
    read_net_blob(config.resume + "/generator.bin",
                  net_arrays(s4.generator().params(), s4.generator_opt().state()), "generator");
    read_net_blob(config.resume + "/discriminator.bin",
                  net_arrays(s4.discriminator().params(), s4.discriminator_opt().state()),
                  "discriminator");
    s4.discriminator_opt().set_step_count(std::stoll(header_state(h, "disc_adam_t")));
    s4.dropout_rng().load_state(header_state(h, "dropout_rng"));
    seg_aug_rng.load_state(header_state(h, "seg_aug_rng"));
    labeled_cycler.set_state(decode_cycler(header_state(h, "labeled_cycler")));
    unlabeled_cycler.set_state(decode_cycler(header_state(h, "unlabeled_cycler")));
    if (mlmt) {
      read_net_blob(config.resume + "/clf_student.bin",
                    net_arrays(mlmt->student().params(), mlmt->student_opt().state()),
                    "clf_student");
      read_net_blob(config.resume + "/clf_teacher.bin",
                    net_arrays(mlmt->teacher().params(), {}), "clf_teacher");
      mlmt_cycler.set_state(decode_cycler(header_state(h, "mlmt_cycler")));
      mlmt_sample_counter = std::stoll(header_state(h, "mlmt_sample_counter"));
    }
    s4_done = h.s4_iter;
    mlmt_done = h.mlmt_iter;
  }

  fs::create_directories(config.out_dir);
  const std::string csv_path = config.out_dir + "/metrics.csv";
  std::ofstream csv;
  if (config.resume.empty()) {
    csv.open(csv_path, std::ios::trunc);
  } else {
    csv.open(csv_path, std::ios::app);
  }
  if (!csv) throw std::runtime_error("cannot open for writing: " + csv_path);
  if (csv.tellp() == std::streampos(0)) {
    csv << kCsvHeader << "\n";
  }

  TrainSummary summary;
  summary.metrics_csv = csv_path;
  summary.checkpoint_dir = config.out_dir + "/ckpt_final";
  ScoreTrace trace;

  const int batch = static_cast<int>(hp.batch_size);
  const long long total_passes = std::max(hp.max_iter, mlmt_total);
  const long long start_pass = std::max(s4_done, mlmt_done);
  bool stopped_early = false;

  for (long long pass = start_pass; pass < total_passes; ++pass) {
    const bool do_s4 = pass < hp.max_iter;
    const bool do_mlmt = mlmt && pass < mlmt_total;

    // Batches are assembled up front; the dataset is not touched from the
    // branch threads.
    Tensor labeled_images;
    std::vector<Mask> labeled_masks;
    Tensor unlabeled_images;
    if (do_s4) {
      std::vector<Tensor> images;
      for (int b = 0; b < batch; ++b) {
        const std::string& id = labeled_cycler.next();
        SegmentationSample s = dataset->get(id);
        if (!s.mask) {
          throw std::runtime_error("sample selected as labeled has no mask: " + id);
        }
        Mask m = *s.mask;
        augment_seg(s.image, m, seg_aug_rng);
        images.push_back(std::move(s.image));
        labeled_masks.push_back(std::move(m));
      }
      labeled_images = pack_images(images);
      if (!unlabeled_cycler.empty()) {
        std::vector<Tensor> uimages;
        for (int b = 0; b < batch; ++b) {
          const std::string& id = unlabeled_cycler.next();
          SegmentationSample s = dataset->get(id);
          if (seg_aug_rng.bernoulli(0.5)) {
            s.image = hflip_image(s.image);
          }
          uimages.push_back(std::move(s.image));
        }
        unlabeled_images = pack_images(uimages);
      }
    }

    std::vector<MlmtSample> mlmt_batch;
    if (do_mlmt) {
      for (int b = 0; b < batch; ++b) {
        const std::string& id = mlmt_cycler.next();
        SegmentationSample s = dataset->get(id);
        const std::uint64_t seed =
            mix_seed(mlmt_seed_base, static_cast<std::uint64_t>(mlmt_sample_counter++));
        AugmentedPair pair = augment_pair(s, seed, config.clf_augment);
        MlmtSample ms;
        ms.view_a = std::move(pair.view_a);
        ms.view_b = std::move(pair.view_b);
        if (labeled_set.count(id) != 0 || weak_set.count(id) != 0) {
          if (!s.class_vector) {
            throw std::runtime_error("sample with image-level supervision has no class labels: " +
                                     id);
          }
          ms.labels = *s.class_vector;
        }
        mlmt_batch.push_back(std::move(ms));
      }
    }

    S4GanLosses sl;
    MlmtLoss ml;
    if (config.parallel_branches && do_s4 && do_mlmt) {
      std::exception_ptr e1, e2;
      std::thread t1([&] {
        try {
          sl = s4.step(labeled_images, labeled_masks, unlabeled_images, pass);
        } catch (...) {
          e1 = std::current_exception();
        }
      });
      std::thread t2([&] {
        try {
          ml = mlmt->step(mlmt_batch, pass);
        } catch (...) {
          e2 = std::current_exception();
        }
      });
      t1.join();
      t2.join();
      if (e1) std::rethrow_exception(e1);
      if (e2) std::rethrow_exception(e2);
    } else {
      if (do_s4) sl = s4.step(labeled_images, labeled_masks, unlabeled_images, pass);
      if (do_mlmt) ml = mlmt->step(mlmt_batch, pass);
    }
    if (do_s4) {
      s4_done += 1;
      summary.losses.push_back(sl);
      if (gan_on) trace.add(pass, sl.d_real_mean, sl.d_fake_mean);
    }
    if (do_mlmt) mlmt_done += 1;

    std::string miou_cell;
    if (config.val_interval > 0 && (pass + 1) % config.val_interval == 0 &&
        !split_ids.val.empty()) {
      ClfNet* clf = nullptr;
      if (mlmt) clf = config.fuse_with_teacher ? &mlmt->teacher() : &mlmt->student();
      ValCache cache = build_val_cache(s4.generator(), clf, *dataset, split_ids.val, batch);
      double m = clf != nullptr ? fused_miou(cache, num_classes, hp.tau)
                                : plain_miou(cache, num_classes);
      miou_cell = format_double(m);
      summary.final_miou = m;
    }

    const double lr = do_s4 ? poly_lr(hp.lr_seg, pass, hp.max_iter, hp.pow) : 0.0;
    csv << pass << ", " << format_double(lr) << ", " << format_double(sl.ce) << ", "
        << format_double(sl.fm) << ", " << format_double(sl.st) << ", "
        << format_double(sl.d_loss) << ", " << format_double(ml.cce) << ", "
        << format_double(ml.cons) << ", " << format_double(sl.d_real_mean) << ", "
        << format_double(sl.d_fake_mean) << ", " << miou_cell << "\n";

    if (config.checkpoint_interval > 0 && (pass + 1) % config.checkpoint_interval == 0 &&
        pass + 1 < total_passes) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "ckpt_%06lld", pass + 1);
      save_checkpoint(config.out_dir + "/" + buf);
    }
    if (config.stop_after >= 0 && pass + 1 >= config.stop_after && pass + 1 < total_passes) {
      save_checkpoint(summary.checkpoint_dir);
      stopped_early = true;
      break;
    }
  }

  if (!stopped_early) {
    save_checkpoint(summary.checkpoint_dir);
  }
  csv.close();

  {
    std::ofstream scores(config.out_dir + "/scores.csv", std::ios::trunc);
    scores << score_trace_csv(trace);
  }

  if (!stopped_early && !split_ids.val.empty()) {
    ClfNet* clf = nullptr;
    if (mlmt) clf = config.fuse_with_teacher ? &mlmt->teacher() : &mlmt->student();
    ValCache cache = build_val_cache(s4.generator(), clf, *dataset, split_ids.val, batch);
    summary.final_miou_unfused = plain_miou(cache, num_classes);
    summary.final_miou = clf != nullptr ? fused_miou(cache, num_classes, hp.tau)
                                        : summary.final_miou_unfused;
  }

  summary.s4_iters = s4_done;
  summary.mlmt_iters = mlmt_done;
  summary.trace = std::move(trace);
  return summary;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

EvalNets load_eval_nets(const std::string& checkpoint_dir) {
  EvalNets out;
  out.header = load_header(checkpoint_dir);
  out.gen_cfg = decode_gen_cfg(header_state(out.header, "gen_config"));
  Rng init(0);
  out.gen = std::make_unique<SegNet>(out.gen_cfg, init);
  assign_params_from_blob(read_blob(checkpoint_dir + "/generator.bin"), out.gen->params(),
                          "generator");
  if (header_has_net(out.header, "clf_student")) {
    out.clf_cfg = decode_clf_cfg(header_state(out.header, "clf_config"));
    out.clf_student = std::make_unique<ClfNet>(out.clf_cfg, init);
    assign_params_from_blob(read_blob(checkpoint_dir + "/clf_student.bin"),
                            out.clf_student->params(), "clf_student");
    if (header_has_net(out.header, "clf_teacher")) {
      out.clf_teacher = std::make_unique<ClfNet>(out.clf_cfg, init);
      assign_params_from_blob(read_blob(checkpoint_dir + "/clf_teacher.bin"),
                              out.clf_teacher->params(), "clf_teacher");
    }
  }
  return out;
}

EvalReport run_eval(const std::string& checkpoint_dir, const RunConfig& config, FusionMode mode,
                    double tau, const std::string& clf_checkpoint) {
  EvalNets nets = load_eval_nets(checkpoint_dir);

  std::unique_ptr<Dataset> dataset = open_dataset(config);
  if (dataset->num_classes() != nets.gen_cfg.num_classes) {
    throw std::runtime_error("incompatible checkpoint: trained for " +
                             std::to_string(nets.gen_cfg.num_classes) + " classes, dataset has " +
                             std::to_string(dataset->num_classes()));
  }
  IdSplit split_ids = dataset_id_split(config, *dataset);
  if (split_ids.val.empty()) {
    throw std::runtime_error("evaluation requires a non-empty validation split (n_val > 0)");
  }
  const int num_classes = dataset->num_classes();
  const int batch = std::max(1, static_cast<int>(config.hp.batch_size));

  // Pick the classifier before the single forward sweep over the split.
  ClfNet* clf = nullptr;
  EvalNets aux;  // keeps a separately loaded classifier alive
  if (mode == FusionMode::kMlmt) {
    clf = config.fuse_with_teacher ? nets.clf_teacher.get() : nets.clf_student.get();
    if (clf == nullptr) {
      throw std::runtime_error(
          "mlmt fusion needs a checkpoint trained with the classifier branch enabled");
    }
  } else if (mode == FusionMode::kCnn) {
    if (clf_checkpoint.empty()) {
      throw std::runtime_error(
          "cnn fusion needs --clf-checkpoint (a classifier trained without the consistency term)");
    }
    aux = load_eval_nets(clf_checkpoint);
    clf = aux.clf_student.get();
    if (clf == nullptr) {
      throw std::runtime_error("classifier checkpoint has no classifier nets: " + clf_checkpoint);
    }
    if (aux.clf_cfg.num_classes != num_classes) {
      throw std::runtime_error("classifier checkpoint class count mismatch");
    }
  }

  ValCache cache = build_val_cache(*nets.gen, clf, *dataset, split_ids.val, batch);

  EvalReport report;
  report.mode = mode;
  switch (mode) {
    case FusionMode::kNone: {
      report.miou = plain_miou(cache, num_classes);
      report.rows.push_back({"none", report.miou});
      break;
    }
    case FusionMode::kMlmt:
    case FusionMode::kCnn: {
      report.miou = fused_miou(cache, num_classes, tau);
      report.rows.push_back({to_string(mode) + " tau=" + format_double(tau), report.miou});
      break;
    }
    case FusionMode::kPixelThreshold: {
      const std::vector<long long> sweep =
          pixel_threshold_sweep(cache.probs.front().h, cache.probs.front().w);
      double best = -1.0;
      for (long long t : sweep) {
        double m = cache_miou(cache, num_classes, [&](std::size_t i) {
          return argmax_mask(fuse_pixel_threshold(cache.probs[i], t));
        });
        report.rows.push_back({"threshold=" + std::to_string(t), m});
        best = std::max(best, m);
      }
      report.miou = best;
      break;
    }
    case FusionMode::kClasswisePixelThreshold: {
      const std::vector<long long> sweep =
          pixel_threshold_sweep(cache.probs.front().h, cache.probs.front().w);
      std::vector<long long> thresholds(num_classes, 0);
      auto score = [&] {
        return cache_miou(cache, num_classes, [&](std::size_t i) {
          return argmax_mask(fuse_pixel_threshold(cache.probs[i], thresholds));
        });
      };
      double current = score();
      // Greedy sequential search: tune one class at a time, keeping earlier
      // choices fixed; threshold 0 (no suppression) stays available.
      for (int c = 1; c < num_classes; ++c) {
        long long best_t = 0;
        double best_m = current;
        for (long long t : sweep) {
          thresholds[c] = t;
          double m = score();
          if (m > best_m + 1e-15) {
            best_m = m;
            best_t = t;
          }
        }
        thresholds[c] = best_t;
        current = best_m;
        report.rows.push_back(
            {"class " + std::to_string(c) + " threshold=" + std::to_string(best_t), current});
      }
      report.miou = current;
      break;
    }
  }
  return report;
}

}  // namespace semiseg
