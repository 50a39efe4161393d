/**
 * Copyright 2026 The cropseg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// cropseg command-line front end. Exit codes: 0 ok, 1 usage error,
// 2 data error.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cropseg/arch.hpp"
#include "cropseg/baselines.hpp"
#include "cropseg/eval.hpp"
#include "cropseg/imgproc.hpp"
#include "cropseg/io.hpp"
#include "cropseg/network.hpp"
#include "cropseg/runtime.hpp"
#include "cropseg/synth.hpp"
#include "cropseg/training.hpp"

namespace {

using namespace cropseg;
using nlohmann::json;
namespace stdfs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Size {
  int w = 0;
  int h = 0;
};

Size parse_size(const std::string& s) {
  const auto x = s.find('x');
  if (x == std::string::npos) throw ArgumentError("size must look like WxH, got '" + s + "'");
  try {
    Size r{std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1))};
    if (r.w < 1 || r.h < 1) throw ArgumentError("size must be positive");
    return r;
  } catch (const std::logic_error&) {
    throw ArgumentError("size must look like WxH, got '" + s + "'");
  }
}

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

/// Config snapshot written next to every run's outputs.
void write_repro(const stdfs::path& dir, const std::string& command, const json& config,
                 const std::vector<std::string>& argv) {
  json rec = {{"command", command},
              {"argv", argv},
              {"config", config},
              {"versions", {{"cropseg", kVersion}, {"weight_store", nn::kWeightStoreVersion}}}};
  fs::write_atomic(dir / "repro.json", rec.dump(2) + "\n");
}

void print_json(const json& j) { std::cout << j.dump(2) << std::endl; }

// ---------------------------------------------------------------------------

struct Common {
  std::string channels = "all";
  std::vector<std::string> argv;
};

int run_preprocess(const std::string& input, const std::string& out, const std::string& size_s,
                   const Common& c) {
  const Size sz = parse_size(size_s);
  const auto set = imgproc::parse_channel_set(c.channels);
  const RgbImage img = io::read_rgb_png(input);
  const auto vol = imgproc::assemble_input_volume(img, sz.w, sz.h, set);
  const stdfs::path dir(out);
  json chans = json::array();
  for (int i = 0; i < vol.channel_count(); ++i) {
    const std::string stem = "ch" + std::string(i < 9 ? "0" : "") + std::to_string(i + 1) + "_" +
                             std::string(imgproc::kChannelNames[i]);
    fs::write_atomic(dir / (stem + ".bin"), io::encode_channel(vol.channels[i], static_cast<std::uint32_t>(i)));
    io::write_gray_png(dir / (stem + ".png"), io::visualize(vol.channels[i]));
    chans.push_back({{"index", i}, {"name", imgproc::kChannelNames[i]}, {"mean", vol.mean[i]}, {"stddev", vol.stddev[i]}});
  }
  write_repro(dir, "preprocess", {{"input", input}, {"size", size_s}, {"channels", c.channels}}, c.argv);
  print_json({{"width", vol.width}, {"height", vol.height}, {"channels", chans}});
  return 0;
}

int run_synth(const std::string& preset, int count, const std::string& size_s, std::uint64_t seed,
              const std::string& out, const Common& c) {
  if (count < 1) throw ArgumentError("--count must be >= 1");
  const Size sz = parse_size(size_s);
  auto p = synth::preset(preset);
  p.width = sz.w;
  p.height = sz.h;
  const auto samples = synth::generate_set(p, count, seed);
  const auto m = io::write_dataset(out, samples, seed);
  write_repro(out, "synth", {{"preset", preset}, {"count", count}, {"size", size_s}, {"seed", seed}}, c.argv);
  print_json({{"images", count},
              {"train", m.split.train.size()},
              {"val", m.split.val.size()},
              {"test", m.split.test.size()}});
  return 0;
}

struct TrainArgs {
  std::string data, out, size = "128x96", weights = "auto";
  int epochs = 60, batch = 15, patience = 5, min_epochs = 10;
  double lr = 5e-3;
  std::uint64_t seed = 1;
  bool no_augment = false, early_stop = false, quiet = false;
};

std::optional<nn::ClassWeights> parse_weights(const std::string& s) {
  if (s == "auto") return std::nullopt;
  nn::ClassWeights w{};
  std::stringstream ss(s);
  std::string tok;
  int i = 0;
  while (std::getline(ss, tok, ',')) {
    if (i >= kNumClasses) throw ArgumentError("--class-weights takes three values");
    try {
      w[i++] = std::stod(tok);
    } catch (const std::logic_error&) {
      throw ArgumentError("bad class weight '" + tok + "'");
    }
  }
  if (i != kNumClasses) throw ArgumentError("--class-weights takes three values or 'auto'");
  return w;
}

/// Splits listed in the manifest, or a seeded 70/15/15 split when absent.
io::Split dataset_split(const stdfs::path& root, std::uint64_t seed) {
  const auto m = io::read_manifest(root);
  if (m.stems.empty()) throw DataError(root.string() + ": dataset has no images");
  if (!m.split.train.empty()) return m.split;
  return io::make_split(m.stems, seed);
}

int run_train(const TrainArgs& a, const Common& c) {
  const Size sz = parse_size(a.size);
  const auto set = imgproc::parse_channel_set(c.channels);
  const auto split = dataset_split(a.data, a.seed);
  if (split.val.empty()) throw DataError("dataset split has no validation images");
  const auto tr = io::load_samples(a.data, split.train);
  const auto va = io::load_samples(a.data, split.val);

  training::TrainConfig cfg;
  cfg.batch_size = a.batch;
  cfg.epochs = a.epochs;
  cfg.lr = a.lr;
  cfg.class_weights = parse_weights(a.weights);
  cfg.augment = !a.no_augment;
  cfg.seed = a.seed;
  cfg.patience = a.patience;
  cfg.min_epochs = a.min_epochs;
  cfg.early_stopping = a.early_stop;
  cfg.width = sz.w;
  cfg.height = sz.h;
  cfg.channels = set;
  cfg.threads = runtime::worker_threads();
  cfg.warn = [](const std::string& w) { std::cerr << "warning: " << w << "\n"; };
  if (!a.quiet)
    cfg.on_epoch = [](const training::EpochRecord& r) {
      std::fprintf(stderr, "epoch %3d  train_loss %.5f  val_loss %.5f  val_mIoU %.4f\n", r.epoch, r.train_loss,
                   r.val_loss, r.val_miou);
    };

  arch::NetworkSpec spec;
  spec.input_channels = imgproc::channel_count(set);
  Network<float> net(spec, a.seed);
  const auto hist = training::train(net, tr, va, cfg);

  const stdfs::path out(a.out);
  net.to_store(sz.h, sz.w).save(out / "model.cswt");
  hist.write_csv(out / "history.csv");
  const json config = {{"data", a.data}, {"size", a.size}, {"channels", c.channels}, {"epochs", a.epochs},
                       {"batch", a.batch}, {"lr", a.lr}, {"seed", a.seed}, {"augment", !a.no_augment},
                       {"class_weights", hist.weights}, {"patience", a.patience},
                       {"early_stopping", a.early_stop}};
  write_repro(out, "train", config, c.argv);
  print_json({{"best_epoch", hist.best_epoch},
              {"epochs_run", hist.stopped_epoch},
              {"epochs_to_95", hist.epochs_to_95},
              {"best_val_miou", hist.epochs[hist.best_epoch - 1].val_miou},
              {"class_weights", hist.weights},
              {"model", (out / "model.cswt").string()}});
  return 0;
}

struct RetrainArgs {
  std::string model, data, out;
  int count = 0, patience = 5, min_epochs = 10, max_epochs = 100;
  double lr = 1e-2;
  std::uint64_t seed = 1;
  bool quiet = false;
};

int run_retrain(const RetrainArgs& a, const Common& c) {
  const auto ws = nn::WeightStore::load(a.model);
  const auto info = model_info(ws);
  Network<float> net = load_network(ws);
  auto stems = io::read_manifest(a.data).stems;
  if (a.count > 0) {
    if (a.count > static_cast<int>(stems.size())) throw DataError("--count exceeds the images in the dataset");
    stems.resize(a.count);
  }
  const auto samples = io::load_samples(a.data, stems);

  training::RetrainConfig cfg;
  cfg.seed = a.seed;
  cfg.patience = a.patience;
  cfg.min_epochs = a.min_epochs;
  cfg.max_epochs = a.max_epochs;
  cfg.lr = a.lr;
  cfg.width = info.input_w;
  cfg.height = info.input_h;
  cfg.channels = info.input_channels == 3 ? imgproc::ChannelSet::kRgb : imgproc::ChannelSet::kAll;
  cfg.threads = runtime::worker_threads();
  cfg.warn = [](const std::string& w) { std::cerr << "warning: " << w << "\n"; };
  if (!a.quiet)
    cfg.on_epoch = [](const training::EpochRecord& r) {
      std::fprintf(stderr, "epoch %3d  train_loss %.5f  val_loss %.5f  val_mIoU %.4f\n", r.epoch, r.train_loss,
                   r.val_loss, r.val_miou);
    };
  const auto res = training::retrain_head(net, samples, cfg);

  const stdfs::path out(a.out);
  net.to_store(info.input_h, info.input_w).save(out / "model.cswt");
  res.history.write_csv(out / "history.csv");
  write_repro(out, "retrain-head",
              {{"model", a.model}, {"data", a.data}, {"count", stems.size()}, {"seed", a.seed},
               {"patience", a.patience}, {"min_epochs", a.min_epochs}, {"lr", a.lr}},
              c.argv);
  print_json({{"train_images", res.n_train},
              {"val_images", res.n_val},
              {"best_epoch", res.history.best_epoch},
              {"stopped_epoch", res.history.stopped_epoch},
              {"model", (out / "model.cswt").string()}});
  return 0;
}

int run_infer(const std::string& model, const std::vector<std::string>& images, const std::string& out,
              const Common& c) {
  const auto ws = nn::WeightStore::load(model);
  const auto info = model_info(ws);
  Network<float> net = load_network(ws);
  const auto set = info.input_channels == 3 ? imgproc::ChannelSet::kRgb : imgproc::ChannelSet::kAll;
  const stdfs::path dir(out);
  json results = json::array();
  // Images run one after another so the timing columns are not skewed by
  // workers competing for cores.
  for (const auto& path : images) {
    const RgbImage img = io::read_rgb_png(path);
    auto t0 = Clock::now();
    const auto vol = imgproc::assemble_input_volume(img, info.input_w, info.input_h, set);
    const double pre_ms = ms_since(t0);
    t0 = Clock::now();
    const auto probs = net.predict(to_tensor(vol));
    const double net_ms = ms_since(t0);
    const LabelMask small = argmax_labels(probs);
    const LabelMask mask = imgproc::resize_nearest(small, img.width(), img.height());
    const std::string stem = stdfs::path(path).stem().string();
    io::write_label_png(dir / (stem + "_mask.png"), mask);
    io::write_rgb_png(dir / (stem + "_overlay.png"), io::overlay(img, mask));
    results.push_back({{"image", path}, {"mask", (dir / (stem + "_mask.png")).string()},
                       {"preprocess_ms", pre_ms}, {"network_ms", net_ms}, {"total_ms", pre_ms + net_ms}});
  }
  const json report = {{"model", model}, {"results", results}};
  fs::write_atomic(dir / "timing.json", report.dump(2) + "\n");
  write_repro(dir, "infer", {{"model", model}, {"images", images}}, c.argv);
  print_json(report);
  return 0;
}

/// Resolves a label directory: either the directory itself or its labels/.
stdfs::path label_dir(const stdfs::path& p) {
  return stdfs::is_directory(p / "labels") ? p / "labels" : p;
}

json pixel_json(const eval::PixelMetrics& pm) {
  json per = json::object();
  for (int k = 0; k < kNumClasses; ++k)
    per[label_name(k)] = {{"iou", optional_json(pm.per_class[k].iou)},
                          {"precision", optional_json(pm.per_class[k].precision)},
                          {"recall", optional_json(pm.per_class[k].recall)}};
  return {{"per_class", per}, {"miou", pm.miou}, {"miou_partial", pm.miou_partial}, {"pixels", pm.pixels}};
}

json object_json(const eval::ObjectMetrics& om) {
  json per = json::object();
  for (int k = 1; k < kNumClasses; ++k)
    per[label_name(k)] = {{"precision", optional_json(om.precision[k])},
                          {"recall", optional_json(om.recall[k])},
                          {"gt_objects", om.tally.gt_objects[k]},
                          {"pred_objects", om.tally.pred_objects[k]}};
  return {{"per_class", per}, {"macc", optional_json(om.macc)}};
}

int run_eval(const std::string& pred, const std::string& gt, int min_area, const std::string& json_out,
             const Common& c) {
  const stdfs::path pdir = label_dir(pred), gdir = label_dir(gt);
  eval::ConfusionMatrix cm;
  eval::ObjectTally tally;
  int images = 0;
  std::vector<stdfs::path> files;
  for (const auto& e : stdfs::directory_iterator(gdir))
    if (e.path().extension() == ".png") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& g : files) {
    stdfs::path p = pdir / g.filename();
    if (!stdfs::exists(p)) p = pdir / (g.stem().string() + "_mask.png");
    if (!stdfs::exists(p)) throw DataError("no prediction for " + g.filename().string());
    const LabelMask gm = io::read_label_png(g);
    const LabelMask pm = io::read_label_png(p);
    cm += eval::confusion(gm, pm);
    tally += eval::tally_objects(pm, gm, min_area);
    ++images;
  }
  if (images == 0) throw DataError("no ground-truth label PNGs in " + gdir.string());
  const auto pm = eval::pixel_metrics(cm);
  const auto om = eval::object_metrics(tally);
  json cmj = json::array();
  for (const auto& row : cm.counts) cmj.push_back(row);
  const json report = {{"images", images}, {"min_area", min_area}, {"confusion", cmj},
                       {"pixel", pixel_json(pm)}, {"object", object_json(om)}};
  std::cerr << eval::format_report(pm, om);
  if (!json_out.empty()) {
    fs::write_atomic(json_out, report.dump(2) + "\n");
    write_repro(stdfs::path(json_out).parent_path().empty() ? "." : stdfs::path(json_out).parent_path(), "eval",
                {{"pred", pred}, {"gt", gt}, {"min_area", min_area}}, c.argv);
  }
  print_json(report);
  return 0;
}

int run_baseline(const std::string& method, const std::string& input, const std::string& out, int window,
                 double offset, const Common& c) {
  const RgbImage img = io::read_rgb_png(input);
  const Channel exg = imgproc::compute_vegetation_indices(img).exg;
  json rep = {{"method", method}, {"input", input}};
  BinaryMask mask;
  if (method == "otsu") {
    const auto r = baselines::otsu_threshold(exg);
    mask = r.mask;
    rep["threshold"] = r.threshold;
    rep["degenerate"] = r.degenerate;
  } else if (method == "adaptive") {
    mask = baselines::adaptive_threshold(exg, window, offset);
    rep["window"] = window;
    rep["offset"] = offset;
  } else {
    throw ArgumentError("--method must be otsu or adaptive");
  }
  io::write_mask_png(out, mask);
  rep["vegetation_fraction"] = baselines::vegetation_fraction(mask);
  rep["mask"] = out;
  const stdfs::path parent = stdfs::path(out).parent_path();
  write_repro(parent.empty() ? "." : parent, "baseline", rep, c.argv);
  print_json(rep);
  return 0;
}

int run_analyze(const std::string& size_s, bool csv, const Common& c) {
  const Size sz = parse_size(size_s);
  arch::NetworkSpec spec;
  spec.input_channels = imgproc::channel_count(imgproc::parse_channel_set(c.channels));
  const auto rep = arch::analyze(spec, sz.h, sz.w);
  std::cout << (csv ? arch::format_csv(rep) : arch::format_table(rep));
  return 0;
}

struct Stats {
  double mean = 0, p50 = 0, p95 = 0;
};

Stats stats(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  Stats s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  auto pct = [&](double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  s.p50 = pct(0.5);
  s.p95 = pct(0.95);
  return s;
}

int run_bench(const std::string& model, const std::string& size_s, int iterations, int warmup,
              std::uint64_t seed, const Common& c) {
  if (iterations < 10) throw ArgumentError("--iterations must be >= 10");
  if (warmup < 3) throw ArgumentError("--warmup must be >= 3");
  runtime::tune_allocator();
  Size sz = parse_size(size_s);
  auto set = imgproc::parse_channel_set(c.channels);
  Network<float> net;
  if (!model.empty()) {
    const auto ws = nn::WeightStore::load(model);
    const auto info = model_info(ws);
    net = load_network(ws);
    set = info.input_channels == 3 ? imgproc::ChannelSet::kRgb : imgproc::ChannelSet::kAll;
  } else {
    arch::NetworkSpec spec;
    spec.input_channels = imgproc::channel_count(set);
    net = Network<float>(spec, seed);
  }
  auto fp = synth::preset("home");
  fp.width = sz.w;
  fp.height = sz.h;
  fp.seed = seed;
  const RgbImage img = synth::generate_field(fp).image;

  std::vector<double> pre, netw, total;
  for (int i = 0; i < warmup + iterations; ++i) {
    auto t0 = Clock::now();
    const auto vol = imgproc::assemble_input_volume(img, sz.w, sz.h, set);
    const double a = ms_since(t0);
    t0 = Clock::now();
    const auto probs = net.predict(to_tensor(vol));
    const double b = ms_since(t0);
    if (i < warmup) continue;
    pre.push_back(a);
    netw.push_back(b);
    total.push_back(a + b);
  }
  arch::NetworkSpec spec;
  spec.input_channels = imgproc::channel_count(set);
  auto js = [](const Stats& s) { return json{{"mean_ms", s.mean}, {"p50_ms", s.p50}, {"p95_ms", s.p95}}; };
  const Stats st = stats(total);
  const json rep = {{"size", size_s},
                    {"channels", c.channels},
                    {"iterations", iterations},
                    {"warmup", warmup},
                    {"preprocess", js(stats(pre))},
                    {"network", js(stats(netw))},
                    {"total", js(st)},
                    {"fps", 1000.0 / st.mean},
                    {"macs", arch::count_flops(spec, sz.h, sz.w)}};
  print_json(rep);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cropseg: crop/weed/soil segmentation from RGB images"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Common common;
  common.argv.assign(argv, argv + argc);

  auto add_channels = [&](CLI::App* sub) {
    sub->add_option("--channels", common.channels, "input representation: rgb or all")
        ->check(CLI::IsMember({"rgb", "all"}))
        ->capture_default_str();
  };

  std::string input, out, size = "512x384";
  auto* pre = app.add_subcommand("preprocess", "write the standardized input channels of one image");
  pre->add_option("input", input, "RGB PNG")->required();
  pre->add_option("--out", out, "output directory")->required();
  pre->add_option("--size", size, "network input size WxH")->capture_default_str();
  add_channels(pre);

  std::string preset = "home", synth_size = "128x96";
  int count = 200;
  std::uint64_t seed = 1;
  auto* syn = app.add_subcommand("synth", "generate a synthetic labelled dataset");
  syn->add_option("--preset", preset)->check(CLI::IsMember({"home", "away"}))->capture_default_str();
  syn->add_option("--count", count)->capture_default_str();
  syn->add_option("--size", synth_size)->capture_default_str();
  syn->add_option("--seed", seed)->capture_default_str();
  syn->add_option("--out", out)->required();

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "train the network on a dataset directory");
  tr->add_option("--data", ta.data, "dataset root")->required();
  tr->add_option("--out", ta.out, "output directory")->required();
  tr->add_option("--size", ta.size, "training input size WxH")->capture_default_str();
  tr->add_option("--epochs", ta.epochs)->capture_default_str();
  tr->add_option("--batch", ta.batch)->capture_default_str();
  tr->add_option("--lr", ta.lr)->capture_default_str();
  tr->add_option("--seed", ta.seed)->capture_default_str();
  tr->add_option("--class-weights", ta.weights, "auto or w_soil,w_weed,w_crop")->capture_default_str();
  tr->add_option("--patience", ta.patience)->capture_default_str();
  tr->add_option("--min-epochs", ta.min_epochs)->capture_default_str();
  tr->add_flag("--early-stop", ta.early_stop, "stop when validation mIoU stalls");
  tr->add_flag("--no-augment", ta.no_augment);
  tr->add_flag("--quiet", ta.quiet);
  add_channels(tr);

  RetrainArgs ra;
  auto* rt = app.add_subcommand("retrain-head", "adapt only the final layer to a new field");
  rt->add_option("--model", ra.model)->required();
  rt->add_option("--data", ra.data, "adaptation dataset root")->required();
  rt->add_option("--out", ra.out)->required();
  rt->add_option("--count", ra.count, "use the first N images (0 = all)")->capture_default_str();
  rt->add_option("--seed", ra.seed)->capture_default_str();
  rt->add_option("--patience", ra.patience)->capture_default_str();
  rt->add_option("--min-epochs", ra.min_epochs)->capture_default_str();
  rt->add_option("--max-epochs", ra.max_epochs)->capture_default_str();
  rt->add_option("--lr", ra.lr)->capture_default_str();
  rt->add_flag("--quiet", ra.quiet);

  std::string model;
  std::vector<std::string> images;
  auto* inf = app.add_subcommand("infer", "segment images with a trained model");
  inf->add_option("--model", model)->required();
  inf->add_option("--out", out)->required();
  inf->add_option("images", images, "RGB PNGs")->required();

  std::string pred, gt, json_out;
  int min_area = eval::kMinObjectArea;
  auto* ev = app.add_subcommand("eval", "pixel- and object-wise metrics");
  ev->add_option("--pred", pred, "directory of predicted label PNGs")->required();
  ev->add_option("--gt", gt, "ground-truth labels (directory or dataset root)")->required();
  ev->add_option("--min-area", min_area)->capture_default_str();
  ev->add_option("--json", json_out, "also write the report here");

  std::string method = "otsu";
  int window = 51;
  double offset = 0.02;
  auto* bl = app.add_subcommand("baseline", "threshold the ExG channel");
  bl->add_option("--method", method)->check(CLI::IsMember({"otsu", "adaptive"}))->capture_default_str();
  bl->add_option("input", input)->required();
  bl->add_option("--out", out, "mask PNG")->required();
  bl->add_option("--window", window)->capture_default_str();
  bl->add_option("--offset", offset)->capture_default_str();

  bool csv = false;
  auto* an = app.add_subcommand("analyze", "per-layer parameters, MACs and receptive field");
  an->add_option("--size", size)->capture_default_str();
  an->add_flag("--csv", csv);
  add_channels(an);

  int iterations = 20, warmup = 3;
  std::string bench_size = "512x384";
  auto* be = app.add_subcommand("bench", "time preprocessing and the network");
  be->add_option("--model", model, "trained model (default: random weights)");
  be->add_option("--size", bench_size)->capture_default_str();
  be->add_option("--iterations", iterations)->capture_default_str();
  be->add_option("--warmup", warmup)->capture_default_str();
  be->add_option("--seed", seed)->capture_default_str();
  add_channels(be);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*pre) return run_preprocess(input, out, size, common);
    if (*syn) return run_synth(preset, count, synth_size, seed, out, common);
    if (*tr) return run_train(ta, common);
    if (*rt) return run_retrain(ra, common);
    if (*inf) return run_infer(model, images, out, common);
    if (*ev) return run_eval(pred, gt, min_area, json_out, common);
    if (*bl) return run_baseline(method, input, out, window, offset, common);
    if (*an) return run_analyze(size, csv, common);
    if (*be) return run_bench(model, bench_size, iterations, warmup, seed, common);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
