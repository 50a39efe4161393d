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
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "cropseg/augment.hpp"
#include "cropseg/eval.hpp"
#include "cropseg/fsutil.hpp"
#include "cropseg/image.hpp"
#include "cropseg/imgproc.hpp"
#include "cropseg/network.hpp"
#include "cropseg/nn/adam.hpp"
#include "cropseg/runtime.hpp"

namespace cropseg::training {

using nn::ClassWeights;

// ---------------------------------------------------------------------------
// Class weighting

inline std::array<double, kNumClasses> class_frequencies(std::span<const Sample> data) {
  std::array<std::int64_t, kNumClasses> n{};
  std::int64_t total = 0;
  for (const auto& s : data) {
    for (auto l : s.labels.data()) {
      if (l >= kNumClasses) throw DataError(s.id + ": label value outside {0,1,2}");
      ++n[l];
    }
    total += static_cast<std::int64_t>(s.labels.size());
  }
  std::array<double, kNumClasses> f{};
  if (total == 0) return f;
  for (int c = 0; c < kNumClasses; ++c) f[c] = static_cast<double>(n[c]) / static_cast<double>(total);
  return f;
}

/// Median-frequency balancing from pixel frequencies: w_c = median / f_c.
/// The median runs over the classes that occur; absent classes get weight
/// 0 and a warning.
inline ClassWeights weights_from_frequencies(const std::array<double, kNumClasses>& f,
                                             std::vector<std::string>* warnings = nullptr) {
  std::vector<double> present;
  for (double v : f)
    if (v > 0.0) present.push_back(v);
  if (present.empty()) throw ArgumentError("class weights need at least one labelled pixel");
  std::sort(present.begin(), present.end());
  const std::size_t m = present.size();
  const double median = m % 2 ? present[m / 2] : 0.5 * (present[m / 2 - 1] + present[m / 2]);
  ClassWeights w{};
  for (int c = 0; c < kNumClasses; ++c) {
    if (f[c] > 0.0) {
      w[c] = median / f[c];
    } else {
      w[c] = 0.0;
      if (warnings) warnings->push_back(std::string("class '") + label_name(c) + "' absent from dataset; weight 0");
    }
  }
  return w;
}

inline ClassWeights compute_class_weights(std::span<const Sample> data,
                                          std::vector<std::string>* warnings = nullptr) {
  if (data.empty()) throw ArgumentError("cannot compute class weights of an empty dataset");
  return weights_from_frequencies(class_frequencies(data), warnings);
}

// ---------------------------------------------------------------------------
// Configuration and history

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_miou = 0.0;
};

struct TrainConfig {
  int batch_size = 15;
  int epochs = 60;
  double lr = 5e-3;  // Adam default 1e-3 is too slow for the 60-epoch desk budget
  std::optional<ClassWeights> class_weights;  // nullopt: median-frequency from the training set
  bool augment = true;
  std::uint64_t seed = 1;
  int patience = 5;
  int min_epochs = 10;
  bool early_stopping = false;  // the full training keeps the best epoch without stopping
  int width = 128;
  int height = 96;
  imgproc::ChannelSet channels = imgproc::ChannelSet::kAll;
  int threads = 1;  // data preparation workers; results do not depend on it
  std::function<void(const EpochRecord&)> on_epoch;
  std::function<void(const std::string&)> warn;

  void validate() const {
    if (batch_size < 1) throw ArgumentError("batch size must be >= 1");
    if (epochs < 1) throw ArgumentError("epochs must be >= 1");
    if (patience < 1) throw ArgumentError("patience must be >= 1");
    if (!(lr > 0.0)) throw ArgumentError("learning rate must be positive");
    if (width % 16 || height % 16 || width < 16 || height < 16)
      throw ArgumentError("input size must be a positive multiple of 16 in both dimensions");
  }
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;       // 1-based epoch whose parameters were kept
  int epochs_to_95 = 0;     // first epoch reaching 95% of the final val mIoU
  int stopped_epoch = 0;    // last epoch run
  ClassWeights weights{};

  std::string csv() const {
    std::ostringstream os;
    os.precision(9);
    os << "epoch,train_loss,val_loss,val_miou\n";
    for (const auto& e : epochs) os << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.val_miou << '\n';
    return os.str();
  }

  void write_csv(const std::filesystem::path& p) const { fs::write_atomic(p, csv()); }
};

/// First epoch whose val mIoU reaches 95% of the last epoch's.
inline int epochs_to_fraction(const std::vector<EpochRecord>& h, double fraction = 0.95) {
  if (h.empty()) return 0;
  const double target = fraction * h.back().val_miou;
  for (const auto& e : h)
    if (e.val_miou >= target) return e.epoch;
  return h.back().epoch;
}

// ---------------------------------------------------------------------------
// Data preparation

/// Resizes a sample to the training resolution (bilinear image, nearest labels).
inline Sample fit_to(const Sample& s, int w, int h) {
  if (s.image.width() == w && s.image.height() == h) return s;
  return {imgproc::resize_bilinear(s.image, w, h), imgproc::resize_nearest(s.labels, w, h), s.id};
}

struct Batch {
  nn::Tensor<float> x;
  std::vector<std::uint8_t> labels;  // n-major, row-major
  std::vector<std::string> ids;
};

inline Batch make_batch(std::span<const Sample> samples, const std::vector<int>& order, int w, int h,
                        imgproc::ChannelSet set, int threads,
                        const std::function<Sample(int, const Sample&)>& transform = {}) {
  const int n = static_cast<int>(order.size());
  std::vector<imgproc::InputVolume> vols(n);
  std::vector<LabelMask> labs(n);
  runtime::parallel_for(n, threads, [&](int i) {
    const Sample& src = samples[order[i]];
    const Sample s = transform ? transform(i, src) : src;
    vols[i] = imgproc::assemble_input_volume(s.image, w, h, set);
    labs[i] = s.labels;
  });
  Batch b;
  b.x = to_tensor(vols);
  for (int i = 0; i < n; ++i) {
    b.labels.insert(b.labels.end(), labs[i].data().begin(), labs[i].data().end());
    b.ids.push_back(samples[order[i]].id);
  }
  return b;
}

inline std::string join_ids(const std::vector<std::string>& ids) {
  std::string s;
  for (const auto& id : ids) s += (s.empty() ? "" : ", ") + id;
  return s;
}

// ---------------------------------------------------------------------------
// Evaluation helpers

struct EvalResult {
  double loss = 0.0;
  eval::ConfusionMatrix cm;
  std::vector<LabelMask> predictions;
};

/// Inference-mode pass over a prepared sample set.
inline EvalResult evaluate(Network<float>& net, std::span<const Sample> data, const ClassWeights& w,
                           int width, int height, imgproc::ChannelSet set, int batch_size, int threads,
                           bool keep_predictions = false) {
  EvalResult r;
  double loss_sum = 0.0;
  std::size_t pixels = 0;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    std::vector<int> idx;
    for (std::size_t i = start; i < std::min(data.size(), start + batch_size); ++i) idx.push_back(static_cast<int>(i));
    const Batch b = make_batch(data, idx, width, height, set, threads);
    const nn::Tensor<float> probs = net.predict(b.x);
    loss_sum += nn::weighted_cross_entropy(probs, b.labels, w) * static_cast<double>(b.labels.size());
    pixels += b.labels.size();
    for (int n = 0; n < b.x.n(); ++n) {
      const LabelMask pred = argmax_labels(probs, n);
      const std::size_t off = static_cast<std::size_t>(n) * pred.size();
      for (std::size_t k = 0; k < pred.size(); ++k) r.cm.add(b.labels[off + k], pred[k]);
      if (keep_predictions) r.predictions.push_back(pred);
    }
  }
  net.clear_cache();
  r.loss = pixels ? loss_sum / static_cast<double>(pixels) : 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Training

namespace detail {

struct Snapshot {
  std::vector<nn::Tensor<float>> values;

  template <typename Net>
  static Snapshot take(Net& net) {
    Snapshot s;
    for (auto* p : net.parameters()) s.values.push_back(p->value);
    for (auto* b : net.buffers()) s.values.push_back(b->value);
    return s;
  }
  template <typename Net>
  void restore(Net& net) const {
    std::size_t i = 0;
    for (auto* p : net.parameters()) p->value = values[i++];
    for (auto* b : net.buffers()) b->value = values[i++];
  }
};

/// Independent per-(epoch, sample) stream so augmentation does not depend on
/// worker scheduling.
inline std::mt19937_64 sample_rng(std::uint64_t seed, int epoch, int index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(index), 0xa5u};
  return std::mt19937_64(seq);
}

}  // namespace detail

/// Mini-batch Adam training with weighted cross-entropy; keeps the
/// parameters of the epoch with the best validation mIoU.
inline TrainHistory train(Network<float>& net, std::span<const Sample> train_set, std::span<const Sample> val_set,
                          const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.empty()) throw ArgumentError("empty training set");
  if (val_set.empty()) throw ArgumentError("empty validation set");
  if (net.input_channels() != imgproc::channel_count(cfg.channels))
    throw ArgumentError("network input channels do not match the channel set");
  runtime::tune_allocator();

  std::vector<Sample> tr, va;
  for (const auto& s : train_set) tr.push_back(fit_to(s, cfg.width, cfg.height));
  for (const auto& s : val_set) va.push_back(fit_to(s, cfg.width, cfg.height));
  for (const auto& s : tr) require_valid(s);
  for (const auto& s : va) require_valid(s);

  TrainHistory hist;
  std::vector<std::string> warnings;
  hist.weights = cfg.class_weights ? *cfg.class_weights : compute_class_weights(tr, &warnings);
  if (cfg.warn)
    for (const auto& w : warnings) cfg.warn(w);

  // Without augmentation every batch could be reused, but building volumes is
  // cheap next to the network pass, so one code path serves both.
  auto params = net.parameters();
  nn::AdamState<float> opt;
  opt.config.lr = cfg.lr;
  std::mt19937_64 shuffle_rng(cfg.seed);
  std::vector<int> order(tr.size());
  std::iota(order.begin(), order.end(), 0);

  double best_miou = -1.0;
  detail::Snapshot best;
  int since_best = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t pixel_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::vector<int> idx(order.begin() + start,
                                 order.begin() + std::min(order.size(), start + cfg.batch_size));
      std::function<Sample(int, const Sample&)> tf;
      if (cfg.augment)
        tf = [&, epoch](int i, const Sample& s) {
          auto rng = detail::sample_rng(cfg.seed, epoch, idx[i]);
          return augment::augment(s, rng);
        };
      const Batch b = make_batch(tr, idx, cfg.width, cfg.height, cfg.channels, cfg.threads, tf);
      nn::zero_grads(params);
      const nn::Tensor<float> logits = net.forward(b.x, Mode::kTrain);
      const nn::Tensor<float> probs = nn::softmax_pixelwise(logits);
      const double loss = nn::weighted_cross_entropy(probs, b.labels, hist.weights);
      if (!std::isfinite(loss)) throw NumericError("non-finite training loss in batch [" + join_ids(b.ids) + "]");
      net.backward(nn::weighted_cross_entropy_backward(probs, b.labels, hist.weights));
      nn::adam_step(params, opt);
      loss_sum += loss * static_cast<double>(b.labels.size());
      pixel_sum += b.labels.size();
    }
    net.clear_cache();

    const EvalResult v =
        evaluate(net, va, hist.weights, cfg.width, cfg.height, cfg.channels, cfg.batch_size, cfg.threads);
    EpochRecord rec{epoch, loss_sum / static_cast<double>(pixel_sum), v.loss, eval::pixel_metrics(v.cm).miou};
    hist.epochs.push_back(rec);
    hist.stopped_epoch = epoch;
    if (cfg.on_epoch) cfg.on_epoch(rec);
    if (rec.val_miou > best_miou) {
      best_miou = rec.val_miou;
      hist.best_epoch = epoch;
      best = detail::Snapshot::take(net);
      since_best = 0;
    } else if (++since_best >= cfg.patience && cfg.early_stopping && epoch >= cfg.min_epochs) {
      break;
    }
  }
  best.restore(net);
  hist.epochs_to_95 = epochs_to_fraction(hist.epochs);
  return hist;
}

// ---------------------------------------------------------------------------
// Head-only adaptation

struct AdaptSplit {
  std::vector<int> train, val;
};

/// Seeded 80/20 split; both parts non-empty.
inline AdaptSplit adaptation_split(int n, std::uint64_t seed) {
  if (n < 2) throw ArgumentError("head retraining needs at least 2 images to split");
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const int ntrain = std::clamp(static_cast<int>(std::lround(0.8 * n)), 1, n - 1);
  return {{idx.begin(), idx.begin() + ntrain}, {idx.begin() + ntrain, idx.end()}};
}

struct RetrainConfig {
  int batch_size = 15;
  int max_epochs = 100;
  double lr = 1e-2;
  std::optional<ClassWeights> class_weights;
  std::uint64_t seed = 1;
  int patience = 5;
  int min_epochs = 10;
  int width = 128;
  int height = 96;
  imgproc::ChannelSet channels = imgproc::ChannelSet::kAll;
  int threads = 1;
  std::function<void(const EpochRecord&)> on_epoch;
  std::function<void(const std::string&)> warn;
};

struct RetrainResult {
  TrainHistory history;  // val_miou is filled from the validation images
  int n_train = 0;
  int n_val = 0;
};

/// Freezes the encoder and decoder, caches their features and fits only the
/// head, stopping once validation loss has not improved for `patience`
/// epochs (never before min_epochs). The best-validation head is kept.
inline RetrainResult retrain_head(Network<float>& net, std::span<const Sample> data, const RetrainConfig& cfg) {
  const AdaptSplit split = adaptation_split(static_cast<int>(data.size()), cfg.seed);
  if (cfg.patience < 1) throw ArgumentError("patience must be >= 1");
  runtime::tune_allocator();
  net.set_head_only(true);

  auto prepare = [&](const std::vector<int>& ids, std::vector<nn::Tensor<float>>& feats,
                     std::vector<std::vector<std::uint8_t>>& labels, std::vector<Sample>& kept) {
    for (int i : ids) {
      Sample s = fit_to(data[i], cfg.width, cfg.height);
      require_valid(s);
      const auto vol = imgproc::assemble_input_volume(s.image, cfg.width, cfg.height, cfg.channels);
      feats.push_back(net.features(to_tensor(vol), Mode::kInfer));
      labels.push_back(s.labels.data());
      kept.push_back(std::move(s));
    }
  };
  std::vector<nn::Tensor<float>> ftr, fva;
  std::vector<std::vector<std::uint8_t>> ltr, lva;
  std::vector<Sample> str, sva;
  prepare(split.train, ftr, ltr, str);
  prepare(split.val, fva, lva, sva);
  net.clear_cache();

  RetrainResult res;
  res.n_train = static_cast<int>(split.train.size());
  res.n_val = static_cast<int>(split.val.size());
  auto& hist = res.history;
  std::vector<std::string> warnings;
  hist.weights = cfg.class_weights ? *cfg.class_weights : compute_class_weights(str, &warnings);
  if (cfg.warn)
    for (const auto& w : warnings) cfg.warn(w);

  auto& head = net.head();
  auto params = head.parameters();
  nn::AdamState<float> opt;
  opt.config.lr = cfg.lr;

  auto stack = [](const std::vector<nn::Tensor<float>>& f, const std::vector<std::vector<std::uint8_t>>& l,
                  const std::vector<int>& idx, std::vector<std::uint8_t>& lab) {
    const auto& f0 = f[idx[0]];
    nn::Tensor<float> x(static_cast<int>(idx.size()), f0.c(), f0.h(), f0.w());
    lab.clear();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto& fi = f[idx[i]];
      std::copy(fi.data(), fi.data() + fi.size(), x.plane(static_cast<int>(i), 0));
      lab.insert(lab.end(), l[idx[i]].begin(), l[idx[i]].end());
    }
    return x;
  };

  auto val_pass = [&]() {
    double loss = 0.0;
    std::size_t px = 0;
    eval::ConfusionMatrix cm;
    std::vector<std::uint8_t> lab;
    for (std::size_t i = 0; i < fva.size(); ++i) {
      const nn::Tensor<float> x = stack(fva, lva, {static_cast<int>(i)}, lab);
      const auto probs = nn::softmax_pixelwise(head.forward(x, false));
      loss += nn::weighted_cross_entropy(probs, lab, hist.weights) * static_cast<double>(lab.size());
      px += lab.size();
      const LabelMask pred = argmax_labels(probs);
      for (std::size_t k = 0; k < pred.size(); ++k) cm.add(lab[k], pred[k]);
    }
    return std::pair{loss / static_cast<double>(px), eval::pixel_metrics(cm).miou};
  };

  std::mt19937_64 rng(cfg.seed);
  std::vector<int> order(ftr.size());
  std::iota(order.begin(), order.end(), 0);
  double best_loss = std::numeric_limits<double>::infinity();
  nn::Tensor<float> best_w = head.weight().value, best_b = head.bias().value;
  int since_best = 0;
  std::vector<std::uint8_t> lab;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t px = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::vector<int> idx(order.begin() + start, order.begin() + std::min(order.size(), start + cfg.batch_size));
      const nn::Tensor<float> x = stack(ftr, ltr, idx, lab);
      nn::zero_grads(params);
      const auto probs = nn::softmax_pixelwise(head.forward(x, true));
      const double loss = nn::weighted_cross_entropy(probs, lab, hist.weights);
      if (!std::isfinite(loss)) throw NumericError("non-finite loss during head retraining");
      head.backward(nn::weighted_cross_entropy_backward(probs, lab, hist.weights), false);
      nn::adam_step(params, opt);
      loss_sum += loss * static_cast<double>(lab.size());
      px += lab.size();
    }
    head.clear_cache();
    const auto [vloss, vmiou] = val_pass();
    EpochRecord rec{epoch, loss_sum / static_cast<double>(px), vloss, vmiou};
    hist.epochs.push_back(rec);
    hist.stopped_epoch = epoch;
    if (cfg.on_epoch) cfg.on_epoch(rec);
    if (vloss < best_loss) {
      best_loss = vloss;
      hist.best_epoch = epoch;
      best_w = head.weight().value;
      best_b = head.bias().value;
      since_best = 0;
    } else if (++since_best >= cfg.patience && epoch >= cfg.min_epochs) {
      break;
    }
  }
  head.weight().value = best_w;
  head.bias().value = best_b;
  hist.epochs_to_95 = epochs_to_fraction(hist.epochs);
  net.set_head_only(false);
  return res;
}

}  // namespace cropseg::training
