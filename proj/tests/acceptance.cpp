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

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "cropseg/arch.hpp"
#include "cropseg/baselines.hpp"
#include "cropseg/eval.hpp"
#include "cropseg/imgproc.hpp"
#include "cropseg/io.hpp"
#include "cropseg/network.hpp"
#include "cropseg/nn/gradcheck.hpp"
#include "cropseg/nn/layers.hpp"
#include "cropseg/synth.hpp"
#include "cropseg/training.hpp"

using namespace cropseg;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("%s [%2d] %s: %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

template <typename... A>
std::string fmt(const char* f, A... a) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ---------------------------------------------------------------------------
// 1-3, 11: analytic

void cost_model() {
  const auto plain = arch::macs_per_position(arch::plain_conv(16, 16, 5));
  const auto full = arch::macs_per_position(arch::bottleneck(16, 8, 5, false));
  const auto sep = arch::macs_per_position(arch::bottleneck(16, 8, 5, true));
  report(1, "cost per position", plain == 6400 && full == 1856 && sep == 896,
         fmt("plain %lld, bottleneck %lld, separable %lld", (long long)plain, (long long)full, (long long)sep));
}

void parameter_budget() {
  const auto block = arch::conv_weight_count(arch::bottleneck(16, 8, 5, true));
  // stem conv + BN, 24 blocks of (convs + 4 BNs), head with bias
  const std::int64_t hand = (14 * 16 * 25 + 2 * 16) + 24 * ((16 * 8 + 5 * 8 * 8 * 2 + 8 * 16) + 2 * (8 + 8 + 8 + 16)) +
                            (16 * 3 + 3);
  const arch::NetworkSpec spec;
  const auto analytic = arch::analyze(spec, 96, 128).total_params;
  Network<float> net(spec, 1);
  const auto live = net.count_parameters();
  report(2, "parameter budget", block == 896 && analytic < 30000 && analytic == hand && live == hand,
         fmt("block %lld, analytic %lld, instantiated %lld, hand tally %lld", (long long)block,
             (long long)analytic, (long long)live, (long long)hand));
}

void receptive_field() {
  const auto [h, w] = arch::receptive_field(arch::NetworkSpec{});
  report(3, "receptive field", h == 200 && w == 200, fmt("%dx%d", h, w));
}

void analytic_macs() {
  arch::NetworkSpec rgb;
  rgb.input_channels = 3;
  const auto full = arch::count_flops(arch::NetworkSpec{}, 384, 512);
  const auto small = arch::count_flops(rgb, 384, 512);
  report(11, "analytic MAC total", full >= 1.5e9 && full <= 2.5e9 && small < full,
         fmt("14-channel %lld MACs (window [1.5e9, 2.5e9]), RGB %lld MACs", (long long)full, (long long)small));
}

// ---------------------------------------------------------------------------
// 4: gradients

nn::Tensor<double> random_tensor(nn::Shape s, std::uint64_t seed) {
  nn::Tensor<double> t(s);
  std::mt19937_64 rng(seed);
  nn::fill_uniform(t, rng, -1.0, 1.0);
  return t;
}

template <typename L>
void randomize(L& layer, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto* p : layer.parameters()) nn::fill_uniform(p->value, rng, -1.0, 1.0);
}

struct BnProbe {
  nn::BatchNorm2d<double> bn{"bn", 3};
  nn::Tensor<double> forward(const nn::Tensor<double>& x) { return bn.forward(x, nn::Mode::kTrain); }
  nn::Tensor<double> backward(const nn::Tensor<double>& g) { return bn.backward(g); }
  std::vector<nn::Param<double>*> parameters() { return bn.parameters(); }
};

struct BottleneckProbe {
  Bottleneck<double> b{"b", 16, 8, 5, true};
  nn::Tensor<double> forward(const nn::Tensor<double>& x) { return b.forward(x, nn::Mode::kTrain); }
  nn::Tensor<double> backward(const nn::Tensor<double>& g) { return b.backward(g); }
  std::vector<nn::Param<double>*> parameters() { return b.parameters(); }
};

void gradients() {
  constexpr int kSeeds = 20;
  constexpr double kEps = 1e-6;
  std::map<std::string, double> worst;
  auto note = [&](const std::string& k, const nn::GradCheckResult& r) {
    worst[k] = std::max(worst[k], r.max_rel_error);
  };
  for (std::uint64_t s = 0; s < kSeeds; ++s) {
    for (auto [kh, kw] : {std::pair{3, 3}, std::pair{5, 5}, std::pair{5, 1}, std::pair{1, 5}, std::pair{1, 1}}) {
      nn::Conv2d<double> conv("c", 2, 3, kh, kw, kh == 3);
      randomize(conv, 100 + s);
      note("conv", nn::finite_difference_check(conv, random_tensor({2, 2, 6, 6}, s), kEps, s));
    }
    BnProbe bn;
    randomize(bn, 200 + s);
    note("batchnorm", nn::finite_difference_check(bn, random_tensor({2, 3, 4, 3}, s + 1), kEps, s));

    nn::Relu<double> relu;
    auto x = random_tensor({1, 2, 5, 5}, s + 2);
    for (auto& v : x.vec())
      if (std::abs(v) < 0.05) v = 0.5;  // keep clear of the kink
    note("relu", nn::finite_difference_check(relu, x, kEps, s));

    nn::MaxPool2x2<double> pool;
    note("maxpool", nn::finite_difference_check(pool, random_tensor({2, 2, 6, 8}, s + 3), kEps, s));

    BottleneckProbe b;
    std::mt19937_64 rng(300 + s);
    b.b.init(rng);
    note("bottleneck", nn::finite_difference_check(b, random_tensor({2, 16, 6, 6}, s + 4), kEps, s));
  }
  bool ok = true;
  std::ostringstream d;
  d << kSeeds << " seeds;";
  for (const auto& [k, v] : worst) {
    ok &= v < 1e-4;
    d << " " << k << " " << fmt("%.2e", v);
  }
  report(4, "gradient checks", ok, d.str());
}

// ---------------------------------------------------------------------------
// 5: structure

void structure() {
  bool roundtrip = true;
  for (std::uint64_t s = 0; s < 25 && roundtrip; ++s) {
    nn::Tensor<double> x(nn::Shape{2, 3, 6, 8});
    std::mt19937_64 rng(s);
    nn::fill_uniform(x, rng, 0.01, 1.0);
    nn::PoolIndices idx;
    const auto p = nn::max_pool_2x2(x, idx);
    const auto u = nn::unpool_2x2(p, idx, 6, 8);
    // every pooled value lands back at its source, nothing else is written
    double sum_u = 0, sum_p = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      if (u[i] != 0.0 && u[i] != x[i]) roundtrip = false;
      sum_u += u[i];
    }
    for (double v : p.vec()) sum_p += v;
    nn::PoolIndices idx2;
    roundtrip &= std::abs(sum_u - sum_p) <= 1e-12 * sum_p && nn::max_pool_2x2(u, idx2) == p;
  }

  double softmax_err = 0;
  for (std::uint64_t s = 0; s < 25; ++s) {
    nn::Tensor<float> l(nn::Shape{2, 3, 5, 7});
    std::mt19937_64 rng(s);
    nn::fill_uniform(l, rng, -30.0f, 30.0f);
    const auto p = nn::softmax_pixelwise(l);
    for (int n = 0; n < 2; ++n)
      for (std::size_t k = 0; k < p.shape().plane(); ++k) {
        double sum = 0;
        for (int c = 0; c < 3; ++c) sum += p.plane(n, c)[k];
        softmax_err = std::max(softmax_err, std::abs(sum - 1.0));
      }
  }

  bool mirror = true;
  for (auto [h, w] : {std::pair{96, 128}, std::pair{384, 512}, std::pair{48, 64}}) {
    const auto rep = arch::analyze(arch::NetworkSpec{}, h, w);
    std::vector<std::tuple<int, int, int>> pools, unpools;
    int ph = h, pw = w, pc = 16;
    for (const auto& c : rep.layers) {
      if (c.kind == arch::LayerKind::kPool) pools.emplace_back(c.out_c, c.out_h, c.out_w);
      if (c.kind == arch::LayerKind::kUnpool) unpools.emplace_back(pc, ph, pw);
      ph = c.out_h, pw = c.out_w, pc = c.out_c;
    }
    mirror &= pools.size() == 4 && unpools.size() == 4 && rep.layers.back().out_h == h &&
              rep.layers.back().out_w == w;
    for (std::size_t i = 0; mirror && i < pools.size(); ++i) mirror &= pools[i] == unpools[pools.size() - 1 - i];
  }

  const char* order[] = {"R", "G", "B", "ExG", "ExR", "CIVE", "NDI", "HUE", "SAT", "VAL",
                         "dxExG", "dyExG", "lapExG", "EDGES"};
  bool channels = imgproc::kNumChannels == 14;
  for (int i = 0; channels && i < 14; ++i) channels &= std::string(imgproc::kChannelNames[i]) == order[i];
  {
    RgbImage img(16, 12);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<float> u(0, 1);
    for (auto& v : img.data()) v = u(rng);
    const auto raw = imgproc::raw_channels(img);
    const auto vi = imgproc::compute_vegetation_indices(img);
    const auto hsv = imgproc::rgb_to_hsv(img);
    const auto tex = imgproc::exg_texture_channels(vi.exg);
    const Channel* ref[] = {&vi.exg, &vi.exr, &vi.cive, &vi.ndi, &hsv.hue, &hsv.sat, &hsv.val,
                            &tex.dx, &tex.dy, &tex.lap, &tex.edges};
    channels &= raw.size() == 14;
    for (int i = 3; channels && i < 14; ++i) channels &= raw[i] == *ref[i - 3];
  }

  report(5, "structural invariants", roundtrip && softmax_err < 1e-6 && mirror && channels,
         fmt("unpool round trip %s, softmax max |sum-1| %.1e, encoder/decoder mirror %s, channel order %s",
             roundtrip ? "ok" : "broken", softmax_err, mirror ? "ok" : "broken", channels ? "ok" : "broken"));
}

// ---------------------------------------------------------------------------
// 9-10: metric and baseline oracles

LabelMask random_mask(std::mt19937_64& rng, int w, int h, double veg) {
  LabelMask m(w, h, 0);
  std::uniform_real_distribution<double> u(0, 1);
  for (auto& v : m.data()) v = u(rng) < veg ? (u(rng) < 0.5 ? 1 : 2) : 0;
  return m;
}

std::set<std::pair<int, std::vector<int>>> union_find_components(const LabelMask& m, int min_area) {
  const int W = m.width(), H = m.height();
  std::vector<int> parent(m.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const int k = y * W + x;
      if (!m[k]) continue;
      if (x + 1 < W && m[k + 1] == m[k]) parent[find(k)] = find(k + 1);
      if (y + 1 < H && m[k + W] == m[k]) parent[find(k)] = find(k + W);
    }
  std::map<int, std::vector<int>> groups;
  for (int k = 0; k < static_cast<int>(m.size()); ++k)
    if (m[k]) groups[find(k)].push_back(k);
  std::set<std::pair<int, std::vector<int>>> out;
  for (auto& [root, px] : groups)
    if (static_cast<int>(px.size()) >= min_area) out.insert({m[root], px});
  return out;
}

void metric_oracles() {
  std::mt19937_64 rng(2024);
  int pixel_bad = 0, comp_bad = 0;
  for (int t = 0; t < 100; ++t) {
    const auto gt = random_mask(rng, 16, 16, 0.6), pred = random_mask(rng, 16, 16, 0.6);
    const auto pm = eval::pixel_metrics(eval::confusion(gt, pred));
    double sum = 0;
    int defined = 0;
    for (int c = 0; c < 3; ++c) {
      int inter = 0, uni = 0;
      for (std::size_t i = 0; i < gt.size(); ++i) {
        inter += gt[i] == c && pred[i] == c;
        uni += gt[i] == c || pred[i] == c;
      }
      if (!uni) {
        pixel_bad += pm.per_class[c].iou.has_value();
        continue;
      }
      const double iou = double(inter) / uni;
      pixel_bad += !pm.per_class[c].iou || std::abs(*pm.per_class[c].iou - iou) > 1e-12;
      sum += iou, ++defined;
    }
    pixel_bad += std::abs(pm.miou - sum / defined) > 1e-12;

    const auto m = random_mask(rng, 16, 16, 0.75);
    for (int min_area : {1, 5}) {
      std::set<std::pair<int, std::vector<int>>> got;
      for (const auto& o : eval::connected_components(m, min_area)) {
        auto px = o.pixels;
        std::sort(px.begin(), px.end());
        got.insert({o.cls, std::vector<int>(px.begin(), px.end())});
      }
      comp_bad += got != union_find_components(m, min_area);
    }
  }
  // 1 cm^2 at 2 mm^2 per pixel
  const int derived = 100 / 2;
  LabelMask strip(60, 3, 0);
  for (int x = 0; x < 49; ++x) strip(x, 0) = 1;
  for (int x = 0; x < 50; ++x) strip(x, 2) = 2;
  const auto objs = eval::connected_components(strip);
  const bool rule = eval::kMinObjectArea == derived && objs.size() == 1 && objs[0].cls == 2;
  report(9, "metric oracles", pixel_bad == 0 && comp_bad == 0 && rule,
         fmt("100 masks: %d pixel-metric and %d component mismatches; 50-px rule %s", pixel_bad, comp_bad,
             rule ? "ok" : "broken"));
}

int exhaustive_otsu(const baselines::Histogram& h) {
  int best = -1;
  double best_var = 0.0;
  for (int k = 0; k < baselines::kHistogramBins - 1; ++k) {
    double n0 = 0, n1 = 0, s0 = 0, s1 = 0;
    for (int b = 0; b <= k; ++b) n0 += h[b], s0 += double(b) * h[b];
    for (int b = k + 1; b < baselines::kHistogramBins; ++b) n1 += h[b], s1 += double(b) * h[b];
    if (n0 == 0 || n1 == 0) continue;
    const double n = n0 + n1, d = s0 / n0 - s1 / n1;
    const double var = (n0 / n) * (n1 / n) * d * d;
    if (var > best_var) best_var = var, best = k;
  }
  return best;
}

void otsu_oracle() {
  std::mt19937_64 rng(17);
  int bad = 0;
  for (int t = 0; t < 100; ++t) {
    baselines::Histogram h{};
    std::uniform_int_distribution<int> occupied(2, 40), bin(0, 255), count(1, 500);
    const int k = occupied(rng);
    for (int i = 0; i < k; ++i) h[bin(rng)] += count(rng);
    bad += baselines::otsu_bin(h) != exhaustive_otsu(h);
  }
  const int size = 121;
  const double radius = 45.0, window = 15;
  Channel disk(size, size, 0.0f);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      if (std::hypot(x - 60.0, y - 60.0) <= radius) disk(x, y) = 1.0f;
  const auto adaptive = baselines::adaptive_threshold(disk, static_cast<int>(window), 0.02);
  const auto otsu = baselines::otsu_threshold(disk);
  int interior = 0, a_hit = 0, o_hit = 0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      if (std::hypot(x - 60.0, y - 60.0) > radius - window) continue;
      ++interior;
      a_hit += adaptive(x, y);
      o_hit += otsu.mask(x, y);
    }
  const double ra = double(a_hit) / interior, ro = double(o_hit) / interior;
  report(10, "threshold baselines", bad == 0 && ra < 0.5 && ro == 1.0,
         fmt("%d/100 Otsu mismatches; disk interior recall adaptive %.3f, Otsu %.3f", bad, ra, ro));
}

// ---------------------------------------------------------------------------
// 6-8: learning

constexpr int kW = 128, kH = 96;

std::vector<Sample> pick(const std::vector<Sample>& all, const std::vector<std::string>& ids) {
  std::map<std::string, const Sample*> by_id;
  for (const auto& s : all) by_id[s.id] = &s;
  std::vector<Sample> out;
  for (const auto& id : ids) out.push_back(*by_id.at(id));
  return out;
}

training::TrainConfig desk_config(imgproc::ChannelSet set) {
  training::TrainConfig cfg;
  cfg.width = kW;
  cfg.height = kH;
  cfg.epochs = 60;
  cfg.channels = set;
  cfg.seed = 7;
  cfg.on_epoch = [](const training::EpochRecord& r) {
    std::fprintf(stderr, "  epoch %2d  train %.4f  val %.4f  val mIoU %.4f\n", r.epoch, r.train_loss, r.val_loss,
                 r.val_miou);
  };
  return cfg;
}

eval::PixelMetrics pixel_eval(Network<float>& net, const std::vector<Sample>& data, const training::ClassWeights& w,
                              imgproc::ChannelSet set) {
  return eval::pixel_metrics(training::evaluate(net, data, w, kW, kH, set, 15, 1).cm);
}

std::optional<double> object_macc(Network<float>& net, const std::vector<Sample>& data,
                                  const training::ClassWeights& w) {
  const auto r = training::evaluate(net, data, w, kW, kH, imgproc::ChannelSet::kAll, 15, 1, true);
  eval::ObjectTally t;
  for (std::size_t i = 0; i < data.size(); ++i) t += eval::tally_objects(r.predictions[i], data[i].labels);
  return eval::object_metrics(t).macc;
}

void learning() {
  constexpr std::uint64_t kNetSeed = 42;
  std::vector<std::string> stems;
  const auto home = synth::generate_set(synth::preset("home"), 200, 1000);
  for (const auto& s : home) stems.push_back(s.id);
  const auto split = io::make_split(stems, 1);
  const auto tr = pick(home, split.train), va = pick(home, split.val), te = pick(home, split.test);
  // away data: a pool for adaptation and a disjoint held-out test set
  const auto away_pool = synth::generate_set(synth::preset("away"), 50, 5000);
  const auto away_test = synth::generate_set(synth::preset("away"), 30, 9000);

  // 6
  std::fprintf(stderr, "training 14-channel network (%zu/%zu/%zu)\n", tr.size(), va.size(), te.size());
  const auto t0 = Clock::now();
  Network<float> full(arch::NetworkSpec{}, kNetSeed);
  const auto hf = training::train(full, tr, va, desk_config(imgproc::ChannelSet::kAll));
  const double elapsed = seconds_since(t0);
  const auto pm = pixel_eval(full, te, hf.weights, imgproc::ChannelSet::kAll);
  const double soil = pm.per_class[0].iou.value_or(0.0);
  report(6, "desk-scale learning",
         pm.miou >= 0.75 && soil >= 0.95 && hf.stopped_epoch <= 60 && elapsed <= 1800.0,
         fmt("test mIoU %.4f, soil IoU %.4f, weed IoU %.4f, crop IoU %.4f after %d epochs in %.0f s", pm.miou, soil,
             pm.per_class[1].iou.value_or(0.0), pm.per_class[2].iou.value_or(0.0), hf.stopped_epoch, elapsed));

  // 7
  std::fprintf(stderr, "training RGB network\n");
  arch::NetworkSpec rgb_spec;
  rgb_spec.input_channels = 3;
  Network<float> rgb(rgb_spec, kNetSeed);
  const auto hr = training::train(rgb, tr, va, desk_config(imgproc::ChannelSet::kRgb));
  const auto away_full = pixel_eval(full, away_test, hf.weights, imgproc::ChannelSet::kAll);
  const auto away_rgb = pixel_eval(rgb, away_test, hr.weights, imgproc::ChannelSet::kRgb);
  report(7, "channel ablation direction",
         away_full.miou >= away_rgb.miou && hf.epochs_to_95 <= hr.epochs_to_95,
         fmt("away mIoU 14-channel %.4f vs RGB %.4f; epochs to 95%% of final %d vs %d", away_full.miou,
             away_rgb.miou, hf.epochs_to_95, hr.epochs_to_95));

  // 8
  const auto before = object_macc(full, away_test, hf.weights);
  const auto store = full.to_store(kH, kW);
  std::vector<double> after;
  for (int n : {10, 20, 50}) {
    auto net = load_network(store);
    training::RetrainConfig rc;
    rc.width = kW;
    rc.height = kH;
    const std::vector<Sample> subset(away_pool.begin(), away_pool.begin() + n);
    const auto res = training::retrain_head(net, subset, rc);
    after.push_back(object_macc(net, away_test, res.history.weights).value_or(0.0));
  }
  const double b = before.value_or(0.0);
  bool monotone = true;
  for (std::size_t i = 1; i < after.size(); ++i) monotone &= after[i] >= after[i - 1] - 0.02;
  report(8, "adaptation direction", after[0] > b && monotone,
         fmt("object mAcc unadapted %.4f; N=10 %.4f, N=20 %.4f, N=50 %.4f", b, after[0], after[1], after[2]));
}

}  // namespace

int main() {
  try {
    cost_model();
    parameter_budget();
    receptive_field();
    gradients();
    structure();
    metric_oracles();
    otsu_oracle();
    analytic_macs();
    learning();
  } catch (const std::exception& e) {
    std::printf("FAIL acceptance aborted: %s\n", e.what());
    return 2;
  }
  std::printf("%d criteria failed\n", failures);
  return failures ? 1 : 0;
}
