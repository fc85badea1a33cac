#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "oracles/oracles.hpp"
#include "rectnet/checkpoint.hpp"
#include "rectnet/cli.hpp"
#include "rectnet/detector.hpp"
#include "rectnet/evaluator.hpp"
#include "rectnet/layers.hpp"
#include "rectnet/loss.hpp"
#include "rectnet/lstm.hpp"
#include "rectnet/lung_seg.hpp"
#include "rectnet/meanshift.hpp"
#include "rectnet/phantom.hpp"
#include "rectnet/training.hpp"
#include "rectnet/volume_io.hpp"

namespace fs = std::filesystem;
using namespace rectnet;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::vector<double> randoms(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ------------------------------------------------------------------ 1

Outcome gradients() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::map<std::string, double> worst;
  auto note = [&](const std::string& name, double e) { worst[name] = std::max(worst[name], e); };

  for (int trial = 0; trial < 3; ++trial) {
    Conv2d<double> conv("c", 2, 3, 3);
    conv.init_he_uniform(rng);
    conv.bias.value = randoms(3, rng);
    Tensor<double> x({2, 7, 7}, randoms(98, rng));
    typename Conv2d<double>::Cache cache;
    const auto w = randoms(shape_size(conv.forward(x, cache).shape), rng);
    auto conv_loss = [&] {
      typename Conv2d<double>::Cache c;
      return dot(conv.forward(x, c).data, w);
    };
    conv.weight.zero_grad();
    conv.bias.zero_grad();
    (void)conv.forward(x, cache);
    const auto dx = conv.backward(Tensor<double>(cache.output.shape, w), cache, true);
    note("conv", oracle::gradient_error(conv.weight.value, conv.weight.grad, conv_loss));
    note("conv", oracle::gradient_error(conv.bias.value, conv.bias.grad, conv_loss));
    note("conv", oracle::gradient_error(x.data, dx.data, conv_loss));

    MaxPool2d<double> pool(2);
    Tensor<double> px({3, 5, 5}, randoms(75, rng));
    typename MaxPool2d<double>::Cache pc;
    const auto py = pool.forward(px, pc);
    const auto wp = randoms(py.size(), rng);
    const auto dpx = pool.backward(Tensor<double>(py.shape, wp), pc);
    note("maxpool", oracle::gradient_error(px.data, dpx.data, [&] {
      typename MaxPool2d<double>::Cache c;
      return dot(pool.forward(px, c).data, wp);
    }));

    Dense<double> fc("d", 9, 5);
    fc.init_he_uniform(rng);
    fc.bias.value = randoms(5, rng);
    Tensor<double> v({9}, randoms(9, rng));
    const auto wd = randoms(5, rng);
    auto dense_loss = [&] {
      typename Dense<double>::Cache c;
      return dot(fc.forward(v, c).data, wd);
    };
    typename Dense<double>::Cache dc;
    fc.weight.zero_grad();
    fc.bias.zero_grad();
    (void)fc.forward(v, dc);
    const auto dv = fc.backward(Tensor<double>({5}, wd), dc, true);
    note("dense", oracle::gradient_error(fc.weight.value, fc.weight.grad, dense_loss));
    note("dense", oracle::gradient_error(fc.bias.value, fc.bias.grad, dense_loss));
    note("dense", oracle::gradient_error(v.data, dv.data, dense_loss));

    auto z = randoms(2, rng);
    for (int label = 0; label < 2; ++label) {
      const auto p = softmax<double>(std::span<const double>(z));
      const auto g = nll_softmax_grad<double>(std::span<const double>(p), label, 1);
      note("softmax/nll", oracle::gradient_error(z, g, [&] {
        return -std::log(softmax<double>(std::span<const double>(z))[static_cast<std::size_t>(label)]);
      }));
    }

    for (std::size_t steps : {std::size_t{1}, std::size_t{7}}) {
      Lstm<double> lstm("l", 5, 4);
      lstm.init_uniform(rng, 0.5);
      lstm.bias.value = randoms(16, rng);
      std::vector<std::vector<double>> xs, ws;
      for (std::size_t t = 0; t < steps; ++t) {
        xs.push_back(randoms(5, rng));
        ws.push_back(randoms(4, rng));
      }
      auto loss = [&] {
        typename Lstm<double>::Cache c;
        const auto hs = lstm.forward(xs, c);
        double s = 0;
        for (std::size_t t = 0; t < steps; ++t) s += dot(hs[t], ws[t]);
        return s;
      };
      typename Lstm<double>::Cache lc;
      (void)lstm.forward(xs, lc);
      lstm.w_input.zero_grad();
      lstm.w_hidden.zero_grad();
      lstm.bias.zero_grad();
      const auto dxs = lstm.backward(ws, lc, true);
      const std::string name = steps == 1 ? "lstm step" : "lstm bptt(7)";
      note(name, oracle::gradient_error(lstm.w_input.value, lstm.w_input.grad, loss));
      note(name, oracle::gradient_error(lstm.w_hidden.value, lstm.w_hidden.grad, loss));
      note(name, oracle::gradient_error(lstm.bias.value, lstm.bias.grad, loss));
      for (std::size_t t = 0; t < steps; ++t) note(name, oracle::gradient_error(xs[t], dxs[t], loss));
    }
  }
  const double elapsed = seconds_since(t0);
  bool ok = elapsed < 60.0;
  std::string detail;
  for (const auto& [name, e] : worst) {
    ok = ok && e < 1e-4;
    detail += name + " " + fmt("%.1e", e) + ", ";
  }
  return {ok, detail + fmt("%.1fs", elapsed)};
}

// ------------------------------------------------------------------ 2

Outcome architecture() {
  const auto cnn = preset_config(ArchKind::cnn, Preset::paper);
  const auto rect = preset_config(ArchKind::rectnet, Preset::paper);
  auto outputs = [](const ArchitectureConfig& c) {
    std::vector<std::string> o;
    for (const auto& r : describe(c)) o.push_back(r.output);
    return o;
  };
  const std::vector<std::string> cnn_trace{"7x50x50", "32x46x46", "32x44x44", "32x22x22", "64x20x20", "64x18x18",
                                           "64x9x9",  "96x8x8",   "96x4x4",   "816",      "412",      "2"};
  const std::vector<std::string> rect_trace{"1x50x50", "16x46x46", "16x23x23", "16x20x20", "32x18x18", "32x9x9",
                                            "64x7x7",  "64x3x3",   "412",      "7x612",    "7x612",    "4284",
                                            "1024",    "512",      "2"};
  const bool traces = outputs(cnn) == cnn_trace && outputs(rect) == rect_trace;

  std::ostringstream out, err;
  const int code = cli::run({"describe", "--arch", "cnn", "--preset", "paper"}, out, err);
  const bool cli_ok = code == cli::kExitOk && out.str().find(std::to_string(parameter_count(cnn))) != std::string::npos;

  const double nc = static_cast<double>(parameter_count(cnn));
  const double nr = static_cast<double>(parameter_count(rect));
  const double ec = std::abs(nc - 1686598.0) / 1686598.0;
  const double er = std::abs(nr - 10691950.0) / 10691950.0;
  const bool ok = traces && cli_ok && ec <= 1e-4 && er <= 1e-3;
  return {ok, "cnn " + std::to_string(parameter_count(cnn)) + " (" + fmt("%.4f%%", 100 * ec) + "), rectnet " +
                  std::to_string(parameter_count(rect)) + " (" + fmt("%.4f%%", 100 * er) + "), traces " +
                  (traces ? "match" : "differ")};
}

// ------------------------------------------------------------------ 3

Outcome clustering() {
  std::mt19937_64 rng(303);
  double grow_time = 0.0;
  const auto t0 = Clock::now();
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 2000);
    // Box sized so densities range from sparse specks to one large blob.
    const int side = 4 + static_cast<int>(rng() % 40);
    const int depth = 2 + static_cast<int>(rng() % 20);
    const long capacity = static_cast<long>(side) * side * depth;
    std::set<GridPoint> used;
    std::uniform_int_distribution<int> xy(0, side - 1), zz(0, depth - 1);
    while (static_cast<long>(used.size()) < std::min<long>(n, capacity)) used.insert({xy(rng), xy(rng), zz(rng)});
    std::vector<GridPoint> pts(used.begin(), used.end());
    std::shuffle(pts.begin(), pts.end(), rng);
    ProbabilityMap map;
    map.step = 4;
    for (const auto& g : pts) map.entries.push_back({g, Voxel{g.gx * 4, g.gy * 4, g.j}, 0.9});
    const auto g0 = Clock::now();
    const auto got = grow_clusters(map);
    grow_time += seconds_since(g0);
    const std::set<std::vector<std::size_t>> as_set(got.begin(), got.end());
    if (as_set != oracle::union_find_clusters(pts)) ++mismatches;
  }
  const double total = seconds_since(t0);
  return {mismatches == 0 && grow_time < 30.0,
          std::to_string(mismatches) + " mismatches in 1000 maps, grow_clusters " + fmt("%.2fs", grow_time) +
              " (with oracle " + fmt("%.1fs)", total)};
}

// ------------------------------------------------------------------ 4

Outcome meanshift_fixture() {
  const double h = 1.5;
  std::mt19937_64 rng(404);
  std::normal_distribution<double> g(0.0, 1.2);
  // Mirror every offset through all axes so each blob is symmetric about its centre.
  std::vector<std::array<double, 3>> offsets;
  for (int i = 0; i < 40; ++i) {
    const std::array<double, 3> o{g(rng), g(rng), g(rng)};
    for (int s = 0; s < 8; ++s) offsets.push_back({(s & 1 ? -1 : 1) * o[0], (s & 2 ? -1 : 1) * o[1], (s & 4 ? -1 : 1) * o[2]});
  }
  const Point3d ca{10, 10, 10}, cb{10 + 10 * h, 10, 10};
  std::vector<Point3d> pts;
  std::vector<double> probs;
  for (const auto& o : offsets) {
    pts.push_back({ca[0] + o[0], ca[1] + o[1], ca[2] + o[2]});
    probs.push_back(0.9);
  }
  for (const auto& o : offsets) {
    pts.push_back({cb[0] + o[0], cb[1] + o[1], cb[2] + o[2]});
    probs.push_back(0.55);
  }
  const auto r = mean_shift(pts, probs, MeanShiftOptions{h});
  auto near = [&](const Point3d& c) {
    double best = 1e9;
    for (const auto& m : r.modes) {
      best = std::min(best, std::sqrt((m.position[0] - c[0]) * (m.position[0] - c[0]) +
                                      (m.position[1] - c[1]) * (m.position[1] - c[1]) +
                                      (m.position[2] - c[2]) * (m.position[2] - c[2])));
    }
    return best;
  };
  const double da = near(ca), db = near(cb);

  // Same points as one detector cluster on a fine grid.
  ProbabilityMap map;
  map.step = 1;
  std::vector<std::size_t> all;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    map.entries.push_back({GridPoint{static_cast<int>(std::lround(pts[i][0] * 4)), static_cast<int>(std::lround(pts[i][1] * 4)),
                                     static_cast<int>(std::lround(pts[i][2] * 4))},
                           Voxel{}, probs[i]});
    all.push_back(i);
  }
  // Mean shift runs on grid coordinates, so scale the bandwidth with them.
  const auto cands = meanshift_filter(map, all, 4 * h, 0.75);
  bool only_high = cands.size() == 1;
  if (only_high) {
    for (const auto& e : cands[0].members) only_high = only_high && e.probability == 0.9;
    only_high = only_high && cands[0].members.size() == offsets.size();
  }
  const bool ok = r.modes.size() == 2 && da < 0.1 * h && db < 0.1 * h && only_high;
  return {ok, std::to_string(r.modes.size()) + " modes, offsets " + fmt("%.2e", da) + " / " + fmt("%.2e", db) +
                  " (limit " + fmt("%.2f)", 0.1 * h) + ", low blob " + (only_high ? "removed" : "kept")};
}

// ------------------------------------------------------------------ 5

Outcome segmentation() {
  // The suite's standard layout rendered on a clinical grid.
  PhantomSuiteOptions opt;
  opt.dims = {512, 512, 24};
  opt.spacing = {0.7, 0.7, 2.5};
  opt.noise_sd = 25;
  auto s = random_phantom_spec(505, opt);
  // Add a ~2 mm juxtapleural nodule touching the lateral lung wall on the middle slice.
  const auto& lung = s.lungs.front();
  const double r = 2.0;
  s.nodules.push_back({{lung.center[0] + lung.radii[0] - r - 0.3, lung.center[1], lung.center[2]}, {r, r, r}, 40.0});
  const auto p = generate_phantom(s);
  const auto t0 = Clock::now();
  const auto mask = segment_lungs(p.volume);
  const double elapsed = seconds_since(t0);
  const double iou = intersection_over_union(mask, p.lung_truth);
  const double iou_oracle = oracle::iou(mask, p.lung_truth);
  std::size_t missing = 0, total = 0;
  for (const auto& n : p.nodules) {
    for (const auto& v : n.voxels) {
      ++total;
      missing += mask.at(v) ? 0 : 1;
    }
  }
  const bool ok = iou >= 0.95 && std::abs(iou - iou_oracle) < 1e-12 && missing == 0 && p.nodules.size() == s.nodules.size();
  return {ok, "IoU " + fmt("%.4f", iou) + ", nodule voxels outside mask " + std::to_string(missing) + "/" +
                  std::to_string(total) + ", " + fmt("%.1fs", elapsed)};
}

// ------------------------------------------------------------------ 6

struct Suite {
  std::vector<Phantom> phantoms;
  std::vector<BinaryMask> masks;
};

Suite make_suite(std::uint64_t first_seed, int count) {
  Suite s;
  for (int i = 0; i < count; ++i) {
    s.phantoms.push_back(generate_phantom(random_phantom_spec(first_seed + static_cast<std::uint64_t>(i))));
    s.masks.push_back(segment_lungs(s.phantoms.back().volume));
  }
  return s;
}

struct Split {
  DatasetManifest manifest;
  std::map<std::string, const Volume*> train, validation;
};

Split make_split(const Suite& suite, int count, int val_every, const ArchitectureConfig& arch) {
  Split sp;
  std::vector<LabelledScan> scans;
  for (int i = 0; i < count; ++i) {
    const std::string id = "v" + std::to_string(100 + i);
    scans.push_back({id, &suite.phantoms[static_cast<std::size_t>(i)].volume, &suite.masks[static_cast<std::size_t>(i)],
                     &suite.phantoms[static_cast<std::size_t>(i)].nodules});
    (i % val_every == val_every - 1 ? sp.validation : sp.train)[id] = &suite.phantoms[static_cast<std::size_t>(i)].volume;
  }
  DatasetConfig dc;
  dc.k = arch.k;
  dc.patch_size = arch.patch_size;
  dc.large_patch_size = 51;
  dc.grid_multiplier = 25;
  sp.manifest = build_dataset(scans, dc);
  return sp;
}

Outcome end_to_end() {
  const auto t0 = Clock::now();
  constexpr int kTrain = 20, kTest = 5;
  const auto suite = make_suite(1000, kTrain + kTest);
  const auto arch = preset_config(ArchKind::rectnet, Preset::desk);
  const auto split = make_split(suite, kTrain, 5, arch);
  ManifestSource train(split.manifest, split.train), val(split.manifest, split.validation);

  TrainConfig tc;
  tc.epochs = 2;
  tc.seed = 7;
  tc.max_batches_per_epoch = 400;
  tc.threads = resolve_threads(0);
  auto log = [&](const EpochRecord& r) {
    std::printf("    epoch %d: train %.4f, val %.4f, acc %.3f (%.0fs)\n", r.epoch, r.train_loss, r.val_loss,
                r.val_accuracy, seconds_since(t0));
    std::fflush(stdout);
  };
  const auto pretrained = pretrain_cnn(train, &val, arch, tc, nullptr, log);
  const auto net = train_rectnet(train, &val, &pretrained, arch, tc, nullptr, log);

  DetectorConfig dc;
  dc.inference.threads = tc.threads;
  std::vector<Detection> dets;
  for (int i = kTrain; i < kTrain + kTest; ++i) {
    const auto map = infer_map(*net, suite.phantoms[static_cast<std::size_t>(i)].volume,
                               suite.masks[static_cast<std::size_t>(i)], dc.inference, "t" + std::to_string(i));
    dets.push_back(detect_from_map(threshold_map(map, dc.cutoff), map.entries.size(), dc.bandwidth));
  }
  std::vector<ScoredVolume> scored;
  for (int i = 0; i < kTest; ++i) scored.push_back({&dets[static_cast<std::size_t>(i)], &suite.phantoms[static_cast<std::size_t>(kTrain + i)].nodules});
  const auto curve = froc(scored, sweep_values(0.5, 0.95, 0.05));
  bool monotone = true;
  for (std::size_t i = 1; i < curve.size(); ++i) monotone = monotone && curve[i].sensitivity >= curve[i - 1].sensitivity;
  for (const auto& p : curve) {
    std::printf("    accept_p %.2f: %.2f FPs/scan, sensitivity %.3f (%zu/%zu)\n", p.accept_p, p.fps_per_scan,
                p.sensitivity, p.hits, p.nodules);
  }
  const double sens = sensitivity_at(curve, 8.0);
  const double elapsed = seconds_since(t0);
  const bool ok = sens >= 0.9 && monotone && elapsed < 3600.0;
  return {ok, "sensitivity " + fmt("%.3f", sens) + " at <= 8 FPs/scan, " + (monotone ? "monotone" : "NOT monotone") +
                  " in accept_p, " + fmt("%.0fs", elapsed)};
}

// ------------------------------------------------------------------ 7

Outcome two_phase() {
  const auto t0 = Clock::now();
  const auto suite = make_suite(3000, 8);
  const auto arch = preset_config(ArchKind::rectnet, Preset::desk);
  const auto split = make_split(suite, 8, 4, arch);
  ManifestSource train(split.manifest, split.train), val(split.manifest, split.validation);
  std::vector<double> tuned, frozen;
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    TrainConfig tc;
    tc.epochs = 2;
    tc.seed = seed;
    tc.max_batches_per_epoch = 120;
    tc.threads = resolve_threads(0);
    const auto pre = pretrain_cnn(train, &val, arch, tc);
    const auto a = train_rectnet(train, &val, &pre, arch, tc);
    auto fz = tc;
    fz.freeze_cnn = true;
    const auto b = train_rectnet(train, &val, &pre, arch, fz);
    tuned.push_back(evaluate(*a, val, tc.threads).loss);
    frozen.push_back(evaluate(*b, val, tc.threads).loss);
    std::printf("    seed %llu: fine-tuned %.4f, frozen %.4f (%.0fs)\n", static_cast<unsigned long long>(seed),
                tuned.back(), frozen.back(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::sort(tuned.begin(), tuned.end());
  std::sort(frozen.begin(), frozen.end());
  const double mt = tuned[1], mf = frozen[1];
  return {mt <= mf, "median validation loss fine-tuned " + fmt("%.4f", mt) + " vs frozen " + fmt("%.4f", mf)};
}

// ------------------------------------------------------------------ 8

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

bool pipeline(const fs::path& dir, std::string& failure) {
  fs::remove_all(dir);
  const std::string d = dir.string();
  const std::vector<std::vector<std::string>> steps{
      {"--deterministic", "--seed", "21", "phantom", "--out", d + "/train", "--count", "3", "--size", "64", "64", "16"},
      {"--deterministic", "--seed", "91", "phantom", "--out", d + "/test", "--count", "1", "--size", "64", "64", "16",
       "--prefix", "test"},
      {"--deterministic", "--seed", "5", "build-dataset", "--volumes", d + "/train", "--out", d + "/manifest.jsonl",
       "--grid-mult", "12"},
      {"--deterministic", "--seed", "5", "train", "--manifest", d + "/manifest.jsonl", "--volumes", d + "/train", "--out",
       d + "/model.ckpt", "--epochs", "1", "--pretrain-epochs", "1", "--max-batches", "6", "--batch", "16", "--log",
       d + "/train.csv"},
      {"--deterministic", "detect", "--model", d + "/model.ckpt", "--volume", d + "/test/test_000.json", "--out",
       d + "/dets/test_000.json", "--accept-p", "0.5"},
      {"--deterministic", "eval", "--candidates", d + "/dets", "--truth", d + "/test", "--out", d + "/eval"},
  };
  for (const auto& args : steps) {
    std::ostringstream out, err;
    if (cli::run(args, out, err) != cli::kExitOk) {
      failure = args[args.size() > 3 ? 3 : 0] + ": " + err.str();
      return false;
    }
  }
  return true;
}

Outcome determinism(const fs::path& work) {
  const auto t0 = Clock::now();
  std::string failure;
  if (!pipeline(work / "run_a", failure) || !pipeline(work / "run_b", failure)) return {false, "pipeline failed: " + failure};
  const std::vector<std::string> files{"manifest.jsonl", "model.ckpt", "train.csv", "dets/test_000.json",
                                       "eval/froc.csv", "eval/strata.csv"};
  std::string differing;
  for (const auto& f : files) {
    const auto a = slurp(work / "run_a" / f), b = slurp(work / "run_b" / f);
    if (a.empty() || a != b) differing += " " + f;
  }
  return {differing.empty(), differing.empty() ? std::to_string(files.size()) + " outputs byte-identical, " + fmt("%.0fs", seconds_since(t0))
                                               : "differing:" + differing};
}

// ------------------------------------------------------------------ 9

Outcome round_trips(const fs::path& work) {
  fs::create_directories(work);
  std::mt19937_64 rng(909);
  int failures[4] = {0, 0, 0, 0};
  for (int t = 0; t < 100; ++t) {
    const Dims d{1 + rng() % 24, 1 + rng() % 24, 1 + rng() % 6};
    const Spacing sp{0.3 + (rng() % 1000) / 500.0, 0.3 + (rng() % 1000) / 500.0, 0.5 + (rng() % 1000) / 250.0};
    std::vector<std::int16_t> hu(d.count());
    std::vector<std::uint8_t> bits(d.count());
    for (auto& v : hu) v = static_cast<std::int16_t>(kMinHu + static_cast<int>(rng() % (kMaxHu - kMinHu + 1)));
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng() & 1);
    const Volume vol(d, sp, hu);
    write_volume(vol, work / "rt.json");
    failures[0] += read_volume(work / "rt.json") == vol ? 0 : 1;
    const BinaryMask mask(d, sp, bits);
    write_mask(mask, work / "rt_mask.json");
    failures[1] += read_mask(work / "rt_mask.json") == mask ? 0 : 1;

    AnnotationFile af;
    af.dims = d;
    const int n = static_cast<int>(rng() % 4);
    for (int k = 0; k < n; ++k) {
      NoduleAnnotation a;
      a.id = k + 1;
      std::set<Voxel> vox;
      const auto want = 1 + rng() % 40;
      for (std::size_t i = 0; i < want; ++i) {
        vox.insert({static_cast<int>(rng() % d.nx), static_cast<int>(rng() % d.ny), static_cast<int>(rng() % d.nz)});
      }
      a.voxels.assign(vox.begin(), vox.end());
      for (std::size_t r = 0; r < rng() % 5; ++r) a.subtlety.push_back(1.0 + static_cast<double>(rng() % 400) / 100.0);
      for (std::size_t r = 0; r < rng() % 5; ++r) a.malignancy.push_back(1.0 + static_cast<double>(rng() % 400) / 100.0);
      a.agreement = 1 + static_cast<int>(rng() % 4);
      af.nodules.push_back(std::move(a));
    }
    write_annotations(af, work / "rt.nodules.json");
    failures[2] += read_annotations(work / "rt.nodules.json") == af ? 0 : 1;

    ArchitectureConfig c;
    c.kind = static_cast<ArchKind>(rng() % 3);
    c.k = 1 + static_cast<int>(rng() % 3);
    c.patch_size = 8 + static_cast<int>(rng() % 8);
    c.features = c.kind == ArchKind::cnn ? "I(" + std::to_string(2 * c.k + 1) + "), C(3,4), P, FC(5)" : "I(1), C(3,2), P, FC(4)";
    c.lstm_layers = c.kind == ArchKind::rectnet ? 1 + static_cast<int>(rng() % 2) : 0;
    c.hidden = c.kind == ArchKind::rectnet ? 2 + static_cast<int>(rng() % 4) : 0;
    if (c.kind == ArchKind::rectnet && rng() % 2) c.mlp = {3 + static_cast<int>(rng() % 4)};
    auto net = make_network<float>(c, rng());
    std::uniform_real_distribution<float> u(-1e3f, 1e3f);
    for (auto* p : net->parameters())
      for (auto& v : p->value) v = u(rng);
    const auto ck = to_checkpoint(*net);
    write_checkpoint(ck, work / "rt.ckpt");
    failures[3] += read_checkpoint(work / "rt.ckpt") == ck ? 0 : 1;
  }
  const bool ok = failures[0] + failures[1] + failures[2] + failures[3] == 0;
  return {ok, "failures: volume " + std::to_string(failures[0]) + ", mask " + std::to_string(failures[1]) +
                  ", annotation " + std::to_string(failures[2]) + ", checkpoint " + std::to_string(failures[3]) +
                  " of 100 each"};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::temp_directory_path() / "rectnet_acceptance";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--workdir" && i + 1 < argc) {
      work = argv[++i];
    } else if (a == "--only" && i + 1 < argc) {
      only.insert(std::stoi(argv[++i]));
    } else {
      std::cerr << "usage: rectnet_acceptance [--workdir DIR] [--only N]...\n";
      return 1;
    }
  }
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradients},
      {"architecture fidelity", architecture},
      {"clustering oracle", clustering},
      {"mean-shift fixture", meanshift_fixture},
      {"segmentation", segmentation},
      {"desk-scale end-to-end", end_to_end},
      {"two-phase training", two_phase},
      {"determinism", [&] { return determinism(work / "determinism"); }},
      {"format round trips", [&] { return round_trips(work / "round_trips"); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
