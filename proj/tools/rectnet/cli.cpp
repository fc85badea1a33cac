#include "rectnet/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "rectnet/checkpoint.hpp"
#include "rectnet/detector.hpp"
#include "rectnet/evaluator.hpp"
#include "rectnet/lung_seg.hpp"
#include "rectnet/phantom.hpp"
#include "rectnet/training.hpp"
#include "rectnet/volume_io.hpp"

namespace rectnet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config;
  std::uint64_t seed = 0;
  int threads = 0;
  bool deterministic = false;

  [[nodiscard]] int worker_count() const { return deterministic ? 1 : resolve_threads(threads); }
};

struct PhantomArgs {
  std::string out;
  int count = 1;
  std::string prefix = "phantom";
  std::vector<std::size_t> size{96, 96, 32};
  std::vector<double> spacing{1.0, 1.0, 1.0};
  int min_nodules = 1;
  int max_nodules = 3;
  double min_radius = 3.0;
  double max_radius = 5.0;
  int vessels = 4;
  double noise_sd = 30.0;
};

struct SegmentArgs {
  std::string volume;
  std::string out;
  std::string truth;
  int threshold = -480;
  int dilate = 3;
};

struct DatasetArgs {
  std::string volumes;
  std::string out;
  int k = 3;
  int patch_size = 32;
  int large_patch = 51;
  double grid_mult = 25.0;
  double pos_rate = 0.5;
  std::string augment = "all";
  int threshold = -480;
  int dilate = 3;
};

struct TrainArgs {
  std::string manifest;
  std::string volumes;
  std::string out;
  std::string arch = "rectnet";
  std::string preset = "desk";
  int epochs = 2;
  int pretrain_epochs = 2;
  int batch = 64;
  double lr = 0.05;
  double momentum = 0.7;
  std::vector<double> halve_at{0.5, 0.75};
  int patience = 5;
  int max_batches = 0;
  bool freeze_cnn = false;
  double val_fraction = 0.2;
  std::string pretrained;
  bool cold_start = false;
  std::string save_pretrained;
  std::string log;
};

struct DetectArgs {
  std::string model;
  std::string volume;
  std::string out;
  double accept_p = 0.75;
  double bandwidth = 1.5;
  double grid_mult = 4.0;
  double cutoff = 0.5;
  int source_size = 0;
  std::string map_dir;
  int threshold = -480;
  int dilate = 3;
};

struct EvalArgs {
  std::string candidates;
  std::string truth;
  std::string out;
  double operating_p = 0.75;
  std::string sweep = "0.5:0.95:0.05";
  int agreement = 0;
};

struct DescribeArgs {
  std::string arch = "rectnet";
  std::string preset = "paper";
  bool as_json = false;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

fs::path volume_header(const fs::path& dir, const std::string& id) { return dir / (id + ".json"); }
fs::path nodule_file(const fs::path& dir, const std::string& id) { return dir / (id + ".nodules.json"); }

std::string volume_id_of(const fs::path& header) {
  auto name = header.filename().string();
  if (ends_with(name, ".json")) name.resize(name.size() - 5);
  return name;
}

std::vector<Augmentation> parse_augmentations(const std::string& text) {
  if (text == "all") return {kAllAugmentations.begin(), kAllAugmentations.end()};
  if (text == "none" || text.empty()) return {};
  std::vector<Augmentation> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_augmentation(item));
  return out;
}

std::vector<double> parse_sweep(const std::string& text) {
  double a = 0, b = 0, s = 0;
  char c1 = 0, c2 = 0;
  std::stringstream ss(text);
  if (!(ss >> a >> c1 >> b >> c2 >> s) || c1 != ':' || c2 != ':') {
    throw UsageError("sweep must look like start:stop:step, got '" + text + "'");
  }
  return sweep_values(a, b, s);
}

// ---------------------------------------------------------------- commands

int cmd_phantom(const PhantomArgs& a, const Globals& g, std::ostream& out) {
  if (a.size.size() != 3 || a.spacing.size() != 3) throw UsageError("--size and --spacing take three values");
  PhantomSuiteOptions opt;
  opt.dims = {a.size[0], a.size[1], a.size[2]};
  opt.spacing = {a.spacing[0], a.spacing[1], a.spacing[2]};
  opt.min_nodules = a.min_nodules;
  opt.max_nodules = a.max_nodules;
  opt.min_nodule_radius = a.min_radius;
  opt.max_nodule_radius = a.max_radius;
  opt.vessels = a.vessels;
  opt.noise_sd = a.noise_sd;
  fs::create_directories(a.out);
  for (int i = 0; i < a.count; ++i) {
    std::ostringstream id;
    id << a.prefix << '_' << std::setw(3) << std::setfill('0') << i;
    const auto ph = generate_phantom(random_phantom_spec(g.seed + static_cast<std::uint64_t>(i), opt));
    const fs::path dir(a.out);
    write_volume(ph.volume, volume_header(dir, id.str()));
    write_mask(ph.lung_truth, dir / (id.str() + ".lung.json"));
    write_annotations(AnnotationFile{ph.volume.dims(), ph.nodules}, nodule_file(dir, id.str()));
    out << id.str() << ": " << ph.nodules.size() << " nodules\n";
  }
  return kExitOk;
}

int cmd_segment(const SegmentArgs& a, std::ostream& out) {
  const auto vol = read_volume(a.volume);
  const auto mask = segment_lungs(vol, SegmentationConfig{a.threshold, a.dilate});
  ensure_parent(a.out);
  write_mask(mask, a.out);
  out << "lung voxels: " << count_set(mask) << "\n";
  if (!a.truth.empty()) {
    const auto truth = read_mask(a.truth);
    out << "IoU vs truth: " << std::fixed << std::setprecision(4) << intersection_over_union(mask, truth) << "\n";
  }
  return kExitOk;
}

struct LoadedScan {
  std::string id;
  Volume volume;
  BinaryMask mask;
  std::vector<NoduleAnnotation> nodules;
};

int cmd_build_dataset(const DatasetArgs& a, const Globals& g, std::ostream& out) {
  const fs::path dir(a.volumes);
  std::vector<LoadedScan> loaded;
  for (const auto& id : list_volumes(dir)) {
    LoadedScan s;
    s.id = id;
    s.volume = read_volume(volume_header(dir, id));
    s.mask = segment_lungs(s.volume, SegmentationConfig{a.threshold, a.dilate});
    if (fs::exists(nodule_file(dir, id))) {
      auto ann = read_annotations(nodule_file(dir, id));
      if (ann.dims != s.volume.dims()) throw FormatError("annotation dims differ from volume " + id);
      s.nodules = std::move(ann.nodules);
    }
    loaded.push_back(std::move(s));
  }
  if (loaded.empty()) throw InvalidArgument("no volumes found in " + dir.string());
  std::vector<LabelledScan> scans;
  for (const auto& s : loaded) scans.push_back({s.id, &s.volume, &s.mask, &s.nodules});
  DatasetConfig cfg;
  cfg.k = a.k;
  cfg.patch_size = a.patch_size;
  cfg.large_patch_size = a.large_patch;
  cfg.grid_multiplier = a.grid_mult;
  cfg.positive_rate = a.pos_rate;
  cfg.augmentations = parse_augmentations(a.augment);
  cfg.seed = g.seed;
  const auto manifest = build_dataset(scans, cfg);
  ensure_parent(a.out);
  write_manifest(manifest, a.out);
  out << "entries: " << manifest.entries.size() << " (" << manifest.positives() << " positive, "
      << manifest.negatives() << " negative)\n";
  return kExitOk;
}

ArchitectureConfig resolve_arch(const std::string& arch, const std::string& preset) {
  try {
    return preset_config(parse_arch(arch), parse_preset(preset));
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
}

int cmd_train(const TrainArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  const auto arch = resolve_arch(a.arch, a.preset);
  const auto manifest = read_manifest(a.manifest);
  if (manifest.k != arch.k || manifest.patch_size != arch.patch_size) {
    throw InvalidArgument("manifest stacks (k=" + std::to_string(manifest.k) + ", M=" +
                          std::to_string(manifest.patch_size) + ") do not fit the architecture (k=" +
                          std::to_string(arch.k) + ", M=" + std::to_string(arch.patch_size) + ")");
  }
  std::vector<std::string> ids;
  for (const auto& e : manifest.entries) {
    if (ids.empty() || ids.back() != e.volume_id) ids.push_back(e.volume_id);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::map<std::string, Volume> volumes;
  for (const auto& id : ids) volumes.emplace(id, read_volume(volume_header(a.volumes, id)));

  // Whole volumes go to validation so no scan contributes to both sides.
  std::size_t n_val = 0;
  if (a.val_fraction > 0.0 && ids.size() >= 2) {
    n_val = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(a.val_fraction * static_cast<double>(ids.size()))),
                                    1, ids.size() - 1);
  }
  std::map<std::string, const Volume*> train_vols, val_vols;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    (i + n_val >= ids.size() ? val_vols : train_vols)[ids[i]] = &volumes.at(ids[i]);
  }
  const ManifestSource train(manifest, train_vols);
  const ManifestSource val(manifest, val_vols);
  const ExampleSource* val_ptr = val.size() > 0 ? &val : nullptr;
  err << "training on " << train.size() << " stacks from " << train_vols.size() << " volumes, validating on "
      << val.size() << " from " << val_vols.size() << "\n";

  TrainConfig tc;
  tc.epochs = a.epochs;
  tc.batch_size = a.batch;
  tc.max_batches_per_epoch = a.max_batches;
  tc.learning_rate = a.lr;
  tc.momentum = a.momentum;
  tc.halve_at = a.halve_at;
  tc.patience = a.patience;
  tc.freeze_cnn = a.freeze_cnn;
  tc.seed = g.seed;
  tc.threads = g.worker_count();

  std::ofstream log;
  if (!a.log.empty()) {
    ensure_parent(a.log);
    log.open(a.log);
    if (!log) throw IoError("cannot write " + a.log);
    log << "phase,epoch,train_loss,val_loss,val_accuracy,lr\n";
  }
  std::string phase = "train";
  auto on_epoch = [&](const EpochRecord& r) {
    char line[200];
    std::snprintf(line, sizeof line, "[%s] epoch %d train_loss %.5f val_loss %.5f val_acc %.4f lr %.5f\n",
                  phase.c_str(), r.epoch, r.train_loss, r.val_loss, r.val_accuracy, r.learning_rate);
    err << line << std::flush;
    if (log) {
      std::snprintf(line, sizeof line, "%s,%d,%.6f,%.6f,%.6f,%.6g\n", phase.c_str(), r.epoch, r.train_loss, r.val_loss,
                    r.val_accuracy, r.learning_rate);
      log << line << std::flush;
    }
  };

  std::unique_ptr<Network<float>> net;
  TrainReport report;
  if (arch.kind == ArchKind::rectnet) {
    std::optional<Checkpoint> pre;
    if (!a.pretrained.empty()) {
      pre = read_checkpoint(a.pretrained);
    } else if (!a.cold_start && a.pretrain_epochs > 0) {
      auto pc = tc;
      pc.epochs = a.pretrain_epochs;
      pc.freeze_cnn = false;
      phase = "pretrain";
      pre = pretrain_cnn(train, val_ptr, arch, pc, nullptr, on_epoch);
      if (!a.save_pretrained.empty()) write_checkpoint(*pre, a.save_pretrained);
    }
    phase = a.freeze_cnn ? "frozen" : "finetune";
    net = train_rectnet(train, val_ptr, pre ? &*pre : nullptr, arch, tc, &report, on_epoch);
  } else {
    net = make_network<float>(arch, g.seed);
    report = train_network(*net, train, val_ptr, tc, on_epoch);
  }
  ensure_parent(a.out);
  write_checkpoint(to_checkpoint(*net), a.out);
  out << "best epoch " << report.best_epoch << " val_loss " << std::setprecision(6) << report.best_val_loss << "\n";
  return kExitOk;
}

int cmd_detect(const DetectArgs& a, const Globals& g, std::ostream& out) {
  if (!(a.accept_p >= 0.0 && a.accept_p <= 1.0)) throw UsageError("--accept-p must lie in [0, 1]");
  const auto ckpt = read_checkpoint(a.model);
  const auto net = network_from_checkpoint<float>(ckpt);
  const auto volume = read_volume(a.volume);
  DetectorConfig cfg;
  cfg.segmentation = {a.threshold, a.dilate};
  cfg.inference.grid_multiplier = a.grid_mult;
  cfg.inference.source_size = a.source_size;
  cfg.inference.threads = g.worker_count();
  cfg.cutoff = a.cutoff;
  cfg.bandwidth = a.bandwidth;
  cfg.accept_p = a.accept_p;
  const auto id = volume_id_of(a.volume);
  const auto mask = segment_lungs(volume, cfg.segmentation);
  const auto map = infer_map(*net, volume, mask, cfg.inference, id);
  if (!a.map_dir.empty()) write_probability_images(map, a.map_dir);
  const auto det = detect_from_map(threshold_map(map, cfg.cutoff), map.entries.size(), cfg.bandwidth);
  ensure_parent(a.out);
  write_detection(det, cfg.accept_p, a.out);
  const auto cands = det.candidates(cfg.accept_p);
  out << id << ": " << map.entries.size() << " sampled, " << det.retained << " retained, " << det.clusters.size()
      << " clusters, " << cands.size() << " candidates\n";
  return kExitOk;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  std::vector<Detection> dets;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(a.candidates)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) dets.push_back(read_detection(f));
  if (dets.empty()) throw InvalidArgument("no detection files in " + a.candidates);

  std::vector<std::vector<NoduleAnnotation>> truth;
  for (const auto& d : dets) {
    const auto path = nodule_file(a.truth, d.volume_id);
    if (!fs::exists(path)) throw IoError("no ground truth for volume " + d.volume_id);
    auto ann = read_annotations(path);
    if (ann.dims != d.dims) throw InvalidArgument("volume id mismatch: truth dims differ for " + d.volume_id);
    truth.push_back(std::move(ann.nodules));
  }
  std::vector<ScoredVolume> scored;
  for (std::size_t i = 0; i < dets.size(); ++i) scored.push_back({&dets[i], &truth[i]});

  const EvalOptions opt{a.agreement};
  auto grid = parse_sweep(a.sweep);
  const auto curve = froc(scored, grid, opt);
  fs::create_directories(a.out);
  write_froc_csv(curve, fs::path(a.out) / "froc.csv");
  std::vector<StratumRow> rows;
  for (const auto s : {Stratum::subtlety, Stratum::malignancy, Stratum::agreement}) {
    for (auto& r : stratified_sensitivity(scored, a.operating_p, s, opt)) rows.push_back(std::move(r));
  }
  write_strata_csv(rows, fs::path(a.out) / "strata.csv");
  const auto op = operating_point(scored, a.operating_p, opt);
  out << std::fixed << std::setprecision(4) << "accept_p " << a.operating_p << ": sensitivity " << op.sensitivity
      << " (" << op.hits << "/" << op.nodules << "), " << op.fps_per_scan << " FPs/scan over " << dets.size()
      << " volumes\n";
  return kExitOk;
}

int cmd_describe(const DescribeArgs& a, std::ostream& out) {
  const auto cfg = resolve_arch(a.arch, a.preset);
  validate(cfg);
  const auto rows = describe(cfg);
  const auto total = parameter_count(cfg);
  if (a.as_json) {
    json doc;
    doc["architecture"] = json::parse(to_json(cfg));
    json layers = json::array();
    for (const auto& r : rows) {
      layers.push_back({{"name", r.name}, {"type", r.type}, {"output", r.output}, {"parameters", r.parameters}});
    }
    doc["layers"] = layers;
    doc["parameters"] = total;
    out << doc.dump(2) << "\n";
    return kExitOk;
  }
  out << arch_name(cfg.kind) << " (" << preset_name(parse_preset(a.preset)) << ")\n";
  out << std::left << std::setw(16) << "layer" << std::setw(10) << "type" << std::setw(20) << "output"
      << "parameters\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(16) << r.name << std::setw(10) << r.type << std::setw(20) << r.output
        << r.parameters << "\n";
  }
  out << "total parameters: " << total << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- config file

/// Turns the config document into argument tokens: globals go first, the
/// subcommand block right after the subcommand name, so explicit flags win.
std::vector<std::string> merge_config(const std::vector<std::string>& args, const std::string& config_path,
                                      const CLI::App& app) {
  const auto doc = [&] {
    try {
      return json::parse(read_text(config_path));
    } catch (const json::exception& e) {
      throw UsageError("config " + config_path + " is not valid JSON: " + e.what());
    }
  }();
  if (!doc.is_object()) throw UsageError("config must be a JSON object");

  const auto subcommands = app.get_subcommands({});
  auto it = std::find_if(args.begin(), args.end(), [&](const std::string& a) {
    return std::any_of(subcommands.begin(), subcommands.end(), [&](const CLI::App* s) { return s->get_name() == a; });
  });
  const std::string sub = it == args.end() ? std::string() : *it;
  const CLI::App* sub_app = sub.empty() ? nullptr : app.get_subcommand(sub);

  auto tokens_for = [](const std::string& key, const json& value) {
    std::vector<std::string> t;
    if (value.is_boolean()) {
      t.push_back("--" + key + "=" + (value.get<bool>() ? "true" : "false"));
    } else if (value.is_array()) {
      t.push_back("--" + key);
      for (const auto& v : value) t.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    } else if (value.is_string()) {
      t.push_back("--" + key);
      t.push_back(value.get<std::string>());
    } else if (value.is_number()) {
      t.push_back("--" + key);
      t.push_back(value.dump());
    } else {
      throw UsageError("config value for '" + key + "' must be a string, number, boolean or array");
    }
    return t;
  };

  std::vector<std::string> global_tokens, sub_tokens;
  for (const auto& [key, value] : doc.items()) {
    if (key == "seed" || key == "threads" || key == "deterministic") {
      for (auto& t : tokens_for(key, value)) global_tokens.push_back(std::move(t));
    } else if (key == "preset") {
      if (sub_app && sub_app->get_option_no_throw("--preset")) {
        for (auto& t : tokens_for(key, value)) sub_tokens.push_back(std::move(t));
      }
    } else if (const CLI::App* block = app.get_subcommand_no_throw(key)) {
      if (!value.is_object()) throw UsageError("config block '" + key + "' must be an object");
      for (const auto& [opt, v] : value.items()) {
        if (!block->get_option_no_throw("--" + opt)) {
          throw UsageError("unknown config key '" + key + "." + opt + "'");
        }
        if (key != sub) continue;
        for (auto& t : tokens_for(opt, v)) sub_tokens.push_back(std::move(t));
      }
    } else {
      throw UsageError("unknown config key '" + key + "'");
    }
  }
  std::vector<std::string> merged = global_tokens;
  for (auto a = args.begin(); a != args.end(); ++a) {
    merged.push_back(*a);
    if (a == it) merged.insert(merged.end(), sub_tokens.begin(), sub_tokens.end());
  }
  return merged;
}

void log_resolved(const CLI::App& app, const CLI::App& sub, std::ostream& err) {
  json doc;
  for (const CLI::App* a : {&app, &sub}) {
    for (const CLI::Option* opt : a->get_options()) {
      const auto& name = opt->get_lnames();
      if (name.empty() || name.front() == "help") continue;
      const auto results = opt->results();
      if (opt->get_expected_max() > 1 && !results.empty()) {
        doc[name.front()] = results;
      } else {
        doc[name.front()] = results.empty() ? opt->get_default_str() : results.back();
      }
    }
  }
  err << "resolved config (" << sub.get_name() << "): " << doc.dump() << "\n";
}

}  // namespace

std::vector<std::string> list_volumes(const fs::path& directory) {
  if (!fs::is_directory(directory)) throw IoError("not a directory: " + directory.string());
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(directory)) {
    if (!entry.is_regular_file()) continue;
    const auto name = entry.path().filename().string();
    if (!ends_with(name, ".json")) continue;
    const auto stem = name.substr(0, name.size() - 5);
    if (stem.find('.') != std::string::npos) continue;  // sidecars: .nodules, .lung, .mask
    if (!fs::exists(directory / (stem + ".raw"))) continue;
    const auto header = json::parse(read_text(entry.path()), nullptr, false);
    if (header.is_discarded() || header.value("dtype", "") != "i16") continue;
    ids.push_back(stem);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pulmonary nodule detection with recurrent convolutional networks", "rectnet"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "JSON configuration file; flags override it");
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0: RECTNET_THREADS or all cores)")->capture_default_str();
  app.add_flag("--deterministic", g.deterministic, "Force single-threaded execution");

  PhantomArgs pa;
  auto* phantom = app.add_subcommand("phantom", "Generate synthetic CT phantoms with ground truth");
  phantom->add_option("--out", pa.out, "Output directory")->required();
  phantom->add_option("--count", pa.count, "Number of phantoms")->capture_default_str()->check(CLI::PositiveNumber);
  phantom->add_option("--prefix", pa.prefix, "Volume id prefix")->capture_default_str();
  phantom->add_option("--size", pa.size, "Volume size nx ny nz")->expected(3)->capture_default_str();
  phantom->add_option("--spacing", pa.spacing, "Voxel spacing in mm")->expected(3)->capture_default_str();
  phantom->add_option("--min-nodules", pa.min_nodules)->capture_default_str();
  phantom->add_option("--max-nodules", pa.max_nodules)->capture_default_str();
  phantom->add_option("--min-radius", pa.min_radius, "Minimum nodule radius in mm")->capture_default_str();
  phantom->add_option("--max-radius", pa.max_radius, "Maximum nodule radius in mm")->capture_default_str();
  phantom->add_option("--vessels", pa.vessels)->capture_default_str();
  phantom->add_option("--noise-sd", pa.noise_sd, "Noise standard deviation in HU")->capture_default_str();

  SegmentArgs sa;
  auto* segment = app.add_subcommand("segment", "Segment the lungs of one volume");
  segment->add_option("--volume", sa.volume, "Volume header")->required();
  segment->add_option("--out", sa.out, "Output mask header")->required();
  segment->add_option("--truth", sa.truth, "Reference mask for an IoU report");
  segment->add_option("--threshold-hu", sa.threshold, "Lung threshold in HU")->capture_default_str();
  segment->add_option("--dilate-radius", sa.dilate, "Dilation radius in pixels")->capture_default_str();

  DatasetArgs da;
  auto* dataset = app.add_subcommand("build-dataset", "Sample labelled patch stacks into a manifest");
  dataset->add_option("--volumes", da.volumes, "Directory of volumes and .nodules.json files")->required();
  dataset->add_option("--out", da.out, "Manifest path")->required();
  dataset->add_option("--k", da.k, "Slices on each side of the centre")->capture_default_str();
  dataset->add_option("--patch-size", da.patch_size, "Patch side M")->capture_default_str();
  dataset->add_option("--large-patch", da.large_patch, "Second cut size rescaled to M (0: off)")->capture_default_str();
  dataset->add_option("--grid-mult", da.grid_mult, "Negative grid step in pixels")->capture_default_str();
  dataset->add_option("--pos-rate", da.pos_rate, "Fraction of nodule voxels sampled")->capture_default_str();
  dataset->add_option("--augment", da.augment, "all, none or a comma list")->capture_default_str();
  dataset->add_option("--threshold-hu", da.threshold)->capture_default_str();
  dataset->add_option("--dilate-radius", da.dilate)->capture_default_str();

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a classifier from a manifest");
  train->add_option("--manifest", ta.manifest)->required();
  train->add_option("--volumes", ta.volumes, "Directory holding the manifest's volumes")->required();
  train->add_option("--out", ta.out, "Checkpoint path")->required();
  train->add_option("--arch", ta.arch, "rectnet, cnn or patch_cnn")->capture_default_str();
  train->add_option("--preset", ta.preset, "desk or paper")->capture_default_str();
  train->add_option("--epochs", ta.epochs)->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--pretrain-epochs", ta.pretrain_epochs, "CNN pretraining epochs (rectnet)")->capture_default_str();
  train->add_option("--batch", ta.batch)->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--lr", ta.lr)->capture_default_str();
  train->add_option("--momentum", ta.momentum)->capture_default_str();
  train->add_option("--halve-at", ta.halve_at, "Run fractions where the rate halves")->capture_default_str();
  train->add_option("--patience", ta.patience, "Early stopping patience (0: off)")->capture_default_str();
  train->add_option("--max-batches", ta.max_batches, "Minibatches per epoch cap (0: full pass)")->capture_default_str();
  train->add_flag("--freeze-cnn", ta.freeze_cnn, "Keep pretrained CNN weights fixed");
  train->add_option("--val-fraction", ta.val_fraction, "Share of volumes held out")->capture_default_str();
  train->add_option("--pretrain", ta.pretrained, "Pretrained CNN checkpoint; skips the pretraining phase");
  train->add_flag("--cold-start", ta.cold_start, "Skip pretraining and start from random CNN weights");
  train->add_option("--save-pretrained", ta.save_pretrained, "Also write the pretrained CNN checkpoint");
  train->add_option("--log", ta.log, "Per-epoch CSV log");

  DetectArgs dt;
  auto* detect_cmd = app.add_subcommand("detect", "Detect nodule candidates in one volume");
  detect_cmd->add_option("--model", dt.model)->required();
  detect_cmd->add_option("--volume", dt.volume)->required();
  detect_cmd->add_option("--out", dt.out, "Detection JSON")->required();
  detect_cmd->add_option("--accept-p", dt.accept_p)->capture_default_str();
  detect_cmd->add_option("--bandwidth", dt.bandwidth, "Mean-shift bandwidth in grid steps")->capture_default_str();
  detect_cmd->add_option("--grid-mult", dt.grid_mult, "Sampling step in pixels")->capture_default_str();
  detect_cmd->add_option("--cutoff", dt.cutoff, "Probability map threshold")->capture_default_str();
  detect_cmd->add_option("--source-size", dt.source_size, "Cut size before rescaling (0: M)")->capture_default_str();
  detect_cmd->add_option("--map-dir", dt.map_dir, "Write per-slice probability images here");
  detect_cmd->add_option("--threshold-hu", dt.threshold)->capture_default_str();
  detect_cmd->add_option("--dilate-radius", dt.dilate)->capture_default_str();

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "FROC and stratified sensitivity");
  eval->add_option("--candidates", ea.candidates, "Directory of detection JSON files")->required();
  eval->add_option("--truth", ea.truth, "Directory of .nodules.json files")->required();
  eval->add_option("--out", ea.out, "Output directory for froc.csv and strata.csv")->required();
  eval->add_option("--operating-p", ea.operating_p)->capture_default_str();
  eval->add_option("--sweep", ea.sweep, "accept_p sweep start:stop:step")->capture_default_str();
  eval->add_option("--agreement", ea.agreement, "Minimum reader agreement to score")->capture_default_str();

  DescribeArgs de;
  auto* desc = app.add_subcommand("describe", "Layer table and parameter count");
  desc->add_option("--arch", de.arch)->capture_default_str();
  desc->add_option("--preset", de.preset)->capture_default_str();
  desc->add_flag("--json", de.as_json);

  auto* self = app.add_subcommand("selftest", "Gradient checks and oracle comparisons");

  try {
    auto merged = args;
    for (std::size_t i = 0; i + 1 < args.size(); ++i) {
      if (args[i] == "--config") merged = merge_config(args, args[i + 1], app);
      if (args[i].rfind("--config=", 0) == 0) merged = merge_config(args, args[i].substr(9), app);
    }
    if (!args.empty() && args.back().rfind("--config=", 0) == 0) merged = merge_config(args, args.back().substr(9), app);
    std::reverse(merged.begin(), merged.end());
    app.parse(merged);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  const CLI::App* chosen = app.get_subcommands().front();
  log_resolved(app, *chosen, err);
  try {
    if (chosen == phantom) return cmd_phantom(pa, g, out);
    if (chosen == segment) return cmd_segment(sa, out);
    if (chosen == dataset) return cmd_build_dataset(da, g, out);
    if (chosen == train) return cmd_train(ta, g, out, err);
    if (chosen == detect_cmd) return cmd_detect(dt, g, out);
    if (chosen == eval) return cmd_eval(ea, out);
    if (chosen == desc) return cmd_describe(de, out);
    if (chosen == self) return selftest(out) ? kExitOk : kExitRuntime;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace rectnet::cli
