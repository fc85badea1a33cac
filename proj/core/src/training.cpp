#include "rectnet/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#include "rectnet/loss.hpp"
#include "rectnet/optimizer.hpp"

namespace rectnet {

ManifestSource::ManifestSource(const DatasetManifest& manifest, std::map<std::string, const Volume*> volumes)
    : k_(manifest.k), patch_size_(manifest.patch_size), volumes_(std::move(volumes)) {
  for (const auto& e : manifest.entries) {
    if (volumes_.count(e.volume_id)) entries_.push_back(e);
  }
}

PatchStack ManifestSource::stack(std::size_t i) const {
  const auto& e = entries_.at(i);
  return materialize(e, *volumes_.at(e.volume_id), k_, patch_size_);
}

int resolve_threads(int requested) {
  int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("RECTNET_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  if (requested > 0) n = std::min(n, requested);
  return std::max(1, n);
}

namespace {

struct Chunk {
  std::size_t begin = 0;
  std::size_t end = 0;
};

std::vector<Chunk> split(std::size_t n, int parts) {
  std::vector<Chunk> out;
  const auto p = static_cast<std::size_t>(std::max(1, parts));
  for (std::size_t i = 0; i < p; ++i) out.push_back({n * i / p, n * (i + 1) / p});
  return out;
}

/// Runs `fn(worker, chunk)` over the chunks, one thread per chunk after the first.
template <typename Fn>
void run_chunks(const std::vector<Chunk>& chunks, Fn&& fn) {
  if (chunks.size() == 1) {
    fn(std::size_t{0}, chunks[0]);
    return;
  }
  std::vector<std::jthread> threads;
  for (std::size_t w = 1; w < chunks.size(); ++w) threads.emplace_back([&, w] { fn(w, chunks[w]); });
  fn(std::size_t{0}, chunks[0]);
}

std::vector<std::vector<float>> snapshot(Network<float>& net) {
  std::vector<std::vector<float>> out;
  for (auto* p : net.parameters()) out.push_back(p->value);
  return out;
}

void restore(Network<float>& net, const std::vector<std::vector<float>>& values) {
  auto params = net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

}  // namespace

EvalResult evaluate(Network<float>& network, const ExampleSource& data, int threads) {
  EvalResult r;
  r.count = data.size();
  if (data.size() == 0) return r;
  const auto chunks = split(data.size(), std::min<int>(threads, static_cast<int>(data.size())));
  std::vector<std::unique_ptr<Network<float>>> clones(chunks.size());
  for (std::size_t w = 1; w < chunks.size(); ++w) clones[w] = network.clone();
  std::vector<double> loss(chunks.size());
  std::vector<std::size_t> correct(chunks.size());
  run_chunks(chunks, [&](std::size_t w, Chunk c) {
    Network<float>& net = w == 0 ? network : *clones[w];
    for (std::size_t i = c.begin; i < c.end; ++i) {
      const auto s = data.stack(i);
      const auto p = net.forward(as_input(s));
      const int y = s.label;
      loss[w] -= std::log(std::max(static_cast<double>(p[static_cast<std::size_t>(y)]), kProbabilityFloor));
      correct[w] += ((p[1] >= 0.5f ? 1 : 0) == y) ? 1 : 0;
    }
  });
  double total = 0.0;
  std::size_t hits = 0;
  for (std::size_t w = 0; w < chunks.size(); ++w) {
    total += loss[w];
    hits += correct[w];
  }
  r.loss = total / static_cast<double>(data.size());
  r.accuracy = static_cast<double>(hits) / static_cast<double>(data.size());
  return r;
}

TrainReport train_network(Network<float>& network, const ExampleSource& train, const ExampleSource* validation,
                          const TrainConfig& config, const EpochCallback& on_epoch) {
  if (train.size() == 0) throw InvalidArgument("training set is empty");
  if (config.batch_size <= 0 || config.epochs <= 0) throw InvalidArgument("batch size and epochs must be positive");

  if (auto* r = dynamic_cast<RectNet<float>*>(&network)) r->set_freeze_cnn(config.freeze_cnn);
  std::vector<Parameter<float>*> trainable;
  for (auto* p : network.parameters()) {
    if (config.freeze_cnn && p->name.rfind("cnn.", 0) == 0) continue;
    trainable.push_back(p);
  }

  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < train.size(); ++i) (train.label(i) ? pos : neg).push_back(i);

  SgdMomentum<float> opt(config.learning_rate, config.momentum, milestones_from_fractions(config.epochs, config.halve_at));
  std::mt19937_64 rng(config.seed);
  const auto batch = static_cast<std::size_t>(config.batch_size);
  std::size_t batches = (train.size() + batch - 1) / batch;
  if (config.max_batches_per_epoch > 0) batches = std::min(batches, static_cast<std::size_t>(config.max_batches_per_epoch));
  const int threads = std::max(1, std::min(config.threads, config.batch_size));

  std::vector<std::unique_ptr<Network<float>>> workers(static_cast<std::size_t>(threads));
  for (std::size_t w = 1; w < workers.size(); ++w) workers[w] = network.clone();

  std::size_t pos_cursor = 0, neg_cursor = 0;
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);
  auto draw = [&](std::vector<std::size_t>& pool, std::size_t& cursor) {
    if (cursor == pool.size()) {
      std::shuffle(pool.begin(), pool.end(), rng);
      cursor = 0;
    }
    return pool[cursor++];
  };

  TrainReport report;
  std::vector<std::vector<float>> best;
  int since_best = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    opt.on_epoch(epoch);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t b = 0; b < batches; ++b) {
      std::vector<std::size_t> ids;
      ids.reserve(batch);
      for (std::size_t i = 0; i < batch; ++i) {
        const bool want_pos = pos.empty() ? false : neg.empty() ? true : (i % 2 == 0);
        ids.push_back(want_pos ? draw(pos, pos_cursor) : draw(neg, neg_cursor));
      }
      const auto chunks = split(ids.size(), threads);
      std::vector<double> loss(chunks.size());
      run_chunks(chunks, [&](std::size_t w, Chunk c) {
        Network<float>& net = w == 0 ? network : *workers[w];
        net.zero_grad();
        for (std::size_t i = c.begin; i < c.end; ++i) {
          const auto s = train.stack(ids[i]);
          const auto p = net.forward(as_input(s));
          const int y = s.label;
          loss[w] -= std::log(std::max(static_cast<double>(p[static_cast<std::size_t>(y)]), kProbabilityFloor));
          const auto g = nll_softmax_grad<float>(std::span<const float>(p), y, ids.size());
          net.backward(g);
        }
      });
      double batch_loss = 0.0;
      for (const double l : loss) batch_loss += l;
      if (!std::isfinite(batch_loss)) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ", batch " + std::to_string(b));
      }
      if (threads > 1) {
        auto master = network.parameters();
        for (std::size_t w = 1; w < workers.size(); ++w) {
          auto wp = workers[w]->parameters();
          for (std::size_t k = 0; k < master.size(); ++k) {
            for (std::size_t i = 0; i < master[k]->size(); ++i) master[k]->grad[i] += wp[k]->grad[i];
          }
        }
      }
      opt.step(trainable);
      for (auto* p : trainable) {
        for (const float v : p->value) {
          if (!std::isfinite(v)) throw DivergenceError("non-finite parameter in " + p->name);
        }
      }
      if (threads > 1) {
        for (std::size_t w = 1; w < workers.size(); ++w) (void)copy_parameters(network, *workers[w]);
      }
      epoch_loss += batch_loss;
      seen += ids.size();
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.train_loss = epoch_loss / static_cast<double>(seen);
    rec.learning_rate = opt.learning_rate();
    if (validation && validation->size() > 0) {
      const auto ev = evaluate(network, *validation, threads);
      rec.val_loss = ev.loss;
      rec.val_accuracy = ev.accuracy;
    } else {
      rec.val_loss = rec.train_loss;
    }
    report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (report.best_epoch < 0 || rec.val_loss < report.best_val_loss) {
      report.best_epoch = rec.epoch;
      report.best_val_loss = rec.val_loss;
      if (config.restore_best) best = snapshot(network);
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      break;
    }
  }
  if (config.restore_best && !best.empty()) restore(network, best);
  return report;
}

Checkpoint pretrain_cnn(const ExampleSource& train, const ExampleSource* validation, const ArchitectureConfig& rectnet,
                        const TrainConfig& config, TrainReport* report, const EpochCallback& on_epoch) {
  if (train.size() == 0) throw InvalidArgument("pretraining set is empty");
  auto net = make_network<float>(pretraining_config(rectnet), config.seed);
  auto cfg = config;
  cfg.freeze_cnn = false;
  auto r = train_network(*net, train, validation, cfg, on_epoch);
  if (report) *report = std::move(r);
  auto ckpt = to_checkpoint(*net);
  std::erase_if(ckpt.tensors, [](const NamedTensor& t) { return t.name.rfind("cnn.", 0) != 0; });
  return ckpt;
}

std::unique_ptr<Network<float>> train_rectnet(const ExampleSource& train, const ExampleSource* validation,
                                              const Checkpoint* pretrained, const ArchitectureConfig& rectnet,
                                              const TrainConfig& config, TrainReport* report,
                                              const EpochCallback& on_epoch) {
  if (rectnet.kind != ArchKind::rectnet) throw InvalidArgument("train_rectnet needs a rectnet architecture");
  auto net = make_network<float>(rectnet, config.seed + 1);
  if (pretrained) {
    if (load_parameters(*net, *pretrained, "cnn.") == 0) throw FormatError("pretrained checkpoint has no CNN tensors");
  } else if (config.freeze_cnn) {
    throw InvalidArgument("freezing the CNN requires a pretrained checkpoint");
  }
  auto r = train_network(*net, train, validation, config, on_epoch);
  if (report) *report = std::move(r);
  return net;
}

}  // namespace rectnet
