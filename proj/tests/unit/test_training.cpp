#include "doctest.h"
#include "rectnet/checkpoint.hpp"
#include "rectnet/training.hpp"
#include "tiny.hpp"

using namespace rectnet;

namespace {

TrainConfig quick(int epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 16;
  c.learning_rate = 0.05;
  c.seed = 3;
  c.patience = 0;
  return c;
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("pretraining separates blobs from noise") {
    InMemorySource train(tiny::blob_stacks(256, 1));
    InMemorySource val(tiny::blob_stacks(64, 2));
    TrainReport report;
    const auto ckpt = pretrain_cnn(train, &val, tiny::rectnet_config(), quick(8), &report);
    for (const auto& t : ckpt.tensors) CHECK(t.name.rfind("cnn.", 0) == 0);
    CHECK(report.epochs.size() == 8);
    CHECK(report.epochs.back().val_accuracy > 0.85);
    CHECK(report.epochs.back().train_loss < report.epochs.front().train_loss);
  }

  TEST_CASE("two-phase training is deterministic") {
    InMemorySource train(tiny::blob_stacks(256, 3));
    InMemorySource val(tiny::blob_stacks(64, 4));
    auto cfg = quick(4);
    cfg.learning_rate = 0.1;
    const auto pre = pretrain_cnn(train, &val, tiny::rectnet_config(), cfg);
    cfg.epochs = 6;
    TrainReport r1, r2;
    auto a = train_rectnet(train, &val, &pre, tiny::rectnet_config(), cfg, &r1);
    auto b = train_rectnet(train, &val, &pre, tiny::rectnet_config(), cfg, &r2);
    CHECK(serialize_checkpoint(to_checkpoint(*a)) == serialize_checkpoint(to_checkpoint(*b)));
    CHECK(evaluate(*a, val).accuracy > 0.85);
  }

  TEST_CASE("thread count does not change the summed gradient much") {
    InMemorySource train(tiny::blob_stacks(64, 5));
    auto c1 = quick(1);
    auto c2 = quick(1);
    c2.threads = 2;
    auto a = make_network<float>(tiny::rectnet_config(), 1);
    auto b = make_network<float>(tiny::rectnet_config(), 1);
    (void)train_network(*a, train, nullptr, c1);
    (void)train_network(*b, train, nullptr, c2);
    const auto pa = a->parameters(), pb = b->parameters();
    for (std::size_t i = 0; i < pa.size(); ++i)
      for (std::size_t j = 0; j < pa[i]->size(); ++j) CHECK(pa[i]->value[j] == doctest::Approx(pb[i]->value[j]).epsilon(1e-3));
  }

  TEST_CASE("frozen CNN keeps its pretrained weights") {
    InMemorySource train(tiny::blob_stacks(64, 6));
    const auto pre = pretrain_cnn(train, nullptr, tiny::rectnet_config(), quick(1));
    auto cfg = quick(2);
    cfg.freeze_cnn = true;
    auto net = train_rectnet(train, nullptr, &pre, tiny::rectnet_config(), cfg);
    const auto after = to_checkpoint(*net);
    for (const auto& t : pre.tensors) {
      const auto it = std::find_if(after.tensors.begin(), after.tensors.end(), [&](const NamedTensor& x) { return x.name == t.name; });
      REQUIRE(it != after.tensors.end());
      CHECK(it->values == t.values);
    }
    CHECK_THROWS_AS((void)train_rectnet(train, nullptr, nullptr, tiny::rectnet_config(), cfg), InvalidArgument);
  }

  TEST_CASE("early stopping and best-epoch restore") {
    InMemorySource train(tiny::blob_stacks(64, 7));
    InMemorySource val(tiny::blob_stacks(32, 8));
    auto cfg = quick(30);
    cfg.patience = 2;
    cfg.learning_rate = 0.5;
    auto net = make_network<float>(pretraining_config(tiny::rectnet_config()), 2);
    const auto report = train_network(*net, train, &val, cfg);
    REQUIRE(report.best_epoch >= 1);
    CHECK(report.best_val_loss == doctest::Approx(evaluate(*net, val).loss).epsilon(1e-5));
    if (static_cast<int>(report.epochs.size()) < 30) {
      CHECK(static_cast<int>(report.epochs.size()) == report.best_epoch + cfg.patience);
    }
  }

  TEST_CASE("divergence is reported") {
    InMemorySource train(tiny::blob_stacks(32, 9));
    auto cfg = quick(3);
    cfg.learning_rate = 1e30;
    auto net = make_network<float>(pretraining_config(tiny::rectnet_config()), 2);
    CHECK_THROWS_AS((void)train_network(*net, train, nullptr, cfg), DivergenceError);
  }

  TEST_CASE("capped epochs run the requested batch count") {
    InMemorySource train(tiny::blob_stacks(64, 10));
    auto cfg = quick(1);
    cfg.max_batches_per_epoch = 1;
    auto net = make_network<float>(pretraining_config(tiny::rectnet_config()), 2);
    const auto before = to_checkpoint(*net);
    (void)train_network(*net, train, nullptr, cfg);
    CHECK_FALSE(to_checkpoint(*net) == before);
  }

  TEST_CASE("thread resolution") {
    CHECK(resolve_threads(1) == 1);
    CHECK(resolve_threads(0) >= 1);
  }
}
