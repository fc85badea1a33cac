#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include "rectnet/checkpoint.hpp"
#include "rectnet/cli.hpp"
#include "rectnet/detector.hpp"
#include "rectnet/layers.hpp"
#include "rectnet/loss.hpp"
#include "rectnet/lstm.hpp"

namespace rectnet::cli {

namespace {

constexpr double kEps = 1e-5;

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

/// Largest relative gap between `analytic` and central differences of `loss` w.r.t. `values`.
double max_rel_error(std::vector<double>& values, const std::vector<double>& analytic,
                     const std::function<double()>& loss) {
  double worst = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double keep = values[i];
    values[i] = keep + kEps;
    const double up = loss();
    values[i] = keep - kEps;
    const double down = loss();
    values[i] = keep;
    const double numeric = (up - down) / (2.0 * kEps);
    const double scale = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-6});
    worst = std::max(worst, std::abs(numeric - analytic[i]) / scale);
  }
  return worst;
}

double check_conv(std::mt19937_64& rng) {
  Conv2d<double> conv("c", 2, 3, 3);
  conv.init_he_uniform(rng);
  for (auto& b : conv.bias.value) b = 0.1;
  Tensor<double> x({2, 6, 6}, random_vector(72, rng));
  typename Conv2d<double>::Cache cache;
  const auto w = random_vector(shape_size(conv.forward(x, cache).shape), rng);
  auto loss = [&] {
    typename Conv2d<double>::Cache c;
    return dot(conv.forward(x, c).data, w);
  };
  conv.weight.zero_grad();
  conv.bias.zero_grad();
  (void)conv.forward(x, cache);
  const auto dx = conv.backward(Tensor<double>(cache.output.shape, w), cache, true);
  return std::max({max_rel_error(conv.weight.value, conv.weight.grad, loss),
                   max_rel_error(conv.bias.value, conv.bias.grad, loss), max_rel_error(x.data, dx.data, loss)});
}

double check_pool(std::mt19937_64& rng) {
  MaxPool2d<double> pool(2);
  Tensor<double> x({2, 5, 5}, random_vector(50, rng));
  typename MaxPool2d<double>::Cache cache;
  const auto y = pool.forward(x, cache);
  const auto w = random_vector(y.size(), rng);
  const auto dx = pool.backward(Tensor<double>(y.shape, w), cache);
  auto loss = [&] {
    typename MaxPool2d<double>::Cache c;
    return dot(pool.forward(x, c).data, w);
  };
  return max_rel_error(x.data, dx.data, loss);
}

double check_dense(std::mt19937_64& rng) {
  Dense<double> fc("d", 7, 4);
  fc.init_he_uniform(rng);
  for (auto& b : fc.bias.value) b = 0.05;
  Tensor<double> x({7}, random_vector(7, rng));
  const auto w = random_vector(4, rng);
  auto loss = [&] {
    typename Dense<double>::Cache c;
    return dot(fc.forward(x, c).data, w);
  };
  typename Dense<double>::Cache cache;
  fc.weight.zero_grad();
  fc.bias.zero_grad();
  (void)fc.forward(x, cache);
  const auto dx = fc.backward(Tensor<double>({4}, w), cache, true);
  return std::max({max_rel_error(fc.weight.value, fc.weight.grad, loss),
                   max_rel_error(fc.bias.value, fc.bias.grad, loss), max_rel_error(x.data, dx.data, loss)});
}

double check_softmax_nll(std::mt19937_64& rng) {
  auto z = random_vector(2, rng);
  double worst = 0.0;
  for (int label = 0; label < 2; ++label) {
    auto loss = [&] { return -std::log(softmax<double>(std::span<const double>(z))[static_cast<std::size_t>(label)]); };
    const auto p = softmax<double>(std::span<const double>(z));
    const auto g = nll_softmax_grad<double>(std::span<const double>(p), label, 1);
    worst = std::max(worst, max_rel_error(z, g, loss));
  }
  return worst;
}

double check_lstm(std::mt19937_64& rng, std::size_t steps) {
  Lstm<double> lstm("l", 5, 3);
  lstm.init_uniform(rng, 0.5);
  std::vector<std::vector<double>> xs;
  std::vector<std::vector<double>> ws;
  for (std::size_t t = 0; t < steps; ++t) {
    xs.push_back(random_vector(5, rng));
    ws.push_back(random_vector(3, rng));
  }
  auto loss = [&] {
    typename Lstm<double>::Cache c;
    const auto hs = lstm.forward(xs, c);
    double s = 0.0;
    for (std::size_t t = 0; t < steps; ++t) s += dot(hs[t], ws[t]);
    return s;
  };
  typename Lstm<double>::Cache cache;
  (void)lstm.forward(xs, cache);
  lstm.w_input.zero_grad();
  lstm.w_hidden.zero_grad();
  lstm.bias.zero_grad();
  const auto dxs = lstm.backward(ws, cache, true);
  double worst = std::max({max_rel_error(lstm.w_input.value, lstm.w_input.grad, loss),
                           max_rel_error(lstm.w_hidden.value, lstm.w_hidden.grad, loss),
                           max_rel_error(lstm.bias.value, lstm.bias.grad, loss)});
  for (std::size_t t = 0; t < steps; ++t) worst = std::max(worst, max_rel_error(xs[t], dxs[t], loss));
  return worst;
}

bool check_clusters(std::mt19937_64& rng) {
  for (int trial = 0; trial < 50; ++trial) {
    ProbabilityMap map;
    std::set<GridPoint> used;
    std::uniform_int_distribution<int> c(0, 9);
    const int n = 1 + trial * 4;
    while (static_cast<int>(used.size()) < n) used.insert({c(rng), c(rng), c(rng)});
    for (const auto& g : used) map.entries.push_back({g, Voxel{g.gx, g.gy, g.j}, 0.9});
    // Union-find over all pairs.
    std::vector<std::size_t> parent(map.entries.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> find = [&](std::size_t i) {
      return parent[i] == i ? i : parent[i] = find(parent[i]);
    };
    for (std::size_t i = 0; i < parent.size(); ++i) {
      for (std::size_t j = i + 1; j < parent.size(); ++j) {
        const auto& a = map.entries[i].grid;
        const auto& b = map.entries[j].grid;
        if (std::abs(a.gx - b.gx) <= 1 && std::abs(a.gy - b.gy) <= 1 && std::abs(a.j - b.j) <= 1) {
          parent[find(i)] = find(j);
        }
      }
    }
    std::set<std::vector<std::size_t>> expected;
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < parent.size(); ++i) groups[find(i)].push_back(i);
    for (auto& [root, g] : groups) expected.insert(g);
    const auto got = grow_clusters(map);
    if (std::set<std::vector<std::size_t>>(got.begin(), got.end()) != expected) return false;
  }
  return true;
}

bool check_checkpoint_roundtrip() {
  auto cfg = preset_config(ArchKind::rectnet, Preset::desk);
  const auto net = make_network<float>(cfg, 5);
  const auto ckpt = to_checkpoint(*net);
  return deserialize_checkpoint(serialize_checkpoint(ckpt)) == ckpt;
}

}  // namespace

bool selftest(std::ostream& out) {
  std::mt19937_64 rng(20240601);
  bool ok = true;
  auto grad = [&](const char* name, double err) {
    const bool pass = err < 1e-4;
    ok = ok && pass;
    out << (pass ? "PASS " : "FAIL ") << "gradient " << name << " max rel error " << err << "\n";
  };
  grad("conv", check_conv(rng));
  grad("maxpool", check_pool(rng));
  grad("dense", check_dense(rng));
  grad("softmax-nll", check_softmax_nll(rng));
  grad("lstm step", check_lstm(rng, 1));
  grad("lstm bptt(7)", check_lstm(rng, 7));
  auto flag = [&](const char* name, bool pass) {
    ok = ok && pass;
    out << (pass ? "PASS " : "FAIL ") << name << "\n";
  };
  flag("clustering matches union-find", check_clusters(rng));
  flag("checkpoint round trip", check_checkpoint_roundtrip());
  out << (ok ? "selftest passed\n" : "selftest FAILED\n");
  return ok;
}

}  // namespace rectnet::cli
