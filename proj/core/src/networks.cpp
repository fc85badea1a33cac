#include "rectnet/networks.hpp"

#include <algorithm>
#include <map>

#include "rectnet/loss.hpp"

namespace rectnet {

namespace {

template <typename T>
Tensor<T> patch_tensor(std::span<const float> values, std::size_t channels, std::size_t size) {
  Tensor<T> t({channels, size, size});
  std::transform(values.begin(), values.end(), t.data.begin(), [](float v) { return static_cast<T>(v); });
  return t;
}

void check_input(const StackInput& in, int depth, int size) {
  if (in.depth != depth || in.size != size) {
    throw ShapeError("network expects a " + std::to_string(depth) + "x" + std::to_string(size) + "x" +
                     std::to_string(size) + " stack, got " + std::to_string(in.depth) + "x" + std::to_string(in.size) +
                     "x" + std::to_string(in.size));
  }
  if (in.values.size() != static_cast<std::size_t>(depth) * static_cast<std::size_t>(size) * static_cast<std::size_t>(size)) {
    throw ShapeError("stack value count does not match its shape");
  }
}

template <typename T>
Probabilities<T> to_probabilities(const Tensor<T>& logits, std::array<T, 2>& store) {
  store = {logits.data[0], logits.data[1]};
  const auto p = softmax<T>(std::span<const T>(store));
  return {p[0], p[1]};
}

}  // namespace

StackInput as_input(const PatchStack& stack) { return {stack.depth(), stack.size, stack.values}; }

template <typename T>
std::vector<const Parameter<T>*> Network<T>::parameters() const {
  std::vector<const Parameter<T>*> out;
  for (auto* p : const_cast<Network*>(this)->parameters()) out.push_back(p);
  return out;
}

template <typename T>
void Network<T>::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

template <typename T>
Sequential<T> build_features(const std::string& notation, int patch_size, const std::string& prefix) {
  const auto layers = parse_layer_notation(notation);
  Sequential<T> seq;
  std::size_t maps = static_cast<std::size_t>(layers.front().a);
  std::size_t h = static_cast<std::size_t>(patch_size);
  std::size_t w = h;
  std::size_t flat = 0;
  int conv_i = 0, fc_i = 0;
  for (std::size_t i = 1; i < layers.size(); ++i) {
    const auto& l = layers[i];
    switch (l.kind) {
      case LayerSpec::Kind::conv: {
        const auto k = static_cast<std::size_t>(l.a);
        if (h < k || w < k) throw InvalidArgument("convolution does not fit its input in '" + notation + "'");
        seq.add(Conv2d<T>(prefix + ".conv" + std::to_string(++conv_i), static_cast<int>(maps), l.b, l.a));
        maps = static_cast<std::size_t>(l.b);
        h = h - k + 1;
        w = w - k + 1;
        break;
      }
      case LayerSpec::Kind::pool:
        if (h < 2 || w < 2) throw InvalidArgument("pooling does not fit its input in '" + notation + "'");
        seq.add(MaxPool2d<T>(2));
        h /= 2;
        w /= 2;
        break;
      case LayerSpec::Kind::fc: {
        const std::size_t in = flat ? flat : maps * h * w;
        seq.add(Dense<T>(prefix + ".fc" + std::to_string(++fc_i), static_cast<int>(in), l.a));
        flat = static_cast<std::size_t>(l.a);
        break;
      }
      case LayerSpec::Kind::input: break;
    }
  }
  return seq;
}

// ---------------------------------------------------------------- RectNet

template <typename T>
RectNet<T>::RectNet(const ArchitectureConfig& config) : Network<T>(config) {
  if (config.kind != ArchKind::rectnet) throw InvalidArgument("RectNet needs a rectnet config");
  validate(config);
  cnn = build_features<T>(config.features, config.patch_size, "cnn");
  int width = feature_width(config);
  for (int l = 0; l < config.lstm_layers; ++l) {
    lstm.emplace_back("lstm" + std::to_string(l + 1), width, config.hidden);
    width = config.hidden;
  }
  width = config.hidden * config.sequence_length();
  int m = 0;
  for (const int units : config.mlp) {
    mlp.add(Dense<T>("mlp.fc" + std::to_string(++m), width, units));
    width = units;
  }
  head = Dense<T>("head", width, 2, Activation::identity);
}

template <typename T>
void RectNet<T>::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  cnn.init(rng);
  for (auto& l : lstm) l.init_uniform(rng, 0.1);
  mlp.init(rng);
  head.init_he_uniform(rng);
}

template <typename T>
std::vector<T> RectNet<T>::embed(std::span<const float> patch) const {
  const auto m = static_cast<std::size_t>(this->config().patch_size);
  if (patch.size() != m * m) throw ShapeError("patch size mismatch");
  typename Sequential<T>::Cache cache;
  return cnn.forward(patch_tensor<T>(patch, 1, m), cache).data;
}

template <typename T>
Probabilities<T> RectNet<T>::classify_embeddings(const std::vector<std::vector<T>>& sequence) const {
  const auto& cfg = this->config();
  if (sequence.size() != static_cast<std::size_t>(cfg.sequence_length())) throw ShapeError("sequence length mismatch");
  std::vector<std::vector<T>> seq = sequence;
  for (const auto& layer : lstm) {
    typename Lstm<T>::Cache cache;
    seq = layer.forward(seq, cache);
  }
  std::vector<T> z;
  for (const auto& h : seq) z.insert(z.end(), h.begin(), h.end());
  const std::size_t width = z.size();
  Tensor<T> u({width}, std::move(z));
  if (!mlp.empty()) {
    typename Sequential<T>::Cache cache;
    u = mlp.forward(u, cache);
  }
  typename Dense<T>::Cache cache;
  const auto logits = head.forward(u, cache);
  std::array<T, 2> scratch{};
  return to_probabilities(logits, scratch);
}

template <typename T>
Probabilities<T> RectNet<T>::forward(const StackInput& input) {
  const auto& cfg = this->config();
  const int depth = cfg.sequence_length();
  check_input(input, depth, cfg.patch_size);
  const auto m = static_cast<std::size_t>(cfg.patch_size);
  cnn_cache_.resize(static_cast<std::size_t>(depth));
  std::vector<std::vector<T>> seq(static_cast<std::size_t>(depth));
  for (std::size_t s = 0; s < seq.size(); ++s) {
    seq[s] = cnn.forward(patch_tensor<T>(input.values.subspan(s * m * m, m * m), 1, m), cnn_cache_[s]).data;
  }
  lstm_cache_.resize(lstm.size());
  for (std::size_t l = 0; l < lstm.size(); ++l) seq = lstm[l].forward(seq, lstm_cache_[l]);
  std::vector<T> z;
  z.reserve(seq.size() * static_cast<std::size_t>(cfg.hidden));
  for (const auto& h : seq) z.insert(z.end(), h.begin(), h.end());
  const std::size_t width = z.size();
  Tensor<T> u({width}, std::move(z));
  if (!mlp.empty()) u = mlp.forward(u, mlp_cache_);
  const auto logits = head.forward(u, head_cache_);
  this->has_forward_ = true;
  return to_probabilities(logits, this->logits_);
}

template <typename T>
void RectNet<T>::backward(std::span<const T> dlogits) {
  if (!this->has_forward_) throw Error("backward called before forward");
  if (dlogits.size() != 2) throw ShapeError("expected two logit gradients");
  Tensor<T> g({2}, std::vector<T>(dlogits.begin(), dlogits.end()));
  g = head.backward(g, head_cache_, true);
  if (!mlp.empty()) g = mlp.backward(g, mlp_cache_, true);
  const auto depth = static_cast<std::size_t>(this->config().sequence_length());
  const auto b = static_cast<std::size_t>(this->config().hidden);
  std::vector<std::vector<T>> dseq(depth);
  for (std::size_t t = 0; t < depth; ++t) dseq[t].assign(g.data.begin() + static_cast<std::ptrdiff_t>(t * b),
                                                         g.data.begin() + static_cast<std::ptrdiff_t>((t + 1) * b));
  for (std::size_t l = lstm.size(); l-- > 0;) {
    const bool need_input = l > 0 || !freeze_cnn_;
    dseq = lstm[l].backward(dseq, lstm_cache_[l], need_input);
  }
  if (freeze_cnn_) return;
  for (std::size_t t = 0; t < depth; ++t) {
    const auto& out_shape = std::get<typename Dense<T>::Cache>(cnn_cache_[t].back()).output.shape;
    cnn.backward(Tensor<T>(out_shape, std::move(dseq[t])), cnn_cache_[t], false);
  }
}

template <typename T>
std::vector<Parameter<T>*> RectNet<T>::parameters() {
  auto out = cnn.parameters();
  for (auto& l : lstm) {
    out.push_back(&l.w_input);
    out.push_back(&l.w_hidden);
    out.push_back(&l.bias);
  }
  for (auto* p : mlp.parameters()) out.push_back(p);
  out.push_back(&head.weight);
  out.push_back(&head.bias);
  return out;
}

// ---------------------------------------------------------------- CnnBaseline

template <typename T>
CnnBaseline<T>::CnnBaseline(const ArchitectureConfig& config) : Network<T>(config) {
  if (config.kind != ArchKind::cnn) throw InvalidArgument("CnnBaseline needs a cnn config");
  validate(config);
  features = build_features<T>(config.features, config.patch_size, "features");
  head = Dense<T>("head", feature_width(config), 2, Activation::identity);
}

template <typename T>
void CnnBaseline<T>::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  features.init(rng);
  head.init_he_uniform(rng);
}

template <typename T>
Probabilities<T> CnnBaseline<T>::forward(const StackInput& input) {
  const auto& cfg = this->config();
  check_input(input, cfg.sequence_length(), cfg.patch_size);
  const auto x = patch_tensor<T>(input.values, static_cast<std::size_t>(cfg.sequence_length()),
                                 static_cast<std::size_t>(cfg.patch_size));
  const auto u = features.forward(x, features_cache_);
  const auto logits = head.forward(u, head_cache_);
  this->has_forward_ = true;
  return to_probabilities(logits, this->logits_);
}

template <typename T>
void CnnBaseline<T>::backward(std::span<const T> dlogits) {
  if (!this->has_forward_) throw Error("backward called before forward");
  Tensor<T> g({2}, std::vector<T>(dlogits.begin(), dlogits.end()));
  g = head.backward(g, head_cache_, true);
  features.backward(g, features_cache_, false);
}

template <typename T>
std::vector<Parameter<T>*> CnnBaseline<T>::parameters() {
  auto out = features.parameters();
  out.push_back(&head.weight);
  out.push_back(&head.bias);
  return out;
}

// ---------------------------------------------------------------- PatchCnn

template <typename T>
PatchCnn<T>::PatchCnn(const ArchitectureConfig& config) : Network<T>(config) {
  if (config.kind != ArchKind::patch_cnn) throw InvalidArgument("PatchCnn needs a patch_cnn config");
  validate(config);
  cnn = build_features<T>(config.features, config.patch_size, "cnn");
  head = Dense<T>("head", feature_width(config), 2, Activation::identity);
}

template <typename T>
void PatchCnn<T>::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  cnn.init(rng);
  head.init_he_uniform(rng);
}

template <typename T>
Probabilities<T> PatchCnn<T>::forward(const StackInput& input) {
  const auto m = static_cast<std::size_t>(this->config().patch_size);
  if (input.size != this->config().patch_size || input.depth < 1 || input.depth % 2 == 0 ||
      input.values.size() != static_cast<std::size_t>(input.depth) * m * m) {
    throw ShapeError("patch network expects an odd-depth stack of " + std::to_string(m) + "x" + std::to_string(m) + " patches");
  }
  const auto centre = static_cast<std::size_t>(input.depth / 2);
  const auto u = cnn.forward(patch_tensor<T>(input.values.subspan(centre * m * m, m * m), 1, m), cnn_cache_);
  const auto logits = head.forward(u, head_cache_);
  this->has_forward_ = true;
  return to_probabilities(logits, this->logits_);
}

template <typename T>
void PatchCnn<T>::backward(std::span<const T> dlogits) {
  if (!this->has_forward_) throw Error("backward called before forward");
  Tensor<T> g({2}, std::vector<T>(dlogits.begin(), dlogits.end()));
  g = head.backward(g, head_cache_, true);
  cnn.backward(g, cnn_cache_, false);
}

template <typename T>
std::vector<Parameter<T>*> PatchCnn<T>::parameters() {
  auto out = cnn.parameters();
  out.push_back(&head.weight);
  out.push_back(&head.bias);
  return out;
}

// ---------------------------------------------------------------- helpers

template <typename T>
std::unique_ptr<Network<T>> make_network(const ArchitectureConfig& config, std::uint64_t seed) {
  std::unique_ptr<Network<T>> net;
  switch (config.kind) {
    case ArchKind::rectnet: net = std::make_unique<RectNet<T>>(config); break;
    case ArchKind::cnn: net = std::make_unique<CnnBaseline<T>>(config); break;
    case ArchKind::patch_cnn: net = std::make_unique<PatchCnn<T>>(config); break;
  }
  net->init(seed);
  return net;
}

template <typename T>
std::size_t count_parameters(const Network<T>& network) {
  std::size_t n = 0;
  for (const auto* p : network.parameters()) n += p->size();
  return n;
}

template <typename T, typename U>
std::size_t copy_parameters(const Network<T>& src, Network<U>& dst, std::string_view prefix) {
  std::map<std::string, const Parameter<T>*, std::less<>> by_name;
  for (const auto* p : src.parameters()) by_name.emplace(p->name, p);
  std::size_t copied = 0;
  for (auto* p : dst.parameters()) {
    if (p->name.rfind(prefix, 0) != 0) continue;
    const auto it = by_name.find(p->name);
    if (it == by_name.end()) continue;
    if (it->second->shape != p->shape) throw ShapeError("shape mismatch copying " + p->name);
    std::transform(it->second->value.begin(), it->second->value.end(), p->value.begin(),
                   [](T v) { return static_cast<U>(v); });
    ++copied;
  }
  return copied;
}

#define RECTNET_INSTANTIATE(T)                                                                    \
  template class Network<T>;                                                                      \
  template class RectNet<T>;                                                                      \
  template class CnnBaseline<T>;                                                                  \
  template class PatchCnn<T>;                                                                     \
  template Sequential<T> build_features<T>(const std::string&, int, const std::string&);          \
  template std::unique_ptr<Network<T>> make_network<T>(const ArchitectureConfig&, std::uint64_t); \
  template std::size_t count_parameters<T>(const Network<T>&);

RECTNET_INSTANTIATE(float)
RECTNET_INSTANTIATE(double)
#undef RECTNET_INSTANTIATE

template std::size_t copy_parameters(const Network<float>&, Network<float>&, std::string_view);
template std::size_t copy_parameters(const Network<float>&, Network<double>&, std::string_view);
template std::size_t copy_parameters(const Network<double>&, Network<float>&, std::string_view);
template std::size_t copy_parameters(const Network<double>&, Network<double>&, std::string_view);

}  // namespace rectnet
