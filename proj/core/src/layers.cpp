#include "rectnet/layers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kernels.hpp"

namespace rectnet {

using detail::axpy;
using detail::dot;

std::string shape_string(const Shape& s) {
  std::ostringstream os;
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  return os.str();
}

namespace {

template <typename T>
void uniform_fill(std::vector<T>& v, double limit, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& x : v) x = static_cast<T>(dist(rng));
}

template <typename T>
Tensor<T> activation_grad(const Tensor<T>& dy, const Tensor<T>& out, Activation act) {
  if (act == Activation::identity) return dy;
  Tensor<T> g = dy;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(out.data[i] > T{})) g.data[i] = T{};
  }
  return g;
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

template <typename T>
Conv2d<T>::Conv2d(std::string name, int in_maps, int out_maps, int kernel, Activation act)
    : weight(name + ".weight", {static_cast<std::size_t>(out_maps), static_cast<std::size_t>(in_maps),
                                static_cast<std::size_t>(kernel), static_cast<std::size_t>(kernel)}),
      bias(name + ".bias", {static_cast<std::size_t>(out_maps)}),
      in_maps_(in_maps),
      out_maps_(out_maps),
      kernel_(kernel),
      act_(act) {
  if (in_maps <= 0 || out_maps <= 0 || kernel <= 0) throw InvalidArgument("convolution sizes must be positive");
}

template <typename T>
void Conv2d<T>::init_he_uniform(std::mt19937_64& rng) {
  const double fan_in = static_cast<double>(in_maps_ * kernel_ * kernel_);
  uniform_fill(weight.value, std::sqrt(6.0 / fan_in), rng);
  std::fill(bias.value.begin(), bias.value.end(), T{});
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x, Cache& cache) const {
  if (x.shape.size() != 3 || x.shape[0] != static_cast<std::size_t>(in_maps_)) {
    throw ShapeError(weight.name + ": expected " + std::to_string(in_maps_) + " input maps, got " + shape_string(x.shape));
  }
  const std::size_t h = x.shape[1];
  const std::size_t w = x.shape[2];
  const auto k = static_cast<std::size_t>(kernel_);
  if (h < k || w < k) throw ShapeError(weight.name + ": input " + shape_string(x.shape) + " smaller than kernel");
  const std::size_t oh = h - k + 1;
  const std::size_t ow = w - k + 1;
  const auto maps_in = static_cast<std::size_t>(in_maps_);
  Tensor<T> out({static_cast<std::size_t>(out_maps_), oh, ow});
  for (std::size_t m = 0; m < static_cast<std::size_t>(out_maps_); ++m) {
    T* o = out.data.data() + m * oh * ow;
    std::fill(o, o + oh * ow, bias.value[m]);
    for (std::size_t s = 0; s < maps_in; ++s) {
      const T* in = x.data.data() + s * h * w;
      const T* kern = weight.value.data() + (m * maps_in + s) * k * k;
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          const T wv = kern[ky * k + kx];
          for (std::size_t oy = 0; oy < oh; ++oy) axpy(wv, in + (oy + ky) * w + kx, o + oy * ow, ow);
        }
      }
    }
    if (act_ == Activation::relu) {
      for (std::size_t i = 0; i < oh * ow; ++i) o[i] = relu(o[i]);
    }
  }
  cache.input = x;
  cache.output = out;
  return out;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& dy, const Cache& cache, bool input_grad) {
  const auto& x = cache.input;
  if (x.shape.empty()) throw Error(weight.name + ": backward called before forward");
  if (dy.shape != cache.output.shape) throw ShapeError(weight.name + ": gradient shape mismatch");
  const auto g = activation_grad(dy, cache.output, act_);
  const std::size_t h = x.shape[1];
  const std::size_t w = x.shape[2];
  const auto k = static_cast<std::size_t>(kernel_);
  const std::size_t oh = h - k + 1;
  const std::size_t ow = w - k + 1;
  const auto maps_in = static_cast<std::size_t>(in_maps_);
  Tensor<T> dx;
  if (input_grad) dx = Tensor<T>(x.shape);
  for (std::size_t m = 0; m < static_cast<std::size_t>(out_maps_); ++m) {
    const T* gm = g.data.data() + m * oh * ow;
    T bsum{};
    for (std::size_t i = 0; i < oh * ow; ++i) bsum += gm[i];
    bias.grad[m] += bsum;
    for (std::size_t s = 0; s < maps_in; ++s) {
      const T* in = x.data.data() + s * h * w;
      const std::size_t widx = (m * maps_in + s) * k * k;
      T* dkern = weight.grad.data() + widx;
      const T* kern = weight.value.data() + widx;
      T* din = input_grad ? dx.data.data() + s * h * w : nullptr;
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          T acc{};
          for (std::size_t oy = 0; oy < oh; ++oy) acc += dot(gm + oy * ow, in + (oy + ky) * w + kx, ow);
          dkern[ky * k + kx] += acc;
          if (din) {
            const T wv = kern[ky * k + kx];
            for (std::size_t oy = 0; oy < oh; ++oy) axpy(wv, gm + oy * ow, din + (oy + ky) * w + kx, ow);
          }
        }
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------- MaxPool2d

template <typename T>
Tensor<T> MaxPool2d<T>::forward(const Tensor<T>& x, Cache& cache) const {
  if (x.shape.size() != 3) throw ShapeError("max pooling expects (maps, height, width)");
  const auto a = static_cast<std::size_t>(window_);
  const std::size_t c = x.shape[0];
  const std::size_t h = x.shape[1];
  const std::size_t w = x.shape[2];
  const std::size_t oh = h / a;
  const std::size_t ow = w / a;
  if (oh == 0 || ow == 0) throw ShapeError("max pooling input " + shape_string(x.shape) + " smaller than window");
  Tensor<T> out({c, oh, ow});
  cache.input_shape = x.shape;
  cache.argmax.assign(out.size(), 0);
  for (std::size_t m = 0; m < c; ++m) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = (m * h + oy * a) * w + ox * a;
        for (std::size_t dy = 0; dy < a; ++dy) {
          for (std::size_t dx = 0; dx < a; ++dx) {
            const std::size_t i = (m * h + oy * a + dy) * w + ox * a + dx;
            if (x.data[i] > x.data[best]) best = i;
          }
        }
        const std::size_t o = (m * oh + oy) * ow + ox;
        out.data[o] = x.data[best];
        cache.argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> MaxPool2d<T>::backward(const Tensor<T>& dy, const Cache& cache) const {
  if (cache.input_shape.empty()) throw Error("max pooling backward called before forward");
  if (dy.size() != cache.argmax.size()) throw ShapeError("max pooling gradient shape mismatch");
  Tensor<T> dx(cache.input_shape);
  for (std::size_t o = 0; o < dy.size(); ++o) dx.data[cache.argmax[o]] += dy.data[o];
  return dx;
}

// ---------------------------------------------------------------- Dense

template <typename T>
Dense<T>::Dense(std::string name, int inputs, int units, Activation act)
    : weight(name + ".weight", {static_cast<std::size_t>(inputs), static_cast<std::size_t>(units)}),
      bias(name + ".bias", {static_cast<std::size_t>(units)}),
      inputs_(inputs),
      units_(units),
      act_(act) {
  if (inputs <= 0 || units <= 0) throw InvalidArgument("dense layer sizes must be positive");
}

template <typename T>
void Dense<T>::init_he_uniform(std::mt19937_64& rng) {
  uniform_fill(weight.value, std::sqrt(6.0 / static_cast<double>(inputs_)), rng);
  std::fill(bias.value.begin(), bias.value.end(), T{});
}

template <typename T>
Tensor<T> Dense<T>::forward(const Tensor<T>& x, Cache& cache) const {
  if (x.size() != static_cast<std::size_t>(inputs_)) {
    throw ShapeError(weight.name + ": expected " + std::to_string(inputs_) + " inputs, got " + shape_string(x.shape));
  }
  const auto n = static_cast<std::size_t>(units_);
  Tensor<T> out({n}, bias.value);
  for (std::size_t i = 0; i < static_cast<std::size_t>(inputs_); ++i) {
    const T zi = x.data[i];
    if (zi != T{}) axpy(zi, weight.value.data() + i * n, out.data.data(), n);
  }
  if (act_ == Activation::relu) {
    for (auto& v : out.data) v = relu(v);
  }
  cache.input = x;
  cache.output = out;
  return out;
}

template <typename T>
Tensor<T> Dense<T>::backward(const Tensor<T>& dy, const Cache& cache, bool input_grad) {
  if (cache.input.shape.empty()) throw Error(weight.name + ": backward called before forward");
  if (dy.size() != static_cast<std::size_t>(units_)) throw ShapeError(weight.name + ": gradient shape mismatch");
  const auto g = activation_grad(dy, cache.output, act_);
  const auto n = static_cast<std::size_t>(units_);
  for (std::size_t m = 0; m < n; ++m) bias.grad[m] += g.data[m];
  Tensor<T> dx;
  if (input_grad) dx = Tensor<T>(cache.input.shape);
  for (std::size_t i = 0; i < static_cast<std::size_t>(inputs_); ++i) {
    const T zi = cache.input.data[i];
    if (zi != T{}) axpy(zi, g.data.data(), weight.grad.data() + i * n, n);
    if (input_grad) dx.data[i] = dot(weight.value.data() + i * n, g.data.data(), n);
  }
  return dx;
}

// ---------------------------------------------------------------- Sequential

template <typename T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& x, Cache& cache) const {
  cache.clear();
  cache.reserve(layers_.size());
  Tensor<T> cur = x;
  for (const auto& layer : layers_) {
    std::visit(
        [&](const auto& l) {
          using L = std::decay_t<decltype(l)>;
          typename L::Cache c;
          cur = l.forward(cur, c);
          cache.emplace_back(std::move(c));
        },
        layer);
  }
  return cur;
}

template <typename T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& dy, const Cache& cache, bool input_grad) {
  if (cache.size() != layers_.size()) throw Error("sequential backward called before forward");
  Tensor<T> cur = dy;
  for (std::size_t idx = layers_.size(); idx-- > 0;) {
    const bool need = input_grad || idx > 0;
    std::visit(
        [&](auto& l) {
          using L = std::decay_t<decltype(l)>;
          const auto& c = std::get<typename L::Cache>(cache[idx]);
          if constexpr (std::is_same_v<L, MaxPool2d<T>>) {
            cur = l.backward(cur, c);
          } else {
            cur = l.backward(cur, c, need);
          }
        },
        layers_[idx]);
  }
  return cur;
}

template <typename T>
void Sequential<T>::init(std::mt19937_64& rng) {
  for (auto& layer : layers_) {
    std::visit(
        [&](auto& l) {
          using L = std::decay_t<decltype(l)>;
          if constexpr (!std::is_same_v<L, MaxPool2d<T>>) l.init_he_uniform(rng);
        },
        layer);
  }
}

template <typename T>
std::vector<Parameter<T>*> Sequential<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (auto& layer : layers_) {
    std::visit(
        [&](auto& l) {
          using L = std::decay_t<decltype(l)>;
          if constexpr (!std::is_same_v<L, MaxPool2d<T>>) {
            out.push_back(&l.weight);
            out.push_back(&l.bias);
          }
        },
        layer);
  }
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> Sequential<T>::parameters() const {
  std::vector<const Parameter<T>*> out;
  for (auto* p : const_cast<Sequential*>(this)->parameters()) out.push_back(p);
  return out;
}

template class Conv2d<float>;
template class Conv2d<double>;
template class MaxPool2d<float>;
template class MaxPool2d<double>;
template class Dense<float>;
template class Dense<double>;
template class Sequential<float>;
template class Sequential<double>;

}  // namespace rectnet
