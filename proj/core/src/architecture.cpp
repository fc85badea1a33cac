#include "rectnet/architecture.hpp"

#include <cctype>
#include <sstream>

#include "json.hpp"
#include "rectnet/error.hpp"

namespace rectnet {

using nlohmann::json;

namespace {

std::string strip(std::string_view s) {
  std::string out;
  for (const char c : s) {
    if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
  }
  return out;
}

std::vector<int> parse_args(const std::string& tok, std::size_t open) {
  if (tok.back() != ')') throw InvalidArgument("bad layer token '" + tok + "'");
  std::vector<int> out;
  std::stringstream ss(tok.substr(open + 1, tok.size() - open - 2));
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(part, &used);
      if (used != part.size() || v <= 0) throw InvalidArgument("");
      out.push_back(v);
    } catch (const std::exception&) {
      throw InvalidArgument("bad layer argument in '" + tok + "'");
    }
  }
  return out;
}

struct Trace {
  std::size_t maps = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  bool flat = false;
  std::size_t units = 0;
};

}  // namespace

std::vector<LayerSpec> parse_layer_notation(std::string_view text) {
  const auto s = strip(text);
  std::vector<std::string> tokens;
  int depth = 0;
  std::string cur;
  for (const char c : s) {
    if (c == ',' && depth == 0) {
      tokens.push_back(cur);
      cur.clear();
      continue;
    }
    depth += (c == '(') - (c == ')');
    cur.push_back(c);
  }
  if (!cur.empty()) tokens.push_back(cur);

  std::vector<LayerSpec> out;
  for (const auto& tok : tokens) {
    LayerSpec l;
    if (tok == "P") {
      l.kind = LayerSpec::Kind::pool;
    } else if (tok.rfind("FC(", 0) == 0) {
      const auto a = parse_args(tok, 2);
      if (a.size() != 1) throw InvalidArgument("FC takes one argument: " + tok);
      l = {LayerSpec::Kind::fc, a[0], 0};
    } else if (tok.rfind("C(", 0) == 0) {
      const auto a = parse_args(tok, 1);
      if (a.size() != 2) throw InvalidArgument("C takes two arguments: " + tok);
      l = {LayerSpec::Kind::conv, a[0], a[1]};
    } else if (tok.rfind("I(", 0) == 0) {
      const auto a = parse_args(tok, 1);
      if (a.size() != 1) throw InvalidArgument("I takes one argument: " + tok);
      l = {LayerSpec::Kind::input, a[0], 0};
    } else {
      throw InvalidArgument("unknown layer token '" + tok + "'");
    }
    out.push_back(l);
  }
  if (out.empty() || out.front().kind != LayerSpec::Kind::input) throw InvalidArgument("layer notation must start with I(.)");
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].kind == LayerSpec::Kind::input) throw InvalidArgument("I(.) may only appear first");
    if (out[i - 1].kind == LayerSpec::Kind::fc && out[i].kind != LayerSpec::Kind::fc) {
      throw InvalidArgument("convolution or pooling after a fully connected layer");
    }
  }
  return out;
}

std::string format_layer_notation(const std::vector<LayerSpec>& layers) {
  std::ostringstream os;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i) os << ", ";
    const auto& l = layers[i];
    switch (l.kind) {
      case LayerSpec::Kind::input: os << "I(" << l.a << ")"; break;
      case LayerSpec::Kind::conv: os << "C(" << l.a << "," << l.b << ")"; break;
      case LayerSpec::Kind::pool: os << "P"; break;
      case LayerSpec::Kind::fc: os << "FC(" << l.a << ")"; break;
    }
  }
  return os.str();
}

std::string_view arch_name(ArchKind k) {
  switch (k) {
    case ArchKind::rectnet: return "rectnet";
    case ArchKind::cnn: return "cnn";
    case ArchKind::patch_cnn: return "patch_cnn";
  }
  return "?";
}

ArchKind parse_arch(std::string_view s) {
  if (s == "rectnet") return ArchKind::rectnet;
  if (s == "cnn") return ArchKind::cnn;
  if (s == "patch_cnn") return ArchKind::patch_cnn;
  throw InvalidArgument("unknown architecture '" + std::string(s) + "'");
}

std::string_view preset_name(Preset p) { return p == Preset::desk ? "desk" : "paper"; }

Preset parse_preset(std::string_view s) {
  if (s == "desk") return Preset::desk;
  if (s == "paper") return Preset::paper;
  throw InvalidArgument("unknown preset '" + std::string(s) + "'");
}

ArchitectureConfig preset_config(ArchKind kind, Preset preset) {
  ArchitectureConfig c;
  c.kind = kind;
  c.k = 3;
  if (preset == Preset::paper) {
    c.patch_size = 50;
    if (kind == ArchKind::cnn) {
      c.features = "I(7), C(5,32), C(3,32), P, C(3,64), C(3,64), P, C(2,96), P, FC(816), FC(412)";
      c.lstm_layers = 0;
      c.hidden = 0;
    } else {
      c.features = "I(1), C(5,16), P, C(4,16), C(3,32), P, C(3,64), P, FC(412)";
      c.lstm_layers = 2;
      c.hidden = 612;
      c.mlp = {1024, 512};
    }
  } else {
    c.patch_size = 32;
    if (kind == ArchKind::cnn) {
      c.features = "I(7), C(5,16), C(3,16), P, C(3,32), C(3,32), P, C(2,48), P, FC(96), FC(48)";
      c.lstm_layers = 0;
      c.hidden = 0;
    } else {
      c.features = "I(1), C(5,8), P, C(4,8), C(3,16), P, C(3,32), P, FC(64)";
      c.lstm_layers = 2;
      c.hidden = 48;
      c.mlp = {96, 48};
    }
  }
  if (kind == ArchKind::patch_cnn) return pretraining_config(c);
  return c;
}

ArchitectureConfig pretraining_config(const ArchitectureConfig& rectnet) {
  ArchitectureConfig p = rectnet;
  p.kind = ArchKind::patch_cnn;
  p.lstm_layers = 0;
  p.hidden = 0;
  p.mlp.clear();
  return p;
}

std::vector<LayerRow> describe(const ArchitectureConfig& config) {
  const auto layers = parse_layer_notation(config.features);
  const int depth = config.sequence_length();
  const bool per_slice = config.kind != ArchKind::cnn;
  if (config.patch_size <= 0 || config.k < 0) throw InvalidArgument("patch size and k must be valid");
  if (config.kind == ArchKind::cnn && layers.front().a != depth) {
    throw InvalidArgument("channel count " + std::to_string(layers.front().a) + " must equal the stack depth " +
                          std::to_string(depth));
  }
  if (per_slice && layers.front().a != 1) throw InvalidArgument("per-slice CNN input must have one channel");

  std::vector<LayerRow> rows;
  Trace t{static_cast<std::size_t>(layers.front().a), static_cast<std::size_t>(config.patch_size),
          static_cast<std::size_t>(config.patch_size)};
  auto spatial = [&] { return std::to_string(t.maps) + "x" + std::to_string(t.height) + "x" + std::to_string(t.width); };
  const std::string prefix = per_slice ? "cnn." : "features.";
  rows.push_back({"input", format_layer_notation({layers.front()}), spatial(), 0});
  int conv_i = 0, pool_i = 0, fc_i = 0;
  for (std::size_t i = 1; i < layers.size(); ++i) {
    const auto& l = layers[i];
    switch (l.kind) {
      case LayerSpec::Kind::conv: {
        const auto k = static_cast<std::size_t>(l.a);
        if (t.height < k || t.width < k) {
          throw InvalidArgument("layer " + format_layer_notation({l}) + " does not fit a " + spatial() + " input");
        }
        const std::size_t params = static_cast<std::size_t>(l.b) * (t.maps * k * k + 1);
        t = {static_cast<std::size_t>(l.b), t.height - k + 1, t.width - k + 1};
        rows.push_back({prefix + "conv" + std::to_string(++conv_i), format_layer_notation({l}), spatial(), params});
        break;
      }
      case LayerSpec::Kind::pool: {
        if (t.height < 2 || t.width < 2) throw InvalidArgument("pooling a " + spatial() + " input");
        t.height /= 2;
        t.width /= 2;
        rows.push_back({"pool" + std::to_string(++pool_i), "P", spatial(), 0});
        break;
      }
      case LayerSpec::Kind::fc: {
        const std::size_t in = t.flat ? t.units : t.maps * t.height * t.width;
        const auto units = static_cast<std::size_t>(l.a);
        t.flat = true;
        t.units = units;
        rows.push_back({prefix + "fc" + std::to_string(++fc_i), format_layer_notation({l}), std::to_string(units),
                        in * units + units});
        break;
      }
      case LayerSpec::Kind::input: break;
    }
  }
  if (!t.flat) throw InvalidArgument("feature extractor must end with a fully connected layer");

  std::size_t width = t.units;
  if (config.kind == ArchKind::rectnet) {
    if (config.lstm_layers < 1 || config.hidden <= 0) throw InvalidArgument("rectnet needs at least one LSTM layer");
    const auto b = static_cast<std::size_t>(config.hidden);
    for (int l = 0; l < config.lstm_layers; ++l) {
      const std::size_t params = 4 * (b * width + b * b + b);
      rows.push_back({"lstm" + std::to_string(l + 1), "LSTM(" + std::to_string(b) + ")",
                      std::to_string(depth) + "x" + std::to_string(b), params});
      width = b;
    }
    width = b * static_cast<std::size_t>(depth);
    rows.push_back({"concat", "concat", std::to_string(width), 0});
    int m = 0;
    for (const int units : config.mlp) {
      if (units <= 0) throw InvalidArgument("MLP sizes must be positive");
      const auto u = static_cast<std::size_t>(units);
      rows.push_back({"mlp.fc" + std::to_string(++m), "FC(" + std::to_string(u) + ")", std::to_string(u), width * u + u});
      width = u;
    }
  }
  rows.push_back({"head", "softmax", "2", width * 2 + 2});
  return rows;
}

void validate(const ArchitectureConfig& config) { (void)describe(config); }

std::size_t parameter_count(const ArchitectureConfig& config) {
  std::size_t n = 0;
  for (const auto& r : describe(config)) n += r.parameters;
  return n;
}

int feature_width(const ArchitectureConfig& config) {
  const auto layers = parse_layer_notation(config.features);
  if (layers.back().kind != LayerSpec::Kind::fc) throw InvalidArgument("feature extractor must end with FC");
  return layers.back().a;
}

std::string to_json(const ArchitectureConfig& c) {
  json j{{"kind", arch_name(c.kind)}, {"features", c.features}, {"patch_size", c.patch_size}, {"k", c.k},
         {"lstm_layers", c.lstm_layers}, {"hidden", c.hidden}, {"mlp", c.mlp}};
  return j.dump();
}

ArchitectureConfig architecture_from_json(std::string_view text) {
  try {
    const auto j = json::parse(text);
    ArchitectureConfig c;
    c.kind = parse_arch(j.at("kind").get<std::string>());
    c.features = j.at("features").get<std::string>();
    c.patch_size = j.at("patch_size").get<int>();
    c.k = j.at("k").get<int>();
    c.lstm_layers = j.at("lstm_layers").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.mlp = j.at("mlp").get<std::vector<int>>();
    validate(c);
    return c;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("bad architecture description: ") + e.what());
  }
}

}  // namespace rectnet
