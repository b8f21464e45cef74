#include "uq/model.hpp"

#include <algorithm>
#include <cstring>
#include <optional>
#include <set>
#include <sstream>

#include "json.hpp"
#include "uq/tensor_io.hpp"

namespace uq {

using nlohmann::json;

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool2x2: return "maxpool2x2";
    case LayerKind::flatten: return "flatten";
    case LayerKind::dropout: return "dropout";
  }
  return "unknown";
}

namespace {

LayerKind parse_kind(const std::string& s) {
  for (auto k : {LayerKind::dense, LayerKind::conv2d, LayerKind::relu, LayerKind::maxpool2x2,
                 LayerKind::flatten, LayerKind::dropout}) {
    if (s == to_string(k)) return k;
  }
  throw Error(ErrorKind::parse, "unknown layer kind '" + s + "'");
}

}  // namespace

Shape LayerSpec::weight_shape() const {
  if (kind == LayerKind::dense) return {dense.out_dim, dense.in_dim};
  return {conv.out_channels, conv.in_channels, conv.kernel_h, conv.kernel_w};
}

Shape LayerSpec::bias_shape() const {
  if (kind == LayerKind::dense) return {dense.out_dim};
  return {conv.out_channels};
}

LayerSpec LayerSpec::make_dense(std::string name, std::size_t in_dim, std::size_t out_dim) {
  LayerSpec l;
  l.name = std::move(name);
  l.kind = LayerKind::dense;
  l.dense = {in_dim, out_dim};
  return l;
}

LayerSpec LayerSpec::make_conv2d(std::string name, Conv2dParams params) {
  LayerSpec l;
  l.name = std::move(name);
  l.kind = LayerKind::conv2d;
  l.conv = params;
  return l;
}

LayerSpec LayerSpec::make(std::string name, LayerKind kind) {
  LayerSpec l;
  l.name = std::move(name);
  l.kind = kind;
  return l;
}

DropoutConfig::DropoutConfig(double rate) : rate_(rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw Error(ErrorKind::argument, "dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
}

// ---------------------------------------------------------------------------
// Shape propagation

namespace {

/// Output shape of one layer, or a finding describing why it has none.
struct Step {
  Shape shape;
  std::string problem;
};

std::string param_problem(const LayerSpec& l) {
  switch (l.kind) {
    case LayerKind::dense:
      if (l.dense.in_dim == 0 || l.dense.out_dim == 0) return "dense dimensions must be >= 1";
      break;
    case LayerKind::conv2d:
      if (l.conv.stride == 0) return "conv2d stride must be >= 1";
      if (l.conv.in_channels == 0 || l.conv.out_channels == 0) return "conv2d channels must be >= 1";
      if (l.conv.kernel_h == 0 || l.conv.kernel_w == 0) return "conv2d kernel extents must be >= 1";
      break;
    default:
      break;
  }
  return {};
}

Step next_shape(const LayerSpec& l, const Shape& in) {
  auto fail = [&](const std::string& why) {
    return Step{{}, "input shape " + shape_string(in) + " incompatible: " + why};
  };
  switch (l.kind) {
    case LayerKind::dense:
      if (in.size() != 1 || in[0] != l.dense.in_dim) {
        return fail("dense expects [" + std::to_string(l.dense.in_dim) + "]");
      }
      return {{l.dense.out_dim}, {}};
    case LayerKind::conv2d: {
      const auto& c = l.conv;
      if (in.size() != 3 || in[0] != c.in_channels) {
        return fail("conv2d expects [" + std::to_string(c.in_channels) + ",H,W]");
      }
      const auto ph = in[1] + 2 * c.pad_h;
      const auto pw = in[2] + 2 * c.pad_w;
      if (ph < c.kernel_h || pw < c.kernel_w) return fail("kernel larger than padded input");
      return {{c.out_channels, (ph - c.kernel_h) / c.stride + 1, (pw - c.kernel_w) / c.stride + 1}, {}};
    }
    case LayerKind::maxpool2x2:
      if (in.size() != 3 || in[1] % 2 != 0 || in[2] % 2 != 0) {
        return fail("maxpool2x2 expects [C,H,W] with even H and W");
      }
      return {{in[0], in[1] / 2, in[2] / 2}, {}};
    case LayerKind::flatten:
      return {{element_count(in)}, {}};
    case LayerKind::relu:
    case LayerKind::dropout:
      return {in, {}};
  }
  return fail("unknown layer kind");
}

}  // namespace

NetworkGraph::NetworkGraph(Shape input_shape, std::vector<LayerSpec> layers,
                           std::map<std::string, LayerWeights> weights)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)), weights_(std::move(weights)) {}

const LayerWeights& NetworkGraph::weights_for(const LayerSpec& layer) const {
  auto it = weights_.find(layer.name);
  if (it == weights_.end()) throw Error(ErrorKind::weights, "no weights for layer '" + layer.name + "'");
  return it->second;
}

std::size_t NetworkGraph::dropout_site_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(
      layers_.begin(), layers_.end(), [](const LayerSpec& l) { return l.kind == LayerKind::dropout; }));
}

std::vector<Shape> NetworkGraph::layer_output_shapes() const {
  std::vector<Shape> out;
  out.reserve(layers_.size());
  Shape cur = input_shape_;
  for (const auto& l : layers_) {
    if (auto p = param_problem(l); !p.empty()) throw Error(ErrorKind::shape, "layer '" + l.name + "': " + p);
    auto step = next_shape(l, cur);
    if (!step.problem.empty()) throw Error(ErrorKind::shape, "layer '" + l.name + "': " + step.problem);
    cur = std::move(step.shape);
    out.push_back(cur);
  }
  return out;
}

Shape NetworkGraph::output_shape() const {
  auto shapes = layer_output_shapes();
  return shapes.empty() ? input_shape_ : shapes.back();
}

std::vector<Shape> NetworkGraph::dropout_site_shapes() const {
  auto shapes = layer_output_shapes();
  std::vector<Shape> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].kind == LayerKind::dropout) out.push_back(shapes[i]);
  }
  return out;
}

NetworkGraph NetworkGraph::slice(std::size_t first, std::size_t last) const {
  if (first > last || last > layers_.size()) throw Error(ErrorKind::argument, "invalid layer slice");
  Shape in = first == 0 ? input_shape_ : layer_output_shapes()[first - 1];
  std::vector<LayerSpec> layers(layers_.begin() + static_cast<std::ptrdiff_t>(first),
                                layers_.begin() + static_cast<std::ptrdiff_t>(last));
  std::map<std::string, LayerWeights> weights;
  for (const auto& l : layers) {
    if (auto it = weights_.find(l.name); it != weights_.end()) weights.emplace(l.name, it->second);
  }
  return NetworkGraph(std::move(in), std::move(layers), std::move(weights));
}

std::vector<Finding> validate_graph(const NetworkGraph& g) {
  std::vector<Finding> findings;
  const auto& in = g.input_shape();
  bool shape_ok = !in.empty() && std::none_of(in.begin(), in.end(), [](auto e) { return e == 0; });
  if (!shape_ok) findings.push_back({ErrorKind::shape, "input shape " + shape_string(in) + " is invalid"});

  std::set<std::string> names;
  Shape cur = in;
  for (std::size_t i = 0; i < g.layers().size(); ++i) {
    const auto& l = g.layers()[i];
    const std::string where = "layer " + std::to_string(i) + " '" + l.name + "': ";
    if (l.name.empty()) findings.push_back({ErrorKind::parse, where + "empty name"});
    if (!names.insert(l.name).second) findings.push_back({ErrorKind::parse, where + "duplicate layer name"});

    if (auto p = param_problem(l); !p.empty()) {
      findings.push_back({ErrorKind::shape, where + p});
      shape_ok = false;  // downstream shapes are undefined
    } else if (shape_ok) {
      auto step = next_shape(l, cur);
      if (step.problem.empty()) {
        cur = std::move(step.shape);
      } else {
        findings.push_back({ErrorKind::shape, where + step.problem});
        shape_ok = false;
      }
    }

    auto it = g.weights().find(l.name);
    if (l.has_weights()) {
      if (it == g.weights().end()) {
        findings.push_back({ErrorKind::weights, where + "missing weights"});
      } else {
        if (it->second.weight.shape() != l.weight_shape()) {
          findings.push_back({ErrorKind::shape, where + "weight shape " + shape_string(it->second.weight.shape()) +
                                                    " != declared " + shape_string(l.weight_shape())});
        }
        if (it->second.bias.shape() != l.bias_shape()) {
          findings.push_back({ErrorKind::shape, where + "bias shape " + shape_string(it->second.bias.shape()) +
                                                    " != declared " + shape_string(l.bias_shape())});
        }
      }
    }
  }
  for (const auto& [name, w] : g.weights()) {
    auto it = std::find_if(g.layers().begin(), g.layers().end(),
                           [&](const LayerSpec& l) { return l.name == name; });
    if (it == g.layers().end()) {
      findings.push_back({ErrorKind::weights, "orphan weights for unknown layer '" + name + "'"});
    } else if (!it->has_weights()) {
      findings.push_back({ErrorKind::weights, "layer '" + name + "' (" + to_string(it->kind) + ") carries no weights"});
    }
  }
  return findings;
}

// ---------------------------------------------------------------------------
// Manifest I/O

namespace {

std::size_t get_extent(const json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorKind::parse, std::string("missing field '") + key + "'");
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw Error(ErrorKind::parse, std::string("field '") + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

/// Either a single integer or an [h, w] pair.
std::pair<std::size_t, std::size_t> get_pair(const json& j, const char* key, std::size_t fallback) {
  if (!j.contains(key)) return {fallback, fallback};
  const auto& v = j.at(key);
  if (v.is_number_integer()) {
    auto n = get_extent(j, key);
    return {n, n};
  }
  if (v.is_array() && v.size() == 2 && v[0].is_number_integer() && v[1].is_number_integer() &&
      v[0].get<long long>() >= 0 && v[1].get<long long>() >= 0) {
    return {v[0].get<std::size_t>(), v[1].get<std::size_t>()};
  }
  throw Error(ErrorKind::parse, std::string("field '") + key + "' must be an integer or [h, w]");
}

Shape parse_shape(const json& j, const char* what) {
  if (!j.is_array()) throw Error(ErrorKind::parse, std::string(what) + " must be an array");
  Shape s;
  for (const auto& e : j) {
    if (!e.is_number_integer() || e.get<long long>() < 0) {
      throw Error(ErrorKind::parse, std::string(what) + " extents must be non-negative integers");
    }
    s.push_back(e.get<std::size_t>());
  }
  return s;
}

LayerSpec parse_layer(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::parse, "layer entry must be an object");
  if (!j.contains("name") || !j["name"].is_string()) throw Error(ErrorKind::parse, "layer without string 'name'");
  if (!j.contains("kind") || !j["kind"].is_string()) throw Error(ErrorKind::parse, "layer without string 'kind'");
  auto name = j["name"].get<std::string>();
  auto kind = parse_kind(j["kind"].get<std::string>());
  switch (kind) {
    case LayerKind::dense:
      return LayerSpec::make_dense(name, get_extent(j, "in_dim"), get_extent(j, "out_dim"));
    case LayerKind::conv2d: {
      Conv2dParams p;
      p.in_channels = get_extent(j, "in_channels");
      p.out_channels = get_extent(j, "out_channels");
      if (!j.contains("kernel")) throw Error(ErrorKind::parse, "conv2d without 'kernel'");
      std::tie(p.kernel_h, p.kernel_w) = get_pair(j, "kernel", 0);
      p.stride = j.contains("stride") ? get_extent(j, "stride") : 1;
      std::tie(p.pad_h, p.pad_w) = get_pair(j, "padding", 0);
      return LayerSpec::make_conv2d(name, p);
    }
    default:
      return LayerSpec::make(name, kind);
  }
}

json layer_to_json(const LayerSpec& l) {
  json j{{"name", l.name}, {"kind", to_string(l.kind)}};
  if (l.kind == LayerKind::dense) {
    j["in_dim"] = l.dense.in_dim;
    j["out_dim"] = l.dense.out_dim;
  } else if (l.kind == LayerKind::conv2d) {
    j["in_channels"] = l.conv.in_channels;
    j["out_channels"] = l.conv.out_channels;
    j["kernel"] = {l.conv.kernel_h, l.conv.kernel_w};
    j["stride"] = l.conv.stride;
    j["padding"] = {l.conv.pad_h, l.conv.pad_w};
  }
  return j;
}

[[noreturn]] void throw_findings(const std::vector<Finding>& findings) {
  std::ostringstream os;
  os << "invalid model:";
  for (const auto& f : findings) os << "\n  - " << f.message;
  throw Error(findings.front().kind, os.str());
}

}  // namespace

NetworkGraph load_model(const std::string& manifest_json, std::span<const std::uint8_t> weight_bytes) {
  json doc;
  try {
    doc = json::parse(manifest_json);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::parse, std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorKind::parse, "manifest must be a JSON object");
  if (!doc.contains("version") || !doc["version"].is_number_integer()) {
    throw Error(ErrorKind::parse, "manifest without integer 'version'");
  }
  if (doc["version"].get<long long>() != kManifestVersion) {
    throw Error(ErrorKind::version, "unsupported manifest version " + doc["version"].dump());
  }
  if (!doc.contains("input_shape")) throw Error(ErrorKind::parse, "manifest without 'input_shape'");
  auto input_shape = parse_shape(doc["input_shape"], "input_shape");
  if (!doc.contains("layers") || !doc["layers"].is_array()) throw Error(ErrorKind::parse, "manifest without 'layers' array");
  std::vector<LayerSpec> layers;
  for (const auto& jl : doc["layers"]) layers.push_back(parse_layer(jl));

  if (weight_bytes.size() % 4 != 0) {
    throw Error(ErrorKind::shape, "weight blob size " + std::to_string(weight_bytes.size()) +
                                      " is not a multiple of 4 bytes");
  }
  struct Partial {
    std::optional<Tensor> weight, bias;
  };
  std::map<std::string, Partial> partial;
  std::size_t indexed_bytes = 0;
  const json empty = json::array();
  const auto& entries = doc.contains("weights") ? doc["weights"] : empty;
  if (!entries.is_array()) throw Error(ErrorKind::parse, "'weights' must be an array");
  for (const auto& e : entries) {
    if (!e.is_object() || !e.contains("layer") || !e["layer"].is_string() || !e.contains("tensor") ||
        !e["tensor"].is_string() || !e.contains("shape")) {
      throw Error(ErrorKind::parse, "weight entry needs 'layer', 'tensor', 'shape' and 'offset'");
    }
    const auto layer = e["layer"].get<std::string>();
    const auto which = e["tensor"].get<std::string>();
    if (which != "W" && which != "b") throw Error(ErrorKind::parse, "weight tensor must be \"W\" or \"b\"");
    auto shape = parse_shape(e["shape"], "weight shape");
    const auto offset = get_extent(e, "offset");
    if (offset % 4 != 0) throw Error(ErrorKind::parse, "weight offset must be 4-byte aligned");
    if (shape.empty() || std::find(shape.begin(), shape.end(), 0) != shape.end()) {
      throw Error(ErrorKind::shape, "weight '" + layer + "." + which + "' has an empty shape");
    }
    const auto count = element_count(shape);
    if (offset + 4 * count > weight_bytes.size()) {
      throw Error(ErrorKind::shape, "weight '" + layer + "." + which + "' " + shape_string(shape) +
                                        " at offset " + std::to_string(offset) + " runs past the end of the blob");
    }
    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i) data[i] = get_f32_le(weight_bytes, offset + 4 * i);
    auto& slot = which == "W" ? partial[layer].weight : partial[layer].bias;
    if (slot) throw Error(ErrorKind::weights, "duplicate weight entry '" + layer + "." + which + "'");
    slot = Tensor(std::move(shape), std::move(data));
    indexed_bytes += 4 * count;
  }
  if (indexed_bytes != weight_bytes.size()) {
    throw Error(ErrorKind::shape, "weight blob holds " + std::to_string(weight_bytes.size() / 4) +
                                      " floats but the manifest indexes " + std::to_string(indexed_bytes / 4));
  }

  std::map<std::string, LayerWeights> weights;
  for (auto& [name, p] : partial) {
    if (!p.weight || !p.bias) {
      throw Error(ErrorKind::weights, "layer '" + name + "' needs both W and b entries");
    }
    weights.emplace(name, LayerWeights{std::move(*p.weight), std::move(*p.bias)});
  }
  NetworkGraph g(std::move(input_shape), std::move(layers), std::move(weights));
  if (auto findings = validate_graph(g); !findings.empty()) throw_findings(findings);
  return g;
}

NetworkGraph load_model(std::span<const std::uint8_t> manifest_bytes, std::span<const std::uint8_t> weight_bytes) {
  return load_model(std::string(manifest_bytes.begin(), manifest_bytes.end()), weight_bytes);
}

NetworkGraph load_model_files(const std::filesystem::path& manifest_path) {
  auto manifest = read_file_bytes(manifest_path);
  auto bin_path = manifest_path;
  bin_path.replace_extension(".bin");
  auto blob = read_file_bytes(bin_path);
  return load_model(std::span<const std::uint8_t>(manifest), blob);
}

SerializedModel save_model(const NetworkGraph& g) {
  SerializedModel out;
  json doc;
  doc["version"] = kManifestVersion;
  doc["input_shape"] = g.input_shape();
  doc["layers"] = json::array();
  doc["weights"] = json::array();
  for (const auto& l : g.layers()) {
    doc["layers"].push_back(layer_to_json(l));
    if (!l.has_weights()) continue;
    const auto& w = g.weights_for(l);
    for (const auto& [tag, t] : {std::pair<const char*, const Tensor*>{"W", &w.weight}, {"b", &w.bias}}) {
      doc["weights"].push_back({{"layer", l.name}, {"tensor", tag}, {"shape", t->shape()}, {"offset", out.weights.size()}});
      for (double v : t->data()) put_f32_le(out.weights, static_cast<float>(v));
    }
  }
  out.manifest = doc.dump(2) + "\n";
  return out;
}

void save_model_files(const NetworkGraph& g, const std::filesystem::path& manifest_path) {
  auto m = save_model(g);
  write_file_bytes(manifest_path, std::span<const std::uint8_t>(
                                      reinterpret_cast<const std::uint8_t*>(m.manifest.data()), m.manifest.size()));
  auto bin_path = manifest_path;
  bin_path.replace_extension(".bin");
  write_file_bytes(bin_path, m.weights);
}

// ---------------------------------------------------------------------------
// Kernels

Tensor dense_apply(const Tensor& weight, const Tensor* bias, const Tensor& x) {
  const auto out_dim = weight.shape()[0];
  const auto in_dim = weight.shape()[1];
  if (x.size() != in_dim) throw Error(ErrorKind::shape, "dense input has " + std::to_string(x.size()) +
                                                            " elements, expected " + std::to_string(in_dim));
  Tensor y(Shape{out_dim});
  auto w = weight.data();
  auto in = x.data();
  for (std::size_t o = 0; o < out_dim; ++o) {
    double acc = 0.0;
    const double* row = w.data() + o * in_dim;
    for (std::size_t i = 0; i < in_dim; ++i) acc += row[i] * in[i];
    y[o] = bias ? acc + (*bias)[o] : acc;
  }
  return y;
}

Tensor conv2d_apply(const Conv2dParams& p, const Tensor& weight, const Tensor* bias, const Tensor& x) {
  if (x.ndim() != 3 || x.shape()[0] != p.in_channels) {
    throw Error(ErrorKind::shape, "conv2d input " + shape_string(x.shape()) + " does not match in_channels");
  }
  const auto h = x.shape()[1];
  const auto w = x.shape()[2];
  const auto oh = (h + 2 * p.pad_h - p.kernel_h) / p.stride + 1;
  const auto ow = (w + 2 * p.pad_w - p.kernel_w) / p.stride + 1;
  Tensor y(Shape{p.out_channels, oh, ow});
  auto wt = weight.data();
  auto in = x.data();
  for (std::size_t oc = 0; oc < p.out_channels; ++oc) {
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t c = 0; c < ow; ++c) {
        double acc = 0.0;
        for (std::size_t ic = 0; ic < p.in_channels; ++ic) {
          for (std::size_t kr = 0; kr < p.kernel_h; ++kr) {
            // Padded coordinates; out-of-range taps read zero.
            const auto ir = r * p.stride + kr;
            if (ir < p.pad_h || ir - p.pad_h >= h) continue;
            for (std::size_t kc = 0; kc < p.kernel_w; ++kc) {
              const auto icol = c * p.stride + kc;
              if (icol < p.pad_w || icol - p.pad_w >= w) continue;
              acc += wt[((oc * p.in_channels + ic) * p.kernel_h + kr) * p.kernel_w + kc] *
                     in[(ic * h + (ir - p.pad_h)) * w + (icol - p.pad_w)];
            }
          }
        }
        y[(oc * oh + r) * ow + c] = bias ? acc + (*bias)[oc] : acc;
      }
    }
  }
  return y;
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.data()) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor maxpool2x2(const Tensor& x) {
  if (x.ndim() != 3 || x.shape()[1] % 2 != 0 || x.shape()[2] % 2 != 0) {
    throw Error(ErrorKind::shape, "maxpool2x2 needs [C,H,W] with even H, W; got " + shape_string(x.shape()));
  }
  const auto ch = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  Tensor y(Shape{ch, h / 2, w / 2});
  for (std::size_t c = 0; c < ch; ++c) {
    for (std::size_t r = 0; r < h / 2; ++r) {
      for (std::size_t q = 0; q < w / 2; ++q) {
        const auto base = (c * h + 2 * r) * w + 2 * q;
        y[(c * (h / 2) + r) * (w / 2) + q] =
            std::max(std::max(x[base], x[base + 1]), std::max(x[base + w], x[base + w + 1]));
      }
    }
  }
  return y;
}

Tensor flatten(const Tensor& x) { return x.reshaped(Shape{x.size()}); }

Tensor apply_mask(const Tensor& x, const Tensor& mask, double scale) {
  if (mask.shape() != x.shape()) {
    throw Error(ErrorKind::mask, "dropout mask " + shape_string(mask.shape()) + " does not match activation " +
                                     shape_string(x.shape()));
  }
  Tensor y = x;
  auto m = mask.data();
  auto d = y.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = d[i] * (m[i] * scale);
  return y;
}

void check_mask(const NetworkGraph& g, const MaskSet& mask) {
  const auto shapes = g.dropout_site_shapes();
  if (mask.sites.size() != shapes.size()) {
    throw Error(ErrorKind::mask, "mask set has " + std::to_string(mask.sites.size()) + " sites, graph has " +
                                     std::to_string(shapes.size()));
  }
  for (std::size_t s = 0; s < shapes.size(); ++s) {
    if (mask.sites[s].shape() != shapes[s]) {
      throw Error(ErrorKind::mask, "mask for dropout site " + std::to_string(s) + " has shape " +
                                       shape_string(mask.sites[s].shape()) + ", expected " + shape_string(shapes[s]));
    }
    for (double v : mask.sites[s].data()) {
      if (v != 0.0 && v != 1.0) throw Error(ErrorKind::mask, "mask values must be 0 or 1");
    }
  }
}

namespace {

Tensor forward_impl(const NetworkGraph& g, const Tensor& x, const MaskSet* mask, double scale) {
  if (x.shape() != g.input_shape()) {
    throw Error(ErrorKind::shape, "input " + shape_string(x.shape()) + " does not match model input " +
                                      shape_string(g.input_shape()));
  }
  Tensor a = x;
  std::size_t site = 0;
  for (const auto& l : g.layers()) {
    switch (l.kind) {
      case LayerKind::dense: {
        const auto& w = g.weights_for(l);
        a = dense_apply(w.weight, &w.bias, a);
        break;
      }
      case LayerKind::conv2d: {
        const auto& w = g.weights_for(l);
        a = conv2d_apply(l.conv, w.weight, &w.bias, a);
        break;
      }
      case LayerKind::relu: a = relu(a); break;
      case LayerKind::maxpool2x2: a = maxpool2x2(a); break;
      case LayerKind::flatten: a = flatten(a); break;
      case LayerKind::dropout:
        if (mask) {
          if (site >= mask->sites.size()) throw Error(ErrorKind::mask, "mask set has too few sites");
          for (double v : mask->sites[site].data()) {
            if (v != 0.0 && v != 1.0) throw Error(ErrorKind::mask, "mask values must be 0 or 1");
          }
          a = apply_mask(a, mask->sites[site], scale);
        }
        ++site;
        break;
    }
  }
  if (mask && site != mask->sites.size()) throw Error(ErrorKind::mask, "mask set has too many sites");
  return a;
}

}  // namespace

Tensor forward_deterministic(const NetworkGraph& g, const Tensor& x) { return forward_impl(g, x, nullptr, 1.0); }

Tensor forward_deterministic(const NetworkGraph& g, const Tensor& x, const MaskSet& mask, const DropoutConfig& cfg) {
  return forward_impl(g, x, &mask, cfg.scale());
}

}  // namespace uq
