#include "terradeep/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "terradeep/error.hpp"

namespace terradeep {

using nlohmann::json;

namespace {

LayerKind parse_layer_kind(const std::string& s) {
  for (LayerKind k : {LayerKind::dense, LayerKind::conv1d, LayerKind::conv2d, LayerKind::maxpool1d,
                      LayerKind::maxpool2d, LayerKind::dropout, LayerKind::flatten, LayerKind::activation}) {
    if (s == to_string(k)) return k;
  }
  throw FormatError("unknown layer kind '" + s + "'");
}

Activation parse_activation(const std::string& s) {
  for (Activation a : {Activation::relu, Activation::sigmoid, Activation::softmax}) {
    if (s == to_string(a)) return a;
  }
  throw FormatError("unknown activation '" + s + "'");
}

template <typename T>
T field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw FormatError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace

json to_json(const LayerSpec& l) {
  json j;
  j["kind"] = to_string(l.kind);
  switch (l.kind) {
    case LayerKind::dense: j["units"] = l.units; break;
    case LayerKind::conv1d:
      j["filters"] = l.units;
      j["width"] = l.kernel_w;
      break;
    case LayerKind::conv2d:
      j["filters"] = l.units;
      j["kernel"] = {l.kernel_h, l.kernel_w};
      break;
    case LayerKind::dropout: j["rate"] = l.rate; break;
    case LayerKind::activation: j["function"] = to_string(l.activation); break;
    default: break;
  }
  return j;
}

json to_json(const NetworkSpec& spec) {
  json layers = json::array();
  for (const LayerSpec& l : spec.layers) layers.push_back(to_json(l));
  return json{{"input_shape", spec.input_shape}, {"layers", layers}};
}

LayerSpec layer_spec_from_json(const json& j) {
  const LayerKind kind = parse_layer_kind(field<std::string>(j, "kind"));
  switch (kind) {
    case LayerKind::dense: return LayerSpec::dense(field<std::size_t>(j, "units"));
    case LayerKind::conv1d: return LayerSpec::conv1d(field<std::size_t>(j, "filters"), field<std::size_t>(j, "width"));
    case LayerKind::conv2d: {
      const auto k = field<std::vector<std::size_t>>(j, "kernel");
      if (k.size() != 2) throw FormatError("conv2d kernel must have two entries");
      return LayerSpec::conv2d(field<std::size_t>(j, "filters"), k[0], k[1]);
    }
    case LayerKind::maxpool1d: return LayerSpec::maxpool1d();
    case LayerKind::maxpool2d: return LayerSpec::maxpool2d();
    case LayerKind::dropout: return LayerSpec::dropout(field<double>(j, "rate"));
    case LayerKind::flatten: return LayerSpec::flatten();
    case LayerKind::activation: return LayerSpec::act(parse_activation(field<std::string>(j, "function")));
  }
  throw FormatError("unreachable layer kind");
}

NetworkSpec network_spec_from_json(const json& j) {
  NetworkSpec spec;
  spec.input_shape = field<std::vector<std::size_t>>(j, "input_shape");
  const json layers = field<json>(j, "layers");
  if (!layers.is_array()) throw FormatError("'layers' must be an array");
  for (const json& l : layers) spec.layers.push_back(layer_spec_from_json(l));
  try {
    validate(spec);
  } catch (const Error& e) {
    throw FormatError(std::string("invalid network spec: ") + e.what());
  }
  return spec;
}

json to_json(const SvmConfig& cfg) {
  return json{{"C", cfg.C}, {"gamma", cfg.gamma}, {"tol", cfg.tol}, {"max_passes", cfg.max_passes}};
}

SvmConfig svm_config_from_json(const json& j) {
  SvmConfig cfg;
  if (!j.is_object()) throw FormatError("SVM config must be an object");
  if (j.contains("C")) cfg.C = field<double>(j, "C");
  if (j.contains("gamma")) cfg.gamma = field<double>(j, "gamma");
  if (j.contains("tol")) cfg.tol = field<double>(j, "tol");
  if (j.contains("max_passes")) cfg.max_passes = field<std::size_t>(j, "max_passes");
  return cfg;
}

// ----- binary container -----------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

void put_f64(std::string& out, double d) {
  const std::uint64_t v = std::bit_cast<std::uint64_t>(d);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

class Reader {
 public:
  Reader(std::string_view bytes, const std::string& source) : bytes_(bytes), source_(source) {}

  std::string_view take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(source_ + ": truncated model file while reading " + what + " at byte " + std::to_string(pos_));
    }
    std::string_view s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32(const char* what) {
    const auto s = take(4, what);
    std::uint32_t v = 0;
    for (int b = 3; b >= 0; --b) v = (v << 8) | static_cast<unsigned char>(s[b]);
    return v;
  }
  double f64() {
    const auto s = take(8, "tensor values");
    std::uint64_t v = 0;
    for (int b = 7; b >= 0; --b) v = (v << 8) | static_cast<unsigned char>(s[b]);
    return std::bit_cast<double>(v);
  }
  bool done() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  const std::string& source_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_model(const ModelFile& file) {
  if (file.section.size() != 4) throw ParameterError("model section tag must be 4 bytes");
  std::string out = "TDML";
  put_u32(out, kModelFormatVersion);
  out += file.section;
  const std::string header = file.header.dump();
  put_u32(out, static_cast<std::uint32_t>(header.size()));
  out += header;
  put_u32(out, static_cast<std::uint32_t>(file.tensors.size()));
  for (const Tensor& t : file.tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t.values()) put_f64(out, v);
  }
  return out;
}

ModelFile decode_model(std::string_view bytes, const std::string& source) {
  Reader r(bytes, source);
  if (r.take(4, "magic") != "TDML") throw FormatError(source + ": not a TDML model file");
  const std::uint32_t version = r.u32("version");
  if (version != kModelFormatVersion) {
    throw FormatError(source + ": unsupported model format version " + std::to_string(version));
  }
  ModelFile file;
  file.section = std::string(r.take(4, "section tag"));
  if (file.section != kSectionNetwork && file.section != kSectionSvm) {
    throw FormatError(source + ": unknown section tag '" + file.section + "'");
  }
  const std::uint32_t header_len = r.u32("header length");
  const std::string_view header = r.take(header_len, "header");
  try {
    file.header = json::parse(header);
  } catch (const json::exception& e) {
    throw FormatError(source + ": malformed model header: " + e.what());
  }
  const std::uint32_t count = r.u32("tensor count");
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::uint32_t rank = r.u32("tensor rank");
    if (rank > 8) throw FormatError(source + ": tensor rank " + std::to_string(rank) + " is implausible");
    Shape shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = r.u32("tensor dims");
      n *= d;
    }
    if (n > r.remaining() / 8) throw FormatError(source + ": truncated model file in tensor " + std::to_string(t));
    std::vector<double> values(n);
    for (double& v : values) v = r.f64();
    file.tensors.emplace_back(std::move(shape), std::move(values));
  }
  if (!r.done()) throw FormatError(source + ": trailing bytes after the last tensor");
  return file;
}

void write_model_file(const std::filesystem::path& path, const ModelFile& file) {
  const std::string bytes = encode_model(file);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DatasetError("failed writing '" + path.string() + "'");
}

ModelFile read_model_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open model file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_model(ss.str(), path.string());
}

// ----- learner payloads -----------------------------------------------------

void append_network_state(const NetworkState& state, std::vector<Tensor>& out) {
  for (const auto* group : {&state.params, &state.grad_accum, &state.update_accum})
    for (const Tensor& t : *group) out.push_back(t);
}

NetworkState network_state_from(const NetworkSpec& spec, std::span<const Tensor> tensors, std::size_t& cursor) {
  const Network reference(spec);
  const std::size_t count = reference.state().params.size();
  if (tensors.size() - cursor < 3 * count) throw FormatError("model file holds too few parameter tensors");
  NetworkState state;
  for (auto* group : {&state.params, &state.grad_accum, &state.update_accum}) {
    for (std::size_t i = 0; i < count; ++i) {
      const Tensor& t = tensors[cursor++];
      if (t.shape() != reference.state().params[i].shape()) {
        throw FormatError("parameter tensor " + std::to_string(i) + " has shape " + to_string(t.shape()) +
                          ", spec needs " + to_string(reference.state().params[i].shape()));
      }
      group->push_back(t);
    }
  }
  return state;
}

json svm_header(const MulticlassSvmModel& model) {
  json pairs = json::array();
  json flags = json::array();
  for (std::size_t m = 0; m < model.pairs.size(); ++m) {
    pairs.push_back({model.pairs[m].first, model.pairs[m].second});
    flags.push_back({{"converged", model.machines[m].converged}, {"passes", model.machines[m].passes}});
  }
  return json{{"class_count", model.class_count}, {"pairs", pairs}, {"machines", flags}};
}

void append_svm_tensors(const MulticlassSvmModel& model, std::vector<Tensor>& out) {
  for (const BinarySvmModel& m : model.machines) {
    out.push_back(m.support);
    out.emplace_back(Shape{m.dual_coef.size()}, m.dual_coef);
    out.emplace_back(Shape{2}, std::vector<double>{m.bias, m.gamma});
  }
}

MulticlassSvmModel svm_model_from(const json& header, std::span<const Tensor> tensors, std::size_t& cursor) {
  MulticlassSvmModel model;
  model.class_count = field<std::size_t>(header, "class_count");
  const json pairs = field<json>(header, "pairs");
  const json flags = field<json>(header, "machines");
  if (!pairs.is_array() || !flags.is_array() || pairs.size() != flags.size()) {
    throw FormatError("SVM header pairs / machines mismatch");
  }
  if (tensors.size() - cursor < 3 * pairs.size()) throw FormatError("model file holds too few SVM tensors");
  for (std::size_t m = 0; m < pairs.size(); ++m) {
    const auto p = pairs[m].get<std::vector<int>>();
    if (p.size() != 2 || p[0] < 0 || p[1] < 0 || static_cast<std::size_t>(std::max(p[0], p[1])) >= model.class_count) {
      throw FormatError("invalid SVM class pair");
    }
    BinarySvmModel b;
    b.support = tensors[cursor++];
    const Tensor& coef = tensors[cursor++];
    const Tensor& scalars = tensors[cursor++];
    if (b.support.rank() != 2 || coef.rank() != 1 || coef.size() != b.support.dim(0) || scalars.size() != 2) {
      throw FormatError("malformed SVM machine tensors");
    }
    b.dual_coef.assign(coef.values().begin(), coef.values().end());
    b.bias = scalars[0];
    b.gamma = scalars[1];
    b.converged = field<bool>(flags[m], "converged");
    b.passes = field<std::size_t>(flags[m], "passes");
    model.pairs.emplace_back(p[0], p[1]);
    model.machines.push_back(std::move(b));
  }
  return model;
}

}  // namespace terradeep
