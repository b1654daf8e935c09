#include "alma/model.hpp"

#include <charconv>
#include <map>
#include <sstream>

#include "alma/errors.hpp"
#include "binary_io.hpp"

namespace alma {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

[[noreturn]] void layer_error(std::size_t i, const Layer& layer, const std::string& msg) {
  throw ShapeError("layer " + std::to_string(i) + " (" + layer_name(layer) + "): " + msg);
}

Shape infer_output_shape(std::size_t i, const Layer& layer, const Shape& in) {
  return std::visit(
      overloaded{
          [&](const Dense& d) -> Shape {
            if (in.size() != 1) layer_error(i, layer, "expects a vector input, got " + shape_to_string(in));
            if (d.in_features != in[0]) {
              layer_error(i, layer, "in_features " + std::to_string(d.in_features) + " does not match input " +
                                        shape_to_string(in));
            }
            if (d.out_features == 0) layer_error(i, layer, "out_features must be positive");
            if (d.weights.size() != d.in_features * d.out_features || d.bias.size() != d.out_features) {
              layer_error(i, layer, "parameter block sizes do not match declared features");
            }
            return {d.out_features};
          },
          [&](const Conv2d& c) -> Shape {
            if (in.size() != 3) layer_error(i, layer, "expects (C,H,W) input, got " + shape_to_string(in));
            if (c.in_channels != in[0]) layer_error(i, layer, "in_channels does not match input " + shape_to_string(in));
            if (c.out_channels == 0 || c.kernel_h == 0 || c.kernel_w == 0 || c.stride == 0) {
              layer_error(i, layer, "channels, kernel and stride must be positive");
            }
            const std::size_t ph = in[1] + 2 * c.padding;
            const std::size_t pw = in[2] + 2 * c.padding;
            if (ph < c.kernel_h || pw < c.kernel_w) layer_error(i, layer, "kernel larger than padded input");
            if (c.weights.size() != c.out_channels * c.in_channels * c.kernel_h * c.kernel_w ||
                c.bias.size() != c.out_channels) {
              layer_error(i, layer, "parameter block sizes do not match declared shape");
            }
            return {c.out_channels, (ph - c.kernel_h) / c.stride + 1, (pw - c.kernel_w) / c.stride + 1};
          },
          [&](const ReLU&) -> Shape { return in; },
          [&](const MaxPool2d& p) -> Shape {
            if (in.size() != 3) layer_error(i, layer, "expects (C,H,W) input, got " + shape_to_string(in));
            if (p.kernel == 0 || p.stride == 0) layer_error(i, layer, "kernel and stride must be positive");
            if (in[1] < p.kernel || in[2] < p.kernel) layer_error(i, layer, "pooling window larger than input");
            return {in[0], (in[1] - p.kernel) / p.stride + 1, (in[2] - p.kernel) / p.stride + 1};
          },
          [&](const Flatten&) -> Shape { return {shape_size(in)}; },
      },
      layer);
}

// ---- per-layer kernels -----------------------------------------------------

void dense_forward(const Dense& d, const Tensor& in, Tensor& out) {
  const double* x = in.raw();
  for (std::size_t o = 0; o < d.out_features; ++o) {
    const double* w = d.weights.data() + o * d.in_features;
    double s = d.bias[o];
    for (std::size_t i = 0; i < d.in_features; ++i) s += w[i] * x[i];
    out[o] = s;
  }
}

void dense_backward(const Dense& d, const Tensor& in, const Tensor& gout, Tensor& gin, double* gw, double* gb) {
  for (std::size_t o = 0; o < d.out_features; ++o) {
    const double g = gout[o];
    if (g == 0.0) continue;
    const double* w = d.weights.data() + o * d.in_features;
    for (std::size_t i = 0; i < d.in_features; ++i) gin[i] += w[i] * g;
    if (gw) {
      double* row = gw + o * d.in_features;
      for (std::size_t i = 0; i < d.in_features; ++i) row[i] += in[i] * g;
    }
    if (gb) gb[o] += g;
  }
}

struct ConvGeometry {
  std::size_t C, H, W, OH, OW;
};

ConvGeometry conv_geometry(const Shape& in, const Shape& out) {
  return {in[0], in[1], in[2], out[1], out[2]};
}

void conv_forward(const Conv2d& c, const Tensor& in, Tensor& out) {
  const auto g = conv_geometry(in.shape(), out.shape());
  const long pad = static_cast<long>(c.padding);
  for (std::size_t oc = 0; oc < c.out_channels; ++oc) {
    for (std::size_t oh = 0; oh < g.OH; ++oh) {
      for (std::size_t ow = 0; ow < g.OW; ++ow) {
        double s = c.bias[oc];
        for (std::size_t ic = 0; ic < g.C; ++ic) {
          for (std::size_t kh = 0; kh < c.kernel_h; ++kh) {
            const long ih = static_cast<long>(oh * c.stride + kh) - pad;
            if (ih < 0 || ih >= static_cast<long>(g.H)) continue;
            for (std::size_t kw = 0; kw < c.kernel_w; ++kw) {
              const long iw = static_cast<long>(ow * c.stride + kw) - pad;
              if (iw < 0 || iw >= static_cast<long>(g.W)) continue;
              s += c.weights[((oc * g.C + ic) * c.kernel_h + kh) * c.kernel_w + kw] *
                   in[(ic * g.H + static_cast<std::size_t>(ih)) * g.W + static_cast<std::size_t>(iw)];
            }
          }
        }
        out[(oc * g.OH + oh) * g.OW + ow] = s;
      }
    }
  }
}

void conv_backward(const Conv2d& c, const Tensor& in, const Tensor& gout, Tensor& gin, double* gw, double* gb) {
  const auto g = conv_geometry(in.shape(), gout.shape());
  const long pad = static_cast<long>(c.padding);
  for (std::size_t oc = 0; oc < c.out_channels; ++oc) {
    for (std::size_t oh = 0; oh < g.OH; ++oh) {
      for (std::size_t ow = 0; ow < g.OW; ++ow) {
        const double go = gout[(oc * g.OH + oh) * g.OW + ow];
        if (go == 0.0) continue;
        if (gb) gb[oc] += go;
        for (std::size_t ic = 0; ic < g.C; ++ic) {
          for (std::size_t kh = 0; kh < c.kernel_h; ++kh) {
            const long ih = static_cast<long>(oh * c.stride + kh) - pad;
            if (ih < 0 || ih >= static_cast<long>(g.H)) continue;
            for (std::size_t kw = 0; kw < c.kernel_w; ++kw) {
              const long iw = static_cast<long>(ow * c.stride + kw) - pad;
              if (iw < 0 || iw >= static_cast<long>(g.W)) continue;
              const std::size_t wi = ((oc * g.C + ic) * c.kernel_h + kh) * c.kernel_w + kw;
              const std::size_t xi = (ic * g.H + static_cast<std::size_t>(ih)) * g.W + static_cast<std::size_t>(iw);
              gin[xi] += c.weights[wi] * go;
              if (gw) gw[wi] += in[xi] * go;
            }
          }
        }
      }
    }
  }
}

// Returns the flat input index of the window maximum (first in row-major order).
std::size_t pool_argmax(const MaxPool2d& p, const Tensor& in, std::size_t ch, std::size_t oh, std::size_t ow) {
  const std::size_t H = in.shape()[1];
  const std::size_t W = in.shape()[2];
  std::size_t best = (ch * H + oh * p.stride) * W + ow * p.stride;
  for (std::size_t kh = 0; kh < p.kernel; ++kh) {
    for (std::size_t kw = 0; kw < p.kernel; ++kw) {
      const std::size_t idx = (ch * H + oh * p.stride + kh) * W + ow * p.stride + kw;
      if (in[idx] > in[best]) best = idx;
    }
  }
  return best;
}

void pool_forward(const MaxPool2d& p, const Tensor& in, Tensor& out) {
  const auto& os = out.shape();
  for (std::size_t ch = 0; ch < os[0]; ++ch)
    for (std::size_t oh = 0; oh < os[1]; ++oh)
      for (std::size_t ow = 0; ow < os[2]; ++ow) out[(ch * os[1] + oh) * os[2] + ow] = in[pool_argmax(p, in, ch, oh, ow)];
}

void pool_backward(const MaxPool2d& p, const Tensor& in, const Tensor& gout, Tensor& gin) {
  const auto& os = gout.shape();
  for (std::size_t ch = 0; ch < os[0]; ++ch)
    for (std::size_t oh = 0; oh < os[1]; ++oh)
      for (std::size_t ow = 0; ow < os[2]; ++ow)
        gin[pool_argmax(p, in, ch, oh, ow)] += gout[(ch * os[1] + oh) * os[2] + ow];
}

}  // namespace

std::string layer_name(const Layer& layer) {
  return std::visit(overloaded{[](const Dense&) { return std::string("dense"); },
                               [](const Conv2d&) { return std::string("conv2d"); },
                               [](const ReLU&) { return std::string("relu"); },
                               [](const MaxPool2d&) { return std::string("maxpool2d"); },
                               [](const Flatten&) { return std::string("flatten"); }},
                    layer);
}

Model::Model(Shape input_shape, std::vector<Layer> layers)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
  if (layers_.empty()) throw ShapeError("model must contain at least one layer");
  if (input_shape_.empty()) throw ShapeError("model input shape is empty");
  for (auto d : input_shape_) {
    if (d == 0) throw ShapeError("model input shape has a zero dimension");
  }
  shapes_.push_back(input_shape_);
  for (std::size_t i = 0; i < layers_.size(); ++i) shapes_.push_back(infer_output_shape(i, layers_[i], shapes_.back()));
  const Shape& last = shapes_.back();
  if (last.size() != 1) {
    throw ShapeError("layer " + std::to_string(layers_.size() - 1) + " (" + layer_name(layers_.back()) +
                     "): final output must be a logit vector, got " + shape_to_string(last));
  }
  if (last[0] < 3) throw ShapeError("model must output at least 3 logits, got " + std::to_string(last[0]));
  num_classes_ = last[0];
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) {
    if (auto* d = std::get_if<Dense>(&l)) n += d->weights.size() + d->bias.size();
    if (auto* c = std::get_if<Conv2d>(&l)) n += c->weights.size() + c->bias.size();
  }
  return n;
}

std::vector<std::vector<double>*> Model::parameters() {
  std::vector<std::vector<double>*> out;
  for (auto& l : layers_) {
    if (auto* d = std::get_if<Dense>(&l)) {
      out.push_back(&d->weights);
      out.push_back(&d->bias);
    } else if (auto* c = std::get_if<Conv2d>(&l)) {
      out.push_back(&c->weights);
      out.push_back(&c->bias);
    }
  }
  return out;
}

bool operator==(const Model& a, const Model& b) {
  if (a.input_shape_ != b.input_shape_ || a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t i = 0; i < a.layers_.size(); ++i) {
    const Layer& x = a.layers_[i];
    const Layer& y = b.layers_[i];
    if (x.index() != y.index()) return false;
    bool same = std::visit(
        overloaded{
            [&](const Dense& d) {
              const auto& e = std::get<Dense>(y);
              return d.in_features == e.in_features && d.out_features == e.out_features && d.weights == e.weights &&
                     d.bias == e.bias;
            },
            [&](const Conv2d& c) {
              const auto& e = std::get<Conv2d>(y);
              return c.in_channels == e.in_channels && c.out_channels == e.out_channels && c.kernel_h == e.kernel_h &&
                     c.kernel_w == e.kernel_w && c.stride == e.stride && c.padding == e.padding &&
                     c.weights == e.weights && c.bias == e.bias;
            },
            [&](const MaxPool2d& p) {
              const auto& e = std::get<MaxPool2d>(y);
              return p.kernel == e.kernel && p.stride == e.stride;
            },
            [](const auto&) { return true; }},
        x);
    if (!same) return false;
  }
  return true;
}

ActivationTrace trace_forward(const Model& model, const Tensor& x) {
  if (x.shape() != model.input_shape()) {
    throw ShapeError("model input: expected " + shape_to_string(model.input_shape()) + ", got " +
                     shape_to_string(x.shape()));
  }
  ActivationTrace trace;
  trace.activations.reserve(model.layers().size() + 1);
  trace.activations.push_back(x);
  for (std::size_t i = 0; i < model.layers().size(); ++i) {
    const Tensor& in = trace.activations.back();
    Tensor out(model.output_shape(i));
    std::visit(overloaded{[&](const Dense& d) { dense_forward(d, in, out); },
                          [&](const Conv2d& c) { conv_forward(c, in, out); },
                          [&](const ReLU&) {
                            for (std::size_t k = 0; k < in.size(); ++k) out[k] = in[k] > 0.0 ? in[k] : 0.0;
                          },
                          [&](const MaxPool2d& p) { pool_forward(p, in, out); },
                          [&](const Flatten&) { out = in.reshaped(model.output_shape(i)); }},
               model.layers()[i]);
    trace.activations.push_back(std::move(out));
  }
  return trace;
}

Tensor backpropagate(const Model& model, const ActivationTrace& trace, const Tensor& upstream,
                     ParameterGradients* param_grads) {
  if (upstream.size() != model.num_classes()) {
    throw ShapeError("upstream gradient: expected " + std::to_string(model.num_classes()) + " values, got " +
                     std::to_string(upstream.size()));
  }
  // Parameter slot of each layer, walking backwards.
  std::size_t slot = 0;
  for (const auto& l : model.layers()) {
    if (std::holds_alternative<Dense>(l) || std::holds_alternative<Conv2d>(l)) slot += 2;
  }
  Tensor grad = upstream.reshaped(model.output_shape(model.layers().size() - 1));
  for (std::size_t i = model.layers().size(); i-- > 0;) {
    const Tensor& in = trace.activations[i];
    Tensor gin(model.input_shape_of(i));
    const Layer& layer = model.layers()[i];
    double* gw = nullptr;
    double* gb = nullptr;
    if (std::holds_alternative<Dense>(layer) || std::holds_alternative<Conv2d>(layer)) {
      slot -= 2;
      if (param_grads) {
        gw = (*param_grads)[slot].data();
        gb = (*param_grads)[slot + 1].data();
      }
    }
    std::visit(overloaded{[&](const Dense& d) { dense_backward(d, in, grad, gin, gw, gb); },
                          [&](const Conv2d& c) { conv_backward(c, in, grad, gin, gw, gb); },
                          [&](const ReLU&) {
                            for (std::size_t k = 0; k < in.size(); ++k) gin[k] = in[k] > 0.0 ? grad[k] : 0.0;
                          },
                          [&](const MaxPool2d& p) { pool_backward(p, in, grad, gin); },
                          [&](const Flatten&) { gin = grad.reshaped(model.input_shape_of(i)); }},
               layer);
    grad = std::move(gin);
  }
  return grad;
}

ParameterGradients zero_parameter_gradients(Model& model) {
  ParameterGradients g;
  for (auto* p : model.parameters()) g.emplace_back(p->size(), 0.0);
  return g;
}

Tensor forward(const Model& model, const Tensor& x, PropagationCounter& counter) {
  auto trace = trace_forward(model, x);
  ++counter.forwards;
  return std::move(trace.activations.back());
}

Tensor input_gradient(const Model& model, const Tensor& x, const Tensor& upstream, PropagationCounter& counter) {
  if (upstream.size() != model.num_classes()) {
    throw ShapeError("upstream gradient: expected " + std::to_string(model.num_classes()) + " values, got " +
                     std::to_string(upstream.size()));
  }
  auto trace = trace_forward(model, x);
  ++counter.forwards;
  Tensor g = backpropagate(model, trace, upstream);
  ++counter.backwards;
  return g;
}

ForwardBackward forward_backward(const Model& model, const Tensor& x,
                                 const std::function<Tensor(const Tensor&)>& upstream_of,
                                 PropagationCounter& counter) {
  auto trace = trace_forward(model, x);
  ++counter.forwards;
  ForwardBackward out;
  out.logits = trace.output();
  Tensor upstream = upstream_of(out.logits);
  out.input_grad = backpropagate(model, trace, upstream);
  ++counter.backwards;
  return out;
}

// ---- serialization ----------------------------------------------------------

namespace {

constexpr std::string_view kModelMagic = "ALMANN1\n";

std::string shape_csv(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out;
}

std::size_t parse_size(const std::string& text, std::size_t line_no, const std::string& key) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size()) {
    throw ParseError("line " + std::to_string(line_no) + ": '" + key + "' expects an unsigned integer, got '" + text +
                     "'");
  }
  return v;
}

Shape parse_shape(const std::string& text, std::size_t line_no) {
  Shape s;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) s.push_back(parse_size(part, line_no, "shape"));
  if (s.empty()) throw ParseError("line " + std::to_string(line_no) + ": empty shape");
  return s;
}

std::map<std::string, std::size_t> parse_fields(std::istringstream& ss, std::size_t line_no) {
  std::map<std::string, std::size_t> f;
  std::string tok;
  while (ss >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw ParseError("line " + std::to_string(line_no) + ": bad field '" + tok + "'");
    f[tok.substr(0, eq)] = parse_size(tok.substr(eq + 1), line_no, tok.substr(0, eq));
  }
  return f;
}

std::size_t field(const std::map<std::string, std::size_t>& f, const char* key, std::size_t line_no) {
  auto it = f.find(key);
  if (it == f.end()) throw ParseError("line " + std::to_string(line_no) + ": missing field '" + key + "'");
  return it->second;
}

}  // namespace

std::string serialize_model(const Model& model) {
  std::string out(kModelMagic);
  out += "input_shape=" + shape_csv(model.input_shape()) + "\n";
  out += "layers=" + std::to_string(model.layers().size()) + "\n";
  for (const auto& l : model.layers()) {
    out += "layer=" + layer_name(l);
    std::visit(overloaded{[&](const Dense& d) {
                            out += " in_features=" + std::to_string(d.in_features) +
                                   " out_features=" + std::to_string(d.out_features);
                          },
                          [&](const Conv2d& c) {
                            out += " in_channels=" + std::to_string(c.in_channels) +
                                   " out_channels=" + std::to_string(c.out_channels) +
                                   " kernel_h=" + std::to_string(c.kernel_h) + " kernel_w=" + std::to_string(c.kernel_w) +
                                   " stride=" + std::to_string(c.stride) + " padding=" + std::to_string(c.padding);
                          },
                          [&](const MaxPool2d& p) {
                            out += " kernel=" + std::to_string(p.kernel) + " stride=" + std::to_string(p.stride);
                          },
                          [](const auto&) {}},
               l);
    out += "\n";
  }
  out += "end\n";
  for (const auto& l : model.layers()) {
    if (auto* d = std::get_if<Dense>(&l)) {
      io::put_block(out, d->weights);
      io::put_block(out, d->bias);
    } else if (auto* c = std::get_if<Conv2d>(&l)) {
      io::put_block(out, c->weights);
      io::put_block(out, c->bias);
    }
  }
  return out;
}

Model parse_model(const std::string& bytes) {
  const io::Header header = io::parse_header(bytes, kModelMagic);
  Shape input_shape;
  std::size_t declared_layers = 0;
  bool have_count = false;
  std::vector<Layer> layers;
  for (const auto& line : header.lines) {
    if (line.key == "input_shape") {
      input_shape = parse_shape(line.value, line.line_no);
    } else if (line.key == "layers") {
      declared_layers = parse_size(line.value, line.line_no, "layers");
      have_count = true;
    } else if (line.key == "layer") {
      std::istringstream ss(line.value);
      std::string kind;
      ss >> kind;
      auto f = parse_fields(ss, line.line_no);
      if (kind == "dense") {
        Dense d;
        d.in_features = field(f, "in_features", line.line_no);
        d.out_features = field(f, "out_features", line.line_no);
        layers.emplace_back(std::move(d));
      } else if (kind == "conv2d") {
        Conv2d c;
        c.in_channels = field(f, "in_channels", line.line_no);
        c.out_channels = field(f, "out_channels", line.line_no);
        c.kernel_h = field(f, "kernel_h", line.line_no);
        c.kernel_w = field(f, "kernel_w", line.line_no);
        c.stride = field(f, "stride", line.line_no);
        c.padding = field(f, "padding", line.line_no);
        layers.emplace_back(std::move(c));
      } else if (kind == "relu") {
        layers.emplace_back(ReLU{});
      } else if (kind == "maxpool2d") {
        layers.emplace_back(MaxPool2d{field(f, "kernel", line.line_no), field(f, "stride", line.line_no)});
      } else if (kind == "flatten") {
        layers.emplace_back(Flatten{});
      } else {
        throw ParseError("line " + std::to_string(line.line_no) + ": unknown layer kind '" + kind + "'");
      }
    } else {
      throw ParseError("line " + std::to_string(line.line_no) + ": unknown key '" + line.key + "'");
    }
  }
  if (input_shape.empty()) throw ParseError("header: missing input_shape");
  if (!have_count || declared_layers != layers.size()) {
    throw ParseError("header: layer count " + std::to_string(declared_layers) + " does not match " +
                     std::to_string(layers.size()) + " layer lines");
  }

  io::Reader reader(bytes, header.payload_offset);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string tag = "layer " + std::to_string(i);
    if (auto* d = std::get_if<Dense>(&layers[i])) {
      d->weights = reader.block(d->in_features * d->out_features, tag + " weights");
      d->bias = reader.block(d->out_features, tag + " bias");
    } else if (auto* c = std::get_if<Conv2d>(&layers[i])) {
      c->weights = reader.block(c->out_channels * c->in_channels * c->kernel_h * c->kernel_w, tag + " weights");
      c->bias = reader.block(c->out_channels, tag + " bias");
    }
  }
  if (!reader.at_end()) {
    throw ParseError("offset " + std::to_string(reader.offset()) + ": trailing bytes after last weight block");
  }
  return Model(std::move(input_shape), std::move(layers));
}

Model load_model(const std::filesystem::path& path) { return parse_model(io::read_file(path)); }

void save_model(const Model& model, const std::filesystem::path& path) {
  io::write_file(path, serialize_model(model));
}

}  // namespace alma
