#include "spcl/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "spcl/error.hpp"
#include "spcl/rng.hpp"

namespace spcl {

namespace {

constexpr const char* kCheckpointMagic = "spcl-ckpt v1";

Matrix column_sums(const Matrix& m) {
  Matrix out(1, m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto src = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) out(0, c) += src[c];
  }
  return out;
}

// x W + b, broadcasting b over rows.
Matrix affine(const Matrix& x, const DenseLayer& layer) {
  Matrix z = matmul(x, layer.weight);
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto dst = z.row(r);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += layer.bias(0, c);
  }
  return z;
}

Matrix relu(const Matrix& z) {
  Matrix a = z;
  for (double& v : a.data()) v = v > 0.0 ? v : 0.0;
  return a;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

MlpSpec spec_from_layers(const std::vector<DenseLayer>& layers) {
  MlpSpec spec;
  spec.input_dim = static_cast<int>(layers.front().weight.rows());
  spec.hidden_dims.clear();
  for (std::size_t i = 0; i + 1 < layers.size(); ++i)
    spec.hidden_dims.push_back(static_cast<int>(layers[i].weight.cols()));
  spec.num_classes = static_cast<int>(layers.back().weight.cols());
  return spec;
}

bool same_architecture(const MlpSpec& a, const MlpSpec& b) {
  return a.input_dim == b.input_dim && a.hidden_dims == b.hidden_dims &&
         a.num_classes == b.num_classes;
}

std::string describe(const MlpSpec& s) {
  std::string out = std::to_string(s.input_dim);
  for (int h : s.hidden_dims) out += "-" + std::to_string(h);
  return out + "-" + std::to_string(s.num_classes);
}

}  // namespace

void MlpSpec::validate() const {
  if (input_dim < 1) throw ValidationError("MlpSpec: input_dim must be at least 1");
  if (hidden_dims.empty()) throw ValidationError("MlpSpec: at least one hidden layer required");
  for (int h : hidden_dims)
    if (h < 1) throw ValidationError("MlpSpec: hidden widths must be at least 1");
  if (num_classes < 1) throw ValidationError("MlpSpec: num_classes must be at least 1");
}

Gradients& Gradients::operator*=(double s) noexcept {
  for (auto& l : layers) {
    l.weight *= s;
    l.bias *= s;
  }
  return *this;
}

MlpModel MlpModel::init(const MlpSpec& spec) {
  spec.validate();
  MlpModel m;
  m.spec_ = spec;
  Rng rng(spec.init_seed);
  std::vector<int> widths{spec.input_dim};
  widths.insert(widths.end(), spec.hidden_dims.begin(), spec.hidden_dims.end());
  widths.push_back(spec.num_classes);
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const auto fan_in = static_cast<std::size_t>(widths[i]);
    const auto fan_out = static_cast<std::size_t>(widths[i + 1]);
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    DenseLayer layer{Matrix(fan_in, fan_out), Matrix(1, fan_out)};
    for (double& w : layer.weight.data()) w = scale * rng.gaussian();
    m.layers_.push_back(std::move(layer));
  }
  return m;
}

MlpModel MlpModel::from_layers(std::vector<DenseLayer> layers) {
  if (layers.size() < 2) throw ShapeError("MlpModel: need at least one hidden layer");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.bias.rows() != 1 || l.bias.cols() != l.weight.cols())
      throw ShapeError("MlpModel: layer " + std::to_string(i) + " bias shape " +
                       shape_string(l.bias) + " does not match weight " + shape_string(l.weight));
    if (i > 0 && layers[i - 1].weight.cols() != l.weight.rows())
      throw ShapeError("MlpModel: layer " + std::to_string(i) + " input width " +
                       std::to_string(l.weight.rows()) + " does not chain from " +
                       std::to_string(layers[i - 1].weight.cols()));
    if (l.weight.empty()) throw ShapeError("MlpModel: empty layer " + std::to_string(i));
  }
  MlpModel m;
  m.spec_ = spec_from_layers(layers);
  m.layers_ = std::move(layers);
  return m;
}

ForwardTrace MlpModel::forward(const Matrix& x) const {
  if (x.cols() != static_cast<std::size_t>(spec_.input_dim)) {
    throw ShapeError("forward: input has " + std::to_string(x.cols()) + " columns, model expects " +
                     std::to_string(spec_.input_dim));
  }
  ForwardTrace t;
  t.input = x;
  const Matrix* in = &t.input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    t.pre_activations.push_back(affine(*in, layers_[i]));
    if (i + 1 < layers_.size()) {
      t.activations.push_back(relu(t.pre_activations.back()));
      in = &t.activations.back();
    }
  }
  return t;
}

Matrix MlpModel::logits(const Matrix& x) const { return forward(x).logits(); }

Gradients MlpModel::backward(const ForwardTrace& trace, const Matrix& dloss_dlogits,
                             const Matrix* dloss_dfeatures) const {
  const std::size_t n = trace.input.rows();
  if (trace.pre_activations.size() != layers_.size()) throw ShapeError("backward: trace/model mismatch");
  if (dloss_dlogits.rows() != n || dloss_dlogits.cols() != static_cast<std::size_t>(spec_.num_classes))
    throw ShapeError("backward: dloss_dlogits is " + shape_string(dloss_dlogits) + ", expected " +
                     shape_string(trace.logits()));
  if (dloss_dfeatures && (dloss_dfeatures->rows() != n ||
                          dloss_dfeatures->cols() != trace.features().cols()))
    throw ShapeError("backward: dloss_dfeatures is " + shape_string(*dloss_dfeatures) +
                     ", expected " + shape_string(trace.features()));

  Gradients g;
  g.layers.resize(layers_.size());
  Matrix delta = dloss_dlogits;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const Matrix& in = i == 0 ? trace.input : trace.activations[i - 1];
    g.layers[i].weight = matmul(in.transposed(), delta);
    g.layers[i].bias = column_sums(delta);
    if (i == 0) break;
    Matrix dact = matmul(delta, layers_[i].weight.transposed());
    if (i == layers_.size() - 1 && dloss_dfeatures) dact += *dloss_dfeatures;
    const Matrix& z = trace.pre_activations[i - 1];
    for (std::size_t k = 0; k < dact.size(); ++k)
      if (!(z.data()[k] > 0.0)) dact.data()[k] = 0.0;
    delta = std::move(dact);
  }
  return g;
}

Gradients MlpModel::zeros_like() const {
  Gradients g;
  for (const auto& l : layers_)
    g.layers.push_back({Matrix(l.weight.rows(), l.weight.cols()), Matrix(1, l.bias.cols())});
  return g;
}

bool MlpModel::all_finite() const noexcept {
  for (const auto& l : layers_)
    if (!l.weight.all_finite() || !l.bias.all_finite()) return false;
  return true;
}

bool operator==(const MlpModel& a, const MlpModel& b) {
  if (a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t i = 0; i < a.layers_.size(); ++i)
    if (!(a.layers_[i].weight == b.layers_[i].weight) || !(a.layers_[i].bias == b.layers_[i].bias))
      return false;
  return true;
}

std::vector<int> argmax_rows(const Matrix& m) {
  std::vector<int> out(m.rows(), 0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c)
      if (row[c] > row[best]) best = c;
    out[r] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> predict(const MlpModel& model, const Matrix& x) {
  return argmax_rows(model.logits(x));
}

void save_checkpoint(const MlpModel& model, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << kCheckpointMagic << '\n' << model.num_layers() << '\n';
  for (const auto& l : model.layers()) os << l.weight.rows() << ' ' << l.weight.cols() << '\n';
  for (const auto& l : model.layers()) {
    bool first = true;
    for (const Matrix* m : {&l.weight, &l.bias}) {
      for (double v : m->data()) {
        if (!first) os << ' ';
        os << fmt(v);
        first = false;
      }
    }
    os << '\n';
  }
  if (!os) throw IoError("write failed for " + path.string());
}

MlpModel load_checkpoint(const std::filesystem::path& path, const std::optional<MlpSpec>& expected) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  const std::string where = path.string() + ": ";
  std::string line;
  if (!std::getline(is, line) || line != kCheckpointMagic)
    throw ParseError(where + "expected header '" + kCheckpointMagic + "', found '" + line + "'");

  std::size_t count = 0;
  if (!std::getline(is, line) || !(std::istringstream(line) >> count) || count < 2)
    throw ParseError(where + "invalid layer count line '" + line + "'");

  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t r = 0, c = 0;
    if (!std::getline(is, line) || !(std::istringstream(line) >> r >> c))
      throw ParseError(where + "missing or invalid shape line for layer " + std::to_string(i));
    shapes.emplace_back(r, c);
  }

  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i < count; ++i) {
    const auto [r, c] = shapes[i];
    const std::size_t want = r * c + c;
    std::vector<double> values;
    if (std::getline(is, line)) {
      std::istringstream ls(line);
      for (std::string tok; ls >> tok;) {
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end != tok.c_str() + tok.size())
          throw ParseError(where + "layer " + std::to_string(i) + ": invalid real '" + tok + "'");
        values.push_back(v);
      }
    }
    if (values.size() != want)
      throw ParseError(where + "layer " + std::to_string(i) + ": expected " + std::to_string(want) +
                       " parameters, found " + std::to_string(values.size()));
    std::vector<double> w(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(r * c));
    std::vector<double> b(values.begin() + static_cast<std::ptrdiff_t>(r * c), values.end());
    layers.push_back({Matrix(r, c, std::move(w)), Matrix(1, c, std::move(b))});
  }

  MlpModel model = MlpModel::from_layers(std::move(layers));
  if (expected && !same_architecture(*expected, model.spec())) {
    throw ShapeError(where + "checkpoint architecture " + describe(model.spec()) +
                     " does not match expected " + describe(*expected));
  }
  return model;
}

}  // namespace spcl
