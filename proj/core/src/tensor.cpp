#include "dewp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dewp/errors.hpp"

namespace dewp {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

namespace {

using detail::TensorData;

thread_local Tape* g_active_tape = nullptr;

std::shared_ptr<TensorData> make_data(Shape shape, std::vector<double> values) {
  for (int d : shape) {
    if (d <= 0) throw DimensionError("non-positive dimension in shape " + shape_str(shape));
  }
  auto n = shape_numel(shape);
  if (static_cast<std::int64_t>(values.size()) != n) {
    throw DimensionError("shape " + shape_str(shape) + " expects " + std::to_string(n) +
                         " values, got " + std::to_string(values.size()));
  }
  auto d = std::make_shared<TensorData>();
  d->shape = std::move(shape);
  d->values = std::move(values);
  return d;
}

}  // namespace

// OpRecorder is the single gateway through which ops talk to the active tape.
class OpRecorder {
 public:
  static std::shared_ptr<TensorData> data(const Tensor& t) {
    if (!t.d_) throw ContractError("operation on an undefined tensor");
    return t.d_;
  }

  static Tensor wrap(std::shared_ptr<TensorData> d) { return Tensor(std::move(d)); }

  static bool should_record(std::initializer_list<const Tensor*> inputs) {
    if (g_active_tape == nullptr) return false;
    for (const Tensor* t : inputs) {
      if ((*t).d_ && (*t).d_->requires_grad) return true;
    }
    return false;
  }

  static void record(std::vector<std::shared_ptr<TensorData>> inputs,
                     std::shared_ptr<TensorData> output, std::function<void()> pull) {
    output->requires_grad = true;
    Tape::Node node;
    node.inputs = std::move(inputs);
    node.output = std::move(output);
    node.pull = std::move(pull);
    g_active_tape->nodes_.push_back(std::move(node));
  }

  static Tape*& active() { return g_active_tape; }
};

namespace {

void reset_grad(const std::shared_ptr<TensorData>& d) {
  d->grad.assign(d->values.size(), 0.0);
}

}  // namespace

// ---- Tensor --------------------------------------------------------------

Tensor Tensor::zeros(Shape shape) {
  auto n = shape_numel(shape);
  return Tensor(make_data(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), 0.0)));
}

Tensor Tensor::ones(Shape shape) { return full(std::move(shape), 1.0); }

Tensor Tensor::full(Shape shape, double value) {
  auto n = shape_numel(shape);
  return Tensor(
      make_data(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), value)));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  return Tensor(make_data(std::move(shape), std::move(values)));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

const Shape& Tensor::shape() const {
  if (!d_) throw ContractError("shape() on an undefined tensor");
  return d_->shape;
}

int Tensor::ndim() const { return static_cast<int>(shape().size()); }

int Tensor::dim(int axis) const {
  const Shape& s = shape();
  if (axis < 0 || axis >= static_cast<int>(s.size())) {
    throw ContractError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  return s[static_cast<std::size_t>(axis)];
}

std::int64_t Tensor::numel() const { return shape_numel(shape()); }

std::span<const double> Tensor::values() const {
  if (!d_) throw ContractError("values() on an undefined tensor");
  return d_->values;
}

std::span<double> Tensor::mutable_values() {
  if (!d_) throw ContractError("mutable_values() on an undefined tensor");
  return d_->values;
}

double Tensor::value() const {
  if (numel() != 1) throw ContractError("value() requires a scalar, shape is " + shape_str(shape()));
  return d_->values[0];
}

double Tensor::at(int i) const {
  if (ndim() != 1) throw ContractError("at(i) requires a 1-d tensor");
  if (i < 0 || i >= dim(0)) throw ContractError("index out of range");
  return d_->values[static_cast<std::size_t>(i)];
}

double Tensor::at(int i, int j) const {
  if (ndim() != 2) throw ContractError("at(i,j) requires a 2-d tensor");
  if (i < 0 || i >= dim(0) || j < 0 || j >= dim(1)) throw ContractError("index out of range");
  return d_->values[static_cast<std::size_t>(i) * static_cast<std::size_t>(dim(1)) +
                    static_cast<std::size_t>(j)];
}

Tensor& Tensor::set_requires_grad(bool on) {
  if (!d_) throw ContractError("set_requires_grad() on an undefined tensor");
  d_->requires_grad = on;
  return *this;
}

bool Tensor::requires_grad() const { return d_ && d_->requires_grad; }

bool Tensor::has_grad() const { return d_ && !d_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!d_) throw ContractError("grad() on an undefined tensor");
  return d_->grad;
}

Tensor Tensor::clone() const {
  if (!d_) return Tensor();
  return Tensor::from(d_->shape, d_->values);
}

// ---- Tape ----------------------------------------------------------------

TapeScope::TapeScope(Tape& tape) {
  previous_ = OpRecorder::active();
  OpRecorder::active() = &tape;
}

TapeScope::~TapeScope() { OpRecorder::active() = previous_; }

void Tape::backward(const Tensor& loss) {
  auto loss_data = OpRecorder::data(loss);
  if (loss_data->values.size() != 1) {
    throw ContractError("backward() requires a scalar loss, shape is " +
                        shape_str(loss_data->shape));
  }
  bool found = false;
  for (const Node& n : nodes_) {
    if (n.output == loss_data) found = true;
  }
  if (!found && !loss_data->requires_grad) {
    throw ContractError("backward() loss is not connected to this tape");
  }
  // Overwrite semantics: zero every gradient this tape touches, then sweep.
  for (const Node& n : nodes_) {
    reset_grad(n.output);
    for (const auto& in : n.inputs) reset_grad(in);
  }
  if (loss_data->grad.empty()) reset_grad(loss_data);
  loss_data->grad[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    it->pull();
  }
}

// ---- op helpers ------------------------------------------------------------

namespace {

void require_2d(const Tensor& t, const char* what) {
  if (t.ndim() != 2) {
    throw DimensionError(std::string(what) + " requires a 2-d tensor, got " +
                         shape_str(t.shape()));
  }
}

}  // namespace

// ---- ops -------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul lhs");
  require_2d(b, "matmul rhs");
  const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2) {
    throw DimensionError("matmul inner dimensions disagree: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  auto ad = OpRecorder::data(a);
  auto bd = OpRecorder::data(b);
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  const double* av = ad->values.data();
  const double* bv = bd->values.data();
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = bv + static_cast<std::size_t>(p) * n;
      double* orow = out.data() + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  Tensor result = Tensor::from({m, n}, std::move(out));
  if (OpRecorder::should_record({&a, &b})) {
    auto od = OpRecorder::data(result);
    OpRecorder::record({ad, bd}, od, [ad, bd, od, m, k, n]() {
      const double* g = od->grad.data();
      const double* av = ad->values.data();
      const double* bv = bd->values.data();
      double* ga = ad->grad.data();
      double* gb = bd->grad.data();
      // dA = G * B^T
      for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
          double acc = 0.0;
          for (int j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
          ga[i * k + p] += acc;
        }
      // dB = A^T * G
      for (int p = 0; p < k; ++p)
        for (int j = 0; j < n; ++j) {
          double acc = 0.0;
          for (int i = 0; i < m; ++i) acc += av[i * k + p] * g[i * n + j];
          gb[p * n + j] += acc;
        }
    });
  }
  return result;
}

Tensor transpose(const Tensor& a) {
  require_2d(a, "transpose");
  const int m = a.dim(0), n = a.dim(1);
  auto ad = OpRecorder::data(a);
  std::vector<double> out(static_cast<std::size_t>(m) * n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(j) * m + i] = ad->values[static_cast<std::size_t>(i) * n + j];
  Tensor result = Tensor::from({n, m}, std::move(out));
  if (OpRecorder::should_record({&a})) {
    auto od = OpRecorder::data(result);
    OpRecorder::record({ad}, od, [ad, od, m, n]() {
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
          ad->grad[static_cast<std::size_t>(i) * n + j] += od->grad[static_cast<std::size_t>(j) * m + i];
    });
  }
  return result;
}

Tensor conv1d(const Tensor& x, const Tensor& kernels, const Tensor& bias) {
  if (x.ndim() != 2) throw DimensionError("conv1d input must be (c_in, L), got " + shape_str(x.shape()));
  if (kernels.ndim() != 3) {
    throw DimensionError("conv1d kernels must be (c_out, c_in, k), got " + shape_str(kernels.shape()));
  }
  if (bias.ndim() != 1) throw DimensionError("conv1d bias must be (c_out,), got " + shape_str(bias.shape()));
  const int c_in = x.dim(0), L = x.dim(1);
  const int c_out = kernels.dim(0), kc_in = kernels.dim(1), k = kernels.dim(2);
  if (kc_in != c_in) {
    throw DimensionError("conv1d channel mismatch: input " + shape_str(x.shape()) + ", kernels " +
                         shape_str(kernels.shape()));
  }
  if (bias.dim(0) != c_out) {
    throw DimensionError("conv1d bias length " + std::to_string(bias.dim(0)) + " != c_out " +
                         std::to_string(c_out));
  }
  if (k % 2 == 0) throw ConfigError("conv1d kernel size must be odd, got " + std::to_string(k));
  const int pad = (k - 1) / 2;

  auto xd = OpRecorder::data(x);
  auto kd = OpRecorder::data(kernels);
  auto bd = OpRecorder::data(bias);
  std::vector<double> out(static_cast<std::size_t>(c_out) * L, 0.0);
  for (int o = 0; o < c_out; ++o) {
    for (int t = 0; t < L; ++t) {
      double acc = bd->values[static_cast<std::size_t>(o)];
      for (int i = 0; i < c_in; ++i) {
        const double* xrow = xd->values.data() + static_cast<std::size_t>(i) * L;
        const double* krow = kd->values.data() + (static_cast<std::size_t>(o) * c_in + i) * k;
        for (int tau = 0; tau < k; ++tau) {
          const int s = t + tau - pad;
          if (s >= 0 && s < L) acc += krow[tau] * xrow[s];
        }
      }
      out[static_cast<std::size_t>(o) * L + t] = acc;
    }
  }
  Tensor result = Tensor::from({c_out, L}, std::move(out));
  if (OpRecorder::should_record({&x, &kernels, &bias})) {
    auto od = OpRecorder::data(result);
    OpRecorder::record({xd, kd, bd}, od, [xd, kd, bd, od, c_in, c_out, L, k, pad]() {
      const double* g = od->grad.data();
      for (int o = 0; o < c_out; ++o) {
        const double* grow = g + static_cast<std::size_t>(o) * L;
        double gb = 0.0;
        for (int t = 0; t < L; ++t) gb += grow[t];
        bd->grad[static_cast<std::size_t>(o)] += gb;
        for (int i = 0; i < c_in; ++i) {
          const double* xrow = xd->values.data() + static_cast<std::size_t>(i) * L;
          const double* krow = kd->values.data() + (static_cast<std::size_t>(o) * c_in + i) * k;
          double* gxrow = xd->grad.data() + static_cast<std::size_t>(i) * L;
          double* gkrow = kd->grad.data() + (static_cast<std::size_t>(o) * c_in + i) * k;
          for (int tau = 0; tau < k; ++tau) {
            double gk = 0.0;
            for (int t = 0; t < L; ++t) {
              const int s = t + tau - pad;
              if (s >= 0 && s < L) {
                gk += grow[t] * xrow[s];
                gxrow[s] += grow[t] * krow[tau];
              }
            }
            gkrow[tau] += gk;
          }
        }
      }
    });
  }
  return result;
}

Tensor relu(const Tensor& x) {
  auto xd = OpRecorder::data(x);
  std::vector<double> out(xd->values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd->values[i] > 0.0 ? xd->values[i] : 0.0;
  Tensor result = Tensor::from(xd->shape, std::move(out));
  if (OpRecorder::should_record({&x})) {
    auto od = OpRecorder::data(result);
    OpRecorder::record({xd}, od, [xd, od]() {
      for (std::size_t i = 0; i < xd->grad.size(); ++i) {
        if (xd->values[i] > 0.0) xd->grad[i] += od->grad[i];
      }
    });
  }
  return result;
}

Tensor softmax_rows(const Tensor& x) {
  require_2d(x, "softmax_rows");
  const int m = x.dim(0), n = x.dim(1);
  auto xd = OpRecorder::data(x);
  std::vector<double> out(static_cast<std::size_t>(m) * n);
  for (int i = 0; i < m; ++i) {
    const double* row = xd->values.data() + static_cast<std::size_t>(i) * n;
    double* orow = out.data() + static_cast<std::size_t>(i) * n;
    double mx = row[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (int j = 0; j < n; ++j) {
      orow[j] = std::exp(row[j] - mx);
      z += orow[j];
    }
    for (int j = 0; j < n; ++j) orow[j] /= z;
  }
  Tensor result = Tensor::from({m, n}, std::move(out));
  if (OpRecorder::should_record({&x})) {
    auto od = OpRecorder::data(result);
    OpRecorder::record({xd}, od, [xd, od, m, n]() {
      for (int i = 0; i < m; ++i) {
        const double* y = od->values.data() + static_cast<std::size_t>(i) * n;
        const double* g = od->grad.data() + static_cast<std::size_t>(i) * n;
        double* gx = xd->grad.data() + static_cast<std::size_t>(i) * n;
        double dot = 0.0;
        for (int j = 0; j < n; ++j) dot += g[j] * y[j];
        for (int j = 0; j < n; ++j) gx[j] += y[j] * (g[j] - dot);
      }
    });
  }
  return result;
}

namespace {

enum class Binary { Add, Sub, Mul };

Tensor binary_op(const Tensor& a, const Tensor& b, Binary kind) {
  auto ad = OpRecorder::data(a);
  auto bd = OpRecorder::data(b);
  if (ad->shape != bd->shape) {
    throw DimensionError("elementwise op shape mismatch: " + shape_str(ad->shape) + " vs " +
                         shape_str(bd->shape));
  }
  std::vector<double> out(ad->values.size());
  switch (kind) {
    case Binary::Add:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad->values[i] + bd->values[i];
      break;
    case Binary::Sub:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad->values[i] - bd->values[i];
      break;
    case Binary::Mul:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad->values[i] * bd->values[i];
      break;
  }
  Tensor result = Tensor::from(ad->shape, std::move(out));
  if (OpRecorder::should_record({&a, &b})) {
    auto od = OpRecorder::data(result);
    OpRecorder::record({ad, bd}, od, [ad, bd, od, kind]() {
      switch (kind) {
        case Binary::Add:
          for (std::size_t i = 0; i < od->grad.size(); ++i) {
            ad->grad[i] += od->grad[i];
            bd->grad[i] += od->grad[i];
          }
          break;
        case Binary::Sub:
          for (std::size_t i = 0; i < od->grad.size(); ++i) {
            ad->grad[i] += od->grad[i];
            bd->grad[i] -= od->grad[i];
          }
          break;
        case Binary::Mul:
          for (std::size_t i = 0; i < od->grad.size(); ++i) {
            ad->grad[i] += od->grad[i] * bd->values[i];
            bd->grad[i] += od->grad[i] * ad->values[i];
          }
          break;
      }
    });
  }
  return result;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, Binary::Add); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, Binary::Sub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, Binary::Mul); }

Tensor scale(const Tensor& a, double c) {
  auto ad = OpRecorder::data(a);
  std::vector<double> out(ad->values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad->values[i] * c;
  Tensor result = Tensor::from(ad->shape, std::move(out));
  if (OpRecorder::should_record({&a})) {
    auto od = OpRecorder::data(result);
    OpRecorder::record({ad}, od, [ad, od, c]() {
      for (std::size_t i = 0; i < od->grad.size(); ++i) ad->grad[i] += od->grad[i] * c;
    });
  }
  return result;
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
  require_2d(x, "add_row_bias");
  if (bias.ndim() != 1 || bias.dim(0) != x.dim(1)) {
    throw DimensionError("add_row_bias: bias " + shape_str(bias.shape()) + " does not match " +
                         shape_str(x.shape()));
  }
  const int m = x.dim(0), n = x.dim(1);
  auto xd = OpRecorder::data(x);
  auto bd = OpRecorder::data(bias);
  std::vector<double> out(xd->values.size());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out[static_cast<std::size_t>(i) * n + j] = xd->values[static_cast<std::size_t>(i) * n + j] + bd->values[static_cast<std::size_t>(j)];
  Tensor result = Tensor::from({m, n}, std::move(out));
  if (OpRecorder::should_record({&x, &bias})) {
    auto od = OpRecorder::data(result);
    OpRecorder::record({xd, bd}, od, [xd, bd, od, m, n]() {
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          const double g = od->grad[static_cast<std::size_t>(i) * n + j];
          xd->grad[static_cast<std::size_t>(i) * n + j] += g;
          bd->grad[static_cast<std::size_t>(j)] += g;
        }
    });
  }
  return result;
}

Tensor add_col_bias(const Tensor& x, const Tensor& bias) {
  require_2d(x, "add_col_bias");
  if (bias.ndim() != 1 || bias.dim(0) != x.dim(0)) {
    throw DimensionError("add_col_bias: bias " + shape_str(bias.shape()) + " does not match " +
                         shape_str(x.shape()));
  }
  const int m = x.dim(0), n = x.dim(1);
  auto xd = OpRecorder::data(x);
  auto bd = OpRecorder::data(bias);
  std::vector<double> out(xd->values.size());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out[static_cast<std::size_t>(i) * n + j] = xd->values[static_cast<std::size_t>(i) * n + j] + bd->values[static_cast<std::size_t>(i)];
  Tensor result = Tensor::from({m, n}, std::move(out));
  if (OpRecorder::should_record({&x, &bias})) {
    auto od = OpRecorder::data(result);
    OpRecorder::record({xd, bd}, od, [xd, bd, od, m, n]() {
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          const double g = od->grad[static_cast<std::size_t>(i) * n + j];
          xd->grad[static_cast<std::size_t>(i) * n + j] += g;
          bd->grad[static_cast<std::size_t>(i)] += g;
        }
    });
  }
  return result;
}

Tensor slice_cols(const Tensor& x, int c0, int c1) {
  require_2d(x, "slice_cols");
  const int m = x.dim(0), n = x.dim(1);
  if (c0 < 0 || c1 > n || c0 >= c1) {
    throw DimensionError("slice_cols [" + std::to_string(c0) + ", " + std::to_string(c1) +
                         ") invalid for " + shape_str(x.shape()));
  }
  const int w = c1 - c0;
  auto xd = OpRecorder::data(x);
  std::vector<double> out(static_cast<std::size_t>(m) * w);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < w; ++j)
      out[static_cast<std::size_t>(i) * w + j] = xd->values[static_cast<std::size_t>(i) * n + c0 + j];
  Tensor result = Tensor::from({m, w}, std::move(out));
  if (OpRecorder::should_record({&x})) {
    auto od = OpRecorder::data(result);
    OpRecorder::record({xd}, od, [xd, od, m, n, w, c0]() {
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < w; ++j)
          xd->grad[static_cast<std::size_t>(i) * n + c0 + j] += od->grad[static_cast<std::size_t>(i) * w + j];
    });
  }
  return result;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_cols of zero tensors");
  const int m = parts.front().dim(0);
  int total = 0;
  for (const Tensor& p : parts) {
    require_2d(p, "concat_cols part");
    if (p.dim(0) != m) {
      throw DimensionError("concat_cols row mismatch: " + shape_str(p.shape()) + " vs " +
                           std::to_string(m) + " rows");
    }
    total += p.dim(1);
  }
  std::vector<std::shared_ptr<detail::TensorData>> ins;
  ins.reserve(parts.size());
  for (const Tensor& p : parts) ins.push_back(OpRecorder::data(p));
  std::vector<double> out(static_cast<std::size_t>(m) * total);
  int off = 0;
  for (const auto& pd : ins) {
    const int w = pd->shape[1];
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < w; ++j)
        out[static_cast<std::size_t>(i) * total + off + j] = pd->values[static_cast<std::size_t>(i) * w + j];
    off += w;
  }
  Tensor result = Tensor::from({m, total}, std::move(out));
  bool rec = false;
  for (const Tensor& p : parts) {
    if (OpRecorder::should_record({&p})) rec = true;
  }
  if (rec) {
    auto od = OpRecorder::data(result);
    OpRecorder::record(ins, od, [ins, od, m, total]() {
      int off = 0;
      for (const auto& pd : ins) {
        const int w = pd->shape[1];
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < w; ++j)
            pd->grad[static_cast<std::size_t>(i) * w + j] += od->grad[static_cast<std::size_t>(i) * total + off + j];
        off += w;
      }
    });
  }
  return result;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_rows of zero tensors");
  const int n = parts.front().dim(1);
  int total = 0;
  for (const Tensor& p : parts) {
    require_2d(p, "concat_rows part");
    if (p.dim(1) != n) {
      throw DimensionError("concat_rows column mismatch: " + shape_str(p.shape()) + " vs " +
                           std::to_string(n) + " columns");
    }
    total += p.dim(0);
  }
  std::vector<std::shared_ptr<detail::TensorData>> ins;
  ins.reserve(parts.size());
  for (const Tensor& p : parts) ins.push_back(OpRecorder::data(p));
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(total) * n);
  for (const auto& pd : ins) out.insert(out.end(), pd->values.begin(), pd->values.end());
  Tensor result = Tensor::from({total, n}, std::move(out));
  bool rec = false;
  for (const Tensor& p : parts) {
    if (OpRecorder::should_record({&p})) rec = true;
  }
  if (rec) {
    auto od = OpRecorder::data(result);
    OpRecorder::record(ins, od, [ins, od]() {
      std::size_t off = 0;
      for (const auto& pd : ins) {
        for (std::size_t i = 0; i < pd->grad.size(); ++i) pd->grad[i] += od->grad[off + i];
        off += pd->grad.size();
      }
    });
  }
  return result;
}

Tensor select_rows(const Tensor& table, const std::vector<int>& indices) {
  require_2d(table, "select_rows");
  const int rows = table.dim(0), w = table.dim(1);
  for (int idx : indices) {
    if (idx < 0 || idx >= rows) {
      throw ContractError("select_rows index " + std::to_string(idx) + " out of range [0, " +
                          std::to_string(rows) + ")");
    }
  }
  if (indices.empty()) throw ContractError("select_rows with empty index list");
  auto td = OpRecorder::data(table);
  const int m = static_cast<int>(indices.size());
  std::vector<double> out(static_cast<std::size_t>(m) * w);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < w; ++j)
      out[static_cast<std::size_t>(i) * w + j] = td->values[static_cast<std::size_t>(indices[static_cast<std::size_t>(i)]) * w + j];
  Tensor result = Tensor::from({m, w}, std::move(out));
  if (OpRecorder::should_record({&table})) {
    auto od = OpRecorder::data(result);
    auto idx = indices;
    OpRecorder::record({td}, od, [td, od, idx, w]() {
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (int j = 0; j < w; ++j)
          td->grad[static_cast<std::size_t>(idx[i]) * w + j] += od->grad[i * w + j];
    });
  }
  return result;
}

Tensor reshape(const Tensor& x, Shape shape) {
  auto xd = OpRecorder::data(x);
  if (shape_numel(shape) != static_cast<std::int64_t>(xd->values.size())) {
    throw DimensionError("reshape " + shape_str(xd->shape) + " -> " + shape_str(shape) +
                         " changes element count");
  }
  Tensor result = Tensor::from(std::move(shape), xd->values);
  if (OpRecorder::should_record({&x})) {
    auto od = OpRecorder::data(result);
    OpRecorder::record({xd}, od, [xd, od]() {
      for (std::size_t i = 0; i < xd->grad.size(); ++i) xd->grad[i] += od->grad[i];
    });
  }
  return result;
}

Tensor sum(const Tensor& x) {
  auto xd = OpRecorder::data(x);
  double acc = 0.0;
  for (double v : xd->values) acc += v;
  Tensor result = Tensor::scalar(acc);
  if (OpRecorder::should_record({&x})) {
    auto od = OpRecorder::data(result);
    OpRecorder::record({xd}, od, [xd, od]() {
      const double g = od->grad[0];
      for (std::size_t i = 0; i < xd->grad.size(); ++i) xd->grad[i] += g;
    });
  }
  return result;
}

Tensor mean(const Tensor& x) {
  const double n = static_cast<double>(x.numel());
  return scale(sum(x), 1.0 / n);
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double step) {
  if (step <= 0.0) throw ContractError("grad_check step must be positive");
  Tensor leaf = x.clone();
  leaf.set_requires_grad();
  std::vector<double> analytic;
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor y = f(leaf);
    if (y.numel() != 1) throw ContractError("grad_check requires a scalar-valued function");
    tape.backward(y);
    auto g = leaf.grad();
    analytic.assign(g.begin(), g.end());
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    Tensor xp = x.clone();
    Tensor xm = x.clone();
    xp.mutable_values()[i] += step;
    xm.mutable_values()[i] -= step;
    const double fp = f(xp).value();
    const double fm = f(xm).value();
    const double numeric = (fp - fm) / (2.0 * step);
    const double denom = std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace dewp
