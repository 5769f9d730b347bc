#include "dewp/model.hpp"

#include <cmath>

#include "dewp/errors.hpp"

namespace dewp {

void ModelConfig::validate() const {
  if (d < 1) throw ConfigError("model.d must be >= 1 (got " + std::to_string(d) + ")");
  if (lookback < 1) throw ConfigError("model.lookback must be >= 1");
  if (horizon < 1) throw ConfigError("model.horizon must be >= 1");
  if (d_v < 1) throw ConfigError("model.d_v must be >= 1");
  if (stacks < 1) throw ConfigError("model.stacks must be >= 1");
  if (conv_channels < 1) throw ConfigError("model.conv_channels must be >= 1");
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw ConfigError("model.kernel_size must be a positive odd number (got " +
                      std::to_string(kernel_size) + ")");
  }
  if (heads < 1) throw ConfigError("model.heads must be >= 1");
  if (d_v % heads != 0) {
    throw ConfigError("model.d_v (" + std::to_string(d_v) + ") must be divisible by model.heads (" +
                      std::to_string(heads) + ")");
  }
  if (embed_dim_month < 1 || embed_dim_weekday < 1 || embed_dim_hour < 1) {
    throw ConfigError("embedding widths must be >= 1");
  }
}

namespace {

Tensor init_dense(Rng& rng, int out_dim, int in_dim) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  std::vector<double> w(static_cast<std::size_t>(out_dim) * in_dim);
  for (double& v : w) v = rng.uniform(-bound, bound);
  Tensor t = Tensor::from({out_dim, in_dim}, std::move(w));
  t.set_requires_grad();
  return t;
}

Tensor init_conv(Rng& rng, int c_out, int c_in, int k) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(c_in * k));
  std::vector<double> w(static_cast<std::size_t>(c_out) * c_in * k);
  for (double& v : w) v = rng.uniform(-bound, bound);
  Tensor t = Tensor::from({c_out, c_in, k}, std::move(w));
  t.set_requires_grad();
  return t;
}

Tensor init_bias(int n) {
  Tensor t = Tensor::zeros({n});
  t.set_requires_grad();
  return t;
}

Tensor init_embedding(Rng& rng, int rows, int width) {
  std::vector<double> w(static_cast<std::size_t>(rows) * width);
  for (double& v : w) v = rng.uniform(-0.05, 0.05);
  Tensor t = Tensor::from({rows, width}, std::move(w));
  t.set_requires_grad();
  return t;
}

/// rows-as-tokens dense layer: x (m, in) -> x W^T + b, (m, out).
Tensor linear_rows(const Tensor& x, const Tensor& w, const Tensor& b) {
  return add_row_bias(matmul(x, transpose(w)), b);
}

}  // namespace

Tensor variable_expansion_forward(const Tensor& x, const StackParams& sp) {
  if (sp.conv_kernels.size() != 4 || sp.conv_biases.size() != 4) {
    throw ContractError("variable expansion expects exactly 4 conv layers");
  }
  Tensor h = x;
  for (std::size_t layer = 0; layer < 4; ++layer) {
    h = conv1d(h, sp.conv_kernels[layer], sp.conv_biases[layer]);
    if (layer + 1 < 4) h = relu(h);
  }
  return h;
}

std::pair<Tensor, Tensor> time_expansion_forward(const Tensor& z, const StackParams& sp,
                                                 const BasisMatrices& basis) {
  const int L = basis.backcast.dim(0);
  const int H = basis.forecast.dim(0);
  Tensor hidden = relu(linear_rows(z, sp.w_z, sp.b_z));
  Tensor rho = relu(linear_rows(hidden, sp.w_rho, sp.b_rho));  // (d_v, L+H)
  Tensor rho_b = slice_cols(rho, 0, L);
  Tensor rho_f = slice_cols(rho, L, L + H);
  Tensor backcast = matmul(rho_b, transpose(basis.backcast));
  Tensor forecast = matmul(rho_f, transpose(basis.forecast));
  return {backcast, forecast};
}

Tensor inference_forward(const Tensor& forecast, const StackParams& sp, int heads,
                         std::vector<Tensor>* attention_out) {
  const int d_v = forecast.dim(0);
  const int H = forecast.dim(1);
  if (heads < 1 || d_v % heads != 0) {
    throw ConfigError("attention heads (" + std::to_string(heads) + ") must divide d_v (" +
                      std::to_string(d_v) + ")");
  }
  const int d_k = d_v / heads;
  Tensor q = linear_rows(forecast, sp.w_q, sp.b_q);  // (d_v, d_v)
  Tensor k = linear_rows(forecast, sp.w_k, sp.b_k);
  Tensor v = linear_rows(forecast, sp.w_v, sp.b_v);
  std::vector<Tensor> head_outputs;
  head_outputs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    Tensor qh = slice_cols(q, h * d_k, (h + 1) * d_k);
    Tensor kh = slice_cols(k, h * d_k, (h + 1) * d_k);
    Tensor vh = slice_cols(v, h * d_k, (h + 1) * d_k);
    Tensor scores = scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(static_cast<double>(d_k)));
    Tensor weights = softmax_rows(scores);  // rows sum to 1
    if (attention_out != nullptr) attention_out->push_back(weights);
    head_outputs.push_back(matmul(weights, vh));
  }
  Tensor attentive = concat_cols(head_outputs);  // (d_v, d_v)
  Tensor flattened = reshape(transpose(attentive), {1, d_v * d_v});
  Tensor y = linear_rows(flattened, sp.w_o, sp.b_o);  // (1, H)
  return reshape(y, {H});
}

ForwardResult dewp_forward(const Tensor& x0, const std::vector<StackParams>& stacks,
                           const BasisMatrices& basis, int heads) {
  if (stacks.empty()) throw ContractError("dewp_forward requires at least one stack");
  ForwardResult result;
  result.stacks.reserve(stacks.size());
  Tensor residual = x0;
  Tensor prediction;
  for (const StackParams& sp : stacks) {
    Tensor expanded = variable_expansion_forward(residual, sp);
    auto [backcast, forecast] = time_expansion_forward(expanded, sp, basis);
    Tensor inferred = inference_forward(forecast, sp, heads);
    prediction = prediction.defined() ? add(prediction, inferred) : inferred;
    result.stacks.push_back(StackDiagnostics{residual, backcast, forecast, inferred});
    residual = sub(residual, backcast);
  }
  result.prediction = prediction;
  result.final_residual = residual;
  return result;
}

Tensor mse_loss(const Tensor& prediction, const Tensor& target) {
  if (prediction.shape() != target.shape()) {
    throw DimensionError("mse_loss shape mismatch: " + shape_str(prediction.shape()) + " vs " +
                         shape_str(target.shape()));
  }
  Tensor diff = sub(prediction, target);
  return mean(mul(diff, diff));
}

DewpModel::DewpModel(ModelConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  basis_ = build_basis(config_.lookback, config_.horizon);
  Rng rng(seed);

  const int cc = config_.conv_channels;
  const int d_v = config_.d_v;
  const int L = config_.lookback;
  const int H = config_.horizon;
  const int k = config_.kernel_size;
  const int concat_width =
      cc + config_.embed_dim_month + config_.embed_dim_weekday + config_.embed_dim_hour;

  feature_w = init_dense(rng, cc, config_.d);
  feature_b = init_bias(cc);
  tables.month = init_embedding(rng, 12, config_.embed_dim_month);
  tables.weekday = init_embedding(rng, 7, config_.embed_dim_weekday);
  tables.hour = init_embedding(rng, 24, config_.embed_dim_hour);
  input_w = init_dense(rng, d_v, concat_width);
  input_b = init_bias(d_v);

  stacks_.resize(static_cast<std::size_t>(config_.stacks));
  for (StackParams& sp : stacks_) {
    const int channels[5] = {d_v, cc, cc, cc, d_v};
    for (int layer = 0; layer < 4; ++layer) {
      sp.conv_kernels.push_back(init_conv(rng, channels[layer + 1], channels[layer], k));
      sp.conv_biases.push_back(init_bias(channels[layer + 1]));
    }
    sp.w_z = init_dense(rng, L + H, L);
    sp.b_z = init_bias(L + H);
    sp.w_rho = init_dense(rng, L + H, L + H);
    sp.b_rho = init_bias(L + H);
    sp.w_q = init_dense(rng, d_v, H);
    sp.b_q = init_bias(d_v);
    sp.w_k = init_dense(rng, d_v, H);
    sp.b_k = init_bias(d_v);
    sp.w_v = init_dense(rng, d_v, H);
    sp.b_v = init_bias(d_v);
    sp.w_o = init_dense(rng, H, d_v * d_v);
    sp.b_o = init_bias(H);
  }
}

Tensor DewpModel::input_embed(const WindowSample& sample) const {
  const int L = config_.lookback;
  if (static_cast<int>(sample.lookback.size()) != config_.d) {
    throw DimensionError("sample has " + std::to_string(sample.lookback.size()) +
                         " feature rows, model expects " + std::to_string(config_.d));
  }
  if (static_cast<int>(sample.time_features.size()) != L) {
    throw DimensionError("sample has " + std::to_string(sample.time_features.size()) +
                         " time steps, model expects " + std::to_string(L));
  }
  std::vector<double> raw;
  raw.reserve(static_cast<std::size_t>(config_.d) * L);
  for (const auto& row : sample.lookback) {
    if (static_cast<int>(row.size()) != L) {
      throw DimensionError("lookback row length " + std::to_string(row.size()) + " != lookback " +
                           std::to_string(L));
    }
    raw.insert(raw.end(), row.begin(), row.end());
  }
  Tensor x = Tensor::from({config_.d, L}, std::move(raw));

  Tensor projected = add_col_bias(matmul(feature_w, x), feature_b);  // (cc, L)

  std::vector<int> month_idx, weekday_idx, hour_idx;
  month_idx.reserve(static_cast<std::size_t>(L));
  weekday_idx.reserve(static_cast<std::size_t>(L));
  hour_idx.reserve(static_cast<std::size_t>(L));
  for (const TimeFeatures& tf : sample.time_features) {
    month_idx.push_back(tf.month_index);
    weekday_idx.push_back(tf.weekday_index);
    hour_idx.push_back(tf.hour_index);
  }
  Tensor month_e = transpose(select_rows(tables.month, month_idx));      // (e_m, L)
  Tensor weekday_e = transpose(select_rows(tables.weekday, weekday_idx));
  Tensor hour_e = transpose(select_rows(tables.hour, hour_idx));

  Tensor stacked = concat_rows({projected, month_e, weekday_e, hour_e});
  return add_col_bias(matmul(input_w, stacked), input_b);  // (d_v, L)
}

ForwardResult DewpModel::forward(const WindowSample& sample) const {
  Tensor x0 = input_embed(sample);
  return dewp_forward(x0, stacks_, basis_, config_.heads);
}

std::vector<double> DewpModel::predict(const WindowSample& sample) const {
  ForwardResult r = forward(sample);
  auto vals = r.prediction.values();
  return std::vector<double>(vals.begin(), vals.end());
}

std::vector<std::pair<std::string, Tensor>> DewpModel::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("feature_w", feature_w);
  out.emplace_back("feature_b", feature_b);
  out.emplace_back("embed_month", tables.month);
  out.emplace_back("embed_weekday", tables.weekday);
  out.emplace_back("embed_hour", tables.hour);
  out.emplace_back("input_w", input_w);
  out.emplace_back("input_b", input_b);
  for (std::size_t s = 0; s < stacks_.size(); ++s) {
    const StackParams& sp = stacks_[s];
    const std::string prefix = "stack" + std::to_string(s) + ".";
    for (std::size_t c = 0; c < sp.conv_kernels.size(); ++c) {
      out.emplace_back(prefix + "conv" + std::to_string(c) + ".kernel", sp.conv_kernels[c]);
      out.emplace_back(prefix + "conv" + std::to_string(c) + ".bias", sp.conv_biases[c]);
    }
    out.emplace_back(prefix + "w_z", sp.w_z);
    out.emplace_back(prefix + "b_z", sp.b_z);
    out.emplace_back(prefix + "w_rho", sp.w_rho);
    out.emplace_back(prefix + "b_rho", sp.b_rho);
    out.emplace_back(prefix + "w_q", sp.w_q);
    out.emplace_back(prefix + "b_q", sp.b_q);
    out.emplace_back(prefix + "w_k", sp.w_k);
    out.emplace_back(prefix + "b_k", sp.b_k);
    out.emplace_back(prefix + "w_v", sp.w_v);
    out.emplace_back(prefix + "b_v", sp.b_v);
    out.emplace_back(prefix + "w_o", sp.w_o);
    out.emplace_back(prefix + "b_o", sp.b_o);
  }
  return out;
}

std::vector<Tensor> DewpModel::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

}  // namespace dewp
