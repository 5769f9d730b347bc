#include "dewp/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "dewp/errors.hpp"
#include "dewp/rng.hpp"

namespace dewp {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0) throw ConfigError("train.beta1 must be in [0, 1)");
  if (beta2 < 0.0 || beta2 >= 1.0) throw ConfigError("train.beta2 must be in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("train.eps must be positive");
  if (max_epochs < 1) throw ConfigError("train.max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("train.patience must be >= 1");
  if (clip_norm < 0.0) throw ConfigError("train.clip_norm must be >= 0");
}

OptimizerState init_adam_state(const std::vector<Tensor>& params) {
  OptimizerState state;
  state.m.reserve(params.size());
  state.v.reserve(params.size());
  for (const Tensor& p : params) {
    state.m.emplace_back(static_cast<std::size_t>(p.numel()), 0.0);
    state.v.emplace_back(static_cast<std::size_t>(p.numel()), 0.0);
  }
  return state;
}

void adam_step(std::vector<Tensor>& params, OptimizerState& state, const TrainConfig& cfg) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ContractError("optimizer state covers " + std::to_string(state.m.size()) +
                        " parameters, model has " + std::to_string(params.size()));
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    auto g = p.grad();
    if (g.empty()) {
      throw ContractError("adam_step: parameter " + std::to_string(i) + " has no gradient");
    }
    if (g.size() != state.m[i].size()) {
      throw ContractError("adam_step: state size " + std::to_string(state.m[i].size()) +
                          " != parameter size " + std::to_string(g.size()));
    }
    auto values = p.mutable_values();
    double* m = state.m[i].data();
    double* v = state.v[i].data();
    for (std::size_t j = 0; j < g.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      values[j] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

Tensor DewpTrainable::forward_window(const WindowSample& sample) const {
  return model_->forward(sample).prediction;
}

std::vector<std::string> DewpTrainable::parameter_names() const {
  std::vector<std::string> names;
  for (auto& [name, t] : model_->named_parameters()) names.push_back(name);
  return names;
}

WindowDataset chronological_split(std::vector<WindowSample> windows, double fraction) {
  WindowDataset ds;
  const std::size_t n = windows.size();
  std::size_t val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction));
  if (n >= 2 && val == 0) val = 1;
  const std::size_t cut = n - val;
  ds.train.assign(windows.begin(), windows.begin() + static_cast<std::ptrdiff_t>(cut));
  ds.validation.assign(windows.begin() + static_cast<std::ptrdiff_t>(cut), windows.end());
  return ds;
}

namespace {

Tensor target_tensor(const WindowSample& sample) {
  return Tensor::from({static_cast<int>(sample.target.size())}, sample.target);
}

void check_finite(const TrainableModel& model, double loss_value) {
  if (std::isfinite(loss_value)) return;
  auto params = model.parameters();
  auto names = model.parameter_names();
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (double x : params[i].values()) {
      if (!std::isfinite(x)) {
        throw NumericError("non-finite loss; first non-finite parameter: " + names[i]);
      }
    }
    for (double x : params[i].grad()) {
      if (!std::isfinite(x)) {
        throw NumericError("non-finite loss; first non-finite gradient: " + names[i]);
      }
    }
  }
  throw NumericError("non-finite training loss");
}

void clip_gradients(std::vector<Tensor>& params, double clip_norm) {
  if (clip_norm <= 0.0) return;
  double sq = 0.0;
  for (Tensor& p : params) {
    for (double g : p.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm <= clip_norm) return;
  // Scaling grads in place: grad buffers are owned by the tensors.
  const double factor = clip_norm / norm;
  for (Tensor& p : params) {
    auto g = p.grad();
    auto* mut = const_cast<double*>(g.data());
    for (std::size_t i = 0; i < g.size(); ++i) mut[i] *= factor;
  }
}

std::vector<std::vector<double>> snapshot(const std::vector<Tensor>& params) {
  std::vector<std::vector<double>> out;
  out.reserve(params.size());
  for (const Tensor& p : params) {
    auto v = p.values();
    out.emplace_back(v.begin(), v.end());
  }
  return out;
}

void restore(std::vector<Tensor>& params, const std::vector<std::vector<double>>& snap) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].mutable_values();
    std::copy(snap[i].begin(), snap[i].end(), dst.begin());
  }
}

}  // namespace

double evaluate_mse(const TrainableModel& model, const std::vector<WindowSample>& windows) {
  if (windows.empty()) throw ContractError("evaluate_mse over an empty window set");
  double total = 0.0;
  std::int64_t count = 0;
  for (const WindowSample& w : windows) {
    Tensor pred = model.forward_window(w);
    auto pv = pred.values();
    for (std::size_t i = 0; i < pv.size(); ++i) {
      const double e = pv[i] - w.target[i];
      total += e * e;
    }
    count += static_cast<std::int64_t>(pv.size());
  }
  return total / static_cast<double>(count);
}

TrainReport train(TrainableModel& model, const WindowDataset& dataset, const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.train.empty()) throw ContractError("train: empty training window set");
  if (dataset.validation.empty()) throw ContractError("train: empty validation window set");

  auto params = model.parameters();
  OptimizerState state = init_adam_state(params);
  Rng rng(cfg.seed);

  TrainReport report;
  report.best_val_mse = std::numeric_limits<double>::infinity();
  auto best_params = snapshot(params);
  int epochs_since_best = 0;

  std::vector<std::size_t> order(dataset.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng.engine());

    double epoch_loss = 0.0;
    std::int64_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      Tape tape;
      TapeScope scope(tape);
      Tensor batch_loss;
      for (std::size_t i = begin; i < end; ++i) {
        const WindowSample& w = dataset.train[order[i]];
        Tensor loss = mse_loss(model.forward_window(w), target_tensor(w));
        batch_loss = batch_loss.defined() ? add(batch_loss, loss) : loss;
      }
      batch_loss = scale(batch_loss, 1.0 / static_cast<double>(end - begin));
      tape.backward(batch_loss);
      check_finite(model, batch_loss.value());
      clip_gradients(params, cfg.clip_norm);
      adam_step(params, state, cfg);
      epoch_loss += batch_loss.value();
      ++batches;
    }

    const double val_mse = evaluate_mse(model, dataset.validation);
    const auto t1 = std::chrono::steady_clock::now();
    EpochStats es;
    es.epoch = epoch;
    es.train_mse = epoch_loss / static_cast<double>(batches);
    es.val_mse = val_mse;
    es.seconds = std::chrono::duration<double>(t1 - t0).count();
    report.epochs.push_back(es);

    if (val_mse < report.best_val_mse) {
      report.best_val_mse = val_mse;
      report.best_epoch = epoch;
      best_params = snapshot(params);
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (epochs_since_best >= cfg.patience) {
        report.stop_reason = "early_stop";
        break;
      }
    }
  }
  if (report.stop_reason.empty()) report.stop_reason = "max_epochs";
  restore(params, best_params);
  return report;
}

std::string format_train_report(const TrainReport& report) {
  std::ostringstream os;
  os << "epoch,train_mse,val_mse,seconds\n";
  os.precision(17);
  for (const EpochStats& e : report.epochs) {
    os << e.epoch << "," << e.train_mse << "," << e.val_mse << "," << e.seconds << "\n";
  }
  os << "# best_epoch: " << report.best_epoch << "\n";
  os << "# best_val_mse: " << report.best_val_mse << "\n";
  os << "# stop_reason: " << report.stop_reason << "\n";
  return os.str();
}

void write_train_report(const TrainReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write train report to " + path);
  out << format_train_report(report);
}

}  // namespace dewp
