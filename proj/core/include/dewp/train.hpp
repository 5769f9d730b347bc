#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dewp/data.hpp"
#include "dewp/model.hpp"
#include "dewp/tensor.hpp"

namespace dewp {

struct TrainConfig {
  int batch_size = 256;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int max_epochs = 50;
  int patience = 10;      // epochs without validation improvement before stopping
  double clip_norm = 0.0; // 0 disables gradient clipping
  std::uint64_t seed = 1;

  void validate() const;
};

/// First/second moment estimates per parameter plus the shared step counter.
struct OptimizerState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t t = 0;
};

OptimizerState init_adam_state(const std::vector<Tensor>& params);

/// One bias-corrected Adam update. Every parameter must carry a gradient of
/// matching shape (ContractError otherwise); state arrays must match the
/// parameter list they were initialized from.
void adam_step(std::vector<Tensor>& params, OptimizerState& state, const TrainConfig& cfg);

/// Anything the training loop can optimize: a forward pass per window plus
/// access to the learnable parameters.
class TrainableModel {
 public:
  virtual ~TrainableModel() = default;
  virtual Tensor forward_window(const WindowSample& sample) const = 0;
  virtual std::vector<Tensor> parameters() const = 0;
  virtual std::vector<std::string> parameter_names() const = 0;
};

/// Adapter exposing a DewpModel to the generic training loop.
class DewpTrainable : public TrainableModel {
 public:
  explicit DewpTrainable(DewpModel& model) : model_(&model) {}
  Tensor forward_window(const WindowSample& sample) const override;
  std::vector<Tensor> parameters() const override { return model_->parameters(); }
  std::vector<std::string> parameter_names() const override;
  DewpModel& model() const { return *model_; }

 private:
  DewpModel* model_;
};

struct WindowDataset {
  std::vector<WindowSample> train;
  std::vector<WindowSample> validation;
};

/// Chronological holdout: the final `fraction` of windows (by position)
/// becomes the validation set.
WindowDataset chronological_split(std::vector<WindowSample> windows, double fraction = 0.1);

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_mse = 0.0;
  double val_mse = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;
  double best_val_mse = 0.0;
  std::string stop_reason;  // "early_stop" | "max_epochs"
};

/// Mini-batch Adam on the MSE loss with patience-based early stopping.
/// Windows are reshuffled each epoch with a generator seeded from cfg.seed;
/// the returned model parameters are those of the best validation epoch.
/// Throws NumericError naming the first non-finite parameter or gradient if
/// the loss ever stops being finite.
TrainReport train(TrainableModel& model, const WindowDataset& dataset, const TrainConfig& cfg);

/// Mean squared error of the model over a window set, gradient-free.
double evaluate_mse(const TrainableModel& model, const std::vector<WindowSample>& windows);

/// TrainReport as its on-disk text form: a header line then
/// "epoch,train_mse,val_mse,seconds" records and trailing summary comments.
std::string format_train_report(const TrainReport& report);
void write_train_report(const TrainReport& report, const std::string& path);

}  // namespace dewp
