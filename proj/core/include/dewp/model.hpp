#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dewp/basis.hpp"
#include "dewp/data.hpp"
#include "dewp/rng.hpp"
#include "dewp/tensor.hpp"

namespace dewp {

struct ModelConfig {
  int d = 0;                // lookback feature count (power excluded)
  int lookback = 24;        // L
  int horizon = 24;         // H
  int d_v = 512;            // hidden channel width
  int stacks = 5;           // M
  int conv_channels = 128;  // hidden width of the four conv layers
  int kernel_size = 3;      // odd
  int heads = 8;            // attention heads; must divide d_v
  int embed_dim_month = 4;
  int embed_dim_weekday = 4;
  int embed_dim_hour = 4;

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

/// Learnable calendar lookup tables.
struct EmbeddingTables {
  Tensor month;    // (12, embed_dim_month)
  Tensor weekday;  // (7, embed_dim_weekday)
  Tensor hour;     // (24, embed_dim_hour)
};

/// All learnable parameters of one stack.
struct StackParams {
  // variable expansion: four conv layers, channels d_v -> cc -> cc -> cc -> d_v
  std::vector<Tensor> conv_kernels;  // each (c_out, c_in, k)
  std::vector<Tensor> conv_biases;   // each (c_out)
  // time expansion: per-channel dense L -> L+H -> L+H
  Tensor w_z, b_z;      // (L+H, L), (L+H)
  Tensor w_rho, b_rho;  // (L+H, L+H), (L+H)
  // inference: per-token dense maps H -> d_v, then output map to horizon
  Tensor w_q, b_q;  // (d_v, H), (d_v)
  Tensor w_k, b_k;
  Tensor w_v, b_v;
  Tensor w_o, b_o;  // (H, d_v*d_v), (H)
};

struct StackDiagnostics {
  Tensor input;      // X^(stack) before the backcast subtraction
  Tensor backcast;   // (d_v, L)
  Tensor forecast;   // (d_v, H)
  Tensor inference;  // (H)
};

struct ForwardResult {
  Tensor prediction;  // (H) -- sum of per-stack inference outputs
  Tensor final_residual;  // (d_v, L) -- input minus all backcasts
  std::vector<StackDiagnostics> stacks;
};

// ---- block forwards --------------------------------------------------------

/// conv -> ReLU -> conv -> ReLU -> conv -> ReLU -> conv (no final activation).
/// Shape (d_v, L) is preserved end to end.
Tensor variable_expansion_forward(const Tensor& x, const StackParams& sp);

/// Two ReLU dense layers produce per-channel expansion coefficients of width
/// L+H; the first L coefficients weight the backcast basis, the last H the
/// forecast basis. Returns (backcast, forecast).
std::pair<Tensor, Tensor> time_expansion_forward(const Tensor& z, const StackParams& sp,
                                                 const BasisMatrices& basis);

/// Multi-head scaled dot-product self-attention over the d_v channel rows of
/// the forecast block, then a dense output map to one value per horizon step.
/// When attention_out is non-null it receives each head's (d_v, d_v)
/// row-stochastic weight matrix.
Tensor inference_forward(const Tensor& forecast, const StackParams& sp, int heads,
                         std::vector<Tensor>* attention_out = nullptr);

/// Stack-by-stack doubly residual composition: each stack consumes the
/// running residual, contributes its inference output to the prediction, and
/// passes input-minus-backcast to the next stack.
ForwardResult dewp_forward(const Tensor& x0, const std::vector<StackParams>& stacks,
                           const BasisMatrices& basis, int heads);

/// Mean over all entries of the squared error. Shapes must match exactly.
Tensor mse_loss(const Tensor& prediction, const Tensor& target);

// ---- the assembled model ---------------------------------------------------

class DewpModel {
 public:
  DewpModel() = default;
  /// Initializes all parameters: uniform(-1/sqrt(fan_in), +) for dense and
  /// conv weights, zeros for biases, uniform(-0.05, 0.05) for embeddings.
  DewpModel(ModelConfig config, std::uint64_t seed);

  /// Raw features + calendar lookups, concatenated per time step and
  /// projected to d_v channels. Output X^(0) has shape (d_v, L).
  Tensor input_embed(const WindowSample& sample) const;

  ForwardResult forward(const WindowSample& sample) const;

  /// Value-only prediction (no tape required).
  std::vector<double> predict(const WindowSample& sample) const;

  /// Stable traversal order; the same order defines checkpoints and
  /// optimizer state.
  std::vector<Tensor> parameters() const;
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;

  const ModelConfig& config() const { return config_; }
  const BasisMatrices& basis() const { return basis_; }
  const std::vector<StackParams>& stack_params() const { return stacks_; }

  // Input projection and embeddings. Public so tests can pin weights.
  Tensor feature_w, feature_b;  // (conv_channels, d), (conv_channels)
  Tensor input_w, input_b;      // (d_v, conv_channels + embed dims), (d_v)
  EmbeddingTables tables;

  std::vector<StackParams>& mutable_stacks() { return stacks_; }

 private:
  ModelConfig config_;
  BasisMatrices basis_;
  std::vector<StackParams> stacks_;
};

}  // namespace dewp
