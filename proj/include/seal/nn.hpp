#pragma once

#include "seal/matrix.hpp"
#include "seal/rng.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace seal::nn {

using seal::Matrix;

enum class Activation { Identity, Relu };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// y = act(x W + b) with W stored in_dim x out_dim.
struct DenseLayer {
    Matrix weight;
    std::vector<double> bias;
    Activation activation = Activation::Identity;

    std::size_t in_dim() const { return weight.rows(); }
    std::size_t out_dim() const { return weight.cols(); }
};

/// Stack of dense layers. Dropout follows every layer except the last, in train mode only.
struct MlpNet {
    std::vector<DenseLayer> layers;
    double dropout_rate = 0.0;

    /// `dims` = {in, hidden..., out}; hidden layers use `hidden`, the last layer `output`.
    /// Weights are uniform in +-sqrt(6/fan_in) for ReLU layers and +-sqrt(3/fan_in) otherwise.
    static MlpNet create(const std::vector<std::size_t>& dims, Activation hidden, Activation output,
                         double dropout_rate, Rng& rng);

    std::size_t input_dim() const { return layers.front().in_dim(); }
    std::size_t output_dim() const { return layers.back().out_dim(); }
    std::size_t parameter_count() const;

    /// Weight then bias for each layer, in order.
    std::vector<std::span<double>> parameter_blocks();
    std::vector<std::span<const double>> parameter_blocks() const;

    nlohmann::json to_json() const;
    static MlpNet from_json(const nlohmann::json& j);

    void validate() const;
};

/// Everything mlp_backward needs, including the dropout masks actually used.
struct ForwardCache {
    const MlpNet* net = nullptr;
    std::vector<Matrix> layer_inputs;
    std::vector<Matrix> pre_activations;
    /// Per hidden layer; empty when no dropout was applied. Entries are 0 or 1/keep.
    std::vector<Matrix> dropout_masks;
};

struct ForwardResult {
    Matrix output;
    ForwardCache cache;
};

/// Affine -> activation -> inverted dropout (train mode, hidden layers only).
/// The generator is only consumed when dropout is active.
ForwardResult mlp_forward(const MlpNet& net, const Matrix& input, bool train_mode, Rng& rng);

/// Eval-mode forward without a cache.
Matrix mlp_predict(const MlpNet& net, const Matrix& input);

/// Gradients laid out like MlpNet::parameter_blocks.
struct Gradients {
    std::vector<Matrix> weight;
    std::vector<std::vector<double>> bias;

    static Gradients zeros_like(const MlpNet& net);
    std::vector<std::span<double>> blocks();
    std::vector<std::span<const double>> blocks() const;
};

struct BackwardResult {
    Gradients grads;
    Matrix grad_input;
};

/// Exact chain-rule gradients for the forward pass recorded in `cache`.
/// Throws DimensionError when the cache does not belong to this net or batch.
BackwardResult mlp_backward(const MlpNet& net, const ForwardCache& cache, const Matrix& grad_output);

struct RAdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double lr = 1e-3;
};

/// Rectified Adam state for a fixed list of parameter blocks.
struct RAdamState {
    RAdamConfig config;
    std::uint64_t step = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;

    static RAdamState create(const std::vector<std::span<double>>& params, const RAdamConfig& config);

    nlohmann::json to_json() const;
    static RAdamState from_json(const nlohmann::json& j);
};

/// Length of the approximated simple moving average at step t (1-based).
double radam_rho(std::uint64_t t, double beta2);

struct RAdamStepInfo {
    double rho = 0.0;
    bool rectified = false;
};

/// One RAdam update. The adaptive, variance-rectified step is used when rho_t > 4,
/// otherwise a bias-corrected momentum step. Non-finite gradients throw NumericError
/// before anything is modified. `lr` overrides config.lr (e.g. from a schedule).
RAdamStepInfo radam_step(RAdamState& state, const std::vector<std::span<double>>& params,
                         const std::vector<std::span<const double>>& grads, std::optional<double> lr = std::nullopt);

/// lr(epoch) = base_lr * gamma^epoch.
struct LrSchedule {
    double base_lr = 1e-3;
    double gamma = 1.0;

    void validate() const;
};

double lr_at(const LrSchedule& schedule, std::uint64_t epoch);

struct GradCheckResult {
    double max_relative_error = 0.0;
    double max_absolute_error = 0.0;
    std::size_t parameters_checked = 0;
};

/// Central-difference check of `analytic` against `loss` over every entry of `params`.
/// The relative error of an entry is |a - n| / max(|a|, |n|, floor).
GradCheckResult check_gradients(const std::vector<std::span<double>>& params,
                                const std::vector<std::span<const double>>& analytic,
                                const std::function<double()>& loss, double eps, double floor = 1e-7);

/// Loss on the net output: returns the value and writes dL/d(output).
using OutputLoss = std::function<double(const Matrix& output, Matrix& grad_output)>;

/// Eval-mode (deterministic) gradient check of a whole net on one input batch.
GradCheckResult grad_check(MlpNet& net, const Matrix& input, const OutputLoss& loss, double eps = 1e-5);

}  // namespace seal::nn
