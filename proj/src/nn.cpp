#include "seal/nn.hpp"

#include "seal/errors.hpp"

#include <algorithm>
#include <cmath>

namespace seal::nn {

std::string to_string(Activation a) {
    return a == Activation::Relu ? "relu" : "identity";
}

Activation activation_from_string(const std::string& s) {
    if (s == "relu") {
        return Activation::Relu;
    }
    if (s == "identity") {
        return Activation::Identity;
    }
    throw ValidationError("unknown activation '" + s + "'");
}

MlpNet MlpNet::create(const std::vector<std::size_t>& dims, Activation hidden, Activation output,
                      double dropout_rate, Rng& rng) {
    if (dims.size() < 2) {
        throw ValidationError("an MLP needs at least input and output dims");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate <= 0.5)) {
        throw ValidationError("dropout rate must lie in [0, 0.5]");
    }
    MlpNet net;
    net.dropout_rate = dropout_rate;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        if (dims[l] == 0 || dims[l + 1] == 0) {
            throw ValidationError("layer dims must be positive");
        }
        DenseLayer layer;
        layer.activation = (l + 2 == dims.size()) ? output : hidden;
        layer.weight = Matrix(dims[l], dims[l + 1]);
        layer.bias.assign(dims[l + 1], 0.0);
        const double gain = layer.activation == Activation::Relu ? 6.0 : 3.0;
        const double limit = std::sqrt(gain / static_cast<double>(dims[l]));
        for (double& w : layer.weight.data()) {
            w = rng.uniform(-limit, limit);
        }
        net.layers.push_back(std::move(layer));
    }
    return net;
}

std::size_t MlpNet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) {
        n += l.weight.size() + l.bias.size();
    }
    return n;
}

std::vector<std::span<double>> MlpNet::parameter_blocks() {
    std::vector<std::span<double>> out;
    for (auto& l : layers) {
        out.emplace_back(l.weight.data());
        out.emplace_back(l.bias);
    }
    return out;
}

std::vector<std::span<const double>> MlpNet::parameter_blocks() const {
    std::vector<std::span<const double>> out;
    for (const auto& l : layers) {
        out.emplace_back(l.weight.data());
        out.emplace_back(l.bias);
    }
    return out;
}

void MlpNet::validate() const {
    if (layers.empty()) {
        throw ValidationError("MLP has no layers");
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].bias.size() != layers[l].out_dim()) {
            throw DimensionError("layer " + std::to_string(l) + " bias length does not match its output dim");
        }
        if (l > 0 && layers[l].in_dim() != layers[l - 1].out_dim()) {
            throw DimensionError("layer " + std::to_string(l) + " input dim does not chain");
        }
    }
    if (!(dropout_rate >= 0.0 && dropout_rate <= 0.5)) {
        throw ValidationError("dropout rate must lie in [0, 0.5]");
    }
}

nlohmann::json MlpNet::to_json() const {
    nlohmann::json layer_array = nlohmann::json::array();
    for (const auto& l : layers) {
        layer_array.push_back({{"in", l.in_dim()},
                               {"out", l.out_dim()},
                               {"activation", nn::to_string(l.activation)},
                               {"weight", l.weight.data()},
                               {"bias", l.bias}});
    }
    return {{"dropout", dropout_rate}, {"layers", layer_array}};
}

MlpNet MlpNet::from_json(const nlohmann::json& j) {
    MlpNet net;
    try {
        net.dropout_rate = j.at("dropout").get<double>();
        for (const auto& lj : j.at("layers")) {
            DenseLayer l;
            const auto in = lj.at("in").get<std::size_t>();
            const auto out = lj.at("out").get<std::size_t>();
            l.activation = activation_from_string(lj.at("activation").get<std::string>());
            l.weight = Matrix(in, out, lj.at("weight").get<std::vector<double>>());
            l.bias = lj.at("bias").get<std::vector<double>>();
            net.layers.push_back(std::move(l));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed network: ") + e.what());
    }
    net.validate();
    return net;
}

ForwardResult mlp_forward(const MlpNet& net, const Matrix& input, bool train_mode, Rng& rng) {
    if (input.cols() != net.input_dim()) {
        throw DimensionError("network expects " + std::to_string(net.input_dim()) + " inputs, got " +
                             std::to_string(input.cols()));
    }
    ForwardResult result;
    ForwardCache& cache = result.cache;
    cache.net = &net;
    const bool dropout = train_mode && net.dropout_rate > 0.0;
    const double keep = 1.0 - net.dropout_rate;

    Matrix x = input;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const DenseLayer& layer = net.layers[l];
        Matrix z = matmul(x, layer.weight);
        for (std::size_t i = 0; i < z.rows(); ++i) {
            auto row = z.row(i);
            for (std::size_t j = 0; j < row.size(); ++j) {
                row[j] += layer.bias[j];
            }
        }
        Matrix a = z;
        if (layer.activation == Activation::Relu) {
            for (double& v : a.data()) {
                v = v > 0.0 ? v : 0.0;
            }
        }
        const bool hidden = l + 1 < net.layers.size();
        if (hidden && dropout) {
            Matrix mask(a.rows(), a.cols());
            for (std::size_t k = 0; k < mask.size(); ++k) {
                mask.data()[k] = rng.uniform() < keep ? 1.0 / keep : 0.0;
                a.data()[k] *= mask.data()[k];
            }
            cache.dropout_masks.push_back(std::move(mask));
        } else if (hidden) {
            cache.dropout_masks.emplace_back();
        }
        cache.layer_inputs.push_back(std::move(x));
        cache.pre_activations.push_back(std::move(z));
        x = std::move(a);
    }
    result.output = std::move(x);
    return result;
}

Matrix mlp_predict(const MlpNet& net, const Matrix& input) {
    Rng unused(0);
    return mlp_forward(net, input, false, unused).output;
}

Gradients Gradients::zeros_like(const MlpNet& net) {
    Gradients g;
    for (const auto& l : net.layers) {
        g.weight.emplace_back(l.weight.rows(), l.weight.cols());
        g.bias.emplace_back(l.bias.size(), 0.0);
    }
    return g;
}

std::vector<std::span<double>> Gradients::blocks() {
    std::vector<std::span<double>> out;
    for (std::size_t l = 0; l < weight.size(); ++l) {
        out.emplace_back(weight[l].data());
        out.emplace_back(bias[l]);
    }
    return out;
}

std::vector<std::span<const double>> Gradients::blocks() const {
    std::vector<std::span<const double>> out;
    for (std::size_t l = 0; l < weight.size(); ++l) {
        out.emplace_back(weight[l].data());
        out.emplace_back(bias[l]);
    }
    return out;
}

BackwardResult mlp_backward(const MlpNet& net, const ForwardCache& cache, const Matrix& grad_output) {
    if (cache.net != &net || cache.layer_inputs.size() != net.layers.size()) {
        throw DimensionError("forward cache does not belong to this network");
    }
    const std::size_t batch = cache.layer_inputs.front().rows();
    if (grad_output.rows() != batch || grad_output.cols() != net.output_dim()) {
        throw DimensionError("output gradient shape does not match the cached forward pass");
    }
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        if (cache.layer_inputs[l].cols() != net.layers[l].in_dim() ||
            cache.pre_activations[l].cols() != net.layers[l].out_dim()) {
            throw DimensionError("stale forward cache: layer " + std::to_string(l) + " dims changed");
        }
    }

    BackwardResult result;
    result.grads = Gradients::zeros_like(net);
    Matrix delta = grad_output;
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const DenseLayer& layer = net.layers[li];
        if (li + 1 < net.layers.size() && !cache.dropout_masks[li].empty()) {
            const Matrix& mask = cache.dropout_masks[li];
            for (std::size_t k = 0; k < delta.size(); ++k) {
                delta.data()[k] *= mask.data()[k];
            }
        }
        if (layer.activation == Activation::Relu) {
            const Matrix& z = cache.pre_activations[li];
            for (std::size_t k = 0; k < delta.size(); ++k) {
                if (!(z.data()[k] > 0.0)) {
                    delta.data()[k] = 0.0;
                }
            }
        }
        result.grads.weight[li] = matmul_tn(cache.layer_inputs[li], delta);
        auto& gb = result.grads.bias[li];
        for (std::size_t i = 0; i < delta.rows(); ++i) {
            const auto row = delta.row(i);
            for (std::size_t j = 0; j < row.size(); ++j) {
                gb[j] += row[j];
            }
        }
        delta = matmul_nt(delta, layer.weight);
    }
    result.grad_input = std::move(delta);
    return result;
}

RAdamState RAdamState::create(const std::vector<std::span<double>>& params, const RAdamConfig& config) {
    RAdamState s;
    s.config = config;
    for (const auto& p : params) {
        s.first_moment.emplace_back(p.size(), 0.0);
        s.second_moment.emplace_back(p.size(), 0.0);
    }
    return s;
}

nlohmann::json RAdamState::to_json() const {
    return {{"beta1", config.beta1},       {"beta2", config.beta2},         {"eps", config.eps},
            {"lr", config.lr},             {"step", step},                  {"first_moment", first_moment},
            {"second_moment", second_moment}};
}

RAdamState RAdamState::from_json(const nlohmann::json& j) {
    RAdamState s;
    s.config.beta1 = j.at("beta1").get<double>();
    s.config.beta2 = j.at("beta2").get<double>();
    s.config.eps = j.at("eps").get<double>();
    s.config.lr = j.at("lr").get<double>();
    s.step = j.at("step").get<std::uint64_t>();
    s.first_moment = j.at("first_moment").get<std::vector<std::vector<double>>>();
    s.second_moment = j.at("second_moment").get<std::vector<std::vector<double>>>();
    return s;
}

double radam_rho(std::uint64_t t, double beta2) {
    const double rho_inf = 2.0 / (1.0 - beta2) - 1.0;
    const double b2t = std::pow(beta2, static_cast<double>(t));
    return rho_inf - 2.0 * static_cast<double>(t) * b2t / (1.0 - b2t);
}

RAdamStepInfo radam_step(RAdamState& state, const std::vector<std::span<double>>& params,
                         const std::vector<std::span<const double>>& grads, std::optional<double> lr) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
        throw DimensionError("optimizer state, parameters and gradients disagree in block count");
    }
    for (std::size_t b = 0; b < params.size(); ++b) {
        if (params[b].size() != grads[b].size() || params[b].size() != state.first_moment[b].size()) {
            throw DimensionError("parameter block " + std::to_string(b) + " shape mismatch");
        }
        for (const double g : grads[b]) {
            if (!std::isfinite(g)) {
                throw NumericError("non-finite gradient in parameter block " + std::to_string(b));
            }
        }
    }

    const RAdamConfig& c = state.config;
    const double step_lr = lr.value_or(c.lr);
    const std::uint64_t t = ++state.step;
    const double td = static_cast<double>(t);
    const double bias1 = 1.0 - std::pow(c.beta1, td);
    const double bias2 = 1.0 - std::pow(c.beta2, td);
    const double rho_inf = 2.0 / (1.0 - c.beta2) - 1.0;
    const double rho = radam_rho(t, c.beta2);

    RAdamStepInfo info{rho, rho > 4.0};
    double rect = 0.0;
    if (info.rectified) {
        rect = std::sqrt((rho - 4.0) * (rho - 2.0) * rho_inf / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho));
    }
    for (std::size_t b = 0; b < params.size(); ++b) {
        auto& m = state.first_moment[b];
        auto& v = state.second_moment[b];
        for (std::size_t i = 0; i < params[b].size(); ++i) {
            const double g = grads[b][i];
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
            const double m_hat = m[i] / bias1;
            if (info.rectified) {
                const double v_hat = std::sqrt(v[i] / bias2);
                params[b][i] -= step_lr * rect * m_hat / (v_hat + c.eps);
            } else {
                params[b][i] -= step_lr * m_hat;
            }
        }
    }
    return info;
}

void LrSchedule::validate() const {
    if (!(base_lr > 0.0)) {
        throw ValidationError("base learning rate must be positive");
    }
    if (!(gamma > 0.0 && gamma <= 1.0)) {
        throw ValidationError("lr decay gamma must lie in (0, 1]");
    }
}

double lr_at(const LrSchedule& schedule, std::uint64_t epoch) {
    return schedule.base_lr * std::pow(schedule.gamma, static_cast<double>(epoch));
}

GradCheckResult check_gradients(const std::vector<std::span<double>>& params,
                                const std::vector<std::span<const double>>& analytic,
                                const std::function<double()>& loss, double eps, double floor) {
    if (params.size() != analytic.size()) {
        throw DimensionError("gradient check: block count mismatch");
    }
    GradCheckResult r;
    for (std::size_t b = 0; b < params.size(); ++b) {
        if (params[b].size() != analytic[b].size()) {
            throw DimensionError("gradient check: block size mismatch");
        }
        for (std::size_t i = 0; i < params[b].size(); ++i) {
            const double saved = params[b][i];
            params[b][i] = saved + eps;
            const double up = loss();
            params[b][i] = saved - eps;
            const double down = loss();
            params[b][i] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double a = analytic[b][i];
            const double abs_err = std::abs(a - numeric);
            const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), floor});
            r.max_absolute_error = std::max(r.max_absolute_error, abs_err);
            r.max_relative_error = std::max(r.max_relative_error, rel);
            ++r.parameters_checked;
        }
    }
    return r;
}

GradCheckResult grad_check(MlpNet& net, const Matrix& input, const OutputLoss& loss, double eps) {
    Rng rng(0);
    auto fwd = mlp_forward(net, input, false, rng);
    Matrix grad_out(fwd.output.rows(), fwd.output.cols());
    loss(fwd.output, grad_out);
    const auto back = mlp_backward(net, fwd.cache, grad_out);
    Matrix scratch;
    const auto eval = [&] {
        const Matrix out = mlp_predict(net, input);
        scratch = Matrix(out.rows(), out.cols());
        return loss(out, scratch);
    };
    return check_gradients(net.parameter_blocks(), back.grads.blocks(), eval, eps);
}

}  // namespace seal::nn
