#include "seal/align.hpp"

#include "seal/csv.hpp"
#include "seal/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace seal::align {

namespace {

double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

struct CombinedLoss {
    double ce = 0.0;
    double bce = 0.0;
    Matrix grad;
};

// sigmoid(s) rounds to 0.5 for |s| below ~1e-16, so the default threshold is decided
// on the sign of the raw score.
bool activity_on(double score, double threshold) {
    return threshold == 0.5 ? score >= 0.0 : sigmoid(score) >= threshold;
}

CombinedLoss combined_loss(const Matrix& scores, const labels::EncodedTargets& targets, const Matrix& weights,
                           double lambda, const dataio::LabelSchema& schema) {
    const std::size_t n_ctx = schema.num_contexts();
    if (scores.cols() != schema.size() || targets.context.rows() != scores.rows() ||
        targets.activities.rows() != scores.rows()) {
        throw DimensionError("scores and targets are not aligned");
    }
    const auto ce = ce_loss(scores.col_slice(0, n_ctx), targets.context);
    const auto bce = bce_loss(scores.col_slice(n_ctx, scores.cols()), targets.activities, weights);
    CombinedLoss out{ce.value, bce.value, Matrix(scores.rows(), scores.cols())};
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        for (std::size_t c = 0; c < n_ctx; ++c) {
            out.grad(i, c) = ce.grad(i, c);
        }
        for (std::size_t a = 0; a < schema.num_activities(); ++a) {
            out.grad(i, n_ctx + a) = lambda * bce.grad(i, a);
        }
    }
    return out;
}

void append_blocks(std::vector<std::vector<double>>& out, const nn::Gradients& g) {
    for (const auto& block : g.blocks()) {
        out.emplace_back(block.begin(), block.end());
    }
}

void append_params(std::vector<std::span<double>>& out, nn::MlpNet& net) {
    for (const auto& block : net.parameter_blocks()) {
        out.push_back(block);
    }
}

nlohmann::json table_to_json(const labels::LabelEmbeddingTable& t) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : t.rows) {
        rows.push_back({{"label", r.label}, {"sentence", r.sentence}, {"embedding", r.embedding}});
    }
    return {{"dim", t.dim}, {"source", t.source}, {"rows", rows}};
}

labels::LabelEmbeddingTable table_from_json(const nlohmann::json& j) {
    labels::LabelEmbeddingTable t;
    t.dim = j.at("dim").get<std::size_t>();
    t.source = j.value("source", "");
    for (const auto& r : j.at("rows")) {
        t.rows.push_back({r.at("label").get<std::string>(), r.at("sentence").get<std::string>(),
                          r.at("embedding").get<std::vector<double>>()});
        if (t.rows.back().embedding.size() != t.dim) {
            throw ValidationError("checkpoint label table has inconsistent dims");
        }
    }
    return t;
}

/// Snapshot/restore of parameter values for best-epoch selection.
std::vector<std::vector<double>> copy_params(const std::vector<std::span<double>>& blocks) {
    std::vector<std::vector<double>> out;
    out.reserve(blocks.size());
    for (const auto& b : blocks) {
        out.emplace_back(b.begin(), b.end());
    }
    return out;
}

void restore_params(const std::vector<std::span<double>>& blocks, const std::vector<std::vector<double>>& saved) {
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        std::copy(saved[b].begin(), saved[b].end(), blocks[b].begin());
    }
}

template <typename Model>
double loss_only(const Model& model, const Matrix& features, const labels::EncodedTargets& targets,
                 const Matrix& weights, double lambda) {
    const auto loss = combined_loss(forward_scores(model, features), targets, weights, lambda, model.schema);
    return loss.ce + lambda * loss.bce;
}

labels::EncodedTargets gather_targets(const labels::EncodedTargets& t, std::span<const std::size_t> idx) {
    return {t.context.gather_rows(idx), t.activities.gather_rows(idx)};
}

template <typename Model>
TrainResult fit(Model& model, const dataio::Dataset& train_set, const dataio::Dataset& validation,
                const TrainConfig& config) {
    config.validate();
    if (train_set.size() == 0) {
        throw ValidationError("training set is empty");
    }
    if (train_set.feature_dim() != model.feature_dim()) {
        throw DimensionError("training features have dim " + std::to_string(train_set.feature_dim()) +
                             ", model expects " + std::to_string(model.feature_dim()));
    }
    const Matrix x_train = feature_matrix(train_set);
    const auto y_train = labels::encode_targets(train_set);
    const bool has_val = validation.size() > 0;
    const Matrix x_val = has_val ? feature_matrix(validation) : Matrix();
    const auto y_val = has_val ? labels::encode_targets(validation) : labels::EncodedTargets{};

    TrainResult result;
    result.positive_weights = positive_weights(y_train.activities, config.class_weights, config.weight_cap);
    const Matrix w_train = weight_matrix(y_train.activities, result.positive_weights);
    const Matrix w_val = has_val ? weight_matrix(y_val.activities, result.positive_weights) : Matrix();

    auto params = model.parameter_blocks();
    nn::RAdamState optimizer = nn::RAdamState::create(params, nn::RAdamConfig{.lr = config.lr});
    const nn::LrSchedule schedule{config.lr, config.lr_gamma};
    Rng rng(derive_seed(config.seed, "train"));

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> best_params = copy_params(params);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = nn::lr_at(schedule, epoch);
        rng.shuffle(order.begin(), order.end());
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            const std::span<const std::size_t> idx(order.data() + start, end - start);
            const Matrix xb = x_train.gather_rows(idx);
            const auto yb = gather_targets(y_train, idx);
            const Matrix wb = w_train.gather_rows(idx);
            auto obj = evaluate_objective(model, xb, yb, wb, config.lambda, true, rng);
            if (!std::isfinite(obj.loss)) {
                throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch starting " +
                                   std::to_string(start) + " (ce=" + csv::format_double(obj.ce) +
                                   ", bce=" + csv::format_double(obj.bce) + "); lower the learning rate");
            }
            std::vector<std::span<const double>> grads(obj.grads.begin(), obj.grads.end());
            nn::radam_step(optimizer, params, grads, lr);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        rec.train_loss = loss_only(model, x_train, y_train, w_train, config.lambda);
        rec.val_loss = has_val ? loss_only(model, x_val, y_val, w_val, config.lambda) : rec.train_loss;
        if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.val_loss)) {
            throw NumericError("non-finite loss after epoch " + std::to_string(epoch));
        }
        result.history.push_back(rec);
        if (rec.val_loss < best) {
            best = rec.val_loss;
            result.best_epoch = epoch;
            best_params = copy_params(params);
        }
    }
    restore_params(params, best_params);
    result.best_val_loss = best;
    return result;
}

}  // namespace

std::string to_string(ClassWeightMode m) {
    return m == ClassWeightMode::Uniform ? "uniform" : "inverse-frequency";
}

std::string to_string(ThresholdPolicy p) {
    return p == ThresholdPolicy::Fixed ? "fixed" : "tuned";
}

ClassWeightMode class_weight_mode_from_string(const std::string& s) {
    if (s == "uniform") {
        return ClassWeightMode::Uniform;
    }
    if (s == "inverse-frequency") {
        return ClassWeightMode::InverseFrequency;
    }
    throw ValidationError("unknown class-weight mode '" + s + "' (expected uniform or inverse-frequency)");
}

ThresholdPolicy threshold_policy_from_string(const std::string& s) {
    if (s == "fixed") {
        return ThresholdPolicy::Fixed;
    }
    if (s == "tuned") {
        return ThresholdPolicy::Tuned;
    }
    throw ValidationError("unknown threshold policy '" + s + "' (expected fixed or tuned)");
}

void TrainConfig::validate() const {
    if (!(lr > 0.0) || !std::isfinite(lr)) {
        throw ValidationError("learning rate must be positive");
    }
    if (epochs < 1) {
        throw ValidationError("epochs must be at least 1");
    }
    if (hidden1 < 1 || hidden2 < 1 || shared_dim < 1) {
        throw ValidationError("hidden dims must be positive");
    }
    if (!(dropout >= 0.0 && dropout <= 0.5)) {
        throw ValidationError("dropout must lie in [0, 0.5]");
    }
    if (batch_size < 1) {
        throw ValidationError("batch size must be positive");
    }
    if (!(lambda >= 0.0)) {
        throw ValidationError("lambda must be non-negative");
    }
    if (!(weight_cap >= 1.0)) {
        throw ValidationError("weight cap must be at least 1");
    }
    if (!(lr_gamma > 0.0 && lr_gamma <= 1.0)) {
        throw ValidationError("lr gamma must lie in (0, 1]");
    }
}

nlohmann::ordered_json TrainConfig::to_json() const {
    nlohmann::ordered_json j;
    j["lr"] = lr;
    j["epochs"] = epochs;
    j["h2_prime"] = hidden1;
    j["h2"] = hidden2;
    j["h"] = shared_dim;
    j["dropout"] = dropout;
    j["batch_size"] = batch_size;
    j["lambda"] = lambda;
    j["class_weights"] = to_string(class_weights);
    j["weight_cap"] = weight_cap;
    j["threshold_policy"] = to_string(threshold_policy);
    j["lr_gamma"] = lr_gamma;
    j["seed"] = seed;
    return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    try {
        c.lr = j.value("lr", c.lr);
        c.epochs = j.value("epochs", c.epochs);
        c.hidden1 = j.value("h2_prime", c.hidden1);
        c.hidden2 = j.value("h2", c.hidden2);
        c.shared_dim = j.value("h", c.shared_dim);
        c.dropout = j.value("dropout", c.dropout);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.lambda = j.value("lambda", c.lambda);
        c.class_weights = class_weight_mode_from_string(j.value("class_weights", to_string(c.class_weights)));
        c.weight_cap = j.value("weight_cap", c.weight_cap);
        c.threshold_policy = threshold_policy_from_string(j.value("threshold_policy", to_string(c.threshold_policy)));
        c.lr_gamma = j.value("lr_gamma", c.lr_gamma);
        c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed training config: ") + e.what());
    }
    c.validate();
    return c;
}

SealModel SealModel::create(const dataio::LabelSchema& schema, const labels::LabelEmbeddingTable& table,
                            std::size_t feature_dim, const TrainConfig& config, Rng& rng) {
    schema.validate();
    config.validate();
    SealModel m;
    m.schema = schema;
    m.label_table = table;
    m.label_matrix = table.matrix_for(schema);
    m.data_encoder = nn::MlpNet::create({feature_dim, config.hidden1, config.hidden2}, nn::Activation::Relu,
                                        nn::Activation::Relu, config.dropout, rng);
    m.proj_data = nn::MlpNet::create({config.hidden2, config.shared_dim}, nn::Activation::Identity,
                                     nn::Activation::Identity, 0.0, rng);
    m.proj_label = nn::MlpNet::create({table.dim, config.shared_dim}, nn::Activation::Identity,
                                      nn::Activation::Identity, 0.0, rng);
    return m;
}

std::size_t SealModel::parameter_count() const {
    return data_encoder.parameter_count() + proj_data.parameter_count() + proj_label.parameter_count();
}

std::vector<std::span<double>> SealModel::parameter_blocks() {
    std::vector<std::span<double>> out;
    append_params(out, data_encoder);
    append_params(out, proj_data);
    append_params(out, proj_label);
    return out;
}

nlohmann::json SealModel::to_json() const {
    return {{"schema", schema.to_json()},
            {"label_table", table_to_json(label_table)},
            {"data_encoder", data_encoder.to_json()},
            {"proj_data", proj_data.to_json()},
            {"proj_label", proj_label.to_json()}};
}

SealModel SealModel::from_json(const nlohmann::json& j) {
    SealModel m;
    m.schema = dataio::LabelSchema::from_json(j.at("schema"));
    m.label_table = table_from_json(j.at("label_table"));
    m.label_matrix = m.label_table.matrix_for(m.schema);
    m.data_encoder = nn::MlpNet::from_json(j.at("data_encoder"));
    m.proj_data = nn::MlpNet::from_json(j.at("proj_data"));
    m.proj_label = nn::MlpNet::from_json(j.at("proj_label"));
    if (m.proj_data.input_dim() != m.data_encoder.output_dim() || m.proj_label.input_dim() != m.label_table.dim ||
        m.proj_data.output_dim() != m.proj_label.output_dim()) {
        throw DimensionError("checkpoint networks do not chain");
    }
    return m;
}

BaselineModel BaselineModel::create(const dataio::LabelSchema& schema, std::size_t feature_dim,
                                    const TrainConfig& config, Rng& rng) {
    schema.validate();
    config.validate();
    BaselineModel m;
    m.schema = schema;
    m.data_encoder = nn::MlpNet::create({feature_dim, config.hidden1, config.hidden2}, nn::Activation::Relu,
                                        nn::Activation::Relu, config.dropout, rng);
    m.head = nn::MlpNet::create({config.hidden2, schema.size()}, nn::Activation::Identity, nn::Activation::Identity,
                                0.0, rng);
    return m;
}

std::size_t BaselineModel::parameter_count() const {
    return data_encoder.parameter_count() + head.parameter_count();
}

std::vector<std::span<double>> BaselineModel::parameter_blocks() {
    std::vector<std::span<double>> out;
    append_params(out, data_encoder);
    append_params(out, head);
    return out;
}

nlohmann::json BaselineModel::to_json() const {
    return {{"schema", schema.to_json()}, {"data_encoder", data_encoder.to_json()}, {"head", head.to_json()}};
}

BaselineModel BaselineModel::from_json(const nlohmann::json& j) {
    BaselineModel m;
    m.schema = dataio::LabelSchema::from_json(j.at("schema"));
    m.data_encoder = nn::MlpNet::from_json(j.at("data_encoder"));
    m.head = nn::MlpNet::from_json(j.at("head"));
    if (m.head.input_dim() != m.data_encoder.output_dim() || m.head.output_dim() != m.schema.size()) {
        throw DimensionError("checkpoint networks do not chain");
    }
    return m;
}

const dataio::LabelSchema& schema_of(const AnyModel& model) {
    return std::visit([](const auto& m) -> const dataio::LabelSchema& { return m.schema; }, model);
}

Matrix project_labels(const SealModel& model) {
    return nn::mlp_predict(model.proj_label, model.label_matrix);
}

Matrix forward_scores(const SealModel& model, const Matrix& features) {
    if (features.cols() != model.feature_dim()) {
        throw DimensionError("features have dim " + std::to_string(features.cols()) + ", model expects " +
                             std::to_string(model.feature_dim()));
    }
    if (model.label_matrix.rows() != model.schema.size()) {
        throw ValidationError("label table does not cover the schema");
    }
    const Matrix data = nn::mlp_predict(model.proj_data, nn::mlp_predict(model.data_encoder, features));
    return matmul_nt(data, project_labels(model));
}

Matrix forward_scores(const BaselineModel& model, const Matrix& features) {
    if (features.cols() != model.feature_dim()) {
        throw DimensionError("features have dim " + std::to_string(features.cols()) + ", model expects " +
                             std::to_string(model.feature_dim()));
    }
    return nn::mlp_predict(model.head, nn::mlp_predict(model.data_encoder, features));
}

Matrix forward_scores(const AnyModel& model, const Matrix& features) {
    return std::visit([&](const auto& m) { return forward_scores(m, features); }, model);
}

LossResult ce_loss(const Matrix& context_scores, const Matrix& targets) {
    require_same_shape(context_scores, targets, "ce_loss");
    LossResult r{0.0, Matrix(context_scores.rows(), context_scores.cols())};
    std::size_t labeled = 0;
    for (std::size_t i = 0; i < targets.rows(); ++i) {
        double s = 0.0;
        for (const double t : targets.row(i)) {
            if (t != 0.0 && t != 1.0) {
                throw ValidationError("context targets must be one-hot");
            }
            s += t;
        }
        if (s > 1.0) {
            throw ValidationError("context target row has more than one active class");
        }
        labeled += s > 0.0 ? 1 : 0;
    }
    if (labeled == 0) {
        return r;
    }
    const double inv_n = 1.0 / static_cast<double>(labeled);
    for (std::size_t i = 0; i < targets.rows(); ++i) {
        const auto t = targets.row(i);
        if (std::find(t.begin(), t.end(), 1.0) == t.end()) {
            continue;
        }
        const auto s = context_scores.row(i);
        const double mx = *std::max_element(s.begin(), s.end());
        double z = 0.0;
        for (const double v : s) {
            z += std::exp(v - mx);
        }
        const double log_z = mx + std::log(z);
        for (std::size_t c = 0; c < s.size(); ++c) {
            const double p = std::exp(s[c] - log_z);
            r.grad(i, c) = (p - t[c]) * inv_n;
            if (t[c] == 1.0) {
                r.value += (log_z - s[c]) * inv_n;
            }
        }
    }
    return r;
}

LossResult bce_loss(const Matrix& activity_scores, const Matrix& targets, const Matrix& weights) {
    require_same_shape(activity_scores, targets, "bce_loss targets");
    require_same_shape(activity_scores, weights, "bce_loss weights");
    LossResult r{0.0, Matrix(activity_scores.rows(), activity_scores.cols())};
    if (activity_scores.rows() == 0) {
        return r;
    }
    for (const double w : weights.data()) {
        if (!(w >= 0.0)) {
            throw ValidationError("BCE weights must be non-negative");
        }
    }
    const double inv_n = 1.0 / static_cast<double>(activity_scores.rows());
    for (std::size_t k = 0; k < activity_scores.size(); ++k) {
        const double s = activity_scores.data()[k];
        const double y = targets.data()[k];
        const double w = weights.data()[k];
        if (w == 0.0) {
            continue;
        }
        // -log(sigmoid(s)) = softplus(-s), -log(1 - sigmoid(s)) = softplus(s)
        r.value += w * (y * softplus(-s) + (1.0 - y) * softplus(s)) * inv_n;
        r.grad.data()[k] = w * (sigmoid(s) - y) * inv_n;
    }
    return r;
}

std::vector<double> positive_weights(const Matrix& train_targets, ClassWeightMode mode, double cap) {
    std::vector<double> w(train_targets.cols(), 1.0);
    if (mode == ClassWeightMode::Uniform) {
        return w;
    }
    for (std::size_t a = 0; a < train_targets.cols(); ++a) {
        double pos = 0.0;
        for (std::size_t i = 0; i < train_targets.rows(); ++i) {
            pos += train_targets(i, a);
        }
        const double neg = static_cast<double>(train_targets.rows()) - pos;
        if (pos > 0.0) {
            w[a] = std::clamp(neg / pos, 1.0, cap);
        }
    }
    return w;
}

Matrix weight_matrix(const Matrix& targets, const std::vector<double>& positive_weights) {
    if (positive_weights.size() != targets.cols()) {
        throw DimensionError("one positive weight per activity is required");
    }
    Matrix w(targets.rows(), targets.cols(), 1.0);
    for (std::size_t i = 0; i < targets.rows(); ++i) {
        for (std::size_t a = 0; a < targets.cols(); ++a) {
            if (targets(i, a) > 0.5) {
                w(i, a) = positive_weights[a];
            }
        }
    }
    return w;
}

Objective evaluate_objective(SealModel& model, const Matrix& features, const labels::EncodedTargets& targets,
                             const Matrix& weights, double lambda, bool train_mode, Rng& rng) {
    if (features.cols() != model.feature_dim()) {
        throw DimensionError("feature dim does not match the data encoder");
    }
    const auto enc = nn::mlp_forward(model.data_encoder, features, train_mode, rng);
    const auto data = nn::mlp_forward(model.proj_data, enc.output, train_mode, rng);
    const auto label = nn::mlp_forward(model.proj_label, model.label_matrix, train_mode, rng);
    const Matrix scores = matmul_nt(data.output, label.output);

    const auto loss = combined_loss(scores, targets, weights, lambda, model.schema);
    const Matrix d_data = matmul(loss.grad, label.output);
    const Matrix d_label = matmul_tn(loss.grad, data.output);
    const auto back_data = nn::mlp_backward(model.proj_data, data.cache, d_data);
    const auto back_enc = nn::mlp_backward(model.data_encoder, enc.cache, back_data.grad_input);
    const auto back_label = nn::mlp_backward(model.proj_label, label.cache, d_label);

    Objective obj;
    obj.ce = loss.ce;
    obj.bce = loss.bce;
    obj.loss = loss.ce + lambda * loss.bce;
    append_blocks(obj.grads, back_enc.grads);
    append_blocks(obj.grads, back_data.grads);
    append_blocks(obj.grads, back_label.grads);
    return obj;
}

Objective evaluate_objective(BaselineModel& model, const Matrix& features, const labels::EncodedTargets& targets,
                             const Matrix& weights, double lambda, bool train_mode, Rng& rng) {
    const auto enc = nn::mlp_forward(model.data_encoder, features, train_mode, rng);
    const auto head = nn::mlp_forward(model.head, enc.output, train_mode, rng);
    const auto loss = combined_loss(head.output, targets, weights, lambda, model.schema);
    const auto back_head = nn::mlp_backward(model.head, head.cache, loss.grad);
    const auto back_enc = nn::mlp_backward(model.data_encoder, enc.cache, back_head.grad_input);

    Objective obj;
    obj.ce = loss.ce;
    obj.bce = loss.bce;
    obj.loss = loss.ce + lambda * loss.bce;
    append_blocks(obj.grads, back_enc.grads);
    append_blocks(obj.grads, back_head.grads);
    return obj;
}

double objective_value(const AnyModel& model, const Matrix& features, const labels::EncodedTargets& targets,
                       const Matrix& weights, double lambda) {
    const Matrix scores = forward_scores(model, features);
    const auto loss = combined_loss(scores, targets, weights, lambda, schema_of(model));
    return loss.ce + lambda * loss.bce;
}

std::string TrainResult::history_csv() const {
    std::string out = "epoch,lr,train_loss,val_loss\n";
    for (const auto& r : history) {
        out += std::to_string(r.epoch) + "," + csv::format_double(r.lr) + "," + csv::format_double(r.train_loss) +
               "," + csv::format_double(r.val_loss) + "\n";
    }
    return out;
}

TrainResult train(SealModel& model, const dataio::Dataset& train_set, const dataio::Dataset& validation,
                  const TrainConfig& config) {
    if (!(train_set.schema == model.schema)) {
        throw ValidationError("training data schema does not match the model schema");
    }
    return fit(model, train_set, validation, config);
}

std::pair<BaselineModel, TrainResult> train_baseline(const dataio::Dataset& train_set,
                                                     const dataio::Dataset& validation, const TrainConfig& config) {
    Rng init(derive_seed(config.seed, "init"));
    BaselineModel model = BaselineModel::create(train_set.schema, train_set.feature_dim(), config, init);
    auto result = fit(model, train_set, validation, config);
    return {std::move(model), std::move(result)};
}

TrainResult train(AnyModel& model, const dataio::Dataset& train_set, const dataio::Dataset& validation,
                  const TrainConfig& config) {
    return std::visit(
        [&](auto& m) {
            if (!(train_set.schema == m.schema)) {
                throw ValidationError("training data schema does not match the model schema");
            }
            return fit(m, train_set, validation, config);
        },
        model);
}

PredictionSet predict_from_scores(const Matrix& scores, const dataio::LabelSchema& schema,
                                  std::vector<double> thresholds) {
    const std::size_t n_ctx = schema.num_contexts();
    const std::size_t n_act = schema.num_activities();
    if (scores.cols() != schema.size()) {
        throw DimensionError("score columns do not match the schema");
    }
    if (thresholds.empty()) {
        thresholds.assign(n_act, 0.5);
    }
    if (thresholds.size() != n_act) {
        throw DimensionError("one threshold per activity is required");
    }
    PredictionSet p;
    p.num_activities = n_act;
    p.scores = scores;
    p.thresholds = std::move(thresholds);
    p.context.resize(scores.rows());
    p.activity.assign(scores.rows() * n_act, 0);
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        const auto row = scores.row(i);
        p.context[i] = static_cast<std::size_t>(std::max_element(row.begin(), row.begin() + n_ctx) - row.begin());
        for (std::size_t a = 0; a < n_act; ++a) {
            p.activity[i * n_act + a] = activity_on(row[n_ctx + a], p.thresholds[a]) ? 1 : 0;
        }
    }
    return p;
}

PredictionSet predict(const AnyModel& model, const Matrix& features, std::vector<double> thresholds) {
    return predict_from_scores(forward_scores(model, features), schema_of(model), std::move(thresholds));
}

std::vector<double> tune_thresholds(const Matrix& scores, const labels::EncodedTargets& targets,
                                    const dataio::LabelSchema& schema) {
    const std::size_t n_ctx = schema.num_contexts();
    const std::size_t n = scores.rows();
    std::vector<double> out(schema.num_activities(), 0.5);
    for (std::size_t a = 0; a < schema.num_activities(); ++a) {
        std::vector<std::pair<double, bool>> items(n);
        std::uint64_t positives = 0;
        for (std::size_t i = 0; i < n; ++i) {
            items[i] = {sigmoid(scores(i, n_ctx + a)), targets.activities(i, a) > 0.5};
            positives += items[i].second ? 1 : 0;
        }
        const auto mcc_at = [&](std::uint64_t tp, std::uint64_t fp) {
            const double dtp = static_cast<double>(tp);
            const double dfp = static_cast<double>(fp);
            const double dfn = static_cast<double>(positives - tp);
            const double dtn = static_cast<double>(n - positives) - dfp;
            const double den = (dtp + dfp) * (dtp + dfn) * (dtn + dfp) * (dtn + dfn);
            return den == 0.0 ? 0.0 : (dtp * dtn - dfp * dfn) / std::sqrt(den);
        };

        std::uint64_t tp_half = 0;
        std::uint64_t fp_half = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (activity_on(scores(i, n_ctx + a), 0.5)) {
                (items[i].second ? tp_half : fp_half) += 1;
            }
        }
        double best_mcc = mcc_at(tp_half, fp_half);
        double best_thr = 0.5;

        // Sweep thresholds at each distinct probability, highest first.
        std::sort(items.begin(), items.end(), [](const auto& l, const auto& r) { return l.first > r.first; });
        std::uint64_t tp = 0;
        std::uint64_t fp = 0;
        std::size_t i = 0;
        while (i < n) {
            const double thr = items[i].first;
            while (i < n && items[i].first == thr) {
                (items[i].second ? tp : fp) += 1;
                ++i;
            }
            const double m = mcc_at(tp, fp);
            if (m > best_mcc + 1e-12 ||
                (std::abs(m - best_mcc) <= 1e-12 && std::abs(thr - 0.5) < std::abs(best_thr - 0.5))) {
                best_mcc = m;
                best_thr = thr;
            }
        }
        out[a] = best_thr;
    }
    return out;
}

Matrix feature_matrix(const dataio::Dataset& dataset) {
    Matrix m(dataset.size(), dataset.feature_dim());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& fv = dataset.instances[i].features;
        if (fv.size() != dataset.feature_dim()) {
            throw DimensionError("instance '" + dataset.instances[i].instance_id + "' has the wrong feature count");
        }
        for (std::size_t k = 0; k < fv.size(); ++k) {
            m(i, k) = fv.is_missing(k) ? 0.0 : fv.values[k];
        }
    }
    return m;
}

labels::LabelEmbeddingTable projected_label_table(const SealModel& model) {
    std::vector<std::string> sentences;
    for (const auto& label : model.schema.all_labels()) {
        sentences.push_back(model.label_table.find(label)->sentence);
    }
    return labels::LabelEmbeddingTable::from_matrix(model.schema, project_labels(model), sentences, "projected");
}

void export_label_embeddings(const SealModel& model, const std::filesystem::path& path) {
    labels::save_embedding_table(path, projected_label_table(model));
}

nlohmann::json Checkpoint::to_json() const {
    nlohmann::json j;
    j["format"] = kCheckpointFormat;
    j["version"] = kCheckpointVersion;
    if (const auto* s = std::get_if<SealModel>(&model)) {
        j["kind"] = "seal";
        j["model"] = s->to_json();
    } else {
        j["kind"] = "baseline";
        j["model"] = std::get<BaselineModel>(model).to_json();
    }
    j["normalizer"] = normalizer.to_json();
    j["config"] = config.to_json();
    j["thresholds"] = thresholds;
    j["split"] = {{"ratios", split.ratios}, {"seed", split.seed}};
    return j;
}

Checkpoint Checkpoint::from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != kCheckpointFormat) {
            throw ValidationError("not a checkpoint file");
        }
        if (j.at("version").get<int>() != kCheckpointVersion) {
            throw ValidationError("unsupported checkpoint version " + std::to_string(j.at("version").get<int>()));
        }
        const auto kind = j.at("kind").get<std::string>();
        AnyModel model = kind == "seal" ? AnyModel(SealModel::from_json(j.at("model")))
                                        : AnyModel(BaselineModel::from_json(j.at("model")));
        Checkpoint c{std::move(model), signal::Normalizer::from_json(j.at("normalizer")),
                     TrainConfig::from_json(j.at("config")), j.at("thresholds").get<std::vector<double>>(),
                     dataio::SplitSpec{}};
        c.split.ratios = j.at("split").at("ratios").get<std::array<double, 3>>();
        c.split.seed = j.at("split").at("seed").get<std::uint64_t>();
        if (c.normalizer.output_dim() != std::visit([](const auto& m) { return m.feature_dim(); }, c.model)) {
            throw DimensionError("checkpoint normalizer does not match the model input");
        }
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed checkpoint: ") + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    csv::write_text(path, checkpoint.to_json().dump() + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(csv::read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw LoadError("checkpoint '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return Checkpoint::from_json(j);
}

}  // namespace seal::align
