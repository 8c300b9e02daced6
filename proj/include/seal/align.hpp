#pragma once

#include "seal/dataio.hpp"
#include "seal/labels.hpp"
#include "seal/matrix.hpp"
#include "seal/nn.hpp"
#include "seal/prediction.hpp"
#include "seal/signal.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace seal::align {

enum class ClassWeightMode { Uniform, InverseFrequency };
enum class ThresholdPolicy { Fixed, Tuned };

std::string to_string(ClassWeightMode m);
std::string to_string(ThresholdPolicy p);
ClassWeightMode class_weight_mode_from_string(const std::string& s);
ThresholdPolicy threshold_policy_from_string(const std::string& s);

struct TrainConfig {
    double lr = 1e-3;
    std::size_t epochs = 100;
    std::size_t hidden1 = 64;     // first encoder layer (h2')
    std::size_t hidden2 = 64;     // encoder output (h2)
    std::size_t shared_dim = 32;  // common vector space (h)
    double dropout = 0.1;
    std::size_t batch_size = 32;
    /// Weight of the activity (BCE) term against the context (CE) term.
    double lambda = 1.0;
    ClassWeightMode class_weights = ClassWeightMode::Uniform;
    /// Upper bound for inverse-frequency positive weights.
    double weight_cap = 10.0;
    ThresholdPolicy threshold_policy = ThresholdPolicy::Fixed;
    /// Per-epoch exponential decay of the learning rate.
    double lr_gamma = 0.99;
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::ordered_json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

/// Dual encoder: features -> encoder -> proj_data, label embeddings -> proj_label,
/// scored by dot product in the shared space.
struct SealModel {
    nn::MlpNet data_encoder;
    nn::MlpNet proj_data;
    nn::MlpNet proj_label;
    labels::LabelEmbeddingTable label_table;
    dataio::LabelSchema schema;
    /// label_table rows in schema order (C x e), kept in sync by create/from_json.
    Matrix label_matrix;

    static SealModel create(const dataio::LabelSchema& schema, const labels::LabelEmbeddingTable& table,
                            std::size_t feature_dim, const TrainConfig& config, Rng& rng);

    std::size_t feature_dim() const { return data_encoder.input_dim(); }
    std::size_t parameter_count() const;
    std::vector<std::span<double>> parameter_blocks();

    nlohmann::json to_json() const;
    static SealModel from_json(const nlohmann::json& j);
};

/// Binary-encoding comparator: the same encoder with a linear head of C logits.
struct BaselineModel {
    nn::MlpNet data_encoder;
    nn::MlpNet head;
    dataio::LabelSchema schema;

    static BaselineModel create(const dataio::LabelSchema& schema, std::size_t feature_dim,
                                const TrainConfig& config, Rng& rng);

    std::size_t feature_dim() const { return data_encoder.input_dim(); }
    std::size_t parameter_count() const;
    std::vector<std::span<double>> parameter_blocks();

    nlohmann::json to_json() const;
    static BaselineModel from_json(const nlohmann::json& j);
};

using AnyModel = std::variant<SealModel, BaselineModel>;

const dataio::LabelSchema& schema_of(const AnyModel& model);

/// n x C scores in eval mode. For SEAL the C x h label projections are computed once
/// and shared across the batch.
Matrix forward_scores(const SealModel& model, const Matrix& features);
Matrix forward_scores(const BaselineModel& model, const Matrix& features);
Matrix forward_scores(const AnyModel& model, const Matrix& features);

/// Projected label embeddings V'_label (C x h).
Matrix project_labels(const SealModel& model);

struct LossResult {
    double value = 0.0;
    Matrix grad;  // d value / d scores
};

/// Mean softmax cross-entropy over rows with a context label; all-zero rows are skipped.
LossResult ce_loss(const Matrix& context_scores, const Matrix& targets);

/// Weighted binary cross-entropy on sigmoid(scores), averaged over instances.
LossResult bce_loss(const Matrix& activity_scores, const Matrix& targets, const Matrix& weights);

/// Per-element BCE weights: 1 everywhere, or min(cap, negatives/positives) on positive
/// entries when `mode` is InverseFrequency (rates from `train_targets`).
std::vector<double> positive_weights(const Matrix& train_targets, ClassWeightMode mode, double cap);
Matrix weight_matrix(const Matrix& targets, const std::vector<double>& positive_weights);

struct Objective {
    double loss = 0.0;
    double ce = 0.0;
    double bce = 0.0;
    /// Laid out like the model's parameter_blocks().
    std::vector<std::vector<double>> grads;
};

/// L = L_ce + lambda * L_bce and its exact gradient. `train_mode` enables dropout.
Objective evaluate_objective(SealModel& model, const Matrix& features, const labels::EncodedTargets& targets,
                             const Matrix& weights, double lambda, bool train_mode, Rng& rng);
Objective evaluate_objective(BaselineModel& model, const Matrix& features, const labels::EncodedTargets& targets,
                             const Matrix& weights, double lambda, bool train_mode, Rng& rng);

/// Loss only, eval mode.
double objective_value(const AnyModel& model, const Matrix& features, const labels::EncodedTargets& targets,
                       const Matrix& weights, double lambda);

struct EpochRecord {
    std::size_t epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
    std::vector<double> positive_weights;

    std::string history_csv() const;
};

/// RAdam with an exponential schedule; keeps the parameters of the epoch with the
/// lowest validation loss (training loss when `validation` is empty). Datasets must
/// already be normalized. Throws NumericError on a non-finite loss.
TrainResult train(SealModel& model, const dataio::Dataset& train, const dataio::Dataset& validation,
                  const TrainConfig& config);

/// Builds and trains a BaselineModel with the same topology, losses and optimizer.
std::pair<BaselineModel, TrainResult> train_baseline(const dataio::Dataset& train, const dataio::Dataset& validation,
                                                     const TrainConfig& config);

TrainResult train(AnyModel& model, const dataio::Dataset& train, const dataio::Dataset& validation,
                  const TrainConfig& config);

inline double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

/// Context = argmax of context scores; activity a is on iff sigmoid(score) >= thresholds[a]
/// (score >= 0 exactly when the threshold is 0.5).
/// Empty thresholds mean 0.5 everywhere.
PredictionSet predict_from_scores(const Matrix& scores, const dataio::LabelSchema& schema,
                                  std::vector<double> thresholds = {});
PredictionSet predict(const AnyModel& model, const Matrix& features, std::vector<double> thresholds = {});

/// Per activity, the probability threshold maximizing MCC on the given scores
/// (ties keep 0.5, then the candidate nearest 0.5).
std::vector<double> tune_thresholds(const Matrix& scores, const labels::EncodedTargets& targets,
                                    const dataio::LabelSchema& schema);

/// Features as a dense matrix; missing entries become 0.
Matrix feature_matrix(const dataio::Dataset& dataset);

/// Writes V'_label rows to the embedding-file format with source "projected".
labels::LabelEmbeddingTable projected_label_table(const SealModel& model);
void export_label_embeddings(const SealModel& model, const std::filesystem::path& path);

/// Everything needed to score new raw features.
struct Checkpoint {
    AnyModel model;
    signal::Normalizer normalizer;
    TrainConfig config;
    std::vector<double> thresholds;
    dataio::SplitSpec split;

    nlohmann::json to_json() const;
    static Checkpoint from_json(const nlohmann::json& j);
};

inline constexpr const char* kCheckpointFormat = "seal-checkpoint";
inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace seal::align
