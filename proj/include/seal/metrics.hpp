#pragma once

#include "seal/dataio.hpp"
#include "seal/labels.hpp"
#include "seal/prediction.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace seal::metrics {

struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    std::uint64_t total() const { return tp + fp + fn + tn; }
    bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts confusion(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth);

/// Binary confusion for one schema label. Contexts are scored one-vs-rest from the
/// argmax and only over instances that carry a context label.
ConfusionCounts confusion(const PredictionSet& predictions, const labels::EncodedTargets& targets,
                          const dataio::LabelSchema& schema, const std::string& label);

/// Matthews correlation; 0 whenever a denominator factor is 0.
double mcc(const ConfusionCounts& c);

/// Positive-class F1; 0 when TP = 0.
double f1(const ConfusionCounts& c);

/// Mean of the positive-class F1 and the F1 with the negative class as positive.
double label_macro_f1(const ConfusionCounts& c);

struct LabelMetrics {
    std::string label;
    std::string group;  // "context" or "activity"
    ConfusionCounts counts;
    double mcc = 0.0;
    double macro_f1 = 0.0;
};

struct MetricsReport {
    std::vector<LabelMetrics> labels;
    double activity_mcc = 0.0;
    double activity_macro_f1 = 0.0;
    double context_mcc = 0.0;
    double context_macro_f1 = 0.0;
    /// Fraction of context-labeled instances whose argmax context is right.
    double context_accuracy = 0.0;
    std::size_t instances = 0;

    const LabelMetrics& at(const std::string& label) const;

    std::string to_csv() const;
    nlohmann::ordered_json to_json() const;
    void write(const std::filesystem::path& csv_path, const std::filesystem::path& json_path) const;
};

/// Per-label MCC and macro-F1 with unweighted group averages.
MetricsReport report(const PredictionSet& predictions, const labels::EncodedTargets& targets,
                     const dataio::LabelSchema& schema);

}  // namespace seal::metrics
