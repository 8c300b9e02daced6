#pragma once

#include "seal/dataio.hpp"
#include "seal/labels.hpp"
#include "seal/matrix.hpp"
#include "seal/prediction.hpp"
#include "seal/signal.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace seal::synth {

enum class EmbeddingMode { Informative, Uninformative };

std::string to_string(EmbeddingMode m);
EmbeddingMode embedding_mode_from_string(const std::string& s);

/// Makes prototype `target` have cosine `cosine` with prototype `source`.
struct SimilarPair {
    std::string source;
    std::string target;
    double cosine = 0.9;
};

struct SynthSpec {
    std::size_t num_contexts = 3;
    std::size_t num_activities = 6;
    /// Prototype dimension d, also the feature dimension.
    std::size_t feature_dim = 16;
    std::size_t num_instances = 2000;
    std::size_t num_users = 5;
    double noise = 0.05;
    /// Context c shifts features by context_offset * prototype_c.
    double context_offset = 1.0;
    /// Empty means uniform.
    std::vector<double> context_rates;
    /// Probability that activity a is the anchor of an instance. The remainder
    /// 1 - sum is the chance of no activity. Empty means 1 / C_act each.
    std::vector<double> activity_rates;
    /// cooccurrence[a][b]: chance that b joins when a is the anchor. Empty means none.
    std::vector<std::vector<double>> cooccurrence;
    std::vector<SimilarPair> similar;
    EmbeddingMode embedding_mode = EmbeddingMode::Informative;
    /// Per-coordinate noise added to prototypes before renormalizing (informative mode).
    double embedding_noise = 0.05;
    /// Uninformative-mode dimension; 0 means feature_dim.
    std::size_t embedding_dim = 0;
    std::vector<std::string> context_names;
    std::vector<std::string> activity_names;
    std::uint64_t seed = 0;

    /// Fills default names and rates, then checks ranges.
    void normalize();
    void validate() const;

    nlohmann::ordered_json to_json() const;
    static SynthSpec from_json(const nlohmann::json& j);
};

/// Everything the generator drew, enough to evaluate the exact posterior.
struct GroundTruth {
    SynthSpec spec;
    dataio::LabelSchema schema;
    /// C x d, unit rows, contexts then activities.
    Matrix prototypes;
    std::vector<std::size_t> context;
    /// Anchor per instance; num_activities when none was drawn.
    std::vector<std::size_t> anchor;
    /// n x C_act, 0/1.
    std::vector<std::vector<std::uint8_t>> activities;

    nlohmann::json to_json() const;
    static GroundTruth from_json(const nlohmann::json& j);
};

struct SynthOutput {
    dataio::Dataset dataset;
    labels::LabelEmbeddingTable embeddings;
    GroundTruth truth;
};

/// Throws ValidationError for rates or co-occurrence probabilities that cannot form
/// a distribution.
SynthOutput generate(SynthSpec spec);

/// Noise-free feature mean of a context and activity set.
std::vector<double> feature_mean(const GroundTruth& truth, std::size_t context,
                                 const std::vector<std::uint8_t>& activities);

/// Prior probability of an activity set under the anchor scheme.
double activity_set_prior(const SynthSpec& spec, const std::vector<std::uint8_t>& activities);

struct OracleResult {
    PredictionSet predictions;  // scores hold posterior log-odds
    Matrix context_posterior;   // n x C_ctx
    Matrix activity_posterior;  // n x C_act, marginal P(a active | x)
};

/// Exact posterior by enumerating every context and activity set. Decisions: argmax
/// context, activity on when its marginal is at least 0.5. With zero noise the
/// likelihood collapses onto the nearest means.
OracleResult bayes_oracle(const GroundTruth& truth, const Matrix& features);

/// Parameters for sinusoid-mixture recordings used to exercise the signal pipeline.
struct RawSpec {
    std::size_t num_channels = 12;
    double sample_rate_hz = 40.0;
    double segment_s = 6.0;
    std::size_t num_segments = 20;
    double noise = 0.1;
};

/// One activity (and one context) per segment; channel k carries a sinusoid at an
/// activity-specific frequency plus a context-specific DC shift.
signal::Recording generate_recording(const SynthSpec& spec, const RawSpec& raw);

/// Writes features.csv, schema.json, embeddings.jsonl and truth.json into `dir`.
void write_output(const std::filesystem::path& dir, const SynthOutput& output);

}  // namespace seal::synth
