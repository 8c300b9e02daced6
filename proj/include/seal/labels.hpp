#pragma once

#include "seal/dataio.hpp"
#include "seal/matrix.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace seal::labels {

/// Sentence templates used to turn label names into language-model input.
///
/// `{}` in a template is replaced by the label's phrase. The phrase defaults to the
/// lower-cased label name with a few rewrites (placements gain "their"/"the",
/// "on phone" becomes "on the phone"); `phrases` overrides it per label and
/// `sentences` overrides the whole sentence.
struct TemplateTable {
    std::string context_template = "The user has a phone {}.";
    std::string state_template = "The user is {}.";
    std::string action_template = "The user is {} now.";
    std::set<std::string> contexts;
    std::set<std::string> known_labels;
    std::map<std::string, std::string> phrases;
    std::map<std::string, std::string> sentences;

    static TemplateTable defaults(const dataio::LabelSchema& schema);

    /// Overrides read from JSON: optional keys "context_template", "state_template",
    /// "action_template", "phrases" {label: phrase}, "sentences" {label: sentence}.
    void apply_overrides(const nlohmann::json& j);
    static TemplateTable load(const std::filesystem::path& path, const dataio::LabelSchema& schema);
};

/// True for short-term action labels, i.e. names ending in "(action)" or "(a)".
bool is_action_label(std::string_view label);

/// Deterministic sentence for a schema label. Throws ValidationError for unknown labels.
std::string rewrite_label(std::string_view label, const TemplateTable& table);

struct LabelEmbedding {
    std::string label;
    std::string sentence;
    std::vector<double> embedding;
};

/// Frozen label embeddings keyed by label name.
struct LabelEmbeddingTable {
    std::size_t dim = 0;
    std::vector<LabelEmbedding> rows;
    std::string source;

    const LabelEmbedding* find(std::string_view label) const;

    /// Throws ValidationError naming the first schema label without an embedding.
    void require_covers(const dataio::LabelSchema& schema) const;

    /// C x dim matrix with rows in schema order (contexts, then activities).
    Matrix matrix_for(const dataio::LabelSchema& schema) const;

    /// Table built from a C x dim matrix in schema order.
    static LabelEmbeddingTable from_matrix(const dataio::LabelSchema& schema, const Matrix& rows,
                                           const std::vector<std::string>& sentences, std::string source);
};

/// Parses the JSON Lines embedding file without schema checks.
LabelEmbeddingTable parse_embedding_table(const std::filesystem::path& path);

/// Parses and checks that every schema label is covered.
LabelEmbeddingTable load_embedding_table(const std::filesystem::path& path, const dataio::LabelSchema& schema);

std::string format_embedding_table(const LabelEmbeddingTable& table);
void save_embedding_table(const std::filesystem::path& path, const LabelEmbeddingTable& table);

/// Signed byte-trigram hashing into `dim` buckets, L2-normalized. Stand-in for a
/// language model where none is available.
std::vector<double> fallback_embed(std::string_view sentence, std::size_t dim, std::uint64_t seed);

/// Embeds every schema label's sentence with fallback_embed.
LabelEmbeddingTable fallback_table(const dataio::LabelSchema& schema, const TemplateTable& templates,
                                   std::size_t dim, std::uint64_t seed);

struct TargetEncoding {
    std::vector<double> context;
    std::vector<double> activities;
};

/// One-hot context (all zero when unlabeled) and multi-hot activities in schema order.
TargetEncoding encode_targets(const dataio::Instance& instance, const dataio::LabelSchema& schema);

/// Row-stacked encodings for a whole dataset.
struct EncodedTargets {
    Matrix context;     // n x C_ctx
    Matrix activities;  // n x C_act
};

EncodedTargets encode_targets(const dataio::Dataset& dataset);

}  // namespace seal::labels
