#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace seal::dataio {

/// The label universe: mutually exclusive contexts, co-occurring activities and
/// pairs that may never appear together.
struct LabelSchema {
    std::vector<std::string> contexts;
    std::vector<std::string> activities;
    std::vector<std::pair<std::string, std::string>> conflicts;

    /// Throws ValidationError on duplicate names, dangling conflict references or empty groups.
    void validate() const;

    std::size_t num_contexts() const { return contexts.size(); }
    std::size_t num_activities() const { return activities.size(); }
    std::size_t size() const { return contexts.size() + activities.size(); }

    /// Contexts first, then activities. This is the column order of every score matrix.
    std::vector<std::string> all_labels() const;
    std::optional<std::size_t> index_of(std::string_view label) const;
    bool is_context(std::string_view label) const;
    bool contains(std::string_view label) const { return index_of(label).has_value(); }

    nlohmann::json to_json() const;
    static LabelSchema from_json(const nlohmann::json& j);
    static LabelSchema load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    bool operator==(const LabelSchema&) const = default;
};

/// Feature values with an explicit missing mask. Missing entries hold NaN in `values`.
struct FeatureVector {
    std::vector<double> values;
    std::vector<bool> missing;

    FeatureVector() = default;
    explicit FeatureVector(std::vector<double> v);

    std::size_t size() const { return values.size(); }
    bool is_missing(std::size_t i) const { return missing[i]; }
};

struct Instance {
    std::string instance_id;
    std::string user_id;
    FeatureVector features;
    std::set<std::string> targets;
};

struct Dataset {
    LabelSchema schema;
    std::vector<std::string> feature_names;
    std::vector<Instance> instances;
    std::string provenance;

    std::size_t size() const { return instances.size(); }
    std::size_t feature_dim() const { return feature_names.size(); }

    /// Copy of this dataset holding the given instance indices, in the given order.
    Dataset subset(const std::vector<std::size_t>& indices) const;
};

struct SplitSpec {
    std::array<double, 3> ratios{0.6, 0.2, 0.2};
    std::uint64_t seed = 0;

    void validate() const;
};

struct Split {
    Dataset train;
    Dataset validation;
    Dataset test;
};

struct RemovalReport {
    std::size_t input_count = 0;
    std::size_t removed = 0;
    /// Instances carrying more than one context label.
    std::size_t context_exclusivity = 0;
    /// Keyed by "A|B" for each configured conflict pair.
    std::map<std::string, std::size_t> per_rule;
};

/// Parses the feature-CSV format. Throws LoadError naming the offending row/column.
Dataset load_feature_dataset(const std::filesystem::path& path, const LabelSchema& schema);

/// Writes the feature-CSV format with round-trip float precision.
void write_feature_dataset(const std::filesystem::path& path, const Dataset& dataset);
std::string format_feature_dataset(const Dataset& dataset);

/// Drops instances with more than one context or with any configured conflict pair.
std::pair<Dataset, RemovalReport> filter_conflicts(const Dataset& dataset);

/// Per-user seeded shuffle, floor sizes for train/validation, remainder to test.
/// Each part preserves the original instance order.
Split split_dataset(const Dataset& dataset, const SplitSpec& spec);

/// Index partition behind split_dataset, exposed for tests and run records.
std::array<std::vector<std::size_t>, 3> split_indices(const Dataset& dataset, const SplitSpec& spec);

}  // namespace seal::dataio
