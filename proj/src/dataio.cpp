#include "seal/dataio.hpp"

#include "seal/csv.hpp"
#include "seal/errors.hpp"
#include "seal/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace seal::dataio {

namespace {

constexpr std::string_view kFeaturePrefix = "f_";
constexpr std::string_view kTargetPrefix = "y_";

bool is_missing_token(std::string_view cell) {
    return cell.empty() || cell == "NaN" || cell == "nan" || cell == "NA" || cell == "na";
}

std::string rule_key(const std::pair<std::string, std::string>& rule) {
    return rule.first + "|" + rule.second;
}

}  // namespace

void LabelSchema::validate() const {
    if (contexts.empty()) {
        throw ValidationError("schema needs at least one context label");
    }
    if (activities.empty()) {
        throw ValidationError("schema needs at least one activity label");
    }
    std::unordered_set<std::string> seen;
    for (const auto& name : all_labels()) {
        if (name.empty()) {
            throw ValidationError("schema contains an empty label name");
        }
        if (!seen.insert(name).second) {
            throw ValidationError("duplicate label '" + name + "' in schema");
        }
    }
    for (const auto& [a, b] : conflicts) {
        if (!seen.contains(a) || !seen.contains(b)) {
            throw ValidationError("conflict rule (" + a + ", " + b + ") references an unknown label");
        }
        if (a == b) {
            throw ValidationError("conflict rule pairs label '" + a + "' with itself");
        }
    }
}

std::vector<std::string> LabelSchema::all_labels() const {
    std::vector<std::string> out = contexts;
    out.insert(out.end(), activities.begin(), activities.end());
    return out;
}

std::optional<std::size_t> LabelSchema::index_of(std::string_view label) const {
    for (std::size_t i = 0; i < contexts.size(); ++i) {
        if (contexts[i] == label) {
            return i;
        }
    }
    for (std::size_t i = 0; i < activities.size(); ++i) {
        if (activities[i] == label) {
            return contexts.size() + i;
        }
    }
    return std::nullopt;
}

bool LabelSchema::is_context(std::string_view label) const {
    return std::find(contexts.begin(), contexts.end(), label) != contexts.end();
}

nlohmann::json LabelSchema::to_json() const {
    nlohmann::json conflict_array = nlohmann::json::array();
    for (const auto& [a, b] : conflicts) {
        conflict_array.push_back({a, b});
    }
    return {{"contexts", contexts}, {"activities", activities}, {"conflicts", conflict_array}};
}

LabelSchema LabelSchema::from_json(const nlohmann::json& j) {
    LabelSchema schema;
    try {
        schema.contexts = j.at("contexts").get<std::vector<std::string>>();
        schema.activities = j.at("activities").get<std::vector<std::string>>();
        if (j.contains("conflicts")) {
            for (const auto& pair : j.at("conflicts")) {
                if (!pair.is_array() || pair.size() != 2) {
                    throw ValidationError("each conflict must be an array of two label names");
                }
                schema.conflicts.emplace_back(pair[0].get<std::string>(), pair[1].get<std::string>());
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed schema: ") + e.what());
    }
    schema.validate();
    return schema;
}

LabelSchema LabelSchema::load(const std::filesystem::path& path) {
    const std::string text = csv::read_text(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw LoadError("schema '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return from_json(j);
}

void LabelSchema::save(const std::filesystem::path& path) const {
    csv::write_text(path, to_json().dump(2) + "\n");
}

FeatureVector::FeatureVector(std::vector<double> v) : values(std::move(v)), missing(values.size(), false) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        missing[i] = std::isnan(values[i]);
    }
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
    Dataset out;
    out.schema = schema;
    out.feature_names = feature_names;
    out.provenance = provenance;
    out.instances.reserve(indices.size());
    for (const auto i : indices) {
        out.instances.push_back(instances.at(i));
    }
    return out;
}

void SplitSpec::validate() const {
    double total = 0.0;
    for (const double r : ratios) {
        if (!(r >= 0.0)) {
            throw ValidationError("split ratios must be non-negative");
        }
        total += r;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw ValidationError("split ratios must sum to 1 (got " + csv::format_double(total) + ")");
    }
}

Dataset load_feature_dataset(const std::filesystem::path& path, const LabelSchema& schema) {
    schema.validate();
    const auto lines = csv::read_lines(path);
    const std::string file = path.string();
    if (lines.empty()) {
        throw LoadError(file + ": missing header row");
    }

    const auto header = csv::split_line(lines.front());
    std::optional<std::size_t> id_col;
    std::optional<std::size_t> user_col;
    std::vector<std::size_t> feature_cols;
    std::vector<std::pair<std::size_t, std::string>> target_cols;
    Dataset dataset;
    dataset.schema = schema;
    dataset.provenance = file;

    std::unordered_set<std::string> seen_columns;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string& name = header[c];
        if (!seen_columns.insert(name).second) {
            throw LoadError(file + ": malformed header, duplicate column '" + name + "'");
        }
        if (name == "instance_id") {
            id_col = c;
        } else if (name == "user_id") {
            user_col = c;
        } else if (name.rfind(kFeaturePrefix, 0) == 0 && name.size() > kFeaturePrefix.size()) {
            feature_cols.push_back(c);
            dataset.feature_names.push_back(name.substr(kFeaturePrefix.size()));
        } else if (name.rfind(kTargetPrefix, 0) == 0 && name.size() > kTargetPrefix.size()) {
            std::string label = name.substr(kTargetPrefix.size());
            if (!schema.contains(label)) {
                throw LoadError(file + ": column '" + name + "' names label '" + label + "' which is not in the schema");
            }
            target_cols.emplace_back(c, std::move(label));
        } else {
            throw LoadError(file + ": malformed header, unrecognized column '" + name + "'");
        }
    }
    if (!id_col || !user_col) {
        throw LoadError(file + ": malformed header, 'instance_id' and 'user_id' columns are required");
    }

    std::unordered_set<std::string> ids;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        if (lines[r].empty()) {
            continue;
        }
        const auto cells = csv::split_line(lines[r]);
        const std::string where = file + ": row " + std::to_string(r + 1);
        if (cells.size() != header.size()) {
            throw LoadError(where + " has " + std::to_string(cells.size()) + " cells, header has " +
                            std::to_string(header.size()));
        }
        Instance inst;
        inst.instance_id = cells[*id_col];
        inst.user_id = cells[*user_col];
        if (inst.instance_id.empty()) {
            throw LoadError(where + ": empty instance_id");
        }
        if (!ids.insert(inst.instance_id).second) {
            throw LoadError(where + ": duplicate instance_id '" + inst.instance_id + "'");
        }
        std::vector<double> values(feature_cols.size());
        for (std::size_t k = 0; k < feature_cols.size(); ++k) {
            const std::string& cell = cells[feature_cols[k]];
            if (is_missing_token(cell)) {
                values[k] = std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            const auto parsed = csv::parse_double(cell);
            if (!parsed || std::isinf(*parsed)) {
                throw LoadError(where + ", column '" + header[feature_cols[k]] + "': non-numeric feature value '" +
                                cell + "'");
            }
            values[k] = *parsed;
        }
        inst.features = FeatureVector(std::move(values));
        for (const auto& [col, label] : target_cols) {
            const std::string& cell = cells[col];
            if (cell == "1") {
                inst.targets.insert(label);
            } else if (cell != "0") {
                throw LoadError(where + ", column '" + header[col] + "': target must be 0 or 1, got '" + cell + "'");
            }
        }
        dataset.instances.push_back(std::move(inst));
    }
    return dataset;
}

std::string format_feature_dataset(const Dataset& dataset) {
    const auto labels = dataset.schema.all_labels();
    std::vector<std::string> header = {"instance_id", "user_id"};
    for (const auto& f : dataset.feature_names) {
        header.push_back(std::string(kFeaturePrefix) + f);
    }
    for (const auto& l : labels) {
        header.push_back(std::string(kTargetPrefix) + l);
    }
    std::string out = csv::join_line(header) + "\n";
    for (const auto& inst : dataset.instances) {
        std::vector<std::string> row = {inst.instance_id, inst.user_id};
        for (std::size_t k = 0; k < inst.features.size(); ++k) {
            row.push_back(inst.features.is_missing(k) ? "NaN" : csv::format_double(inst.features.values[k]));
        }
        for (const auto& l : labels) {
            row.push_back(inst.targets.contains(l) ? "1" : "0");
        }
        out += csv::join_line(row) + "\n";
    }
    return out;
}

void write_feature_dataset(const std::filesystem::path& path, const Dataset& dataset) {
    csv::write_text(path, format_feature_dataset(dataset));
}

std::pair<Dataset, RemovalReport> filter_conflicts(const Dataset& dataset) {
    RemovalReport report;
    report.input_count = dataset.size();
    for (const auto& rule : dataset.schema.conflicts) {
        report.per_rule[rule_key(rule)] = 0;
    }

    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < dataset.instances.size(); ++i) {
        const auto& targets = dataset.instances[i].targets;
        bool drop = false;
        const auto n_ctx = std::count_if(targets.begin(), targets.end(),
                                         [&](const std::string& t) { return dataset.schema.is_context(t); });
        if (n_ctx > 1) {
            ++report.context_exclusivity;
            drop = true;
        }
        for (const auto& rule : dataset.schema.conflicts) {
            if (targets.contains(rule.first) && targets.contains(rule.second)) {
                ++report.per_rule[rule_key(rule)];
                drop = true;
            }
        }
        if (drop) {
            ++report.removed;
        } else {
            keep.push_back(i);
        }
    }
    return {dataset.subset(keep), report};
}

std::array<std::vector<std::size_t>, 3> split_indices(const Dataset& dataset, const SplitSpec& spec) {
    spec.validate();

    // Users in lexicographic order so the draw sequence does not depend on row order.
    std::map<std::string, std::vector<std::size_t>> by_user;
    for (std::size_t i = 0; i < dataset.instances.size(); ++i) {
        by_user[dataset.instances[i].user_id].push_back(i);
    }

    Rng rng(derive_seed(spec.seed, "split"));
    std::array<std::vector<std::size_t>, 3> parts;
    for (auto& [user, indices] : by_user) {
        rng.shuffle(indices.begin(), indices.end());
        const auto n = indices.size();
        // The epsilon keeps exact products such as 0.6 * 5 from flooring down.
        const auto n_train = std::min(n, static_cast<std::size_t>(std::floor(spec.ratios[0] * n + 1e-9)));
        const auto n_val =
            std::min(n - n_train, static_cast<std::size_t>(std::floor(spec.ratios[1] * n + 1e-9)));
        parts[0].insert(parts[0].end(), indices.begin(), indices.begin() + n_train);
        parts[1].insert(parts[1].end(), indices.begin() + n_train, indices.begin() + n_train + n_val);
        parts[2].insert(parts[2].end(), indices.begin() + n_train + n_val, indices.end());
    }
    for (auto& p : parts) {
        std::sort(p.begin(), p.end());
    }
    return parts;
}

Split split_dataset(const Dataset& dataset, const SplitSpec& spec) {
    const auto parts = split_indices(dataset, spec);
    return {dataset.subset(parts[0]), dataset.subset(parts[1]), dataset.subset(parts[2])};
}

}  // namespace seal::dataio
