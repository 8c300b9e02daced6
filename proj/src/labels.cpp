#include "seal/labels.hpp"

#include "seal/csv.hpp"
#include "seal/errors.hpp"
#include "seal/rng.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace seal::labels {

namespace {

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') {
            c = static_cast<char>(c - 'A' + 'a');
        }
    }
    return out;
}

bool ends_with_ci(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && ascii_lower(s.substr(s.size() - suffix.size())) == suffix;
}

std::string strip_action_suffix(std::string_view label) {
    for (const std::string_view suffix : {"(action)", "(a)"}) {
        if (ends_with_ci(label, suffix)) {
            std::string base(label.substr(0, label.size() - suffix.size()));
            while (!base.empty() && base.back() == ' ') {
                base.pop_back();
            }
            return base;
        }
    }
    return std::string(label);
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
}

std::string default_context_phrase(std::string_view label) {
    std::string p = ascii_lower(label);
    if (p.rfind("in ", 0) == 0 && p.rfind("in their ", 0) != 0) {
        return "in their " + p.substr(3);
    }
    if (p.rfind("on ", 0) == 0 && p.rfind("on the ", 0) != 0) {
        return "on the " + p.substr(3);
    }
    return p;
}

std::string default_activity_phrase(std::string_view label) {
    std::string p = ascii_lower(strip_action_suffix(label));
    // Place-like labels read as locations.
    if (p == "bathroom" || p == "kitchen" || p == "office") {
        return "in the " + p;
    }
    replace_all(p, "on phone", "on the phone");
    return p;
}

std::string fill(std::string_view templ, std::string_view phrase) {
    std::string out(templ);
    const auto pos = out.find("{}");
    if (pos == std::string::npos) {
        return out;
    }
    out.replace(pos, 2, phrase);
    return out;
}

}  // namespace

TemplateTable TemplateTable::defaults(const dataio::LabelSchema& schema) {
    TemplateTable t;
    t.contexts.insert(schema.contexts.begin(), schema.contexts.end());
    const auto all = schema.all_labels();
    t.known_labels.insert(all.begin(), all.end());
    return t;
}

void TemplateTable::apply_overrides(const nlohmann::json& j) {
    try {
        if (j.contains("context_template")) {
            context_template = j.at("context_template").get<std::string>();
        }
        if (j.contains("state_template")) {
            state_template = j.at("state_template").get<std::string>();
        }
        if (j.contains("action_template")) {
            action_template = j.at("action_template").get<std::string>();
        }
        if (j.contains("phrases")) {
            for (const auto& [label, phrase] : j.at("phrases").items()) {
                phrases[label] = phrase.get<std::string>();
            }
        }
        if (j.contains("sentences")) {
            for (const auto& [label, sentence] : j.at("sentences").items()) {
                sentences[label] = sentence.get<std::string>();
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed template overrides: ") + e.what());
    }
}

TemplateTable TemplateTable::load(const std::filesystem::path& path, const dataio::LabelSchema& schema) {
    TemplateTable t = defaults(schema);
    try {
        t.apply_overrides(nlohmann::json::parse(csv::read_text(path)));
    } catch (const nlohmann::json::parse_error& e) {
        throw LoadError("template file '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return t;
}

bool is_action_label(std::string_view label) {
    return ends_with_ci(label, "(action)") || ends_with_ci(label, "(a)");
}

std::string rewrite_label(std::string_view label, const TemplateTable& table) {
    const std::string key(label);
    if (!table.known_labels.contains(key)) {
        throw ValidationError("label '" + key + "' is not in the schema");
    }
    if (const auto it = table.sentences.find(key); it != table.sentences.end()) {
        return it->second;
    }
    if (table.contexts.contains(key)) {
        const auto it = table.phrases.find(key);
        return fill(table.context_template, it != table.phrases.end() ? it->second : default_context_phrase(label));
    }
    const auto it = table.phrases.find(key);
    const std::string phrase = it != table.phrases.end() ? it->second : default_activity_phrase(label);
    return fill(is_action_label(label) ? table.action_template : table.state_template, phrase);
}

const LabelEmbedding* LabelEmbeddingTable::find(std::string_view label) const {
    for (const auto& row : rows) {
        if (row.label == label) {
            return &row;
        }
    }
    return nullptr;
}

void LabelEmbeddingTable::require_covers(const dataio::LabelSchema& schema) const {
    for (const auto& label : schema.all_labels()) {
        if (find(label) == nullptr) {
            throw ValidationError("embedding table has no entry for schema label '" + label + "'");
        }
    }
}

Matrix LabelEmbeddingTable::matrix_for(const dataio::LabelSchema& schema) const {
    require_covers(schema);
    const auto all = schema.all_labels();
    Matrix m(all.size(), dim);
    for (std::size_t i = 0; i < all.size(); ++i) {
        const auto& e = find(all[i])->embedding;
        std::copy(e.begin(), e.end(), m.row(i).begin());
    }
    return m;
}

LabelEmbeddingTable LabelEmbeddingTable::from_matrix(const dataio::LabelSchema& schema, const Matrix& rows,
                                                     const std::vector<std::string>& sentences, std::string source) {
    const auto all = schema.all_labels();
    if (rows.rows() != all.size() || sentences.size() != all.size()) {
        throw DimensionError("embedding rows must match the schema label count");
    }
    LabelEmbeddingTable t;
    t.dim = rows.cols();
    t.source = std::move(source);
    for (std::size_t i = 0; i < all.size(); ++i) {
        const auto r = rows.row(i);
        t.rows.push_back({all[i], sentences[i], std::vector<double>(r.begin(), r.end())});
    }
    return t;
}

LabelEmbeddingTable parse_embedding_table(const std::filesystem::path& path) {
    const auto lines = csv::read_lines(path);
    const std::string file = path.string();
    LabelEmbeddingTable table;
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].find_first_not_of(" \t") == std::string::npos) {
            continue;
        }
        const std::string where = file + ": line " + std::to_string(i + 1);
        LabelEmbedding row;
        try {
            const auto j = nlohmann::json::parse(lines[i]);
            row.label = j.at("label").get<std::string>();
            row.sentence = j.at("sentence").get<std::string>();
            row.embedding = j.at("embedding").get<std::vector<double>>();
            if (table.rows.empty() && j.contains("source")) {
                table.source = j.at("source").get<std::string>();
            }
        } catch (const nlohmann::json::exception& e) {
            throw LoadError(where + ": malformed line: " + e.what());
        }
        if (row.embedding.empty()) {
            throw LoadError(where + ": empty embedding for label '" + row.label + "'");
        }
        for (const double v : row.embedding) {
            if (!std::isfinite(v)) {
                throw LoadError(where + ": non-finite embedding value for label '" + row.label + "'");
            }
        }
        if (table.rows.empty()) {
            table.dim = row.embedding.size();
        } else if (row.embedding.size() != table.dim) {
            throw LoadError(where + ": embedding for '" + row.label + "' has " + std::to_string(row.embedding.size()) +
                            " values, expected " + std::to_string(table.dim));
        }
        if (!seen.insert(row.label).second) {
            throw LoadError(where + ": duplicate label '" + row.label + "'");
        }
        table.rows.push_back(std::move(row));
    }
    if (table.rows.empty()) {
        throw LoadError(file + ": no embeddings");
    }
    return table;
}

LabelEmbeddingTable load_embedding_table(const std::filesystem::path& path, const dataio::LabelSchema& schema) {
    auto table = parse_embedding_table(path);
    table.require_covers(schema);
    return table;
}

std::string format_embedding_table(const LabelEmbeddingTable& table) {
    std::string out;
    for (const auto& row : table.rows) {
        if (row.embedding.size() != table.dim) {
            throw DimensionError("embedding for '" + row.label + "' does not match table dim");
        }
        nlohmann::ordered_json j;
        j["label"] = row.label;
        j["sentence"] = row.sentence;
        j["embedding"] = row.embedding;
        if (!table.source.empty()) {
            j["source"] = table.source;
        }
        out += j.dump() + "\n";
    }
    return out;
}

void save_embedding_table(const std::filesystem::path& path, const LabelEmbeddingTable& table) {
    csv::write_text(path, format_embedding_table(table));
}

std::vector<double> fallback_embed(std::string_view sentence, std::size_t dim, std::uint64_t seed) {
    if (dim < 1) {
        throw ValidationError("embedding dim must be at least 1");
    }
    if (sentence.empty()) {
        throw ValidationError("cannot embed an empty sentence");
    }
    const std::string padded = " " + std::string(sentence) + " ";
    const std::uint64_t seed_mix = splitmix64(seed);
    std::vector<double> v(dim, 0.0);
    std::uint64_t first_hash = 0;
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (std::size_t k = 0; k < 3; ++k) {
            h ^= static_cast<unsigned char>(padded[i + k]);
            h *= 0x100000001b3ULL;
        }
        h = splitmix64(h ^ seed_mix);
        if (i == 0) {
            first_hash = h;
        }
        v[h % dim] += (h >> 63) ? -1.0 : 1.0;
    }
    double norm = 0.0;
    for (const double x : v) {
        norm += x * x;
    }
    if (norm == 0.0) {
        // Every bucket cancelled; fall back to the first trigram's bucket.
        v[first_hash % dim] = 1.0;
        return v;
    }
    norm = std::sqrt(norm);
    for (double& x : v) {
        x /= norm;
    }
    return v;
}

LabelEmbeddingTable fallback_table(const dataio::LabelSchema& schema, const TemplateTable& templates,
                                   std::size_t dim, std::uint64_t seed) {
    LabelEmbeddingTable t;
    t.dim = dim;
    t.source = "fallback-trigram";
    for (const auto& label : schema.all_labels()) {
        const auto sentence = rewrite_label(label, templates);
        t.rows.push_back({label, sentence, fallback_embed(sentence, dim, seed)});
    }
    return t;
}

TargetEncoding encode_targets(const dataio::Instance& instance, const dataio::LabelSchema& schema) {
    TargetEncoding enc;
    enc.context.assign(schema.num_contexts(), 0.0);
    enc.activities.assign(schema.num_activities(), 0.0);
    std::size_t n_ctx = 0;
    for (const auto& label : instance.targets) {
        const auto idx = schema.index_of(label);
        if (!idx) {
            throw ValidationError("instance '" + instance.instance_id + "' has label '" + label +
                                  "' outside the schema");
        }
        if (*idx < schema.num_contexts()) {
            enc.context[*idx] = 1.0;
            ++n_ctx;
        } else {
            enc.activities[*idx - schema.num_contexts()] = 1.0;
        }
    }
    if (n_ctx > 1) {
        throw ValidationError("instance '" + instance.instance_id + "' has more than one context label");
    }
    return enc;
}

EncodedTargets encode_targets(const dataio::Dataset& dataset) {
    EncodedTargets out{Matrix(dataset.size(), dataset.schema.num_contexts()),
                       Matrix(dataset.size(), dataset.schema.num_activities())};
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto enc = encode_targets(dataset.instances[i], dataset.schema);
        std::copy(enc.context.begin(), enc.context.end(), out.context.row(i).begin());
        std::copy(enc.activities.begin(), enc.activities.end(), out.activities.row(i).begin());
    }
    return out;
}

}  // namespace seal::labels
