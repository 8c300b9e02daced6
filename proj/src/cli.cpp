#include "seal/cli.hpp"

#include "seal/align.hpp"
#include "seal/csv.hpp"
#include "seal/dataio.hpp"
#include "seal/errors.hpp"
#include "seal/hyperopt.hpp"
#include "seal/labels.hpp"
#include "seal/metrics.hpp"
#include "seal/signal.hpp"
#include "seal/synth.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>

namespace seal::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

/// Everything a subcommand can be configured with. Each command snapshots the subset it reads.
struct Options {
    std::string command;
    std::string schema;
    std::string data;
    std::string embeddings;
    std::string templates;
    std::string checkpoint;
    std::string spec_path;
    std::string space_path;
    std::string resume;
    std::string out;
    std::string part = "test";
    std::string model = "seal";
    std::string embedding_mode;
    std::uint64_t seed = 0;
    std::size_t embed_dim = 64;
    std::size_t budget = 50;
    std::vector<double> split{0.6, 0.2, 0.2};
    double window_s = 3.0;
    double step_s = 1.5;
    double sample_rate_hz = 0.0;
    bool strict_space = false;
    bool raw = false;
    bool verbose = false;
    align::TrainConfig train;
    std::string threshold_policy = "fixed";
    std::string class_weights = "uniform";
    // Resolved from files when the command runs; snapshotted by value.
    Json synth_spec;
    Json raw_spec;
    Json space;
};

struct Context {
    Options opt;
    std::ostream& out;
    std::ostream& err;
};

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& target) {
    if (j.contains(key)) {
        target = j.at(key).get<T>();
    }
}

/// Applies a snapshot to the option defaults. Explicit flags are parsed afterwards and win.
void load_snapshot(Options& o, const nlohmann::json& j) {
    try {
        read_key(j, "schema", o.schema);
        read_key(j, "data", o.data);
        read_key(j, "embeddings", o.embeddings);
        read_key(j, "templates", o.templates);
        read_key(j, "checkpoint", o.checkpoint);
        read_key(j, "resume", o.resume);
        read_key(j, "part", o.part);
        read_key(j, "model", o.model);
        read_key(j, "seed", o.seed);
        read_key(j, "embed_dim", o.embed_dim);
        read_key(j, "budget", o.budget);
        read_key(j, "split", o.split);
        read_key(j, "window_s", o.window_s);
        read_key(j, "step_s", o.step_s);
        read_key(j, "sample_rate_hz", o.sample_rate_hz);
        read_key(j, "strict_space", o.strict_space);
        read_key(j, "raw", o.raw);
        if (j.contains("train")) {
            o.train = align::TrainConfig::from_json(j.at("train"));
            o.threshold_policy = align::to_string(o.train.threshold_policy);
            o.class_weights = align::to_string(o.train.class_weights);
        }
        if (j.contains("synth_spec")) {
            o.synth_spec = j.at("synth_spec");
        }
        if (j.contains("raw_spec")) {
            o.raw_spec = j.at("raw_spec");
        }
        if (j.contains("space")) {
            o.space = j.at("space");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed run config: ") + e.what());
    }
}

Json train_json(const Options& o) {
    return o.train.to_json();
}

Json snapshot(const Options& o) {
    Json j;
    j["command"] = o.command;
    j["seed"] = o.seed;
    const auto& c = o.command;
    if (c == "preprocess") {
        j["schema"] = o.schema;
        j["data"] = o.data;
        j["window_s"] = o.window_s;
        j["step_s"] = o.step_s;
        j["sample_rate_hz"] = o.sample_rate_hz;
    } else if (c == "synth") {
        j["raw"] = o.raw;
        j["synth_spec"] = o.synth_spec;
        if (o.raw) {
            j["raw_spec"] = o.raw_spec;
        }
    } else if (c == "train" || c == "compare" || c == "hyperopt") {
        j["schema"] = o.schema;
        j["data"] = o.data;
        j["embeddings"] = o.embeddings;
        j["templates"] = o.templates;
        j["embed_dim"] = o.embed_dim;
        j["split"] = o.split;
        if (c == "train") {
            j["model"] = o.model;
            j["strict_space"] = o.strict_space;
        }
        if (c == "hyperopt") {
            j["budget"] = o.budget;
            j["resume"] = o.resume;
            j["space"] = o.space;
        }
        j["train"] = train_json(o);
    } else if (c == "evaluate") {
        j["checkpoint"] = o.checkpoint;
        j["data"] = o.data;
        j["schema"] = o.schema;
        j["part"] = o.part;
    } else if (c == "predict") {
        j["checkpoint"] = o.checkpoint;
        j["data"] = o.data;
    } else if (c == "export-embeddings") {
        j["checkpoint"] = o.checkpoint;
        j["schema"] = o.schema;
        j["templates"] = o.templates;
        j["embed_dim"] = o.embed_dim;
    }
    return j;
}

// A required flag that was given neither on the command line nor in --config.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

fs::path require_out(const Options& o) {
    if (o.out.empty()) {
        throw UsageError("--out is required for '" + o.command + "'");
    }
    return fs::path(o.out);
}

void require(const std::string& value, const char* flag, const Options& o) {
    if (value.empty()) {
        throw UsageError(std::string(flag) + " is required for '" + o.command + "'");
    }
}

void write_snapshot(const Context& ctx) {
    csv::write_text(require_out(ctx.opt) / kRunConfigFile, snapshot(ctx.opt).dump(2) + "\n");
}

nlohmann::json read_json(const fs::path& path) {
    try {
        return nlohmann::json::parse(csv::read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw LoadError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

dataio::SplitSpec split_spec(const Options& o) {
    if (o.split.size() != 3) {
        throw ValidationError("--split needs three ratios (train, validation, test)");
    }
    dataio::SplitSpec s;
    s.ratios = {o.split[0], o.split[1], o.split[2]};
    s.seed = o.seed;
    s.validate();
    return s;
}

/// Applies --threshold-policy, --class-weights and --seed on top of the train options.
void finalize_train(Options& o) {
    o.train.threshold_policy = align::threshold_policy_from_string(o.threshold_policy);
    o.train.class_weights = align::class_weight_mode_from_string(o.class_weights);
    o.train.seed = o.seed;
    o.train.validate();
}

struct Prepared {
    dataio::LabelSchema schema;
    dataio::RemovalReport removal;
    dataio::Split raw;
    signal::Normalizer normalizer;
    dataio::Dataset train;
    dataio::Dataset validation;
    dataio::Dataset test;
    dataio::SplitSpec split;
};

Prepared prepare(const Options& o) {
    require(o.schema, "--schema", o);
    require(o.data, "--data", o);
    Prepared p;
    p.schema = dataio::LabelSchema::load(o.schema);
    const auto dataset = dataio::load_feature_dataset(o.data, p.schema);
    auto [filtered, removal] = dataio::filter_conflicts(dataset);
    p.removal = removal;
    p.split = split_spec(o);
    p.raw = dataio::split_dataset(filtered, p.split);
    if (p.raw.train.size() < 2) {
        throw ValidationError("the training part has fewer than 2 instances");
    }
    p.normalizer = signal::fit_normalizer(p.raw.train);
    p.train = signal::apply_normalizer(p.normalizer, p.raw.train);
    p.validation = signal::apply_normalizer(p.normalizer, p.raw.validation);
    p.test = signal::apply_normalizer(p.normalizer, p.raw.test);
    return p;
}

labels::LabelEmbeddingTable label_table(const Options& o, const dataio::LabelSchema& schema) {
    if (!o.embeddings.empty()) {
        return labels::load_embedding_table(o.embeddings, schema);
    }
    const auto templates =
        o.templates.empty() ? labels::TemplateTable::defaults(schema) : labels::TemplateTable::load(o.templates, schema);
    return labels::fallback_table(schema, templates, o.embed_dim, derive_seed(o.seed, "fallback"));
}

void check_strict_space(const align::TrainConfig& c) {
    const auto space = hyperopt::SearchSpace::training_default();
    const std::vector<double> values{c.lr,
                                     static_cast<double>(c.epochs),
                                     static_cast<double>(c.hidden1),
                                     static_cast<double>(c.hidden2),
                                     static_cast<double>(c.shared_dim),
                                     c.dropout};
    for (std::size_t k = 0; k < space.size(); ++k) {
        const auto& d = space.dims[k];
        if (!(values[k] >= d.lower && values[k] <= d.upper)) {
            throw ValidationError("strict search space: " + d.name + " = " + csv::format_double(values[k]) +
                                  " lies outside [" + csv::format_double(d.lower) + ", " +
                                  csv::format_double(d.upper) + "]");
        }
    }
}

std::vector<double> choose_thresholds(const align::AnyModel& model, const align::TrainConfig& config,
                                      const dataio::Dataset& validation, const dataio::Dataset& train) {
    const auto& schema = align::schema_of(model);
    if (config.threshold_policy == align::ThresholdPolicy::Fixed) {
        return std::vector<double>(schema.num_activities(), 0.5);
    }
    const auto& tune_on = validation.size() > 0 ? validation : train;
    return align::tune_thresholds(align::forward_scores(model, align::feature_matrix(tune_on)),
                                  labels::encode_targets(tune_on), schema);
}

metrics::MetricsReport evaluate_on(const align::AnyModel& model, const std::vector<double>& thresholds,
                                   const dataio::Dataset& data) {
    if (data.size() == 0) {
        throw ValidationError("evaluation set is empty");
    }
    const auto pred = align::predict(model, align::feature_matrix(data), thresholds);
    return metrics::report(pred, labels::encode_targets(data), align::schema_of(model));
}

struct Trained {
    align::AnyModel model;
    align::TrainResult result;
    std::vector<double> thresholds;
};

Trained train_model(const std::string& kind, const Prepared& p, const labels::LabelEmbeddingTable* table,
                    const align::TrainConfig& config) {
    if (kind == "seal") {
        Rng init(derive_seed(config.seed, "init"));
        align::AnyModel model = align::SealModel::create(p.schema, *table, p.train.feature_dim(), config, init);
        auto result = align::train(model, p.train, p.validation, config);
        auto thresholds = choose_thresholds(model, config, p.validation, p.train);
        return {std::move(model), std::move(result), std::move(thresholds)};
    }
    if (kind == "baseline") {
        auto [base, result] = align::train_baseline(p.train, p.validation, config);
        align::AnyModel model = std::move(base);
        auto thresholds = choose_thresholds(model, config, p.validation, p.train);
        return {std::move(model), std::move(result), std::move(thresholds)};
    }
    throw ValidationError("unknown model kind '" + kind + "' (expected seal or baseline)");
}

void save_trained(const fs::path& dir, const Trained& t, const Prepared& p, const align::TrainConfig& config) {
    align::save_checkpoint(dir / "checkpoint.json", {t.model, p.normalizer, config, t.thresholds, p.split});
    csv::write_text(dir / "history.csv", t.result.history_csv());
}

Json removal_json(const dataio::RemovalReport& r) {
    Json rules = Json::object();
    for (const auto& [k, v] : r.per_rule) {
        rules[k] = v;
    }
    return {{"input_count", r.input_count},
            {"removed", r.removed},
            {"context_exclusivity", r.context_exclusivity},
            {"per_rule", rules}};
}

// ---- subcommands -------------------------------------------------------------------

int cmd_preprocess(Context& ctx) {
    const auto& o = ctx.opt;
    require(o.schema, "--schema", o);
    require(o.data, "--data", o);
    const fs::path out = require_out(o);
    const auto schema = dataio::LabelSchema::load(o.schema);

    std::vector<fs::path> files;
    if (fs::is_directory(o.data)) {
        for (const auto& entry : fs::directory_iterator(o.data)) {
            if (entry.is_regular_file() && entry.path().extension() == ".csv") {
                files.push_back(entry.path());
            }
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) {
            throw IoError("no .csv recordings in '" + o.data + "'");
        }
    } else {
        files.push_back(o.data);
    }

    signal::PreprocessOptions popt{o.window_s, o.step_s};
    dataio::Dataset all;
    all.schema = schema;
    Json per_file = Json::array();
    for (const auto& f : files) {
        const auto rec = signal::load_recording_csv(f, o.sample_rate_hz);
        const std::string user = f.stem().string();
        auto ds = signal::preprocess_recording(rec, user, schema, popt);
        if (all.feature_names.empty()) {
            all.feature_names = ds.feature_names;
        } else if (all.feature_names != ds.feature_names) {
            throw ValidationError("recording '" + f.string() + "' has different channels from the first recording");
        }
        per_file.push_back({{"recording", f.string()},
                            {"user_id", user},
                            {"sample_rate_hz", rec.sample_rate_hz},
                            {"windows", ds.size()},
                            {"too_short", ds.size() == 0}});
        if (ds.size() == 0) {
            ctx.err << "warning: '" << f.string() << "' is shorter than one window\n";
        }
        for (auto& inst : ds.instances) {
            all.instances.push_back(std::move(inst));
        }
    }
    auto [filtered, removal] = dataio::filter_conflicts(all);
    filtered.provenance = "preprocess";
    dataio::write_feature_dataset(out / "features.csv", filtered);
    Json report;
    report["recordings"] = per_file;
    report["removal"] = removal_json(removal);
    csv::write_text(out / "preprocess_report.json", report.dump(2) + "\n");
    write_snapshot(ctx);
    ctx.out << "preprocess: " << filtered.size() << " windows kept, " << removal.removed << " removed -> "
            << (out / "features.csv").string() << "\n";
    return kExitOk;
}

int cmd_synth(Context& ctx) {
    auto& o = ctx.opt;
    const fs::path out = require_out(o);
    if (!o.spec_path.empty()) {
        o.synth_spec = read_json(o.spec_path);
    }
    auto spec = o.synth_spec.is_null() ? synth::SynthSpec{} : synth::SynthSpec::from_json(o.synth_spec);
    if (!o.embedding_mode.empty()) {
        spec.embedding_mode = synth::embedding_mode_from_string(o.embedding_mode);
    }
    spec.seed = o.seed;
    spec.normalize();
    o.synth_spec = spec.to_json();

    if (o.raw) {
        synth::RawSpec raw;
        if (!o.raw_spec.is_null()) {
            raw.num_channels = o.raw_spec.value("num_channels", raw.num_channels);
            raw.sample_rate_hz = o.raw_spec.value("sample_rate_hz", raw.sample_rate_hz);
            raw.segment_s = o.raw_spec.value("segment_s", raw.segment_s);
            raw.num_segments = o.raw_spec.value("num_segments", raw.num_segments);
            raw.noise = o.raw_spec.value("noise", raw.noise);
        }
        o.raw_spec = Json{{"num_channels", raw.num_channels},
                          {"sample_rate_hz", raw.sample_rate_hz},
                          {"segment_s", raw.segment_s},
                          {"num_segments", raw.num_segments},
                          {"noise", raw.noise}};
        const auto rec = synth::generate_recording(spec, raw);
        signal::write_recording_csv(out / "recording.csv", rec);
        dataio::LabelSchema schema{spec.context_names, spec.activity_names, {}};
        schema.save(out / "schema.json");
        write_snapshot(ctx);
        ctx.out << "synth: " << rec.num_samples() << " samples x " << rec.channels.size() << " channels -> "
                << (out / "recording.csv").string() << "\n";
        return kExitOk;
    }

    const auto result = synth::generate(spec);
    synth::write_output(out, result);
    write_snapshot(ctx);
    ctx.out << "synth: " << result.dataset.size() << " instances, " << spec.num_contexts << " contexts, "
            << spec.num_activities << " activities -> " << out.string() << "\n";
    return kExitOk;
}

int cmd_train(Context& ctx) {
    auto& o = ctx.opt;
    const fs::path out = require_out(o);
    finalize_train(o);
    if (o.strict_space) {
        check_strict_space(o.train);
    }
    const auto p = prepare(o);
    std::optional<labels::LabelEmbeddingTable> table;
    if (o.model == "seal") {
        table = label_table(o, p.schema);
    }
    const auto t = train_model(o.model, p, table ? &*table : nullptr, o.train);
    save_trained(out, t, p, o.train);
    if (o.verbose) {
        ctx.out << t.result.history_csv();
    }
    if (p.validation.size() > 0) {
        evaluate_on(t.model, t.thresholds, p.validation)
            .write(out / "validation_metrics.csv", out / "validation_metrics.json");
    }
    write_snapshot(ctx);
    ctx.out << "train: " << o.model << " model, best epoch " << t.result.best_epoch << ", validation loss "
            << csv::format_double(t.result.best_val_loss) << " -> " << (out / "checkpoint.json").string() << "\n";
    return kExitOk;
}

dataio::Dataset checkpoint_data(const Options& o, const align::Checkpoint& ck, bool apply_split) {
    require(o.data, "--data", o);
    const auto& schema = align::schema_of(ck.model);
    if (!o.schema.empty() && !(dataio::LabelSchema::load(o.schema) == schema)) {
        throw ValidationError("schema '" + o.schema + "' does not match the checkpoint's label schema");
    }
    auto data = dataio::load_feature_dataset(o.data, schema);
    if (data.feature_dim() != ck.normalizer.input_dim) {
        throw DimensionError("data has " + std::to_string(data.feature_dim()) + " features, the checkpoint expects " +
                             std::to_string(ck.normalizer.input_dim));
    }
    if (apply_split) {
        data = dataio::filter_conflicts(data).first;
        if (o.part != "all") {
            auto split = dataio::split_dataset(data, ck.split);
            if (o.part == "train") {
                data = std::move(split.train);
            } else if (o.part == "validation") {
                data = std::move(split.validation);
            } else if (o.part == "test") {
                data = std::move(split.test);
            } else {
                throw ValidationError("unknown part '" + o.part + "' (expected train, validation, test or all)");
            }
        }
    }
    return signal::apply_normalizer(ck.normalizer, data);
}

int cmd_evaluate(Context& ctx) {
    const auto& o = ctx.opt;
    require(o.checkpoint, "--checkpoint", o);
    const fs::path out = require_out(o);
    const auto ck = align::load_checkpoint(o.checkpoint);
    const auto data = checkpoint_data(o, ck, true);
    const auto report = evaluate_on(ck.model, ck.thresholds, data);
    report.write(out / "metrics.csv", out / "metrics.json");
    write_snapshot(ctx);
    ctx.out << "evaluate: " << data.size() << " instances (" << o.part << "), activity MCC "
            << csv::format_double(report.activity_mcc) << ", context accuracy "
            << csv::format_double(report.context_accuracy) << "\n";
    return kExitOk;
}

int cmd_predict(Context& ctx) {
    const auto& o = ctx.opt;
    require(o.checkpoint, "--checkpoint", o);
    const fs::path out = require_out(o);
    const auto ck = align::load_checkpoint(o.checkpoint);
    const auto data = checkpoint_data(o, ck, false);
    const auto& schema = align::schema_of(ck.model);
    const auto pred = align::predict(ck.model, align::feature_matrix(data), ck.thresholds);

    std::vector<std::string> header{"instance_id", "user_id", "context", "activities"};
    for (const auto& label : schema.all_labels()) {
        header.push_back("p_" + label);
    }
    std::string text = csv::join_line(header) + "\n";
    const std::size_t n_ctx = schema.num_contexts();
    for (std::size_t i = 0; i < pred.size(); ++i) {
        std::vector<std::string> row{data.instances[i].instance_id, data.instances[i].user_id,
                                     schema.contexts[pred.context[i]]};
        std::string acts;
        for (std::size_t a = 0; a < schema.num_activities(); ++a) {
            if (pred.has_activity(i, a)) {
                acts += (acts.empty() ? "" : ";") + schema.activities[a];
            }
        }
        row.push_back(acts);
        const auto s = pred.scores.row(i);
        const double mx = *std::max_element(s.begin(), s.begin() + n_ctx);
        double z = 0.0;
        for (std::size_t c = 0; c < n_ctx; ++c) {
            z += std::exp(s[c] - mx);
        }
        for (std::size_t c = 0; c < n_ctx; ++c) {
            row.push_back(csv::format_double(std::exp(s[c] - mx) / z));
        }
        for (std::size_t a = 0; a < schema.num_activities(); ++a) {
            row.push_back(csv::format_double(align::sigmoid(s[n_ctx + a])));
        }
        text += csv::join_line(row) + "\n";
    }
    csv::write_text(out / "predictions.csv", text);
    write_snapshot(ctx);
    ctx.out << "predict: " << pred.size() << " instances -> " << (out / "predictions.csv").string() << "\n";
    return kExitOk;
}

int cmd_hyperopt(Context& ctx) {
    auto& o = ctx.opt;
    const fs::path out = require_out(o);
    finalize_train(o);
    if (!o.space_path.empty()) {
        o.space = read_json(o.space_path);
    }
    const auto space = o.space.is_null() ? hyperopt::SearchSpace::training_default()
                                         : hyperopt::SearchSpace::from_json(o.space);
    o.space = space.to_json();
    const auto p = prepare(o);
    if (p.validation.size() == 0) {
        throw ValidationError("hyperopt selects on validation loss and needs a non-empty validation part");
    }
    const auto table = label_table(o, p.schema);
    const auto config_for = [&](const std::vector<double>& values) {
        nlohmann::json j = o.train.to_json();
        for (std::size_t k = 0; k < space.size(); ++k) {
            if (space.dims[k].integer) {
                j[space.dims[k].name] = static_cast<std::int64_t>(std::llround(values[k]));
            } else {
                j[space.dims[k].name] = values[k];
            }
        }
        return align::TrainConfig::from_json(j);
    };
    const hyperopt::Objective objective = [&](const std::vector<double>& values) {
        const auto config = config_for(values);
        Rng init(derive_seed(config.seed, "init"));
        auto model = align::SealModel::create(p.schema, table, p.train.feature_dim(), config, init);
        return align::train(model, p.train, p.validation, config).best_val_loss;
    };

    std::vector<hyperopt::Trial> history;
    if (!o.resume.empty()) {
        history = hyperopt::parse_history(space, o.resume);
    }
    std::vector<hyperopt::Trial> log = history;
    const auto result = hyperopt::optimize(space, objective, o.budget, o.seed, history, [&](const hyperopt::Trial& t) {
        log.push_back(t);
        hyperopt::save_history(out / "history.csv", space, log);
        if (o.verbose) {
            ctx.out << "trial " << t.index << ": "
                    << (t.status == hyperopt::TrialStatus::Completed ? csv::format_double(t.objective) : t.message)
                    << "\n";
        }
    });
    hyperopt::save_history(out / "history.csv", space, result.history);
    if (!result.best) {
        throw NumericError("every hyperopt trial failed; see " + (out / "history.csv").string());
    }
    Json best;
    best["trial"] = result.best->index;
    best["objective"] = result.best->objective;
    Json params;
    for (std::size_t k = 0; k < space.size(); ++k) {
        params[space.dims[k].name] = result.best->values[k];
    }
    best["params"] = params;
    best["train"] = config_for(result.best->values).to_json();
    csv::write_text(out / "best.json", best.dump(2) + "\n");
    write_snapshot(ctx);
    ctx.out << "hyperopt: " << result.history.size() << " trials, best validation loss "
            << csv::format_double(result.best->objective) << " (trial " << result.best->index << ")\n";
    return kExitOk;
}

int cmd_export(Context& ctx) {
    const auto& o = ctx.opt;
    const fs::path out = require_out(o);
    if (!o.checkpoint.empty()) {
        const auto ck = align::load_checkpoint(o.checkpoint);
        const auto* seal_model = std::get_if<align::SealModel>(&ck.model);
        if (seal_model == nullptr) {
            throw ValidationError("checkpoint holds a baseline model, which has no label embeddings");
        }
        align::export_label_embeddings(*seal_model, out / "label_embeddings.jsonl");
        ctx.out << "export-embeddings: projected label vectors -> " << (out / "label_embeddings.jsonl").string()
                << "\n";
    } else {
        require(o.schema, "--schema (or --checkpoint)", o);
        const auto schema = dataio::LabelSchema::load(o.schema);
        Options fallback = o;
        fallback.embeddings.clear();
        labels::save_embedding_table(out / "embeddings.jsonl", label_table(fallback, schema));
        ctx.out << "export-embeddings: fallback sentence embeddings -> " << (out / "embeddings.jsonl").string()
                << "\n";
    }
    write_snapshot(ctx);
    return kExitOk;
}

int cmd_compare(Context& ctx) {
    auto& o = ctx.opt;
    const fs::path out = require_out(o);
    finalize_train(o);
    const auto p = prepare(o);
    if (p.test.size() == 0) {
        throw ValidationError("compare reports on the test part, which is empty");
    }
    const auto table = label_table(o, p.schema);
    const auto seal_run = train_model("seal", p, &table, o.train);
    const auto base_run = train_model("baseline", p, nullptr, o.train);
    save_trained(out / "seal", seal_run, p, o.train);
    save_trained(out / "baseline", base_run, p, o.train);
    const auto rs = evaluate_on(seal_run.model, seal_run.thresholds, p.test);
    const auto rb = evaluate_on(base_run.model, base_run.thresholds, p.test);

    std::string text = "label,group,seal_mcc,seal_macro_f1,baseline_mcc,baseline_macro_f1\n";
    Json rows = Json::array();
    for (std::size_t i = 0; i < rs.labels.size(); ++i) {
        const auto& a = rs.labels[i];
        const auto& b = rb.labels[i];
        text += csv::join_line({a.label, a.group, csv::format_double(a.mcc), csv::format_double(a.macro_f1),
                                csv::format_double(b.mcc), csv::format_double(b.macro_f1)}) +
                "\n";
        rows.push_back({{"label", a.label},
                        {"group", a.group},
                        {"seal", {{"mcc", a.mcc}, {"macro_f1", a.macro_f1}}},
                        {"baseline", {{"mcc", b.mcc}, {"macro_f1", b.macro_f1}}}});
    }
    text += "\n# summary\n";
    text += csv::join_line({"activity_average", "summary", csv::format_double(rs.activity_mcc),
                            csv::format_double(rs.activity_macro_f1), csv::format_double(rb.activity_mcc),
                            csv::format_double(rb.activity_macro_f1)}) +
            "\n";
    text += csv::join_line({"context_average", "summary", csv::format_double(rs.context_mcc),
                            csv::format_double(rs.context_macro_f1), csv::format_double(rb.context_mcc),
                            csv::format_double(rb.context_macro_f1)}) +
            "\n";
    csv::write_text(out / "compare.csv", text);
    Json j;
    j["labels"] = rows;
    j["seal"] = rs.to_json();
    j["baseline"] = rb.to_json();
    j["parameters"] = {{"seal", std::get<align::SealModel>(seal_run.model).parameter_count()},
                       {"baseline", std::get<align::BaselineModel>(base_run.model).parameter_count()}};
    csv::write_text(out / "compare.json", j.dump(2) + "\n");
    write_snapshot(ctx);
    ctx.out << "compare: activity MCC seal " << csv::format_double(rs.activity_mcc) << " vs baseline "
            << csv::format_double(rb.activity_mcc) << " on " << p.test.size() << " test instances\n";
    return kExitOk;
}

// ---- argument parsing ----------------------------------------------------------------

std::string find_config(const std::vector<std::string>& args) {
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            return args[i + 1];
        }
        if (args[i].rfind("--config=", 0) == 0) {
            return args[i].substr(9);
        }
    }
    return {};
}

void add_common(CLI::App* sub, Options& o, std::string& config_path) {
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--seed", o.seed, "Seed for every random choice in the run");
    sub->add_option("--config", config_path, "Run-config snapshot to start from; explicit flags override it");
    sub->add_flag("-v,--verbose", o.verbose, "Print per-epoch or per-trial progress");
}

void add_data_inputs(CLI::App* sub, Options& o) {
    sub->add_option("--schema", o.schema, "Label schema JSON");
    sub->add_option("--data", o.data, "Feature CSV");
}

void add_embedding_inputs(CLI::App* sub, Options& o) {
    sub->add_option("--embeddings", o.embeddings, "Label embedding JSON Lines file");
    sub->add_option("--templates", o.templates, "Sentence template overrides (JSON) for the fallback embedder");
    sub->add_option("--embed-dim", o.embed_dim, "Fallback embedding dimension when --embeddings is absent");
}

void add_train_options(CLI::App* sub, Options& o) {
    auto& t = o.train;
    sub->add_option("--lr", t.lr, "Learning rate");
    sub->add_option("--epochs", t.epochs, "Training epochs");
    sub->add_option("--h2-prime", t.hidden1, "First hidden layer width");
    sub->add_option("--h2", t.hidden2, "Second hidden layer width");
    sub->add_option("--h", t.shared_dim, "Shared vector space dimension");
    sub->add_option("--dropout", t.dropout, "Dropout rate between hidden layers");
    sub->add_option("--batch-size", t.batch_size, "Minibatch size");
    sub->add_option("--lambda", t.lambda, "Weight of the activity loss");
    sub->add_option("--lr-gamma", t.lr_gamma, "Per-epoch learning-rate decay");
    sub->add_option("--weight-cap", t.weight_cap, "Cap for inverse-frequency positive weights");
    sub->add_option("--class-weights", o.class_weights, "uniform or inverse-frequency");
    sub->add_option("--threshold-policy", o.threshold_policy, "fixed (0.5) or tuned (MCC on validation)");
    sub->add_option("--split", o.split, "Train, validation and test ratios")->expected(3);
}

int dispatch(Context& ctx) {
    static const std::map<std::string, std::function<int(Context&)>> commands{
        {"preprocess", cmd_preprocess}, {"synth", cmd_synth},     {"train", cmd_train},
        {"evaluate", cmd_evaluate},     {"predict", cmd_predict}, {"hyperopt", cmd_hyperopt},
        {"export-embeddings", cmd_export}, {"compare", cmd_compare}};
    return commands.at(ctx.opt.command)(ctx);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    std::string config_path;
    CLI::App app{"Label-embedding alignment for context-aware activity recognition", "seal"};
    app.require_subcommand(1);
    // "-h" would collide with the shared-dimension flag --h.
    app.set_help_flag("--help", "Print this help message and exit");

    try {
        const std::string config = find_config(args);
        if (!config.empty()) {
            const auto j = read_json(config);
            const std::string command = j.value("command", "");
            if (args.empty() || args.front() != command) {
                throw ValidationError("run config '" + config + "' was written by '" + command + "', not '" +
                                      (args.empty() ? std::string() : args.front()) + "'");
            }
            load_snapshot(o, j);
        }
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitInvalid;
    }

    auto* pre = app.add_subcommand("preprocess", "Window recordings and extract features");
    add_common(pre, o, config_path);
    pre->add_option("--schema", o.schema, "Label schema JSON");
    pre->add_option("--data", o.data, "Recording CSV or a directory of them (one per user)");
    pre->add_option("--window", o.window_s, "Window length in seconds");
    pre->add_option("--step", o.step_s, "Window step in seconds");
    pre->add_option("--sample-rate", o.sample_rate_hz, "Sample rate in Hz (0 infers it from t)");

    auto* syn = app.add_subcommand("synth", "Generate a synthetic dataset");
    add_common(syn, o, config_path);
    syn->add_option("--spec", o.spec_path, "Synth spec JSON");
    syn->add_option("--embedding-mode", o.embedding_mode, "informative or uninformative");
    syn->add_flag("--raw", o.raw, "Write a raw recording instead of features");

    auto* tr = app.add_subcommand("train", "Train a model");
    add_common(tr, o, config_path);
    add_data_inputs(tr, o);
    add_embedding_inputs(tr, o);
    add_train_options(tr, o);
    tr->add_option("--model", o.model, "seal or baseline");
    tr->add_flag("--strict-space", o.strict_space, "Reject hyperparameters outside the default search space");

    auto* ev = app.add_subcommand("evaluate", "Score a checkpoint on labeled features");
    add_common(ev, o, config_path);
    add_data_inputs(ev, o);
    ev->add_option("--checkpoint", o.checkpoint, "Checkpoint JSON");
    ev->add_option("--part", o.part, "train, validation, test or all (split stored in the checkpoint)");

    auto* pr = app.add_subcommand("predict", "Write predictions for features");
    add_common(pr, o, config_path);
    pr->add_option("--data", o.data, "Feature CSV");
    pr->add_option("--checkpoint", o.checkpoint, "Checkpoint JSON");

    auto* hp = app.add_subcommand("hyperopt", "Bayesian search over training hyperparameters");
    add_common(hp, o, config_path);
    add_data_inputs(hp, o);
    add_embedding_inputs(hp, o);
    add_train_options(hp, o);
    hp->add_option("--budget", o.budget, "Total number of trials");
    hp->add_option("--space", o.space_path, "Search space JSON (default: built-in ranges)");
    hp->add_option("--resume", o.resume, "History CSV to continue from");

    auto* ex = app.add_subcommand("export-embeddings", "Write label embeddings");
    add_common(ex, o, config_path);
    ex->add_option("--checkpoint", o.checkpoint, "SEAL checkpoint (projected vectors)");
    ex->add_option("--schema", o.schema, "Label schema JSON (fallback sentence embeddings)");
    ex->add_option("--templates", o.templates, "Sentence template overrides (JSON)");
    ex->add_option("--embed-dim", o.embed_dim, "Fallback embedding dimension");

    auto* cmp = app.add_subcommand("compare", "Train SEAL and the baseline on one split and compare");
    add_common(cmp, o, config_path);
    add_data_inputs(cmp, o);
    add_embedding_inputs(cmp, o);
    add_train_options(cmp, o);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    Context ctx{o, out, err};
    ctx.opt.command = app.get_subcommands().front()->get_name();
    try {
        return dispatch(ctx);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const NumericError& e) {
        err << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}

}  // namespace seal::cli
