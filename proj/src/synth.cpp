#include "seal/synth.hpp"

#include "seal/csv.hpp"
#include "seal/errors.hpp"
#include "seal/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace seal::synth {

namespace {

constexpr std::size_t kMaxOracleActivities = 16;

double norm(std::span<const double> v) {
    double s = 0.0;
    for (const double x : v) {
        s += x * x;
    }
    return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        s += a[k] * b[k];
    }
    return s;
}

void scale_to_unit(std::span<double> v) {
    const double n = norm(v);
    for (double& x : v) {
        x /= n;
    }
}

std::vector<double> random_unit(std::size_t dim, Rng& rng) {
    std::vector<double> v(dim);
    do {
        for (double& x : v) {
            x = rng.normal();
        }
    } while (norm(v) < 1e-8);
    scale_to_unit(v);
    return v;
}

std::size_t categorical(const std::vector<double>& probs, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
        acc += probs[k];
        if (u < acc) {
            return k;
        }
    }
    return probs.size();
}

Matrix make_prototypes(const SynthSpec& spec, const dataio::LabelSchema& schema) {
    const std::size_t c = schema.size();
    const std::size_t d = spec.feature_dim;
    Rng rng(derive_seed(spec.seed, "prototypes"));
    Matrix p(c, d);
    // Gram-Schmidt on Gaussian rows gives a random orthonormal set for the first d rows.
    for (std::size_t i = 0; i < c; ++i) {
        for (;;) {
            auto v = random_unit(d, rng);
            if (i < d) {
                for (std::size_t j = 0; j < i; ++j) {
                    const double proj = dot(v, p.row(j));
                    for (std::size_t k = 0; k < d; ++k) {
                        v[k] -= proj * p(j, k);
                    }
                }
                if (norm(v) < 1e-6) {
                    continue;
                }
                scale_to_unit(v);
            }
            std::copy(v.begin(), v.end(), p.row(i).begin());
            break;
        }
    }
    for (const auto& pair : spec.similar) {
        const std::size_t a = *schema.index_of(pair.source);
        const std::size_t b = *schema.index_of(pair.target);
        std::vector<double> u(p.row(b).begin(), p.row(b).end());
        const double proj = dot(u, p.row(a));
        for (std::size_t k = 0; k < d; ++k) {
            u[k] -= proj * p(a, k);
        }
        if (norm(u) < 1e-8) {
            u = random_unit(d, rng);
            const double pr = dot(u, p.row(a));
            for (std::size_t k = 0; k < d; ++k) {
                u[k] -= pr * p(a, k);
            }
        }
        scale_to_unit(u);
        const double s = std::sqrt(std::max(0.0, 1.0 - pair.cosine * pair.cosine));
        for (std::size_t k = 0; k < d; ++k) {
            p(b, k) = pair.cosine * p(a, k) + s * u[k];
        }
    }
    return p;
}

labels::LabelEmbeddingTable make_embeddings(const SynthSpec& spec, const dataio::LabelSchema& schema,
                                            const Matrix& prototypes) {
    Rng rng(derive_seed(spec.seed, "embeddings"));
    const std::size_t dim = spec.embedding_mode == EmbeddingMode::Informative
                                ? spec.feature_dim
                                : (spec.embedding_dim == 0 ? spec.feature_dim : spec.embedding_dim);
    Matrix rows(schema.size(), dim);
    std::vector<std::string> sentences;
    const auto names = schema.all_labels();
    for (std::size_t i = 0; i < schema.size(); ++i) {
        std::vector<double> v;
        if (spec.embedding_mode == EmbeddingMode::Informative) {
            v.assign(prototypes.row(i).begin(), prototypes.row(i).end());
            for (double& x : v) {
                x += spec.embedding_noise * rng.normal();
            }
            if (norm(v) < 1e-12) {
                v = random_unit(dim, rng);
            }
            scale_to_unit(v);
        } else {
            v = random_unit(dim, rng);
        }
        std::copy(v.begin(), v.end(), rows.row(i).begin());
        sentences.push_back("synthetic label " + names[i]);
    }
    return labels::LabelEmbeddingTable::from_matrix(
        schema, rows, sentences, "synth-" + to_string(spec.embedding_mode));
}

template <typename T>
std::vector<T> json_vector(const nlohmann::json& j, const char* key, std::vector<T> fallback) {
    return j.contains(key) ? j.at(key).get<std::vector<T>>() : fallback;
}

}  // namespace

std::string to_string(EmbeddingMode m) {
    return m == EmbeddingMode::Informative ? "informative" : "uninformative";
}

EmbeddingMode embedding_mode_from_string(const std::string& s) {
    if (s == "informative") {
        return EmbeddingMode::Informative;
    }
    if (s == "uninformative") {
        return EmbeddingMode::Uninformative;
    }
    throw ValidationError("unknown embedding mode '" + s + "' (expected informative or uninformative)");
}

void SynthSpec::normalize() {
    if (context_names.empty()) {
        for (std::size_t c = 0; c < num_contexts; ++c) {
            context_names.push_back("context_" + std::to_string(c + 1));
        }
    }
    if (activity_names.empty()) {
        for (std::size_t a = 0; a < num_activities; ++a) {
            activity_names.push_back("activity_" + std::to_string(a + 1));
        }
    }
    if (context_rates.empty()) {
        context_rates.assign(num_contexts, 1.0 / static_cast<double>(num_contexts));
    }
    if (activity_rates.empty()) {
        activity_rates.assign(num_activities, 1.0 / static_cast<double>(num_activities));
    }
    if (cooccurrence.empty()) {
        cooccurrence.assign(num_activities, std::vector<double>(num_activities, 0.0));
    }
    validate();
}

void SynthSpec::validate() const {
    if (num_contexts < 1 || num_activities < 1) {
        throw ValidationError("synth needs at least one context and one activity");
    }
    if (feature_dim < 1 || num_instances < 1 || num_users < 1) {
        throw ValidationError("feature_dim, num_instances and num_users must be positive");
    }
    if (!(noise >= 0.0) || !std::isfinite(noise)) {
        throw ValidationError("noise must be a finite value >= 0");
    }
    if (!(embedding_noise >= 0.0) || !std::isfinite(context_offset)) {
        throw ValidationError("embedding_noise must be >= 0 and context_offset finite");
    }
    if (context_names.size() != num_contexts || activity_names.size() != num_activities) {
        throw ValidationError("label name lists do not match the label counts");
    }
    if (context_rates.size() != num_contexts) {
        throw ValidationError("context_rates needs one entry per context");
    }
    double csum = 0.0;
    for (const double r : context_rates) {
        if (!(r > 0.0 && r <= 1.0)) {
            throw ValidationError("context rates must lie in (0, 1]");
        }
        csum += r;
    }
    if (std::abs(csum - 1.0) > 1e-6) {
        throw ValidationError("context rates must sum to 1");
    }
    if (activity_rates.size() != num_activities) {
        throw ValidationError("activity_rates needs one entry per activity");
    }
    double asum = 0.0;
    for (const double r : activity_rates) {
        if (!(r >= 0.0 && r <= 1.0)) {
            throw ValidationError("activity rates must lie in [0, 1]");
        }
        asum += r;
    }
    if (asum > 1.0 + 1e-9) {
        throw ValidationError("activity anchor rates sum to more than 1 and cannot be normalized");
    }
    if (cooccurrence.size() != num_activities) {
        throw ValidationError("cooccurrence must be C_act x C_act");
    }
    for (const auto& row : cooccurrence) {
        if (row.size() != num_activities) {
            throw ValidationError("cooccurrence must be C_act x C_act");
        }
        for (const double q : row) {
            if (!(q >= 0.0 && q <= 1.0)) {
                throw ValidationError("cooccurrence probabilities must lie in [0, 1]");
            }
        }
    }
    const auto known = [&](const std::string& n) {
        return std::find(context_names.begin(), context_names.end(), n) != context_names.end() ||
               std::find(activity_names.begin(), activity_names.end(), n) != activity_names.end();
    };
    for (const auto& p : similar) {
        if (!known(p.source) || !known(p.target) || p.source == p.target) {
            throw ValidationError("similar pair '" + p.source + "' / '" + p.target + "' is not two distinct labels");
        }
        if (!(p.cosine >= -1.0 && p.cosine <= 1.0)) {
            throw ValidationError("similar pair cosine must lie in [-1, 1]");
        }
    }
    if (embedding_mode == EmbeddingMode::Informative && embedding_dim != 0 && embedding_dim != feature_dim) {
        throw ValidationError("informative embeddings live in the feature space; leave embedding_dim at 0");
    }
}

nlohmann::ordered_json SynthSpec::to_json() const {
    nlohmann::ordered_json j;
    j["num_contexts"] = num_contexts;
    j["num_activities"] = num_activities;
    j["feature_dim"] = feature_dim;
    j["num_instances"] = num_instances;
    j["num_users"] = num_users;
    j["noise"] = noise;
    j["context_offset"] = context_offset;
    j["context_rates"] = context_rates;
    j["activity_rates"] = activity_rates;
    j["cooccurrence"] = cooccurrence;
    nlohmann::ordered_json sim = nlohmann::ordered_json::array();
    for (const auto& p : similar) {
        sim.push_back({{"source", p.source}, {"target", p.target}, {"cosine", p.cosine}});
    }
    j["similar"] = sim;
    j["embedding_mode"] = to_string(embedding_mode);
    j["embedding_noise"] = embedding_noise;
    j["embedding_dim"] = embedding_dim;
    j["context_names"] = context_names;
    j["activity_names"] = activity_names;
    j["seed"] = seed;
    return j;
}

SynthSpec SynthSpec::from_json(const nlohmann::json& j) {
    SynthSpec s;
    try {
        s.num_contexts = j.value("num_contexts", s.num_contexts);
        s.num_activities = j.value("num_activities", s.num_activities);
        s.feature_dim = j.value("feature_dim", s.feature_dim);
        s.num_instances = j.value("num_instances", s.num_instances);
        s.num_users = j.value("num_users", s.num_users);
        s.noise = j.value("noise", s.noise);
        s.context_offset = j.value("context_offset", s.context_offset);
        s.context_rates = json_vector<double>(j, "context_rates", {});
        s.activity_rates = json_vector<double>(j, "activity_rates", {});
        if (j.contains("cooccurrence")) {
            s.cooccurrence = j.at("cooccurrence").get<std::vector<std::vector<double>>>();
        }
        if (j.contains("similar")) {
            for (const auto& p : j.at("similar")) {
                s.similar.push_back(
                    {p.at("source").get<std::string>(), p.at("target").get<std::string>(), p.value("cosine", 0.9)});
            }
        }
        s.embedding_mode = embedding_mode_from_string(j.value("embedding_mode", to_string(s.embedding_mode)));
        s.embedding_noise = j.value("embedding_noise", s.embedding_noise);
        s.embedding_dim = j.value("embedding_dim", s.embedding_dim);
        s.context_names = json_vector<std::string>(j, "context_names", {});
        s.activity_names = json_vector<std::string>(j, "activity_names", {});
        s.seed = j.value("seed", s.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed synth spec: ") + e.what());
    }
    s.normalize();
    return s;
}

nlohmann::json GroundTruth::to_json() const {
    return {{"spec", spec.to_json()},
            {"prototypes", {{"rows", prototypes.rows()}, {"cols", prototypes.cols()}, {"data", prototypes.data()}}},
            {"context", context},
            {"anchor", anchor},
            {"activities", activities}};
}

GroundTruth GroundTruth::from_json(const nlohmann::json& j) {
    GroundTruth t;
    try {
        t.spec = SynthSpec::from_json(j.at("spec"));
        const auto& p = j.at("prototypes");
        t.prototypes = Matrix(p.at("rows").get<std::size_t>(), p.at("cols").get<std::size_t>(),
                              p.at("data").get<std::vector<double>>());
        t.context = j.at("context").get<std::vector<std::size_t>>();
        t.anchor = j.at("anchor").get<std::vector<std::size_t>>();
        t.activities = j.at("activities").get<std::vector<std::vector<std::uint8_t>>>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed ground truth: ") + e.what());
    }
    t.schema.contexts = t.spec.context_names;
    t.schema.activities = t.spec.activity_names;
    if (t.prototypes.rows() != t.schema.size() || t.prototypes.cols() != t.spec.feature_dim) {
        throw DimensionError("ground-truth prototypes do not match the spec");
    }
    return t;
}

std::vector<double> feature_mean(const GroundTruth& truth, std::size_t context,
                                 const std::vector<std::uint8_t>& activities) {
    const std::size_t d = truth.prototypes.cols();
    const std::size_t n_ctx = truth.schema.num_contexts();
    std::vector<double> sum(d, 0.0);
    for (std::size_t a = 0; a < activities.size(); ++a) {
        if (activities[a]) {
            for (std::size_t k = 0; k < d; ++k) {
                sum[k] += truth.prototypes(n_ctx + a, k);
            }
        }
    }
    const double n = norm(sum);
    for (std::size_t k = 0; k < d; ++k) {
        sum[k] = (n > 0.0 ? sum[k] / n : 0.0) + truth.spec.context_offset * truth.prototypes(context, k);
    }
    return sum;
}

double activity_set_prior(const SynthSpec& spec, const std::vector<std::uint8_t>& activities) {
    const std::size_t c = spec.num_activities;
    bool any = false;
    double p = 0.0;
    for (std::size_t a = 0; a < c; ++a) {
        if (!activities[a]) {
            continue;
        }
        any = true;
        double term = spec.activity_rates[a];
        for (std::size_t b = 0; b < c; ++b) {
            if (b != a) {
                term *= activities[b] ? spec.cooccurrence[a][b] : 1.0 - spec.cooccurrence[a][b];
            }
        }
        p += term;
    }
    if (!any) {
        const double total = std::accumulate(spec.activity_rates.begin(), spec.activity_rates.end(), 0.0);
        return std::max(0.0, 1.0 - total);
    }
    return p;
}

SynthOutput generate(SynthSpec spec) {
    spec.normalize();
    SynthOutput out;
    auto& truth = out.truth;
    truth.spec = spec;
    truth.schema.contexts = spec.context_names;
    truth.schema.activities = spec.activity_names;
    truth.schema.validate();
    truth.prototypes = make_prototypes(spec, truth.schema);
    out.embeddings = make_embeddings(spec, truth.schema, truth.prototypes);

    auto& ds = out.dataset;
    ds.schema = truth.schema;
    for (std::size_t k = 0; k < spec.feature_dim; ++k) {
        ds.feature_names.push_back("x" + std::to_string(k + 1));
    }
    ds.provenance = "synth seed=" + std::to_string(spec.seed);

    const std::uint64_t instance_seed = derive_seed(spec.seed, "instances");
    const std::size_t n_act = spec.num_activities;
    const std::size_t width = std::to_string(spec.num_instances).size();
    for (std::size_t i = 0; i < spec.num_instances; ++i) {
        Rng rng(derive_seed(instance_seed, static_cast<std::uint64_t>(i)));
        const std::size_t ctx = std::min(categorical(spec.context_rates, rng), spec.num_contexts - 1);
        const std::size_t anchor = categorical(spec.activity_rates, rng);
        std::vector<std::uint8_t> acts(n_act, 0);
        if (anchor < n_act) {
            acts[anchor] = 1;
            for (std::size_t b = 0; b < n_act; ++b) {
                if (b != anchor && rng.bernoulli(spec.cooccurrence[anchor][b])) {
                    acts[b] = 1;
                }
            }
        }
        auto x = feature_mean(truth, ctx, acts);
        for (double& v : x) {
            v += spec.noise * rng.normal();
        }

        dataio::Instance inst;
        std::string id = std::to_string(i);
        inst.instance_id = "syn_" + std::string(width - id.size(), '0') + id;
        inst.user_id = "user_" + std::to_string(i % spec.num_users + 1);
        inst.features = dataio::FeatureVector(std::move(x));
        inst.targets.insert(spec.context_names[ctx]);
        for (std::size_t a = 0; a < n_act; ++a) {
            if (acts[a]) {
                inst.targets.insert(spec.activity_names[a]);
            }
        }
        ds.instances.push_back(std::move(inst));
        truth.context.push_back(ctx);
        truth.anchor.push_back(anchor);
        truth.activities.push_back(std::move(acts));
    }
    return out;
}

OracleResult bayes_oracle(const GroundTruth& truth, const Matrix& features) {
    const auto& spec = truth.spec;
    const std::size_t n_ctx = spec.num_contexts;
    const std::size_t n_act = spec.num_activities;
    const std::size_t d = spec.feature_dim;
    if (features.cols() != d || truth.prototypes.cols() != d) {
        throw DimensionError("features do not come from this synth spec (dimension " +
                             std::to_string(features.cols()) + " vs " + std::to_string(d) + ")");
    }
    if (n_act > kMaxOracleActivities) {
        throw ValidationError("the exact oracle enumerates activity sets and supports at most 16 activities");
    }

    struct Config {
        std::size_t context;
        std::vector<std::uint8_t> acts;
        double log_prior;
        std::vector<double> mean;
    };
    std::vector<Config> configs;
    for (std::size_t c = 0; c < n_ctx; ++c) {
        for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n_act); ++mask) {
            std::vector<std::uint8_t> acts(n_act);
            for (std::size_t a = 0; a < n_act; ++a) {
                acts[a] = (mask >> a) & 1U;
            }
            const double prior = spec.context_rates[c] * activity_set_prior(spec, acts);
            if (prior <= 0.0) {
                continue;
            }
            auto mean = feature_mean(truth, c, acts);
            configs.push_back({c, std::move(acts), std::log(prior), std::move(mean)});
        }
    }

    const std::size_t n = features.rows();
    OracleResult r{PredictionSet{}, Matrix(n, n_ctx), Matrix(n, n_act)};
    std::vector<double> logw(configs.size());
    std::vector<double> dist(configs.size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = features.row(i);
        double min_dist = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < configs.size(); ++k) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = x[j] - configs[k].mean[j];
                s += diff * diff;
            }
            dist[k] = s;
            min_dist = std::min(min_dist, s);
        }
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < configs.size(); ++k) {
            if (spec.noise > 0.0) {
                logw[k] = configs[k].log_prior - dist[k] / (2.0 * spec.noise * spec.noise);
            } else {
                logw[k] = dist[k] <= min_dist + 1e-12 ? configs[k].log_prior
                                                      : -std::numeric_limits<double>::infinity();
            }
            mx = std::max(mx, logw[k]);
        }
        double z = 0.0;
        for (std::size_t k = 0; k < configs.size(); ++k) {
            logw[k] = std::exp(logw[k] - mx);
            z += logw[k];
        }
        for (std::size_t k = 0; k < configs.size(); ++k) {
            const double w = logw[k] / z;
            r.context_posterior(i, configs[k].context) += w;
            for (std::size_t a = 0; a < n_act; ++a) {
                if (configs[k].acts[a]) {
                    r.activity_posterior(i, a) += w;
                }
            }
        }
    }

    const auto log_odds = [](double p) {
        p = std::clamp(p, 1e-300, 1.0);
        const double q = std::max(1.0 - p, 1e-300);
        return std::clamp(std::log(p) - std::log(q), -700.0, 700.0);
    };
    auto& pred = r.predictions;
    pred.num_activities = n_act;
    pred.thresholds.assign(n_act, 0.5);
    pred.scores = Matrix(n, n_ctx + n_act);
    pred.context.resize(n);
    pred.activity.assign(n * n_act, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = r.context_posterior.row(i);
        pred.context[i] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
        for (std::size_t c = 0; c < n_ctx; ++c) {
            pred.scores(i, c) = std::log(std::max(row[c], 1e-300));
        }
        for (std::size_t a = 0; a < n_act; ++a) {
            const double p = r.activity_posterior(i, a);
            pred.scores(i, n_ctx + a) = log_odds(p);
            pred.activity[i * n_act + a] = p >= 0.5 ? 1 : 0;
        }
    }
    return r;
}

signal::Recording generate_recording(const SynthSpec& input, const RawSpec& raw) {
    SynthSpec spec = input;
    spec.normalize();
    if (raw.num_channels < 1 || !(raw.sample_rate_hz > 0.0) || !(raw.segment_s > 0.0) || raw.num_segments < 1 ||
        !(raw.noise >= 0.0)) {
        throw ValidationError("raw synth needs positive channels, rate, segment length and count");
    }
    Rng rng(derive_seed(spec.seed, "raw"));
    const double nyquist = raw.sample_rate_hz / 2.0;
    const auto seg_len = static_cast<std::size_t>(std::llround(raw.segment_s * raw.sample_rate_hz));
    const std::size_t n_act = spec.num_activities;

    std::vector<double> act_probs = spec.activity_rates;
    const double total = std::accumulate(act_probs.begin(), act_probs.end(), 0.0);
    for (double& p : act_probs) {
        p /= total;
    }
    std::vector<std::vector<double>> phases(n_act, std::vector<double>(raw.num_channels));
    for (auto& row : phases) {
        for (double& p : row) {
            p = rng.uniform(0.0, 2.0 * std::numbers::pi);
        }
    }

    signal::Recording rec;
    rec.sample_rate_hz = raw.sample_rate_hz;
    const char* axes[] = {"x", "y", "z"};
    for (std::size_t k = 0; k < raw.num_channels; ++k) {
        rec.channels.push_back("s" + std::to_string(k / 3 + 1) + "_" + axes[k % 3]);
    }
    rec.samples = Matrix(seg_len * raw.num_segments, raw.num_channels);
    std::size_t t = 0;
    for (std::size_t s = 0; s < raw.num_segments; ++s) {
        const std::size_t ctx = std::min(categorical(spec.context_rates, rng), spec.num_contexts - 1);
        const std::size_t act = std::min(categorical(act_probs, rng), n_act - 1);
        const double freq = 0.4 * nyquist * static_cast<double>(act + 1) / static_cast<double>(n_act);
        for (std::size_t j = 0; j < seg_len; ++j, ++t) {
            const double time = static_cast<double>(t) / raw.sample_rate_hz;
            for (std::size_t k = 0; k < raw.num_channels; ++k) {
                const double amp = 1.0 + 0.25 * static_cast<double>(k % 3);
                const double shift = spec.context_offset * 0.5 * static_cast<double>(ctx + 1) * (k % 3 == 2 ? 1.0 : 0.2);
                rec.samples(t, k) = amp * std::sin(2.0 * std::numbers::pi * freq * time + phases[act][k]) +
                                    0.3 * std::sin(4.0 * std::numbers::pi * freq * time) + shift +
                                    raw.noise * rng.normal();
            }
            rec.sample_labels.push_back({spec.context_names[ctx], spec.activity_names[act]});
        }
    }
    rec.validate();
    return rec;
}

void write_output(const std::filesystem::path& dir, const SynthOutput& output) {
    dataio::write_feature_dataset(dir / "features.csv", output.dataset);
    output.dataset.schema.save(dir / "schema.json");
    labels::save_embedding_table(dir / "embeddings.jsonl", output.embeddings);
    csv::write_text(dir / "truth.json", output.truth.to_json().dump() + "\n");
}

}  // namespace seal::synth
