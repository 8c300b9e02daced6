#include "seal/errors.hpp"
#include "seal/metrics.hpp"
#include "seal/synth.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace seal;
using namespace seal::synth;

namespace {

double cosine(std::span<const double> a, std::span<const double> b) {
    double ab = 0.0;
    double aa = 0.0;
    double bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    return ab / std::sqrt(aa * bb);
}

std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) {
            ++j;
        }
        for (std::size_t k = i; k <= j; ++k) {
            r[order[k]] = 0.5 * static_cast<double>(i + j);
        }
        i = j + 1;
    }
    return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    const auto ra = ranks(a);
    const auto rb = ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double cov = 0.0;
    double va = 0.0;
    double vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    return cov / std::sqrt(va * vb);
}

Matrix features_of(const dataio::Dataset& ds) {
    Matrix m(ds.size(), ds.feature_dim());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        std::copy(ds.instances[i].features.values.begin(), ds.instances[i].features.values.end(), m.row(i).begin());
    }
    return m;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("same seed gives the same dataset") {
    SynthSpec s;
    s.num_instances = 300;
    s.seed = 17;
    const auto a = generate(s);
    const auto b = generate(s);
    CHECK(dataio::format_feature_dataset(a.dataset) == dataio::format_feature_dataset(b.dataset));
    CHECK(labels::format_embedding_table(a.embeddings) == labels::format_embedding_table(b.embeddings));
    s.seed = 18;
    CHECK(dataio::format_feature_dataset(generate(s).dataset) != dataio::format_feature_dataset(a.dataset));
}

TEST_CASE("noiseless single-activity instances sit on their prototype") {
    SynthSpec s;
    s.num_instances = 200;
    s.noise = 0.0;
    s.context_offset = 0.0;
    const auto out = generate(s);
    const auto& t = out.truth;
    for (std::size_t i = 0; i < out.dataset.size(); ++i) {
        const auto a = t.anchor[i];
        REQUIRE(a < s.num_activities);
        const auto row = t.prototypes.row(s.num_contexts + a);
        for (std::size_t k = 0; k < s.feature_dim; ++k) {
            CHECK(out.dataset.instances[i].features.values[k] == doctest::Approx(row[k]).epsilon(1e-15));
        }
    }
}

TEST_CASE("prototype rows are unit length and orthogonal where the dimension allows") {
    SynthSpec s;
    s.num_instances = 10;
    const auto p = generate(s).truth.prototypes;
    for (std::size_t i = 0; i < p.rows(); ++i) {
        CHECK(cosine(p.row(i), p.row(i)) == doctest::Approx(1.0));
        for (std::size_t j = i + 1; j < p.rows(); ++j) {
            CHECK(std::abs(cosine(p.row(i), p.row(j))) < 1e-12);
        }
    }
}

TEST_CASE("similar pairs get the requested cosine") {
    SynthSpec s;
    s.num_instances = 10;
    s.normalize();
    s.similar.push_back({s.activity_names[1], s.activity_names[4], 0.9});
    const auto t = generate(s).truth;
    CHECK(cosine(t.prototypes.row(s.num_contexts + 1), t.prototypes.row(s.num_contexts + 4)) ==
          doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("rare activity count follows the binomial rate") {
    SynthSpec s;
    s.num_instances = 5000;
    s.num_activities = 4;
    s.activity_rates = {0.33, 0.33, 0.33, 0.01};
    s.seed = 5;
    const auto out = generate(s);
    const auto rare = out.dataset.schema.activities.back();
    const auto positives = std::count_if(out.dataset.instances.begin(), out.dataset.instances.end(),
                                         [&](const dataio::Instance& i) { return i.targets.contains(rare); });
    CHECK(positives >= 35);
    CHECK(positives <= 65);
}

TEST_CASE("co-occurrence adds partner activities") {
    SynthSpec s;
    s.num_instances = 2000;
    s.num_activities = 3;
    s.activity_rates = {1.0, 0.0, 0.0};
    s.cooccurrence = {{0.0, 0.5, 0.0}, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}};
    const auto out = generate(s);
    std::size_t with_partner = 0;
    for (std::size_t i = 0; i < out.dataset.size(); ++i) {
        CHECK(out.truth.activities[i][0] == 1);
        CHECK(out.truth.activities[i][2] == 0);
        with_partner += out.truth.activities[i][1];
    }
    CHECK(with_partner > 900);
    CHECK(with_partner < 1100);
    CHECK(activity_set_prior(out.truth.spec, {1, 1, 0}) == doctest::Approx(0.5));
    CHECK(activity_set_prior(out.truth.spec, {0, 1, 0}) == 0.0);
}

TEST_CASE("spec validation") {
    SynthSpec s;
    s.activity_rates = {0.5, 0.5, 0.5, 0.0, 0.0, 0.0};
    CHECK_THROWS_AS(generate(s), ValidationError);
    s = SynthSpec{};
    s.cooccurrence = {{2.0}};
    CHECK_THROWS_AS(generate(s), ValidationError);
    s = SynthSpec{};
    s.noise = -1.0;
    CHECK_THROWS_AS(generate(s), ValidationError);
    s = SynthSpec{};
    s.num_activities = 17;
    s.num_instances = 10;
    const auto wide = generate(s);
    CHECK_THROWS_AS(bayes_oracle(wide.truth, Matrix(1, s.feature_dim, 0.0)), ValidationError);
}

TEST_CASE("spec JSON round-trip") {
    SynthSpec s;
    s.noise = 0.3;
    s.embedding_mode = EmbeddingMode::Uninformative;
    s.normalize();
    s.similar.push_back({s.activity_names[0], s.activity_names[1], 0.8});
    const auto back = SynthSpec::from_json(s.to_json());
    CHECK(back.to_json() == s.to_json());
}

TEST_CASE("informative embeddings preserve prototype geometry") {
    SynthSpec s;
    s.num_instances = 10;
    s.feature_dim = 4;
    s.embedding_noise = 0.05;
    s.seed = 8;
    s.normalize();
    s.similar.push_back({s.activity_names[0], s.activity_names[1], 0.9});
    const auto out = generate(s);
    const auto emb = out.embeddings.matrix_for(out.dataset.schema);
    std::vector<double> proto_cos;
    std::vector<double> emb_cos;
    for (std::size_t i = 0; i < emb.rows(); ++i) {
        for (std::size_t j = i + 1; j < emb.rows(); ++j) {
            proto_cos.push_back(cosine(out.truth.prototypes.row(i), out.truth.prototypes.row(j)));
            emb_cos.push_back(cosine(emb.row(i), emb.row(j)));
        }
    }
    CHECK(spearman(proto_cos, emb_cos) >= 0.9);
}

TEST_CASE("uninformative embeddings ignore the prototypes") {
    SynthSpec s;
    s.num_instances = 10;
    s.embedding_mode = EmbeddingMode::Uninformative;
    s.embedding_dim = 32;
    s.normalize();
    s.similar.push_back({s.activity_names[0], s.activity_names[1], 0.95});
    const auto out = generate(s);
    CHECK(out.embeddings.dim == 32);
    const auto emb = out.embeddings.matrix_for(out.dataset.schema);
    CHECK(cosine(emb.row(s.num_contexts), emb.row(s.num_contexts + 1)) < 0.8);
}

TEST_CASE("noiseless oracle is perfect") {
    SynthSpec s;
    s.num_instances = 500;
    s.noise = 0.0;
    s.cooccurrence.assign(6, std::vector<double>(6, 0.2));
    for (std::size_t a = 0; a < 6; ++a) {
        s.cooccurrence[a][a] = 0.0;
    }
    const auto out = generate(s);
    const auto oracle = bayes_oracle(out.truth, features_of(out.dataset));
    const auto rep = metrics::report(oracle.predictions, labels::encode_targets(out.dataset), out.dataset.schema);
    CHECK(rep.context_accuracy == 1.0);
    for (const auto& l : rep.labels) {
        CHECK(l.mcc == doctest::Approx(1.0));
    }
}

TEST_CASE("oracle posteriors are normalized") {
    SynthSpec s;
    s.num_instances = 50;
    s.noise = 0.4;
    const auto out = generate(s);
    const auto oracle = bayes_oracle(out.truth, features_of(out.dataset));
    for (std::size_t i = 0; i < 50; ++i) {
        const auto row = oracle.context_posterior.row(i);
        CHECK(std::accumulate(row.begin(), row.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
        for (const double p : oracle.activity_posterior.row(i)) {
            CHECK(p >= 0.0);
            CHECK(p <= 1.0);
        }
    }
}

TEST_CASE("oracle carries no information under overwhelming noise") {
    SynthSpec s;
    s.num_instances = 3000;
    s.noise = 100.0;
    s.seed = 2;
    const auto out = generate(s);
    const auto oracle = bayes_oracle(out.truth, features_of(out.dataset));
    const auto rep = metrics::report(oracle.predictions, labels::encode_targets(out.dataset), out.dataset.schema);
    for (const auto& l : rep.labels) {
        CHECK(std::abs(l.mcc) < 0.1);
    }
}

TEST_CASE("written output loads back") {
    testing::TempDir dir("synth");
    SynthSpec s;
    s.num_instances = 40;
    const auto out = generate(s);
    write_output(dir.path(), out);
    const auto schema = dataio::LabelSchema::load(dir / "schema.json");
    CHECK(schema == out.dataset.schema);
    const auto ds = dataio::load_feature_dataset(dir / "features.csv", schema);
    CHECK(dataio::format_feature_dataset(ds) == dataio::format_feature_dataset(out.dataset));
    CHECK_NOTHROW(labels::load_embedding_table(dir / "embeddings.jsonl", schema));
    const auto truth = GroundTruth::from_json(nlohmann::json::parse(csv::read_text(dir / "truth.json")));
    CHECK(truth.prototypes == out.truth.prototypes);
    CHECK(truth.activities == out.truth.activities);
}

TEST_CASE("raw recordings feed the signal pipeline") {
    SynthSpec s;
    s.normalize();
    RawSpec raw;
    raw.num_segments = 4;
    const auto rec = generate_recording(s, raw);
    CHECK(rec.channels.size() == 12);
    CHECK(rec.num_samples() == 4 * 240);
    const auto ds = signal::preprocess_recording(rec, "u0", generate(s).dataset.schema);
    CHECK(ds.size() == 15);
    CHECK(ds.feature_dim() == 140);
}

}
