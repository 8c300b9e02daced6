// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Usage: seal_acceptance [criterion numbers...]

#include "seal/align.hpp"
#include "seal/cli.hpp"
#include "seal/csv.hpp"
#include "seal/dataio.hpp"
#include "seal/hyperopt.hpp"
#include "seal/metrics.hpp"
#include "seal/signal.hpp"
#include "seal/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

using namespace seal;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
        }
        if (!detail.empty()) {
            detail += "; ";
        }
        detail += what + (ok ? "" : " [failed]");
    }
};

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s.precision(precision);
    s << v;
    return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct Prepared {
    dataio::Dataset train;
    dataio::Dataset validation;
    dataio::Dataset test;
    dataio::Dataset raw_test;
};

Prepared prepare(const dataio::Dataset& ds, const dataio::SplitSpec& split_spec) {
    const auto split = dataio::split_dataset(ds, split_spec);
    const auto norm = signal::fit_normalizer(split.train);
    return {signal::apply_normalizer(norm, split.train), signal::apply_normalizer(norm, split.validation),
            signal::apply_normalizer(norm, split.test), split.test};
}

metrics::MetricsReport evaluate(const align::AnyModel& model, const dataio::Dataset& test) {
    const auto pred = align::predict(model, align::feature_matrix(test));
    return metrics::report(pred, labels::encode_targets(test), test.schema);
}

/// Nudges inputs until no ReLU pre-activation sits within 1e-3 of its kink.
void move_off_kinks(const nn::MlpNet& net, Matrix& x, Rng& rng) {
    for (int attempt = 0; attempt < 100; ++attempt) {
        const auto fwd = nn::mlp_forward(net, x, false, rng);
        bool near = false;
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            if (net.layers[l].activation != nn::Activation::Relu) {
                continue;
            }
            for (const double z : fwd.cache.pre_activations[l].data()) {
                near = near || std::abs(z) < 1e-3;
            }
        }
        if (!near) {
            return;
        }
        for (auto& v : x.data()) {
            v += 1e-2 * rng.normal();
        }
    }
}

// ---------------------------------------------------------------------------

// Entries with |gradient| below the floor are judged against the floor.
constexpr double kGradStep = 1e-4;
constexpr double kGradFloor = 1e-6;

Verdict gradient_exactness() {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    const dataio::LabelSchema schema{{"c0", "c1", "c2"}, {"a0", "a1", "a2", "a3"}, {}};
    align::TrainConfig cfg;
    cfg.hidden1 = 16;
    cfg.hidden2 = 16;
    cfg.shared_dim = 16;
    cfg.dropout = 0.0;
    double worst = 0.0;
    std::size_t checked = 0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        Rng rng(derive_seed(seed, "acceptance-grad"));
        const auto table = labels::fallback_table(schema, labels::TemplateTable::defaults(schema), 24, seed);
        auto model = align::SealModel::create(schema, table, 20, cfg, rng);
        Matrix x(8, 20);
        for (auto& e : x.data()) {
            e = rng.normal();
        }
        move_off_kinks(model.data_encoder, x, rng);
        labels::EncodedTargets t{Matrix(8, 3, 0.0), Matrix(8, 4, 0.0)};
        Matrix w(8, 4);
        for (std::size_t i = 0; i < 8; ++i) {
            t.context(i, rng.uniform_index(3)) = 1.0;
            for (std::size_t a = 0; a < 4; ++a) {
                t.activities(i, a) = rng.bernoulli(0.4) ? 1.0 : 0.0;
                w(i, a) = rng.uniform(0.5, 3.0);
            }
        }
        Rng unused(0);
        const auto obj = align::evaluate_objective(model, x, t, w, 1.0, false, unused);
        const std::vector<std::span<const double>> grads(obj.grads.begin(), obj.grads.end());
        const auto r = nn::check_gradients(
            model.parameter_blocks(), grads,
            [&] {
                Rng r0(0);
                return align::evaluate_objective(model, x, t, w, 1.0, false, r0).loss;
            },
            kGradStep, kGradFloor);
        worst = std::max(worst, r.max_relative_error);
        checked += r.parameters_checked;
    }
    const double secs = seconds_since(t0);
    v.require(worst < 1e-5, "max relative error " + fmt(worst, 3) + " over " + std::to_string(checked) + " parameters");
    v.require(secs < 5.0, "runtime " + fmt(secs, 3) + " s");
    return v;
}

Verdict metric_oracle() {
    Verdict v;
    Rng rng(derive_seed(0, "acceptance-metrics"));
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const std::uint64_t cap = i % 2 == 0 ? 5 : 200;
        const metrics::ConfusionCounts c{rng.uniform_index(cap), rng.uniform_index(cap), rng.uniform_index(cap),
                                         rng.uniform_index(cap)};
        const double tp = static_cast<double>(c.tp);
        const double fp = static_cast<double>(c.fp);
        const double fn = static_cast<double>(c.fn);
        const double tn = static_cast<double>(c.tn);
        const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
        const double mcc = den == 0.0 ? 0.0 : (tp * tn - fp * fn) / std::sqrt(den);
        auto f1_of = [](double a, double b, double c_) {
            if (a == 0.0) {
                return 0.0;
            }
            const double p = a / (a + b);
            const double r = a / (a + c_);
            return 2.0 * p * r / (p + r);
        };
        const double f1 = f1_of(tp, fp, fn);
        const double macro = 0.5 * (f1 + f1_of(tn, fn, fp));
        worst = std::max({worst, std::abs(metrics::mcc(c) - mcc), std::abs(metrics::f1(c) - f1),
                          std::abs(metrics::label_macro_f1(c) - macro)});
    }
    v.require(worst <= 1e-12, "max deviation from brute force " + fmt(worst, 3) + " on 10^4 tables");
    const metrics::ConfusionCounts ex{6, 1, 2, 3};
    const double m = metrics::mcc(ex);
    const double f = metrics::label_macro_f1(ex);
    v.require(std::abs(m - 0.47809) < 5e-6, "worked example MCC " + fmt(m, 6));
    v.require(std::abs(f - 0.73333) < 5e-6, "worked example macro-F1 " + fmt(f, 6));
    return v;
}

std::vector<double> direct_dft_resample(const std::vector<double>& x, std::size_t k_len) {
    const std::size_t t_len = x.size();
    const std::size_t n = std::min(t_len, k_len);
    const double pi = std::numbers::pi;
    const long half = static_cast<long>(n / 2);
    std::vector<double> y(k_len, 0.0);
    for (long f = -half; f <= half; ++f) {
        std::complex<double> c = 0.0;
        for (std::size_t t = 0; t < t_len; ++t) {
            c += x[t] * std::polar(1.0, -2.0 * pi * static_cast<double>(f) * static_cast<double>(t) /
                                            static_cast<double>(t_len));
        }
        c /= static_cast<double>(t_len);
        const double weight = (n % 2 == 0 && k_len >= t_len && (f == half || f == -half)) ? 0.5 : 1.0;
        for (std::size_t k = 0; k < k_len; ++k) {
            y[k] += weight * (c * std::polar(1.0, 2.0 * pi * static_cast<double>(f) * static_cast<double>(k) /
                                                      static_cast<double>(k_len)))
                                 .real();
        }
    }
    return y;
}

Verdict fourier_resampling() {
    Verdict v;
    Rng rng(derive_seed(0, "acceptance-fourier"));
    std::vector<double> x(120);
    for (auto& e : x) {
        e = rng.normal();
    }
    double id_err = 0.0;
    const auto same = signal::fourier_resample(x, 120);
    for (std::size_t i = 0; i < 120; ++i) {
        id_err = std::max(id_err, std::abs(same[i] - x[i]));
    }
    v.require(id_err < 1e-9, "K=T identity error " + fmt(id_err, 3));

    double dc_err = 0.0;
    for (const auto e : signal::fourier_resample(std::vector<double>(120, 2.5), 50)) {
        dc_err = std::max(dc_err, std::abs(e - 2.5));
    }
    double mean_x = 0.0;
    for (const auto e : x) {
        mean_x += e / 120.0;
    }
    double mean_y = 0.0;
    for (const auto e : signal::fourier_resample(x, 50)) {
        mean_y += e / 50.0;
    }
    dc_err = std::max(dc_err, std::abs(mean_x - mean_y));
    v.require(dc_err < 1e-9, "DC error " + fmt(dc_err, 3));

    const double pi = std::numbers::pi;
    std::vector<double> s(120);
    for (std::size_t t = 0; t < 120; ++t) {
        s[t] = std::sin(2.0 * pi * 4.0 * static_cast<double>(t) / 120.0);
    }
    const auto y = signal::fourier_resample(s, 50);
    const auto oracle = direct_dft_resample(s, 50);
    double sin_err = 0.0;
    for (std::size_t k = 0; k < 50; ++k) {
        sin_err = std::max({sin_err, std::abs(y[k] - oracle[k]),
                            std::abs(y[k] - std::sin(2.0 * pi * 4.0 * static_cast<double>(k) / 50.0))});
    }
    v.require(sin_err < 1e-6, "sinusoid vs direct DFT error " + fmt(sin_err, 3));

    signal::SensorWindow w;
    w.data = Matrix(12, 120);
    for (auto& e : w.data.data()) {
        e = rng.normal();
    }
    const auto r = signal::fourier_resample(w, 50);
    v.require(r.num_channels() == 12 && r.num_samples() == 50,
              "12x120 -> " + std::to_string(r.num_channels()) + "x" + std::to_string(r.num_samples()));
    return v;
}

Verdict preprocessing_conformance() {
    Verdict v;
    signal::Recording rec;
    rec.sample_rate_hz = 40.0;
    rec.channels = {"acc_x", "acc_y", "acc_z"};
    rec.samples = Matrix(240, 3, 0.5);
    const signal::PreprocessOptions defaults;
    const auto win = signal::sliding_windows(rec, defaults.window_s, defaults.step_s);
    std::vector<double> offsets;
    for (const auto& w : win.windows) {
        offsets.push_back(w.start_s * rec.sample_rate_hz);
    }
    const bool windows_ok = defaults.window_s == 3.0 && defaults.step_s == 1.5 &&
                            offsets == std::vector<double>{0.0, 60.0, 120.0} && !win.windows.empty() &&
                            win.windows.front().num_samples() == 120;
    v.require(windows_ok, "3 s / 1.5 s windows on 6 s @40 Hz start at samples 0, 60, 120");

    const dataio::LabelSchema schema{{"In Pocket", "On Table", "In Hand"},
                                     {"Walking", "Talking On Phone", "Sleeping", "Running"},
                                     {{"Sleeping", "Running"}}};
    auto make = [](std::string id, std::string user, std::set<std::string> targets) {
        dataio::Instance i;
        i.instance_id = std::move(id);
        i.user_id = std::move(user);
        i.features = dataio::FeatureVector({0.0});
        i.targets = std::move(targets);
        return i;
    };
    dataio::Dataset ds;
    ds.schema = schema;
    ds.feature_names = {"f"};
    for (std::size_t i = 0; i < 10; ++i) {
        ds.instances.push_back(make("a" + std::to_string(i), "userA", {}));
    }
    for (std::size_t i = 0; i < 5; ++i) {
        ds.instances.push_back(make("b" + std::to_string(i), "userB", {}));
    }
    const auto parts = dataio::split_indices(ds, dataio::SplitSpec{{0.6, 0.2, 0.2}, 11});
    std::map<std::string, std::array<std::size_t, 3>> per_user;
    for (std::size_t k = 0; k < 3; ++k) {
        for (const auto i : parts[k]) {
            ++per_user[ds.instances[i].user_id][k];
        }
    }
    const bool split_ok = per_user["userA"] == std::array<std::size_t, 3>{6, 2, 2} &&
                          per_user["userB"] == std::array<std::size_t, 3>{3, 1, 1};
    v.require(split_ok, "per-user 60/20/20 sizes 10 -> 6/2/2 and 5 -> 3/1/1");

    dataio::Dataset conflicts;
    conflicts.schema = schema;
    conflicts.feature_names = {"f"};
    conflicts.instances = {make("placement", "u", {"On Table", "In Pocket"}),
                           make("sleep_run", "u", {"Sleeping", "Running"}),
                           make("walk_talk", "u", {"Walking", "Talking On Phone"})};
    const auto [kept, report] = dataio::filter_conflicts(conflicts);
    const bool filter_ok = kept.size() == 1 && kept.instances[0].instance_id == "walk_talk" &&
                           report.context_exclusivity == 1 && report.per_rule.at("Sleeping|Running") == 1;
    v.require(filter_ok, "conflict filter removes On Table+In Pocket and Sleeping+Running, keeps Walking+Talking On Phone");
    return v;
}

Verdict separable_convergence() {
    Verdict v;
    synth::SynthSpec spec;
    spec.num_contexts = 3;
    spec.num_activities = 6;
    spec.num_instances = 2000;
    spec.noise = 0.05;
    spec.embedding_mode = synth::EmbeddingMode::Informative;
    spec.seed = 1;
    const auto out = synth::generate(spec);
    const auto data = prepare(out.dataset, dataio::SplitSpec{});
    align::TrainConfig cfg;
    cfg.epochs = 100;
    cfg.seed = 1;
    const auto t0 = std::chrono::steady_clock::now();
    Rng init(derive_seed(cfg.seed, "init"));
    align::AnyModel model =
        align::SealModel::create(out.dataset.schema, out.embeddings, data.train.feature_dim(), cfg, init);
    align::train(model, data.train, data.validation, cfg);
    const double secs = seconds_since(t0);
    const auto rep = evaluate(model, data.test);
    v.require(rep.activity_mcc >= 0.95, "activity-average MCC " + fmt(rep.activity_mcc));
    v.require(rep.context_accuracy >= 0.98, "context accuracy " + fmt(rep.context_accuracy));
    v.require(secs < 60.0, "100 epochs in " + fmt(secs, 3) + " s");
    return v;
}

Verdict semantic_advantage() {
    Verdict v;
    const std::size_t n_act = 7;
    std::vector<double> seal_inf;
    std::vector<double> seal_uninf;
    std::vector<double> base;
    std::string per_seed;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        double r[3] = {0.0, 0.0, 0.0};
        for (int mode = 0; mode < 2; ++mode) {
            synth::SynthSpec spec;
            spec.num_contexts = 3;
            spec.num_activities = n_act;
            spec.feature_dim = 16;
            spec.num_instances = 20000;
            spec.noise = 0.15;
            spec.embedding_noise = 0.0;
            spec.seed = seed;
            spec.embedding_mode = mode == 0 ? synth::EmbeddingMode::Informative : synth::EmbeddingMode::Uninformative;
            spec.activity_rates.assign(n_act, 0.99 / static_cast<double>(n_act - 1));
            spec.activity_rates.back() = 0.01;
            spec.normalize();
            spec.similar.push_back({spec.activity_names.front(), spec.activity_names.back(), 0.9});
            const auto out = synth::generate(spec);
            // 1500 labeled rows for training and validation; the rest is a large test set.
            const auto data = prepare(out.dataset, dataio::SplitSpec{{0.05625, 0.01875, 0.925}, seed});
            align::TrainConfig cfg;
            cfg.seed = seed;
            cfg.epochs = 100;
            cfg.dropout = 0.0;
            const auto& rare = spec.activity_names.back();
            Rng init(derive_seed(cfg.seed, "init"));
            align::AnyModel model =
                align::SealModel::create(out.dataset.schema, out.embeddings, data.train.feature_dim(), cfg, init);
            align::train(model, data.train, data.validation, cfg);
            r[mode] = evaluate(model, data.test).at(rare).mcc;
            if (mode == 0) {
                auto [b, unused] = align::train_baseline(data.train, data.validation, cfg);
                r[2] = evaluate(align::AnyModel(b), data.test).at(rare).mcc;
            }
        }
        seal_inf.push_back(r[0]);
        seal_uninf.push_back(r[1]);
        base.push_back(r[2]);
        per_seed += (per_seed.empty() ? "" : " ") + fmt(r[0], 3) + "/" + fmt(r[1], 3) + "/" + fmt(r[2], 3);
    }
    const double gap_inf = median(seal_inf) - median(base);
    const double gap_uninf = median(seal_uninf) - median(base);
    v.require(gap_inf >= 0.05, "informative median rare-label MCC gap " + fmt(gap_inf, 3) + " (need >= 0.05)");
    v.require(std::abs(gap_uninf) <= 0.05, "uninformative gap " + fmt(gap_uninf, 3) + " (need within 0.05)");
    v.detail += "; per seed informative/uninformative/baseline " + per_seed;
    return v;
}

Verdict oracle_dominance() {
    Verdict v;
    synth::SynthSpec spec;
    spec.num_contexts = 3;
    spec.num_activities = 6;
    spec.num_instances = 4000;
    spec.noise = 0.3;
    spec.seed = 7;
    spec.cooccurrence.assign(6, std::vector<double>(6, 0.15));
    for (std::size_t a = 0; a < 6; ++a) {
        spec.cooccurrence[a][a] = 0.0;
    }
    const auto out = synth::generate(spec);
    const auto data = prepare(out.dataset, dataio::SplitSpec{{0.6, 0.2, 0.2}, 7});
    align::TrainConfig cfg;
    cfg.epochs = 100;
    cfg.seed = 7;
    Rng init(derive_seed(cfg.seed, "init"));
    align::AnyModel model =
        align::SealModel::create(out.dataset.schema, out.embeddings, data.train.feature_dim(), cfg, init);
    align::train(model, data.train, data.validation, cfg);
    const auto rep = evaluate(model, data.test);
    const auto oracle = synth::bayes_oracle(out.truth, align::feature_matrix(data.raw_test));
    const auto orep = metrics::report(oracle.predictions, labels::encode_targets(data.raw_test), data.test.schema);
    double worst_margin = -1e9;
    std::string worst_label;
    for (const auto& l : rep.labels) {
        const double margin = l.mcc - orep.at(l.label).mcc;
        if (margin > worst_margin) {
            worst_margin = margin;
            worst_label = l.label;
        }
    }
    v.require(worst_margin <= 0.02, "max(SEAL - oracle) per-label MCC " + fmt(worst_margin, 3) + " at " + worst_label +
                                        " over " + std::to_string(rep.labels.size()) + " labels");
    v.detail += "; SEAL activity MCC " + fmt(rep.activity_mcc, 3) + ", oracle " + fmt(orep.activity_mcc, 3);
    return v;
}

Verdict hyperopt_sanity() {
    Verdict v;
    const hyperopt::SearchSpace line{{hyperopt::Dimension{"x", 0.0, 1.0, hyperopt::Scale::Linear, false}}};
    const auto f = [](const std::vector<double>& x) { return (x[0] - 0.3) * (x[0] - 0.3); };
    const auto r = hyperopt::optimize(line, f, 20, 0);
    const double err = std::abs(r.best->values[0] - 0.3);
    v.require(err < 0.05, "budget 20 best |x - 0.3| = " + fmt(err, 3));

    // Dense-solve oracle: Gaussian elimination on K + s^2 I, written out here.
    Rng rng(derive_seed(0, "acceptance-gp"));
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng.uniform_index(5);
        const std::size_t d = 1 + rng.uniform_index(3);
        std::vector<std::vector<double>> x(n, std::vector<double>(d));
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (auto& e : x[i]) {
                e = rng.uniform();
            }
            y[i] = rng.normal();
        }
        std::vector<double> ls(d);
        for (auto& l : ls) {
            l = rng.uniform(0.1, 1.0);
        }
        const double sv = rng.uniform(0.5, 2.0);
        const double nv = 1e-4 * sv;
        const double m0 = rng.normal();
        std::vector<double> q(d);
        for (auto& e : q) {
            e = rng.uniform();
        }
        const auto gp = hyperopt::GpModel::condition(x, y, ls, sv, nv, m0);
        const auto post = hyperopt::gp_posterior(gp, q);

        auto kern = [&](const std::vector<double>& a, const std::vector<double>& b) {
            double r2 = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                r2 += (a[k] - b[k]) * (a[k] - b[k]) / (ls[k] * ls[k]);
            }
            return sv * std::exp(-0.5 * r2);
        };
        auto solve = [n](std::vector<std::vector<double>> a, std::vector<double> b) {
            for (std::size_t c = 0; c < n; ++c) {
                std::size_t piv = c;
                for (std::size_t rr = c + 1; rr < n; ++rr) {
                    if (std::abs(a[rr][c]) > std::abs(a[piv][c])) {
                        piv = rr;
                    }
                }
                std::swap(a[c], a[piv]);
                std::swap(b[c], b[piv]);
                for (std::size_t rr = c + 1; rr < n; ++rr) {
                    const double fct = a[rr][c] / a[c][c];
                    for (std::size_t cc = c; cc < n; ++cc) {
                        a[rr][cc] -= fct * a[c][cc];
                    }
                    b[rr] -= fct * b[c];
                }
            }
            std::vector<double> out(n);
            for (std::size_t i = n; i-- > 0;) {
                double s = b[i];
                for (std::size_t cc = i + 1; cc < n; ++cc) {
                    s -= a[i][cc] * out[cc];
                }
                out[i] = s / a[i][i];
            }
            return out;
        };
        std::vector<std::vector<double>> kmat(n, std::vector<double>(n));
        std::vector<double> kq(n);
        std::vector<double> centered(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                kmat[i][j] = kern(x[i], x[j]) + (i == j ? nv + gp.jitter : 0.0);
            }
            kq[i] = kern(x[i], q);
            centered[i] = y[i] - m0;
        }
        const auto alpha = solve(kmat, centered);
        const auto vv = solve(kmat, kq);
        double mean = m0;
        double var = sv;
        for (std::size_t i = 0; i < n; ++i) {
            mean += kq[i] * alpha[i];
            var -= kq[i] * vv[i];
        }
        worst = std::max({worst, std::abs(mean - post.mean), std::abs(std::max(0.0, var) - post.variance)});
    }
    v.require(worst < 1e-8, "GP posterior vs dense solve max error " + fmt(worst, 3) + " on <= 5 points");

    std::vector<double> gp_best;
    std::vector<double> rs_best;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        gp_best.push_back(hyperopt::optimize(line, f, 20, seed).best->objective);
        rs_best.push_back(hyperopt::random_search(line, f, 20, seed).best->objective);
    }
    v.require(median(gp_best) <= median(rs_best),
              "median final value " + fmt(median(gp_best), 3) + " vs random search " + fmt(median(rs_best), 3));
    return v;
}

std::map<std::string, std::string> read_tree(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) {
            files[fs::relative(e.path(), dir).string()] = csv::read_text(e.path());
        }
    }
    return files;
}

int run_cli(const std::vector<std::string>& args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(args, out, err);
    if (code != 0) {
        std::cerr << "command failed (" << code << "): " << err.str();
    }
    return code;
}

Verdict determinism() {
    Verdict v;
    const fs::path root = fs::temp_directory_path() / ("seal_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    const auto p = [&](const std::string& name) { return (root / name).string(); };

    csv::write_text(root / "spec.json", R"({"num_instances": 400, "noise": 0.1})");
    csv::write_text(root / "space.json",
                    R"({"dims": [{"name": "lr", "lower": 1e-4, "upper": 1e-2, "scale": "log10"},
                                 {"name": "epochs", "lower": 2, "upper": 5, "integer": true}]})");
    const bool setup_ok =
        run_cli({"synth", "--spec", p("spec.json"), "--seed", "5", "--out", p("data")}) == 0 &&
        run_cli({"synth", "--raw", "--seed", "5", "--out", p("raw")}) == 0 &&
        run_cli({"train", "--schema", p("data/schema.json"), "--data", p("data/features.csv"), "--embeddings",
                 p("data/embeddings.jsonl"), "--epochs", "5", "--seed", "5", "--out", p("model")}) == 0;
    if (!setup_ok) {
        v.require(false, "pipeline setup");
        return v;
    }
    const std::vector<std::string> train_flags = {"--schema", p("data/schema.json"), "--data", p("data/features.csv"),
                                                  "--embeddings", p("data/embeddings.jsonl"), "--seed", "5"};
    auto with = [](std::vector<std::string> a, const std::vector<std::string>& b) {
        a.insert(a.end(), b.begin(), b.end());
        return a;
    };
    const std::vector<std::vector<std::string>> commands = {
        {"synth", "--spec", p("spec.json"), "--seed", "9"},
        {"preprocess", "--schema", p("raw/schema.json"), "--data", p("raw/recording.csv")},
        with({"train", "--epochs", "6", "--threshold-policy", "tuned"}, train_flags),
        {"evaluate", "--checkpoint", p("model/checkpoint.json"), "--data", p("data/features.csv")},
        {"predict", "--checkpoint", p("model/checkpoint.json"), "--data", p("data/features.csv")},
        with({"hyperopt", "--space", p("space.json"), "--budget", "6"}, train_flags),
        {"export-embeddings", "--checkpoint", p("model/checkpoint.json")},
        with({"compare", "--epochs", "4"}, train_flags),
    };
    std::size_t identical = 0;
    std::string failures;
    for (std::size_t c = 0; c < commands.size(); ++c) {
        const auto a = root / ("run" + std::to_string(c) + "_a");
        const auto b = root / ("run" + std::to_string(c) + "_b");
        const bool ok = run_cli(with(commands[c], {"--out", a.string()})) == 0 &&
                        run_cli({commands[c].front(), "--config", (a / cli::kRunConfigFile).string(), "--out",
                                 b.string()}) == 0 &&
                        read_tree(a) == read_tree(b) && read_tree(a).size() >= 2;
        if (ok) {
            ++identical;
        } else {
            failures += " " + commands[c].front();
        }
    }
    fs::remove_all(root);
    v.require(identical == commands.size(), std::to_string(identical) + "/" + std::to_string(commands.size()) +
                                                " commands replay byte-identically from their snapshot" +
                                                (failures.empty() ? "" : " (mismatch:" + failures + ")"));
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    struct Criterion {
        int id;
        const char* name;
        std::function<Verdict()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "gradient-exactness", gradient_exactness},
        {2, "metric-oracle", metric_oracle},
        {3, "fourier-resampling", fourier_resampling},
        {4, "preprocessing-conformance", preprocessing_conformance},
        {5, "separable-synth-convergence", separable_convergence},
        {6, "semantic-advantage", semantic_advantage},
        {7, "oracle-dominance", oracle_dominance},
        {8, "hyperopt-sanity", hyperopt_sanity},
        {9, "determinism", determinism},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) {
        selected.insert(std::atoi(argv[i]));
    }
    int failed = 0;
    for (const auto& c : criteria) {
        if (!selected.empty() && !selected.contains(c.id)) {
            continue;
        }
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail = std::string("exception: ") + e.what();
        }
        failed += v.pass ? 0 : 1;
        std::cout << (v.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << v.detail << " ("
                  << fmt(seconds_since(t0), 3) << " s)" << std::endl;
    }
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criterion(s) failed") << std::endl;
    return failed == 0 ? 0 : 1;
}
