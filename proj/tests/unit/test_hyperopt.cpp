#include "seal/errors.hpp"
#include "seal/hyperopt.hpp"
#include "seal/rng.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

using namespace seal;
using namespace seal::hyperopt;

namespace {

/// Solves A x = b by Gaussian elimination with partial pivoting.
std::vector<double> dense_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) {
                piv = r;
            }
        }
        std::swap(a[col], a[piv]);
        std::swap(b[col], b[piv]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c < n; ++c) {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t c = i + 1; c < n; ++c) {
            s -= a[i][c] * x[c];
        }
        x[i] = s / a[i][i];
    }
    return x;
}

double se_kernel(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& ls, double sv) {
    double r2 = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        r2 += (a[k] - b[k]) * (a[k] - b[k]) / (ls[k] * ls[k]);
    }
    return sv * std::exp(-0.5 * r2);
}

Posterior dense_posterior(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                          const std::vector<double>& ls, double sv, double nv, double mean,
                          const std::vector<double>& q) {
    const std::size_t n = x.size();
    std::vector<std::vector<double>> k(n, std::vector<double>(n));
    std::vector<double> kq(n);
    std::vector<double> centered(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            k[i][j] = se_kernel(x[i], x[j], ls, sv) + (i == j ? nv : 0.0);
        }
        kq[i] = se_kernel(x[i], q, ls, sv);
        centered[i] = y[i] - mean;
    }
    const auto alpha = dense_solve(k, centered);
    const auto v = dense_solve(k, kq);
    Posterior p{mean, sv};
    for (std::size_t i = 0; i < n; ++i) {
        p.mean += kq[i] * alpha[i];
        p.variance -= kq[i] * v[i];
    }
    return p;
}

SearchSpace unit_line() {
    return SearchSpace{{Dimension{"x", 0.0, 1.0, Scale::Linear, false}}};
}

double quadratic(const std::vector<double>& v) {
    return (v[0] - 0.3) * (v[0] - 0.3);
}

}  // namespace

TEST_SUITE("hyperopt") {

TEST_CASE("posterior matches a dense solve on x squared") {
    const std::vector<std::vector<double>> x{{0.1}, {0.5}, {0.9}};
    const std::vector<double> y{0.01, 0.25, 0.81};
    const auto gp = GpModel::condition(x, y, {0.3}, 0.2, 1e-6, 0.35);
    CHECK(gp.jitter == 0.0);
    for (const double q : {0.3, 0.7, 0.05, 0.5}) {
        const auto p = gp_posterior(gp, std::vector<double>{q});
        const auto o = dense_posterior(x, y, {0.3}, 0.2, 1e-6, 0.35, {q});
        CHECK(std::abs(p.mean - o.mean) < 1e-8);
        CHECK(std::abs(p.variance - o.variance) < 1e-8);
    }
}

TEST_CASE("posterior matches a dense solve on random problems up to five points") {
    Rng rng(41);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng.uniform_index(5);
        const std::size_t d = 1 + rng.uniform_index(3);
        std::vector<std::vector<double>> x(n, std::vector<double>(d));
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (auto& v : x[i]) {
                v = rng.uniform();
            }
            y[i] = rng.normal();
        }
        std::vector<double> ls(d);
        for (auto& l : ls) {
            l = rng.uniform(0.1, 1.0);
        }
        const double sv = rng.uniform(0.5, 2.0);
        const double nv = 1e-4 * sv;
        const auto gp = GpModel::condition(x, y, ls, sv, nv, 0.1);
        std::vector<double> q(d);
        for (auto& v : q) {
            v = rng.uniform();
        }
        const auto p = gp_posterior(gp, q);
        const auto o = dense_posterior(x, y, ls, sv, nv + gp.jitter, 0.1, q);
        CHECK(std::abs(p.mean - o.mean) < 1e-8);
        CHECK(std::abs(p.variance - o.variance) < 1e-8);
    }
}

TEST_CASE("interpolation and far-field behaviour") {
    const std::vector<std::vector<double>> x{{0.2, 0.2}, {0.8, 0.4}};
    const std::vector<double> y{1.5, -0.5};
    const auto gp = GpModel::condition(x, y, {0.2, 0.2}, 1.0, 1e-10, 0.0);
    const auto at = gp_posterior(gp, x[0]);
    CHECK(std::abs(at.mean - 1.5) < 1e-6);
    CHECK(at.variance <= 1e-6);
    const auto far = gp_posterior(gp, std::vector<double>{50.0, 50.0});
    CHECK(std::abs(far.mean) < 1e-12);
    CHECK(far.variance == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("duplicate points need jitter or noise but still factor") {
    const std::vector<std::vector<double>> x{{0.5}, {0.5}, {0.5}};
    const auto gp = GpModel::condition(x, {1.0, 1.0, 1.0}, {0.2}, 1.0, 0.0, 0.0);
    CHECK(gp.jitter > 0.0);
    CHECK(std::isfinite(gp_posterior(gp, std::vector<double>{0.4}).mean));
}

TEST_CASE("expected improvement closed form") {
    CHECK(expected_improvement(1.0, 0.0, 1.0) == 0.0);
    CHECK(expected_improvement(0.0, 0.0, 1.0) == 1.0);
    CHECK(expected_improvement(1.0, 1.0, 1.0) == doctest::Approx(0.3989422804014327).epsilon(1e-14));
    CHECK_THROWS_AS(expected_improvement(0.0, -1.0, 0.0), ValidationError);
    double prev = 0.0;
    for (double var = 0.0; var < 4.0; var += 0.1) {
        const double ei = expected_improvement(1.2, var, 1.0);
        CHECK(ei >= 0.0);
        CHECK(ei >= prev);
        prev = ei;
    }
}

TEST_CASE("search space encode and decode") {
    const auto space = SearchSpace::training_default();
    CHECK_NOTHROW(space.validate());
    CHECK(space.size() == 6);
    const auto lo = space.decode(std::vector<double>(6, 0.0));
    const auto hi = space.decode(std::vector<double>(6, 1.0));
    CHECK(lo[0] == doctest::Approx(1e-7));
    CHECK(hi[0] == doctest::Approx(1e-3));
    CHECK(lo[1] == 100.0);
    CHECK(hi[1] == 800.0);
    const auto mid = space.decode(std::vector<double>(6, 0.5));
    CHECK(mid[0] == doctest::Approx(1e-5));
    CHECK(mid[1] == 450.0);
    CHECK(space.contains(mid));
    const auto back = space.encode(mid);
    CHECK(back[0] == doctest::Approx(0.5));
    CHECK(SearchSpace::from_json(space.to_json()).to_json() == space.to_json());
    CHECK_THROWS_AS((SearchSpace{{Dimension{"x", 1.0, 0.0}}}.validate()), ValidationError);
    CHECK_THROWS_AS((SearchSpace{{Dimension{"x", 0.0, 1.0, Scale::Log10}}}.validate()), ValidationError);
}

TEST_CASE("suggestions are deterministic and in bounds") {
    const auto space = SearchSpace::training_default();
    std::vector<Trial> history;
    CHECK(space.contains(suggest(space, history, 3)));
    CHECK(suggest(space, history, 3) == suggest(space, history, 3));
    CHECK(suggest(space, history, 3) != suggest(space, history, 4));
    Rng rng(42);
    for (std::size_t i = 0; i < 8; ++i) {
        auto v = suggest(space, history, 3);
        CHECK(space.contains(v));
        history.push_back({i, v, rng.normal(), TrialStatus::Completed, ""});
    }
    CHECK(suggest(space, history, 3) == suggest(space, history, 3));
}

TEST_CASE("equal observations make the most uncertain candidate win") {
    const SearchSpace space{{Dimension{"a", 0.0, 1.0}, Dimension{"b", 0.0, 1.0}}};
    std::vector<Trial> history;
    const std::vector<std::vector<double>> pts{{0.1, 0.1}, {0.9, 0.2}, {0.5, 0.5}, {0.2, 0.8}, {0.7, 0.9}, {0.4, 0.3}};
    for (std::size_t i = 0; i < pts.size(); ++i) {
        history.push_back({i, pts[i], 2.0, TrialStatus::Completed, ""});
    }
    const std::uint64_t seed = 9;
    const auto chosen = suggest(space, history, seed);

    const auto gp = GpModel::fit(pts, std::vector<double>(pts.size(), 2.0));
    const auto candidates = candidate_points(2, pts[0], derive_seed(seed, pts.size()));
    CHECK(candidates.size() == 1024 + 128);
    std::size_t best = 0;
    double best_var = -1.0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const double var = gp_posterior(gp, candidates[c]).variance;
        if (var > best_var) {
            best_var = var;
            best = c;
        }
    }
    CHECK(chosen == space.decode(candidates[best]));
}

TEST_CASE("quadratic is minimized within budget 20") {
    const auto r = optimize(unit_line(), quadratic, 20, 0);
    REQUIRE(r.best.has_value());
    CHECK(r.history.size() == 20);
    CHECK(std::abs(r.best->values[0] - 0.3) < 0.05);
}

TEST_CASE("budget one returns the single trial") {
    const auto r = optimize(unit_line(), quadratic, 1, 0);
    REQUIRE(r.history.size() == 1);
    REQUIRE(r.best.has_value());
    CHECK(r.best->values == r.history[0].values);
}

TEST_CASE("failing objectives are recorded and skipped") {
    std::size_t calls = 0;
    const auto flaky = [&](const std::vector<double>& v) {
        ++calls;
        if (calls % 3 == 0) {
            throw std::runtime_error("diverged");
        }
        if (calls % 5 == 0) {
            return std::nan("");
        }
        return quadratic(v);
    };
    const auto r = optimize(unit_line(), flaky, 12, 1);
    CHECK(r.history.size() == 12);
    const auto failed = std::count_if(r.history.begin(), r.history.end(),
                                      [](const Trial& t) { return t.status == TrialStatus::Failed; });
    CHECK(failed == 6);
    CHECK(r.history[2].message.find("diverged") != std::string::npos);
    REQUIRE(r.best.has_value());
    CHECK(r.best->status == TrialStatus::Completed);
}

TEST_CASE("resume continues exactly where the run stopped") {
    testing::TempDir dir("hyperopt");
    const auto space = unit_line();
    const auto full = optimize(space, quadratic, 10, 7);
    const auto first = optimize(space, quadratic, 6, 7);
    save_history(dir / "h.csv", space, first.history);
    const auto loaded = parse_history(space, dir / "h.csv");
    CHECK(format_history(space, loaded) == format_history(space, first.history));
    const auto resumed = optimize(space, quadratic, 10, 7, loaded);
    CHECK(format_history(space, resumed.history) == format_history(space, full.history));
}

TEST_CASE("GP-guided search beats random search on paired seeds") {
    std::vector<double> gp_best;
    std::vector<double> rs_best;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        gp_best.push_back(optimize(unit_line(), quadratic, 20, seed).best->objective);
        rs_best.push_back(random_search(unit_line(), quadratic, 20, seed).best->objective);
    }
    std::sort(gp_best.begin(), gp_best.end());
    std::sort(rs_best.begin(), rs_best.end());
    CHECK(gp_best[4] + gp_best[5] <= rs_best[4] + rs_best[5]);
}

}
