#include "seal/hyperopt.hpp"

#include "seal/csv.hpp"
#include "seal/errors.hpp"
#include "seal/rng.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace seal::hyperopt {

namespace {

constexpr double kLengthGrid[] = {0.05, 0.1, 0.2, 0.4, 0.8, 1.6};
constexpr double kNoiseGrid[] = {1e-6, 1e-4, 1e-2};
constexpr std::size_t kRandomCandidates = 1024;
constexpr std::size_t kLocalCandidates = 128;
constexpr double kLocalStep = 0.05;
constexpr unsigned kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

double radical_inverse(std::uint64_t index, unsigned base) {
    double result = 0.0;
    double f = 1.0 / base;
    while (index > 0) {
        result += f * static_cast<double>(index % base);
        index /= base;
        f /= base;
    }
    return result;
}

std::string status_name(TrialStatus s) {
    return s == TrialStatus::Completed ? "completed" : "failed";
}

std::optional<Trial> best_of(std::span<const Trial> trials) {
    std::optional<Trial> best;
    for (const auto& t : trials) {
        if (t.status == TrialStatus::Completed && (!best || t.objective < best->objective)) {
            best = t;
        }
    }
    return best;
}

Trial evaluate(const Objective& objective, std::size_t index, std::vector<double> values) {
    Trial t;
    t.index = index;
    t.values = std::move(values);
    try {
        t.objective = objective(t.values);
        if (!std::isfinite(t.objective)) {
            t.status = TrialStatus::Failed;
            t.message = "non-finite objective";
        }
    } catch (const std::exception& e) {
        t.status = TrialStatus::Failed;
        t.message = e.what();
    }
    if (t.status == TrialStatus::Failed) {
        t.objective = std::numeric_limits<double>::quiet_NaN();
    }
    return t;
}

}  // namespace

SearchSpace SearchSpace::training_default() {
    return SearchSpace{{
        {"lr", 1e-7, 1e-3, Scale::Log10, false},
        {"epochs", 100, 800, Scale::Linear, true},
        {"h2_prime", 256, 2048, Scale::Linear, true},
        {"h2", 256, 2048, Scale::Linear, true},
        {"h", 256, 4096, Scale::Linear, true},
        {"dropout", 0.0, 0.5, Scale::Linear, false},
    }};
}

void SearchSpace::validate() const {
    if (dims.empty()) {
        throw ValidationError("search space has no dimensions");
    }
    if (dims.size() > std::size(kPrimes)) {
        throw ValidationError("search space has too many dimensions");
    }
    for (const auto& d : dims) {
        if (d.name.empty()) {
            throw ValidationError("search dimension without a name");
        }
        if (!std::isfinite(d.lower) || !std::isfinite(d.upper) || !(d.lower < d.upper)) {
            throw ValidationError("dimension '" + d.name + "' needs lower < upper");
        }
        if (d.scale == Scale::Log10 && d.lower <= 0.0) {
            throw ValidationError("log-scale dimension '" + d.name + "' needs a positive lower bound");
        }
    }
}

std::vector<double> SearchSpace::decode(std::span<const double> unit) const {
    if (unit.size() != dims.size()) {
        throw DimensionError("point has the wrong number of coordinates");
    }
    std::vector<double> out(dims.size());
    for (std::size_t k = 0; k < dims.size(); ++k) {
        const auto& d = dims[k];
        const double u = std::clamp(unit[k], 0.0, 1.0);
        double v = 0.0;
        if (d.scale == Scale::Log10) {
            const double lo = std::log10(d.lower);
            v = std::pow(10.0, lo + u * (std::log10(d.upper) - lo));
        } else {
            v = d.lower + u * (d.upper - d.lower);
        }
        if (d.integer) {
            v = std::round(v);
        }
        out[k] = std::clamp(v, d.lower, d.upper);
    }
    return out;
}

std::vector<double> SearchSpace::encode(std::span<const double> values) const {
    if (values.size() != dims.size()) {
        throw DimensionError("point has the wrong number of coordinates");
    }
    std::vector<double> out(dims.size());
    for (std::size_t k = 0; k < dims.size(); ++k) {
        const auto& d = dims[k];
        if (d.scale == Scale::Log10) {
            const double lo = std::log10(d.lower);
            out[k] = (std::log10(values[k]) - lo) / (std::log10(d.upper) - lo);
        } else {
            out[k] = (values[k] - d.lower) / (d.upper - d.lower);
        }
    }
    return out;
}

bool SearchSpace::contains(std::span<const double> values) const {
    if (values.size() != dims.size()) {
        return false;
    }
    for (std::size_t k = 0; k < dims.size(); ++k) {
        if (!(values[k] >= dims[k].lower && values[k] <= dims[k].upper)) {
            return false;
        }
        if (dims[k].integer && values[k] != std::round(values[k])) {
            return false;
        }
    }
    return true;
}

nlohmann::ordered_json SearchSpace::to_json() const {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& d : dims) {
        arr.push_back({{"name", d.name},
                       {"lower", d.lower},
                       {"upper", d.upper},
                       {"scale", d.scale == Scale::Log10 ? "log10" : "linear"},
                       {"integer", d.integer}});
    }
    return {{"dims", arr}};
}

SearchSpace SearchSpace::from_json(const nlohmann::json& j) {
    SearchSpace s;
    try {
        for (const auto& d : j.at("dims")) {
            const auto scale = d.value("scale", std::string("linear"));
            if (scale != "linear" && scale != "log10") {
                throw ValidationError("unknown scale '" + scale + "'");
            }
            s.dims.push_back({d.at("name").get<std::string>(), d.at("lower").get<double>(),
                              d.at("upper").get<double>(), scale == "log10" ? Scale::Log10 : Scale::Linear,
                              d.value("integer", false)});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed search space: ") + e.what());
    }
    s.validate();
    return s;
}

double kernel(const GpModel& model, std::span<const double> a, std::span<const double> b) {
    double r2 = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = (a[k] - b[k]) / model.length_scales[k];
        r2 += d * d;
    }
    return model.signal_variance * std::exp(-0.5 * r2);
}

GpModel GpModel::condition(std::vector<std::vector<double>> x, std::vector<double> y,
                           std::vector<double> length_scales, double signal_variance, double noise_variance,
                           double prior_mean) {
    if (x.empty() || x.size() != y.size()) {
        throw ValidationError("GP needs at least one observation and one target per input");
    }
    for (const auto& row : x) {
        if (row.size() != length_scales.size()) {
            throw DimensionError("GP input dimension does not match the length scales");
        }
    }
    if (!(signal_variance > 0.0) || !(noise_variance >= 0.0) ||
        std::any_of(length_scales.begin(), length_scales.end(), [](double l) { return !(l > 0.0); })) {
        throw ValidationError("GP hyperparameters must be positive");
    }
    GpModel m;
    m.x = std::move(x);
    m.y = std::move(y);
    m.length_scales = std::move(length_scales);
    m.signal_variance = signal_variance;
    m.noise_variance = noise_variance;
    m.prior_mean = prior_mean;

    const auto n = static_cast<Eigen::Index>(m.x.size());
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            k(i, j) = k(j, i) = kernel(m, m.x[static_cast<std::size_t>(i)], m.x[static_cast<std::size_t>(j)]);
        }
    }
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        r(i) = m.y[static_cast<std::size_t>(i)] - prior_mean;
    }

    double jitter = 0.0;
    for (;;) {
        Eigen::MatrixXd a = k;
        a.diagonal().array() += noise_variance + jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(a);
        const Eigen::MatrixXd l = llt.matrixL();
        if (llt.info() == Eigen::Success && (l.diagonal().array() > 0.0).all()) {
            const Eigen::VectorXd alpha = llt.solve(r);
            m.jitter = jitter;
            m.alpha.assign(alpha.data(), alpha.data() + n);
            m.cholesky.assign(static_cast<std::size_t>(n * n), 0.0);
            for (Eigen::Index i = 0; i < n; ++i) {
                for (Eigen::Index j = 0; j <= i; ++j) {
                    m.cholesky[static_cast<std::size_t>(i * n + j)] = l(i, j);
                }
            }
            m.log_marginal_likelihood = -0.5 * r.dot(alpha) - l.diagonal().array().log().sum() -
                                        0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
            return m;
        }
        jitter = jitter == 0.0 ? 1e-12 * signal_variance : jitter * 10.0;
        if (jitter > 1e-4 * signal_variance) {
            throw NumericError("GP kernel matrix is singular even with diagonal jitter");
        }
    }
}

GpModel GpModel::fit(std::vector<std::vector<double>> x, std::vector<double> y) {
    if (x.empty()) {
        throw ValidationError("GP needs at least one observation");
    }
    const std::size_t dims = x.front().size();
    double mean = 0.0;
    for (const double v : y) {
        mean += v;
    }
    mean /= static_cast<double>(y.size());
    double var = 0.0;
    for (const double v : y) {
        var += (v - mean) * (v - mean);
    }
    var /= static_cast<double>(y.size());
    if (!(var > 1e-300)) {
        var = 1.0;
    }

    std::optional<GpModel> best;
    const auto consider = [&](const std::vector<double>& ls, double noise) {
        try {
            GpModel m = condition(x, y, ls, var, noise * var, mean);
            if (!best || m.log_marginal_likelihood > best->log_marginal_likelihood) {
                best = std::move(m);
            }
        } catch (const NumericError&) {
        }
    };
    for (const double noise : kNoiseGrid) {
        for (const double l : kLengthGrid) {
            consider(std::vector<double>(dims, l), noise);
        }
    }
    if (!best) {
        throw NumericError("no GP hyperparameters on the grid give a usable kernel matrix");
    }
    if (dims > 1) {
        for (std::size_t d = 0; d < dims; ++d) {
            const double noise = best->noise_variance / var;
            const std::vector<double> base = best->length_scales;
            for (const double l : kLengthGrid) {
                auto ls = base;
                ls[d] = l;
                consider(ls, noise);
            }
        }
    }
    return std::move(*best);
}

Posterior gp_posterior(const GpModel& model, std::span<const double> x) {
    const std::size_t n = model.x.size();
    if (n == 0 || model.alpha.size() != n) {
        throw ValidationError("GP has not been conditioned on any data");
    }
    if (x.size() != model.length_scales.size()) {
        throw DimensionError("query point has the wrong dimension");
    }
    std::vector<double> k(n);
    double mean = model.prior_mean;
    for (std::size_t i = 0; i < n; ++i) {
        k[i] = kernel(model, model.x[i], x);
        mean += k[i] * model.alpha[i];
    }
    // v = L^-1 k, variance = k(x,x) - v.v
    std::vector<double> v(n);
    double quad = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double s = k[i];
        for (std::size_t j = 0; j < i; ++j) {
            s -= model.cholesky[i * n + j] * v[j];
        }
        v[i] = s / model.cholesky[i * n + i];
        quad += v[i] * v[i];
    }
    return {mean, std::max(0.0, model.signal_variance - quad)};
}

double expected_improvement(double mean, double variance, double best_observed) {
    if (variance < 0.0) {
        throw ValidationError("variance must be non-negative");
    }
    const double gain = best_observed - mean;
    const double sd = std::sqrt(variance);
    if (sd < 1e-300) {
        return std::max(gain, 0.0);
    }
    const double z = gain / sd;
    const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
    const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
    return std::max(0.0, gain * cdf + sd * pdf);
}

std::vector<std::vector<double>> candidate_points(std::size_t dims, std::span<const double> incumbent,
                                                  std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> out;
    out.reserve(kRandomCandidates + kLocalCandidates);
    for (std::size_t c = 0; c < kRandomCandidates; ++c) {
        std::vector<double> p(dims);
        for (auto& v : p) {
            v = rng.uniform();
        }
        out.push_back(std::move(p));
    }
    if (incumbent.size() == dims) {
        for (std::size_t c = 0; c < kLocalCandidates; ++c) {
            std::vector<double> p(dims);
            for (std::size_t k = 0; k < dims; ++k) {
                p[k] = std::clamp(incumbent[k] + kLocalStep * rng.normal(), 0.0, 1.0);
            }
            out.push_back(std::move(p));
        }
    }
    return out;
}

std::vector<double> suggest(const SearchSpace& space, std::span<const Trial> history, std::uint64_t seed) {
    space.validate();
    const std::size_t dims = space.size();
    std::vector<std::vector<double>> xs;
    std::vector<double> ys;
    for (const auto& t : history) {
        if (t.status == TrialStatus::Completed) {
            xs.push_back(space.encode(t.values));
            ys.push_back(t.objective);
        }
    }

    if (history.size() < kInitialTrials || xs.empty()) {
        Rng shift_rng(derive_seed(seed, "halton-shift"));
        std::vector<double> unit(dims);
        for (std::size_t k = 0; k < dims; ++k) {
            const double h = radical_inverse(history.size() + 1, kPrimes[k]) + shift_rng.uniform();
            unit[k] = h - std::floor(h);
        }
        return space.decode(unit);
    }

    const GpModel gp = GpModel::fit(xs, ys);
    const auto best_it = std::min_element(ys.begin(), ys.end());
    const double best = *best_it;
    const auto& incumbent = xs[static_cast<std::size_t>(best_it - ys.begin())];
    const auto candidates = candidate_points(dims, incumbent, derive_seed(seed, history.size()));

    std::size_t chosen = 0;
    double chosen_ei = -1.0;
    double chosen_var = -1.0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const auto post = gp_posterior(gp, candidates[c]);
        const double ei = expected_improvement(post.mean, post.variance, best);
        if (ei > chosen_ei || (ei == chosen_ei && post.variance > chosen_var)) {
            chosen = c;
            chosen_ei = ei;
            chosen_var = post.variance;
        }
    }
    return space.decode(candidates[chosen]);
}

OptimizeResult optimize(const SearchSpace& space, const Objective& objective, std::size_t budget,
                        std::uint64_t seed, std::vector<Trial> history, const TrialCallback& on_trial) {
    space.validate();
    if (budget < 1) {
        throw ValidationError("budget must be at least 1");
    }
    for (const auto& t : history) {
        if (!space.contains(t.values)) {
            throw ValidationError("history trial " + std::to_string(t.index) + " lies outside the search space");
        }
    }
    while (history.size() < budget) {
        auto values = suggest(space, history, seed);
        history.push_back(evaluate(objective, history.size(), std::move(values)));
        if (on_trial) {
            on_trial(history.back());
        }
    }
    OptimizeResult r;
    r.best = best_of(history);
    r.history = std::move(history);
    return r;
}

OptimizeResult random_search(const SearchSpace& space, const Objective& objective, std::size_t budget,
                             std::uint64_t seed) {
    space.validate();
    if (budget < 1) {
        throw ValidationError("budget must be at least 1");
    }
    Rng rng(derive_seed(seed, "random-search"));
    OptimizeResult r;
    for (std::size_t t = 0; t < budget; ++t) {
        std::vector<double> unit(space.size());
        for (auto& u : unit) {
            u = rng.uniform();
        }
        r.history.push_back(evaluate(objective, t, space.decode(unit)));
    }
    r.best = best_of(r.history);
    return r;
}

std::string format_history(const SearchSpace& space, std::span<const Trial> trials) {
    std::vector<std::string> header{"trial"};
    for (const auto& d : space.dims) {
        header.push_back(d.name);
    }
    header.push_back("objective");
    header.push_back("status");
    std::string out = csv::join_line(header) + "\n";
    for (const auto& t : trials) {
        std::vector<std::string> row{std::to_string(t.index)};
        for (const double v : t.values) {
            row.push_back(csv::format_double(v));
        }
        row.push_back(t.status == TrialStatus::Completed ? csv::format_double(t.objective) : "");
        row.push_back(status_name(t.status));
        out += csv::join_line(row) + "\n";
    }
    return out;
}

std::vector<Trial> parse_history(const SearchSpace& space, const std::filesystem::path& path) {
    const auto lines = csv::read_lines(path);
    std::vector<std::string> expected{"trial"};
    for (const auto& d : space.dims) {
        expected.push_back(d.name);
    }
    expected.push_back("objective");
    expected.push_back("status");
    if (lines.empty() || csv::split_line(lines.front()) != expected) {
        throw LoadError("history file '" + path.string() + "' does not match the search space columns");
    }
    std::vector<Trial> trials;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        if (lines[r].empty()) {
            continue;
        }
        const auto fields = csv::split_line(lines[r]);
        const std::string where = path.string() + ":" + std::to_string(r + 1);
        if (fields.size() != expected.size()) {
            throw LoadError(where + ": expected " + std::to_string(expected.size()) + " fields");
        }
        Trial t;
        t.index = trials.size();
        for (std::size_t k = 0; k < space.size(); ++k) {
            const auto v = csv::parse_double(fields[k + 1]);
            if (!v) {
                throw LoadError(where + ": bad value for '" + space.dims[k].name + "'");
            }
            t.values.push_back(*v);
        }
        const auto& status = fields.back();
        if (status == "completed") {
            const auto obj = csv::parse_double(fields[fields.size() - 2]);
            if (!obj || !std::isfinite(*obj)) {
                throw LoadError(where + ": completed trial needs a finite objective");
            }
            t.objective = *obj;
        } else if (status == "failed") {
            t.status = TrialStatus::Failed;
            t.objective = std::numeric_limits<double>::quiet_NaN();
        } else {
            throw LoadError(where + ": unknown status '" + status + "'");
        }
        trials.push_back(std::move(t));
    }
    return trials;
}

void save_history(const std::filesystem::path& path, const SearchSpace& space, std::span<const Trial> trials) {
    csv::write_text(path, format_history(space, trials));
}

}  // namespace seal::hyperopt
