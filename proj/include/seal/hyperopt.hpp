#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace seal::hyperopt {

enum class Scale { Linear, Log10 };

struct Dimension {
    std::string name;
    double lower = 0.0;
    double upper = 1.0;
    Scale scale = Scale::Linear;
    bool integer = false;
};

/// Box-shaped search space. Points are handled in the unit cube internally.
struct SearchSpace {
    std::vector<Dimension> dims;

    /// lr (log10), epochs, h2_prime, h2, h (integers) and dropout, with the default ranges.
    /// Names match the TrainConfig JSON keys.
    static SearchSpace training_default();

    void validate() const;
    std::size_t size() const { return dims.size(); }

    /// Unit-cube point to parameter values; integer dims are rounded.
    std::vector<double> decode(std::span<const double> unit) const;
    std::vector<double> encode(std::span<const double> values) const;
    bool contains(std::span<const double> values) const;

    nlohmann::ordered_json to_json() const;
    static SearchSpace from_json(const nlohmann::json& j);
};

enum class TrialStatus { Completed, Failed };

struct Trial {
    std::size_t index = 0;
    std::vector<double> values;
    double objective = 0.0;  // meaningful only when completed
    TrialStatus status = TrialStatus::Completed;
    std::string message;
};

/// Zero-mean-after-centering GP with a squared-exponential ARD kernel.
struct GpModel {
    std::vector<std::vector<double>> x;  // unit-cube inputs
    std::vector<double> y;
    std::vector<double> length_scales;
    double signal_variance = 1.0;
    double noise_variance = 1e-6;
    double prior_mean = 0.0;

    // Fitted state.
    std::vector<double> alpha;        // (K + s^2 I)^-1 (y - m)
    std::vector<double> cholesky;     // lower factor, row-major n x n
    double jitter = 0.0;              // extra diagonal actually needed
    double log_marginal_likelihood = 0.0;

    /// Factorizes with fixed hyperparameters. Jitter grows from 0 up to 1e-4 * signal
    /// variance; throws NumericError if the kernel matrix still is not positive definite.
    static GpModel condition(std::vector<std::vector<double>> x, std::vector<double> y,
                             std::vector<double> length_scales, double signal_variance, double noise_variance,
                             double prior_mean);

    /// Prior mean and variance from the data, then length scales and noise chosen by
    /// marginal likelihood over a fixed grid (isotropic pass, then one pass per dimension).
    static GpModel fit(std::vector<std::vector<double>> x, std::vector<double> y);
};

double kernel(const GpModel& model, std::span<const double> a, std::span<const double> b);

struct Posterior {
    double mean = 0.0;
    double variance = 0.0;
};

Posterior gp_posterior(const GpModel& model, std::span<const double> x);

/// Closed-form expected improvement for minimization.
double expected_improvement(double mean, double variance, double best_observed);

/// Unit-cube candidates scored by suggest() once the initial design is exhausted:
/// 1024 uniform points followed by 128 Gaussian perturbations of the incumbent.
std::vector<std::vector<double>> candidate_points(std::size_t dims, std::span<const double> incumbent,
                                                  std::uint64_t seed);

inline constexpr std::size_t kInitialTrials = 5;

/// Next configuration to evaluate. The first kInitialTrials come from a shifted Halton
/// sequence; afterwards the candidate with the largest EI wins (ties: larger variance).
std::vector<double> suggest(const SearchSpace& space, std::span<const Trial> history, std::uint64_t seed);

using Objective = std::function<double(const std::vector<double>& values)>;
using TrialCallback = std::function<void(const Trial& trial)>;

struct OptimizeResult {
    std::optional<Trial> best;
    std::vector<Trial> history;
};

/// Runs suggest -> evaluate until `budget` trials exist (counting `history`). A throwing
/// objective or a non-finite value marks the trial failed and the loop continues.
OptimizeResult optimize(const SearchSpace& space, const Objective& objective, std::size_t budget,
                        std::uint64_t seed, std::vector<Trial> history = {}, const TrialCallback& on_trial = {});

/// Uniform sampling with the same trial bookkeeping, as a reference point.
OptimizeResult random_search(const SearchSpace& space, const Objective& objective, std::size_t budget,
                             std::uint64_t seed);

std::string format_history(const SearchSpace& space, std::span<const Trial> trials);
std::vector<Trial> parse_history(const SearchSpace& space, const std::filesystem::path& path);
void save_history(const std::filesystem::path& path, const SearchSpace& space, std::span<const Trial> trials);

}  // namespace seal::hyperopt
