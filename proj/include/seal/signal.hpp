#pragma once

#include "seal/dataio.hpp"
#include "seal/matrix.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace seal::signal {

using dataio::FeatureVector;

/// Multi-channel time series, one row per sample.
struct Recording {
    double sample_rate_hz = 0.0;
    std::vector<std::string> channels;
    Matrix samples;  // num_samples x num_channels
    /// Active labels per sample; empty when the recording is unlabeled.
    std::vector<std::set<std::string>> sample_labels;

    std::size_t num_samples() const { return samples.rows(); }
    double duration_s() const { return static_cast<double>(num_samples()) / sample_rate_hz; }
    void validate() const;
};

/// Fixed-duration segment, stored channels x samples.
struct SensorWindow {
    Matrix data;
    double start_s = 0.0;
    std::set<std::string> labels;

    std::size_t num_channels() const { return data.rows(); }
    std::size_t num_samples() const { return data.cols(); }
};

struct Windowing {
    std::vector<SensorWindow> windows;
    /// Set when the recording is shorter than a single window.
    bool too_short = false;
};

/// Windows start at 0, step, 2*step, ... while the whole window fits. A window carries a
/// label when that label is active in strictly more than half of its samples.
Windowing sliding_windows(const Recording& recording, double window_s, double step_s);

/// Fourier-method resampling of every channel to `target_len` samples. The spectrum is
/// truncated or zero-padded with the Nyquist bin split/merged so real input stays real,
/// and amplitudes are rescaled by target_len / source_len.
SensorWindow fourier_resample(const SensorWindow& window, std::size_t target_len);

/// Real signal resampling used by fourier_resample, exposed for a single channel.
std::vector<double> fourier_resample(std::span<const double> x, std::size_t target_len);

/// Statistics computed for each channel, in output order.
inline constexpr std::size_t kPerChannelFeatures = 10;
/// Statistics computed for each consecutive tri-axial channel triple.
inline constexpr std::size_t kPerGroupFeatures = 5;

/// Handcrafted feature vector: per-channel {mean, std, min, max, median, iqr, rms,
/// zero crossings, dominant frequency bin, spectral energy}, then per tri-axial group
/// {magnitude mean, magnitude std, corr(x,y), corr(x,z), corr(y,z)}.
FeatureVector extract_features(const SensorWindow& window);

/// Column names matching extract_features for the given channels.
std::vector<std::string> feature_names(const std::vector<std::string>& channels);

std::size_t feature_length(std::size_t num_channels);

/// Per-feature standardization fitted on training data, constant features dropped.
struct Normalizer {
    std::size_t input_dim = 0;
    std::vector<std::size_t> kept;
    std::vector<double> mean;
    std::vector<double> scale;

    std::size_t output_dim() const { return kept.size(); }

    nlohmann::json to_json() const;
    static Normalizer from_json(const nlohmann::json& j);
};

/// Features with population std below 1e-12 are dropped; missing entries are
/// excluded from the statistics. Throws ValidationError when nothing survives.
Normalizer fit_normalizer(std::span<const FeatureVector> train);

/// (f - mean) / scale on kept features; missing entries become 0.
FeatureVector apply_normalizer(const Normalizer& normalizer, const FeatureVector& features);

/// Normalizes every instance of a dataset; the result has the normalizer's kept feature names.
dataio::Dataset apply_normalizer(const Normalizer& normalizer, const dataio::Dataset& dataset);

/// Fits on every instance's features.
Normalizer fit_normalizer(const dataio::Dataset& train);

/// Reads the recording-CSV format. `sample_rate_hz` <= 0 infers the rate from the `t` column.
Recording load_recording_csv(const std::filesystem::path& path, double sample_rate_hz = 0.0);
void write_recording_csv(const std::filesystem::path& path, const Recording& recording);

struct PreprocessOptions {
    double window_s = 3.0;
    double step_s = 1.5;
};

/// Windows a recording and extracts features into a dataset for one user.
/// Window labels outside the schema are ignored.
dataio::Dataset preprocess_recording(const Recording& recording, const std::string& user_id,
                                     const dataio::LabelSchema& schema, const PreprocessOptions& options = {});

}  // namespace seal::signal
