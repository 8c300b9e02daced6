#include "seal/signal.hpp"

#include "seal/csv.hpp"
#include "seal/errors.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>

namespace seal::signal {

namespace {

// FFTW's planner is not thread-safe; execution on distinct buffers is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

std::vector<std::complex<double>> rfft(std::span<const double> x) {
    const int n = static_cast<int>(x.size());
    std::vector<double> in(x.begin(), x.end());
    std::vector<std::complex<double>> out(x.size() / 2 + 1);
    fftw_plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan = fftw_plan_dft_r2c_1d(n, in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                    FFTW_ESTIMATE | FFTW_UNALIGNED);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan);
    }
    return out;
}

/// Unnormalized inverse of rfft for a real signal of length n.
std::vector<double> irfft(std::vector<std::complex<double>> spectrum, std::size_t n) {
    std::vector<double> out(n);
    fftw_plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan = fftw_plan_dft_c2r_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(spectrum.data()), out.data(),
                                    FFTW_ESTIMATE | FFTW_UNALIGNED);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan);
    }
    return out;
}

double percentile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

struct Moments {
    double mean = 0.0;
    double var = 0.0;
};

Moments moments(std::span<const double> x) {
    Moments m;
    for (const double v : x) {
        m.mean += v;
    }
    m.mean /= static_cast<double>(x.size());
    for (const double v : x) {
        m.var += (v - m.mean) * (v - m.mean);
    }
    m.var /= static_cast<double>(x.size());
    return m;
}

bool negligible_variance(const Moments& m) {
    return m.var <= 1e-20 * std::max(1.0, m.mean * m.mean);
}

double pearson(std::span<const double> a, std::span<const double> b) {
    const Moments ma = moments(a);
    const Moments mb = moments(b);
    if (negligible_variance(ma) || negligible_variance(mb)) {
        return 0.0;
    }
    double cov = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (a[i] - ma.mean) * (b[i] - mb.mean);
    }
    cov /= static_cast<double>(a.size());
    return std::clamp(cov / std::sqrt(ma.var * mb.var), -1.0, 1.0);
}

void channel_features(std::span<const double> x, std::vector<double>& out) {
    const Moments m = moments(x);
    std::vector<double> sorted(x.begin(), x.end());
    std::sort(sorted.begin(), sorted.end());

    double sum_sq = 0.0;
    std::size_t crossings = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sum_sq += x[i] * x[i];
        if (i > 0 && x[i - 1] * x[i] < 0.0) {
            ++crossings;
        }
    }

    const auto spectrum = rfft(x);
    const double n = static_cast<double>(x.size());
    std::size_t dominant = 0;
    double best = 0.0;
    double energy = 0.0;
    for (std::size_t k = 1; k <= x.size() / 2; ++k) {
        const double mag = std::abs(spectrum[k]);
        energy += mag * mag;
        if (mag > best) {
            best = mag;
            dominant = k;
        }
    }
    // Round-off on flat signals must not pick a spurious bin.
    double abs_sum = 0.0;
    for (const double v : x) {
        abs_sum += std::abs(v);
    }
    if (best <= 1e-10 * std::max(1.0, abs_sum)) {
        dominant = 0;
    }

    out.push_back(m.mean);
    out.push_back(std::sqrt(m.var));
    out.push_back(sorted.front());
    out.push_back(sorted.back());
    out.push_back(percentile_sorted(sorted, 0.5));
    out.push_back(percentile_sorted(sorted, 0.75) - percentile_sorted(sorted, 0.25));
    out.push_back(std::sqrt(sum_sq / n));
    out.push_back(static_cast<double>(crossings));
    out.push_back(static_cast<double>(dominant));
    out.push_back(energy / (n * n));
}

std::string group_name(const std::vector<std::string>& channels, std::size_t g) {
    const std::string& first = channels[3 * g];
    const char axes[3] = {'x', 'y', 'z'};
    bool tri_axial = true;
    for (std::size_t a = 0; a < 3; ++a) {
        const std::string& c = channels[3 * g + a];
        if (c.empty() || std::tolower(static_cast<unsigned char>(c.back())) != axes[a]) {
            tri_axial = false;
        }
    }
    if (tri_axial && first.size() > 1) {
        std::string base = first.substr(0, first.size() - 1);
        while (!base.empty() && (base.back() == '_' || base.back() == '.')) {
            base.pop_back();
        }
        if (!base.empty()) {
            return base;
        }
    }
    return "group" + std::to_string(g);
}

}  // namespace

void Recording::validate() const {
    if (!(sample_rate_hz > 0.0)) {
        throw ValidationError("recording sample rate must be positive");
    }
    if (samples.rows() < 1) {
        throw ValidationError("recording needs at least one sample");
    }
    if (samples.cols() != channels.size()) {
        throw DimensionError("recording has " + std::to_string(samples.cols()) + " sample columns but " +
                             std::to_string(channels.size()) + " channel names");
    }
    if (!sample_labels.empty() && sample_labels.size() != samples.rows()) {
        throw DimensionError("per-sample label count does not match sample count");
    }
}

Windowing sliding_windows(const Recording& recording, double window_s, double step_s) {
    if (!(window_s > 0.0) || !(step_s > 0.0)) {
        throw ValidationError("window and step durations must be positive");
    }
    recording.validate();
    const auto window_len = static_cast<std::size_t>(std::llround(window_s * recording.sample_rate_hz));
    const auto step_len = static_cast<std::size_t>(std::llround(step_s * recording.sample_rate_hz));
    if (window_len == 0 || step_len == 0) {
        throw ValidationError("window or step shorter than one sample");
    }

    Windowing result;
    const std::size_t n = recording.num_samples();
    if (n < window_len) {
        result.too_short = true;
        return result;
    }
    const std::size_t ch = recording.channels.size();
    for (std::size_t start = 0; start + window_len <= n; start += step_len) {
        SensorWindow w;
        w.start_s = static_cast<double>(start) / recording.sample_rate_hz;
        w.data = Matrix(ch, window_len);
        for (std::size_t t = 0; t < window_len; ++t) {
            for (std::size_t c = 0; c < ch; ++c) {
                w.data(c, t) = recording.samples(start + t, c);
            }
        }
        if (!recording.sample_labels.empty()) {
            std::map<std::string, std::size_t> counts;
            for (std::size_t t = start; t < start + window_len; ++t) {
                for (const auto& label : recording.sample_labels[t]) {
                    ++counts[label];
                }
            }
            for (const auto& [label, count] : counts) {
                if (2 * count > window_len) {
                    w.labels.insert(label);
                }
            }
        }
        result.windows.push_back(std::move(w));
    }
    return result;
}

std::vector<double> fourier_resample(std::span<const double> x, std::size_t target_len) {
    if (target_len < 1) {
        throw ValidationError("resample length must be at least 1");
    }
    if (x.size() < 2) {
        throw ValidationError("resampling needs at least two samples");
    }
    const std::size_t source_len = x.size();
    const auto spectrum = rfft(x);

    const std::size_t n = std::min(source_len, target_len);
    const std::size_t nyquist_slice = n / 2 + 1;
    std::vector<std::complex<double>> resized(target_len / 2 + 1);
    std::copy(spectrum.begin(), spectrum.begin() + static_cast<std::ptrdiff_t>(nyquist_slice), resized.begin());
    if (n % 2 == 0) {
        if (target_len < source_len) {
            // The kept Nyquist bin absorbs its negative-frequency twin.
            resized[n / 2] *= 2.0;
        } else if (target_len > source_len) {
            // The old Nyquist bin is split between +n/2 and -n/2.
            resized[n / 2] *= 0.5;
        }
    }
    auto y = irfft(std::move(resized), target_len);
    // irfft is unnormalized (factor target_len); together with the target/source
    // amplitude rescale this leaves a single division by source_len.
    for (double& v : y) {
        v /= static_cast<double>(source_len);
    }
    return y;
}

SensorWindow fourier_resample(const SensorWindow& window, std::size_t target_len) {
    if (target_len < 1) {
        throw ValidationError("resample length must be at least 1");
    }
    SensorWindow out;
    out.start_s = window.start_s;
    out.labels = window.labels;
    out.data = Matrix(window.num_channels(), target_len);
    for (std::size_t c = 0; c < window.num_channels(); ++c) {
        const auto y = fourier_resample(window.data.row(c), target_len);
        std::copy(y.begin(), y.end(), out.data.row(c).begin());
    }
    return out;
}

std::size_t feature_length(std::size_t num_channels) {
    return num_channels * kPerChannelFeatures + (num_channels / 3) * kPerGroupFeatures;
}

FeatureVector extract_features(const SensorWindow& window) {
    if (window.num_channels() == 0 || window.num_samples() == 0) {
        throw ValidationError("cannot extract features from an empty window");
    }
    std::vector<double> out;
    out.reserve(feature_length(window.num_channels()));
    for (std::size_t c = 0; c < window.num_channels(); ++c) {
        channel_features(window.data.row(c), out);
    }
    const std::size_t groups = window.num_channels() / 3;
    const std::size_t t_len = window.num_samples();
    for (std::size_t g = 0; g < groups; ++g) {
        const auto x = window.data.row(3 * g);
        const auto y = window.data.row(3 * g + 1);
        const auto z = window.data.row(3 * g + 2);
        std::vector<double> mag(t_len);
        for (std::size_t t = 0; t < t_len; ++t) {
            mag[t] = std::sqrt(x[t] * x[t] + y[t] * y[t] + z[t] * z[t]);
        }
        const Moments mm = moments(mag);
        out.push_back(mm.mean);
        out.push_back(std::sqrt(mm.var));
        out.push_back(pearson(x, y));
        out.push_back(pearson(x, z));
        out.push_back(pearson(y, z));
    }
    return FeatureVector(std::move(out));
}

std::vector<std::string> feature_names(const std::vector<std::string>& channels) {
    static const char* const per_channel[kPerChannelFeatures] = {
        "mean", "std", "min", "max", "median", "iqr", "rms", "zero_crossings", "dominant_freq", "spectral_energy"};
    static const char* const per_group[kPerGroupFeatures] = {"mag_mean", "mag_std", "corr_xy", "corr_xz",
                                                             "corr_yz"};
    std::vector<std::string> names;
    for (const auto& c : channels) {
        for (const char* s : per_channel) {
            names.push_back(c + "_" + s);
        }
    }
    for (std::size_t g = 0; g < channels.size() / 3; ++g) {
        const std::string base = group_name(channels, g);
        for (const char* s : per_group) {
            names.push_back(base + "_" + s);
        }
    }
    return names;
}

nlohmann::json Normalizer::to_json() const {
    return {{"input_dim", input_dim}, {"kept", kept}, {"mean", mean}, {"scale", scale}};
}

Normalizer Normalizer::from_json(const nlohmann::json& j) {
    Normalizer n;
    n.input_dim = j.at("input_dim").get<std::size_t>();
    n.kept = j.at("kept").get<std::vector<std::size_t>>();
    n.mean = j.at("mean").get<std::vector<double>>();
    n.scale = j.at("scale").get<std::vector<double>>();
    if (n.mean.size() != n.kept.size() || n.scale.size() != n.kept.size()) {
        throw ValidationError("normalizer arrays disagree in length");
    }
    return n;
}

Normalizer fit_normalizer(std::span<const FeatureVector> train) {
    if (train.size() < 2) {
        throw ValidationError("normalizer needs at least two training vectors");
    }
    const std::size_t dim = train.front().size();
    for (const auto& fv : train) {
        if (fv.size() != dim) {
            throw DimensionError("training feature vectors differ in length");
        }
    }
    Normalizer norm;
    norm.input_dim = dim;
    for (std::size_t k = 0; k < dim; ++k) {
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& fv : train) {
            if (!fv.is_missing(k)) {
                sum += fv.values[k];
                ++count;
            }
        }
        if (count == 0) {
            continue;
        }
        const double mu = sum / static_cast<double>(count);
        double ss = 0.0;
        for (const auto& fv : train) {
            if (!fv.is_missing(k)) {
                ss += (fv.values[k] - mu) * (fv.values[k] - mu);
            }
        }
        const double sd = std::sqrt(ss / static_cast<double>(count));
        if (sd < 1e-12) {
            continue;
        }
        norm.kept.push_back(k);
        norm.mean.push_back(mu);
        norm.scale.push_back(sd);
    }
    if (norm.kept.empty()) {
        throw ValidationError("every feature is constant on the training set");
    }
    return norm;
}

FeatureVector apply_normalizer(const Normalizer& normalizer, const FeatureVector& features) {
    if (features.size() != normalizer.input_dim) {
        throw DimensionError("normalizer expects " + std::to_string(normalizer.input_dim) + " features, got " +
                             std::to_string(features.size()));
    }
    std::vector<double> out(normalizer.kept.size());
    for (std::size_t i = 0; i < normalizer.kept.size(); ++i) {
        const std::size_t k = normalizer.kept[i];
        out[i] = features.is_missing(k) ? 0.0 : (features.values[k] - normalizer.mean[i]) / normalizer.scale[i];
    }
    return FeatureVector(std::move(out));
}

Normalizer fit_normalizer(const dataio::Dataset& train) {
    std::vector<FeatureVector> vectors;
    vectors.reserve(train.size());
    for (const auto& inst : train.instances) {
        vectors.push_back(inst.features);
    }
    return fit_normalizer(vectors);
}

dataio::Dataset apply_normalizer(const Normalizer& normalizer, const dataio::Dataset& dataset) {
    if (dataset.feature_dim() != normalizer.input_dim) {
        throw DimensionError("dataset has " + std::to_string(dataset.feature_dim()) +
                             " features, normalizer expects " + std::to_string(normalizer.input_dim));
    }
    dataio::Dataset out = dataset;
    out.feature_names.clear();
    for (const auto k : normalizer.kept) {
        out.feature_names.push_back(dataset.feature_names[k]);
    }
    for (auto& inst : out.instances) {
        inst.features = apply_normalizer(normalizer, inst.features);
    }
    return out;
}

Recording load_recording_csv(const std::filesystem::path& path, double sample_rate_hz) {
    const auto lines = csv::read_lines(path);
    const std::string file = path.string();
    if (lines.empty()) {
        throw LoadError(file + ": missing header row");
    }
    const auto header = csv::split_line(lines.front());
    if (header.empty() || header.front() != "t") {
        throw LoadError(file + ": malformed header, first column must be 't'");
    }
    Recording rec;
    std::vector<std::size_t> channel_cols;
    std::vector<std::pair<std::size_t, std::string>> label_cols;
    for (std::size_t c = 1; c < header.size(); ++c) {
        if (header[c].rfind("y_", 0) == 0 && header[c].size() > 2) {
            label_cols.emplace_back(c, header[c].substr(2));
        } else if (header[c].empty()) {
            throw LoadError(file + ": malformed header, empty column name");
        } else {
            channel_cols.push_back(c);
            rec.channels.push_back(header[c]);
        }
    }
    if (channel_cols.empty()) {
        throw LoadError(file + ": no channel columns");
    }

    std::vector<double> times;
    std::vector<double> values;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        if (lines[r].empty()) {
            continue;
        }
        const auto cells = csv::split_line(lines[r]);
        const std::string where = file + ": row " + std::to_string(r + 1);
        if (cells.size() != header.size()) {
            throw LoadError(where + " has the wrong number of cells");
        }
        const auto t = csv::parse_double(cells[0]);
        if (!t) {
            throw LoadError(where + ", column 't': non-numeric time '" + cells[0] + "'");
        }
        times.push_back(*t);
        for (const auto c : channel_cols) {
            const auto v = csv::parse_double(cells[c]);
            if (!v || !std::isfinite(*v)) {
                throw LoadError(where + ", column '" + header[c] + "': non-numeric sample '" + cells[c] + "'");
            }
            values.push_back(*v);
        }
        if (!label_cols.empty()) {
            std::set<std::string> active;
            for (const auto& [c, label] : label_cols) {
                if (cells[c] == "1") {
                    active.insert(label);
                } else if (cells[c] != "0") {
                    throw LoadError(where + ", column '" + header[c] + "': label must be 0 or 1");
                }
            }
            rec.sample_labels.push_back(std::move(active));
        }
    }
    if (times.empty()) {
        throw LoadError(file + ": no samples");
    }
    rec.samples = Matrix(times.size(), channel_cols.size(), std::move(values));
    if (sample_rate_hz > 0.0) {
        rec.sample_rate_hz = sample_rate_hz;
    } else {
        if (times.size() < 2 || !(times.back() > times.front())) {
            throw LoadError(file + ": cannot infer sample rate; pass it explicitly");
        }
        const double rate = static_cast<double>(times.size() - 1) / (times.back() - times.front());
        // Nominal rates are whole or near-whole numbers of hertz; strip timestamp round-off.
        rec.sample_rate_hz = std::round(rate * 1e6) / 1e6;
    }
    rec.validate();
    return rec;
}

void write_recording_csv(const std::filesystem::path& path, const Recording& recording) {
    recording.validate();
    std::set<std::string> label_set;
    for (const auto& s : recording.sample_labels) {
        label_set.insert(s.begin(), s.end());
    }
    std::vector<std::string> header = {"t"};
    header.insert(header.end(), recording.channels.begin(), recording.channels.end());
    for (const auto& l : label_set) {
        header.push_back("y_" + l);
    }
    std::string out = csv::join_line(header) + "\n";
    for (std::size_t i = 0; i < recording.num_samples(); ++i) {
        std::vector<std::string> row = {csv::format_double(static_cast<double>(i) / recording.sample_rate_hz)};
        for (std::size_t c = 0; c < recording.channels.size(); ++c) {
            row.push_back(csv::format_double(recording.samples(i, c)));
        }
        for (const auto& l : label_set) {
            row.push_back(recording.sample_labels[i].contains(l) ? "1" : "0");
        }
        out += csv::join_line(row) + "\n";
    }
    csv::write_text(path, out);
}

dataio::Dataset preprocess_recording(const Recording& recording, const std::string& user_id,
                                     const dataio::LabelSchema& schema, const PreprocessOptions& options) {
    schema.validate();
    const auto windowing = sliding_windows(recording, options.window_s, options.step_s);
    dataio::Dataset ds;
    ds.schema = schema;
    ds.feature_names = feature_names(recording.channels);
    ds.provenance = "recording:" + user_id;
    for (std::size_t i = 0; i < windowing.windows.size(); ++i) {
        const auto& w = windowing.windows[i];
        dataio::Instance inst;
        inst.instance_id = user_id + "_" + std::to_string(i);
        inst.user_id = user_id;
        inst.features = extract_features(w);
        for (const auto& label : w.labels) {
            if (schema.contains(label)) {
                inst.targets.insert(label);
            }
        }
        ds.instances.push_back(std::move(inst));
    }
    return ds;
}

}  // namespace seal::signal
