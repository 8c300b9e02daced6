#include "seal/align.hpp"
#include "seal/cli.hpp"
#include "seal/hyperopt.hpp"
#include "seal/labels.hpp"
#include "seal/metrics.hpp"
#include "seal/signal.hpp"
#include "seal/synth.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <tuple>

namespace py = pybind11;

namespace {

seal::Matrix to_matrix(const std::vector<std::vector<double>>& rows) {
    const std::size_t cols = rows.empty() ? 0 : rows.front().size();
    seal::Matrix m(rows.size(), cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != cols) {
            throw seal::DimensionError("ragged rows");
        }
        std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    }
    return m;
}

std::vector<std::vector<double>> to_rows(const seal::Matrix& m) {
    std::vector<std::vector<double>> rows(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        rows[i].assign(m.row(i).begin(), m.row(i).end());
    }
    return rows;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Label-embedding alignment for context-aware activity recognition";

    py::register_exception<seal::Error>(m, "SealError", PyExc_RuntimeError);

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out;
            std::ostringstream err;
            int code = 0;
            {
                py::gil_scoped_release release;
                code = seal::cli::run(args, out, err);
            }
            return std::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run a CLI subcommand in-process; returns (exit_code, stdout, stderr).");

    m.def(
        "fourier_resample",
        [](const std::vector<double>& x, std::size_t k) { return seal::signal::fourier_resample(x, k); },
        py::arg("x"), py::arg("k"));

    m.def(
        "extract_features",
        [](const std::vector<std::vector<double>>& channels) {
            seal::signal::SensorWindow w;
            w.data = to_matrix(channels);
            return seal::signal::extract_features(w).values;
        },
        py::arg("channels"), "Feature vector of a channels x samples window.");

    m.def(
        "mcc", [](std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn) {
            return seal::metrics::mcc({tp, fp, fn, tn});
        },
        py::arg("tp"), py::arg("fp"), py::arg("fn"), py::arg("tn"));
    m.def(
        "label_macro_f1", [](std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn) {
            return seal::metrics::label_macro_f1({tp, fp, fn, tn});
        },
        py::arg("tp"), py::arg("fp"), py::arg("fn"), py::arg("tn"));

    m.def("fallback_embed", &seal::labels::fallback_embed, py::arg("sentence"), py::arg("dim"), py::arg("seed") = 0);

    m.def(
        "load_embeddings",
        [](const std::string& path) {
            const auto table = seal::labels::parse_embedding_table(path);
            std::vector<std::tuple<std::string, std::string, std::vector<double>>> rows;
            for (const auto& r : table.rows) {
                rows.emplace_back(r.label, r.sentence, r.embedding);
            }
            return rows;
        },
        py::arg("path"), "Rows of (label, sentence, embedding) from a JSON Lines embedding file.");

    m.def(
        "synth_generate",
        [](const std::string& spec_json, const std::string& out_dir) {
            const auto spec = seal::synth::SynthSpec::from_json(nlohmann::json::parse(spec_json));
            const auto result = seal::synth::generate(spec);
            seal::synth::write_output(out_dir, result);
            return result.dataset.size();
        },
        py::arg("spec_json"), py::arg("out_dir"));

    m.def(
        "predict",
        [](const std::string& checkpoint, const std::vector<std::vector<double>>& features) {
            const auto ck = seal::align::load_checkpoint(checkpoint);
            std::vector<std::vector<double>> normalized;
            for (const auto& row : features) {
                normalized.push_back(seal::signal::apply_normalizer(ck.normalizer, seal::dataio::FeatureVector(row)).values);
            }
            const auto pred = seal::align::predict(ck.model, to_matrix(normalized), ck.thresholds);
            std::vector<std::vector<int>> acts(pred.size(), std::vector<int>(pred.num_activities));
            for (std::size_t i = 0; i < pred.size(); ++i) {
                for (std::size_t a = 0; a < pred.num_activities; ++a) {
                    acts[i][a] = pred.has_activity(i, a) ? 1 : 0;
                }
            }
            return std::make_tuple(pred.context, acts, to_rows(pred.scores));
        },
        py::arg("checkpoint"), py::arg("features"),
        "Raw (unnormalized) features -> (context indices, activity 0/1 rows, scores).");

    m.def(
        "gp_posterior",
        [](const std::vector<std::vector<double>>& x, const std::vector<double>& y,
           const std::vector<double>& length_scales, double signal_variance, double noise_variance,
           double prior_mean, const std::vector<double>& query) {
            const auto gp = seal::hyperopt::GpModel::condition(x, y, length_scales, signal_variance, noise_variance,
                                                               prior_mean);
            const auto post = seal::hyperopt::gp_posterior(gp, query);
            return std::make_pair(post.mean, post.variance);
        },
        py::arg("x"), py::arg("y"), py::arg("length_scales"), py::arg("signal_variance"),
        py::arg("noise_variance"), py::arg("prior_mean"), py::arg("query"));

    m.def("expected_improvement", &seal::hyperopt::expected_improvement, py::arg("mean"), py::arg("variance"),
          py::arg("best_observed"));
}
