#include "seal/metrics.hpp"

#include "seal/csv.hpp"
#include "seal/errors.hpp"

#include <algorithm>
#include <cmath>

namespace seal::metrics {

ConfusionCounts confusion(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth) {
    if (predicted.size() != truth.size()) {
        throw DimensionError("prediction and target lists differ in length");
    }
    ConfusionCounts c;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const bool p = predicted[i] != 0;
        const bool t = truth[i] != 0;
        if (p && t) {
            ++c.tp;
        } else if (p) {
            ++c.fp;
        } else if (t) {
            ++c.fn;
        } else {
            ++c.tn;
        }
    }
    return c;
}

ConfusionCounts confusion(const PredictionSet& predictions, const labels::EncodedTargets& targets,
                          const dataio::LabelSchema& schema, const std::string& label) {
    const auto idx = schema.index_of(label);
    if (!idx) {
        throw ValidationError("unknown label '" + label + "'");
    }
    const std::size_t n = predictions.size();
    if (targets.context.rows() != n || targets.activities.rows() != n) {
        throw DimensionError("predictions and targets are not aligned");
    }
    std::vector<std::uint8_t> pred;
    std::vector<std::uint8_t> truth;
    pred.reserve(n);
    truth.reserve(n);
    if (*idx < schema.num_contexts()) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = targets.context.row(i);
            double labeled = 0.0;
            for (const double v : row) {
                labeled += v;
            }
            if (labeled == 0.0) {
                continue;
            }
            pred.push_back(predictions.context[i] == *idx ? 1 : 0);
            truth.push_back(row[*idx] > 0.5 ? 1 : 0);
        }
    } else {
        const std::size_t a = *idx - schema.num_contexts();
        for (std::size_t i = 0; i < n; ++i) {
            pred.push_back(predictions.has_activity(i, a) ? 1 : 0);
            truth.push_back(targets.activities(i, a) > 0.5 ? 1 : 0);
        }
    }
    return confusion(pred, truth);
}

double mcc(const ConfusionCounts& c) {
    const double tp = static_cast<double>(c.tp);
    const double tn = static_cast<double>(c.tn);
    const double fp = static_cast<double>(c.fp);
    const double fn = static_cast<double>(c.fn);
    const double a = tp + fp;
    const double b = tp + fn;
    const double d = tn + fp;
    const double e = tn + fn;
    if (a == 0.0 || b == 0.0 || d == 0.0 || e == 0.0) {
        return 0.0;
    }
    const double r = (tp * tn - fp * fn) / (std::sqrt(a) * std::sqrt(b) * std::sqrt(d) * std::sqrt(e));
    return std::clamp(r, -1.0, 1.0);
}

double f1(const ConfusionCounts& c) {
    if (c.tp == 0) {
        return 0.0;
    }
    const double tp = static_cast<double>(c.tp);
    const double precision = tp / static_cast<double>(c.tp + c.fp);
    const double recall = tp / static_cast<double>(c.tp + c.fn);
    return 2.0 * precision * recall / (precision + recall);
}

double label_macro_f1(const ConfusionCounts& c) {
    const ConfusionCounts swapped{c.tn, c.fn, c.fp, c.tp};
    return 0.5 * (f1(c) + f1(swapped));
}

const LabelMetrics& MetricsReport::at(const std::string& label) const {
    for (const auto& l : labels) {
        if (l.label == label) {
            return l;
        }
    }
    throw ValidationError("report has no label '" + label + "'");
}

std::string MetricsReport::to_csv() const {
    std::string out = "label,group,mcc,macro_f1\n";
    for (const auto& l : labels) {
        out += csv::join_line({l.label, l.group, csv::format_double(l.mcc), csv::format_double(l.macro_f1)}) + "\n";
    }
    out += "\n# summary\n";
    out += "activity_average,summary," + csv::format_double(activity_mcc) + "," +
           csv::format_double(activity_macro_f1) + "\n";
    out += "context_average,summary," + csv::format_double(context_mcc) + "," + csv::format_double(context_macro_f1) +
           "\n";
    out += "context_accuracy,summary," + csv::format_double(context_accuracy) + ",\n";
    out += "instances,summary," + std::to_string(instances) + ",\n";
    return out;
}

nlohmann::ordered_json MetricsReport::to_json() const {
    nlohmann::ordered_json per_label = nlohmann::ordered_json::array();
    for (const auto& l : labels) {
        per_label.push_back({{"label", l.label},
                             {"group", l.group},
                             {"tp", l.counts.tp},
                             {"fp", l.counts.fp},
                             {"fn", l.counts.fn},
                             {"tn", l.counts.tn},
                             {"mcc", l.mcc},
                             {"macro_f1", l.macro_f1}});
    }
    nlohmann::ordered_json j;
    j["labels"] = per_label;
    j["activity_average"] = {{"mcc", activity_mcc}, {"macro_f1", activity_macro_f1}};
    j["context_average"] = {{"mcc", context_mcc}, {"macro_f1", context_macro_f1}};
    j["context_accuracy"] = context_accuracy;
    j["instances"] = instances;
    return j;
}

void MetricsReport::write(const std::filesystem::path& csv_path, const std::filesystem::path& json_path) const {
    csv::write_text(csv_path, to_csv());
    csv::write_text(json_path, to_json().dump(2) + "\n");
}

MetricsReport report(const PredictionSet& predictions, const labels::EncodedTargets& targets,
                     const dataio::LabelSchema& schema) {
    if (predictions.size() == 0) {
        throw ValidationError("cannot report on an empty evaluation set");
    }
    MetricsReport r;
    r.instances = predictions.size();
    double ctx_mcc = 0.0;
    double ctx_f1 = 0.0;
    double act_mcc = 0.0;
    double act_f1 = 0.0;
    for (const auto& label : schema.all_labels()) {
        LabelMetrics m;
        m.label = label;
        m.group = schema.is_context(label) ? "context" : "activity";
        m.counts = confusion(predictions, targets, schema, label);
        m.mcc = mcc(m.counts);
        m.macro_f1 = label_macro_f1(m.counts);
        if (m.group == "context") {
            ctx_mcc += m.mcc;
            ctx_f1 += m.macro_f1;
        } else {
            act_mcc += m.mcc;
            act_f1 += m.macro_f1;
        }
        r.labels.push_back(std::move(m));
    }
    r.context_mcc = ctx_mcc / static_cast<double>(schema.num_contexts());
    r.context_macro_f1 = ctx_f1 / static_cast<double>(schema.num_contexts());
    r.activity_mcc = act_mcc / static_cast<double>(schema.num_activities());
    r.activity_macro_f1 = act_f1 / static_cast<double>(schema.num_activities());

    std::size_t labeled = 0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const auto row = targets.context.row(i);
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (row[c] > 0.5) {
                ++labeled;
                if (predictions.context[i] == c) {
                    ++correct;
                }
            }
        }
    }
    r.context_accuracy = labeled == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(labeled);
    return r;
}

}  // namespace seal::metrics
