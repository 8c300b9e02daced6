#pragma once

#include "seal/matrix.hpp"

#include <cstdint>
#include <vector>

namespace seal {

/// Decisions for a batch of instances: one context per instance (argmax) and a
/// thresholded activity set, plus the raw scores they came from.
struct PredictionSet {
    std::vector<std::size_t> context;   // index into schema contexts
    std::vector<std::uint8_t> activity;  // n x C_act, row-major, 0/1
    std::size_t num_activities = 0;
    Matrix scores;                       // n x C, contexts then activities
    std::vector<double> thresholds;      // per activity, in probability space

    std::size_t size() const { return context.size(); }
    bool has_activity(std::size_t i, std::size_t a) const { return activity[i * num_activities + a] != 0; }
};

}  // namespace seal
