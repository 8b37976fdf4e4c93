#pragma once

#include <vector>

#include "dbg4eth/metrics.hpp"

namespace dbg4eth {

// Shared across both branch trainers.
struct BranchTrainOptions {
    int epochs = 100;
    int patience = 10;
    int batch = 32;
    double lr = 0.01;
    uint64_t seed = 17;
};

struct BranchTrainResult {
    double best_val_f1 = 0.0;
    int epochs_run = 0;
    std::vector<double> epoch_train_loss;
};

namespace detail {

inline double threshold_f1(const std::vector<double>& probs, const std::vector<int>& labels) {
    std::vector<int> pred(probs.size());
    for (size_t i = 0; i < probs.size(); ++i) pred[i] = probs[i] >= 0.5 ? 1 : 0;
    return compute_metrics(pred, labels).f1;
}

}  // namespace detail

}  // namespace dbg4eth
