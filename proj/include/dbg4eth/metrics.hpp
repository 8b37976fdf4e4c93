#pragma once

#include <vector>

#include "dbg4eth/common.hpp"

namespace dbg4eth {

struct ClassificationMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;
    // Set when no positives were predicted; precision is reported as 0 then.
    bool precision_zero_division = false;
};

inline ClassificationMetrics compute_metrics(const std::vector<int>& predicted,
                                             const std::vector<int>& actual) {
    if (predicted.size() != actual.size())
        throw ValidationError("compute_metrics: prediction/label length mismatch");
    if (predicted.empty()) throw ValidationError("compute_metrics: empty input");
    int tp = 0, fp = 0, fn = 0, tn = 0;
    for (size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i] == 1 && actual[i] == 1) ++tp;
        else if (predicted[i] == 1) ++fp;
        else if (actual[i] == 1) ++fn;
        else ++tn;
    }
    ClassificationMetrics m;
    if (tp + fp == 0) {
        m.precision = 0.0;
        m.precision_zero_division = true;
    } else {
        m.precision = static_cast<double>(tp) / (tp + fp);
    }
    m.recall = (tp + fn) == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn);
    m.f1 = (m.precision + m.recall) == 0.0
               ? 0.0
               : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(predicted.size());
    return m;
}

}  // namespace dbg4eth
