#pragma once

#include <cstdint>

#include "foct/tensor.hpp"

namespace foct {

struct ConfusionCounts {
    long long tp = 0, fp = 0, fn = 0, tn = 0;
    long long total() const { return tp + fp + fn + tn; }
    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
};

struct MetricsReport {
    double precision = 0, recall = 0, f1 = 0, iou = 0;
    bool degenerate = false;  // some score hit a 0/0 and was defined as 0
};

ConfusionCounts confusion(const MaskBatch& pred, const MaskBatch& gt);

MetricsReport report(const ConfusionCounts& c);

}  // namespace foct
