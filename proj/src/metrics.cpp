#include "foct/metrics.hpp"

#include <stdexcept>

namespace foct {

ConfusionCounts confusion(const MaskBatch& pred, const MaskBatch& gt) {
    if (pred.n != gt.n || pred.h != gt.h || pred.w != gt.w)
        throw std::invalid_argument("confusion: mask batch shapes differ");
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const std::uint8_t p = pred.data[i], g = gt.data[i];
        if (p > 1 || g > 1) throw std::invalid_argument("confusion: masks must be binary");
        if (p && g)
            ++c.tp;
        else if (p && !g)
            ++c.fp;
        else if (!p && g)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

namespace {
// 0/0 ratios are defined as 0; the caller learns about it via the flag.
double ratio_or_zero(double num, double den, bool& degenerate) {
    if (den == 0) {
        degenerate = true;
        return 0;
    }
    return num / den;
}
}  // namespace

MetricsReport report(const ConfusionCounts& c) {
    MetricsReport m;
    const double tp = static_cast<double>(c.tp);
    m.precision = ratio_or_zero(tp, tp + c.fp, m.degenerate);
    m.recall = ratio_or_zero(tp, tp + c.fn, m.degenerate);
    m.f1 = ratio_or_zero(2.0 * m.precision * m.recall, m.precision + m.recall, m.degenerate);
    m.iou = ratio_or_zero(tp, tp + c.fp + c.fn, m.degenerate);
    return m;
}

}  // namespace foct
