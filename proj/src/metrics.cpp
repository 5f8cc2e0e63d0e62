#include "lsm/metrics.hpp"

#include "lsm/error.hpp"
#include "lsm/log.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>

namespace lsm {

ConfusionCounts confusion(std::span<const double> scores, std::span<const int> labels, double threshold) {
    if (scores.size() != labels.size()) throw ArgumentError("confusion: score and label counts differ");
    ConfusionCounts c;
    c.threshold = threshold;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] >= threshold;
        if (labels[i] == 1) (pred ? c.tp : c.fn) += 1;
        else (pred ? c.fp : c.tn) += 1;
    }
    return c;
}

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

Metrics metrics(const ConfusionCounts& c) {
    Metrics m;
    m.accuracy = ratio(c.tp + c.tn, c.total());
    m.precision = ratio(c.tp, c.tp + c.fp);
    m.recall = ratio(c.tp, c.tp + c.fn);
    m.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
    return m;
}

RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw ArgumentError("roc: score and label counts differ");
    std::size_t pos = 0;
    for (const int l : labels) pos += l == 1 ? 1u : 0u;
    const std::size_t neg = labels.size() - pos;
    if (pos == 0 || neg == 0) throw ArgumentError("roc: both classes must be present");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve roc;
    roc.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    std::size_t tp = 0;
    std::size_t fp = 0;
    double area = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        const double s = scores[order[i]];
        const std::size_t tp0 = tp;
        const std::size_t fp0 = fp;
        for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] == 1 ? tp : fp) += 1;
        area += static_cast<double>(fp - fp0) * static_cast<double>(tp + tp0) * 0.5;
        roc.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                              static_cast<double>(tp) / static_cast<double>(pos), s});
    }
    roc.auc = area / (static_cast<double>(pos) * static_cast<double>(neg));
    return roc;
}

LevelResult quantize_levels(std::span<const double> values) {
    if (values.size() < 4) throw ArgumentError("quantize_levels: need at least 4 values, got " + std::to_string(values.size()));
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    LevelResult r;
    for (const std::size_t p : {25u, 50u, 75u}) {
        const std::size_t rank = (p * n + 99) / 100;  // ceil(p n / 100)
        r.edges.push_back(sorted[std::max<std::size_t>(rank, 1) - 1]);
    }
    std::array<std::size_t, 4> counts{};
    r.levels.reserve(n);
    for (const double v : values) {
        int level = 1;
        for (const double e : r.edges) level += v > e ? 1 : 0;
        r.levels.push_back(level);
        ++counts[static_cast<std::size_t>(level - 1)];
    }
    r.degenerate = std::any_of(counts.begin(), counts.end(), [](std::size_t c) { return c == 0; });
    if (r.degenerate) log_warning("susceptibility levels are degenerate: tied values leave a level empty");
    return r;
}

RunStatistics run_statistics(std::vector<double> values) {
    if (values.empty()) throw ArgumentError("run_statistics: no values");
    std::sort(values.begin(), values.end());
    RunStatistics s;
    double sum = 0.0;
    for (const double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (const double v : values) sq += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(sq / static_cast<double>(values.size()));
    s.min = values.front();
    s.max = values.back();
    s.values = std::move(values);
    return s;
}

std::string fixed(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9f", v);
    return buf;
}

std::string fixed(const std::optional<double>& v) { return v ? fixed(*v) : std::string(); }

void write_roc_csv(std::ostream& out, const RocCurve& roc) {
    out << "fpr,tpr,threshold\n";
    for (const auto& p : roc.points) out << fixed(p.fpr) << ',' << fixed(p.tpr) << ',' << fixed(p.threshold) << '\n';
}

void write_roc_csv(const std::filesystem::path& path, const RocCurve& roc) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    write_roc_csv(out, roc);
}

}  // namespace lsm
