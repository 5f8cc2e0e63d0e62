#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lsm {

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t tn = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    double threshold = 0.5;

    std::size_t total() const { return tp + tn + fp + fn; }
};

/// Scores at or above the threshold count as positive predictions.
ConfusionCounts confusion(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

/// A metric is empty when its denominator is zero.
struct Metrics {
    std::optional<double> accuracy;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
};

Metrics metrics(const ConfusionCounts& c);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;  // scores >= threshold are positive; +inf for the origin
};

struct RocCurve {
    std::vector<RocPoint> points;
    double auc = 0.0;
};

/// One point per distinct score, swept from high to low; equal scores move together.
/// Throws ArgumentError unless both classes are present.
RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels);

struct LevelResult {
    std::vector<int> levels;          // 1..4 per input value
    std::vector<double> edges;        // the 25th, 50th and 75th nearest-rank percentiles
    bool degenerate = false;          // fewer than 4 distinct levels used
};

/// Equal-count quartile levels; a value equal to an edge takes the lower level.
/// Throws ArgumentError for fewer than 4 values.
LevelResult quantize_levels(std::span<const double> values);

struct RunStatistics {
    std::vector<double> values;  // sorted ascending
    double mean = 0.0;
    double stddev = 0.0;  // population
    double min = 0.0;
    double max = 0.0;
};

RunStatistics run_statistics(std::vector<double> values);

/// Fixed-point "%.9f"; empty text for a missing value.
std::string fixed(double v);
std::string fixed(const std::optional<double>& v);

void write_roc_csv(std::ostream& out, const RocCurve& roc);
void write_roc_csv(const std::filesystem::path& path, const RocCurve& roc);

}  // namespace lsm
