#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vitmri {

// K x K counts; rows are true classes, columns predictions, both in
// ClassLabel order.
struct ConfusionMatrix {
    std::size_t k = 0;
    std::vector<std::uint64_t> cells;  // row-major

    explicit ConfusionMatrix(std::size_t classes = 0) : k(classes), cells(classes * classes, 0) {}

    std::uint64_t& cell(std::size_t t, std::size_t p) { return cells[t * k + p]; }
    std::uint64_t cell(std::size_t t, std::size_t p) const { return cells[t * k + p]; }

    std::uint64_t row_sum(std::size_t t) const {
        std::uint64_t s = 0;
        for (std::size_t p = 0; p < k; ++p) s += cell(t, p);
        return s;
    }
    std::uint64_t col_sum(std::size_t p) const {
        std::uint64_t s = 0;
        for (std::size_t t = 0; t < k; ++t) s += cell(t, p);
        return s;
    }
    std::uint64_t trace() const {
        std::uint64_t s = 0;
        for (std::size_t i = 0; i < k; ++i) s += cell(i, i);
        return s;
    }
    std::uint64_t total() const {
        std::uint64_t s = 0;
        for (auto c : cells) s += c;
        return s;
    }
};

ConfusionMatrix confusion(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                          std::size_t k);

struct ClassMetrics {
    double precision = 0.0;  // diag/col_sum, 0 when the column is empty
    double recall = 0.0;     // diag/row_sum, 0 when the row is empty
    double f1 = 0.0;         // harmonic mean, 0 when both are 0
    std::uint64_t support = 0;
};

std::vector<ClassMetrics> per_class_prf(const ConfusionMatrix& cm);

struct MetricsReport {
    std::vector<ClassMetrics> per_class;
    double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
    double weighted_precision = 0.0, weighted_recall = 0.0, weighted_f1 = 0.0;
    double accuracy = 0.0;
    std::uint64_t total = 0;
};

MetricsReport aggregates(const ConfusionMatrix& cm);

// Rows divided by their sums; zero rows stay zero.
std::vector<double> row_normalize(const ConfusionMatrix& cm);

// Display rounding: 4 decimal places, half-up (0.00005 -> 0.0001).
double round_half_up_4dp(double v);
std::string format_4dp(double v);

// Aligned plain-text report and CSV form; `names` supplies row labels.
std::string metrics_text(const MetricsReport& report, const std::vector<std::string>& names);
std::string metrics_csv(const MetricsReport& report, const std::vector<std::string>& names);
std::string confusion_csv(const ConfusionMatrix& cm, const std::vector<std::string>& names,
                          bool normalized);

}  // namespace vitmri
