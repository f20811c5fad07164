#include "vitmri/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace vitmri {

ConfusionMatrix confusion(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                          std::size_t k) {
    if (y_true.size() != y_pred.size())
        throw std::invalid_argument("confusion: label lists differ in length (" +
                                    std::to_string(y_true.size()) + " vs " +
                                    std::to_string(y_pred.size()) + ")");
    ConfusionMatrix cm(k);
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const int t = y_true[i], p = y_pred[i];
        if (t < 0 || static_cast<std::size_t>(t) >= k || p < 0 ||
            static_cast<std::size_t>(p) >= k)
            throw std::invalid_argument("confusion: label out of range at index " +
                                        std::to_string(i));
        ++cm.cell(static_cast<std::size_t>(t), static_cast<std::size_t>(p));
    }
    return cm;
}

std::vector<ClassMetrics> per_class_prf(const ConfusionMatrix& cm) {
    std::vector<ClassMetrics> out(cm.k);
    for (std::size_t c = 0; c < cm.k; ++c) {
        const double diag = static_cast<double>(cm.cell(c, c));
        const std::uint64_t col = cm.col_sum(c);
        const std::uint64_t row = cm.row_sum(c);
        ClassMetrics& m = out[c];
        m.support = row;
        m.precision = col ? diag / static_cast<double>(col) : 0.0;
        m.recall = row ? diag / static_cast<double>(row) : 0.0;
        m.f1 = (m.precision + m.recall > 0.0)
                   ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                   : 0.0;
    }
    return out;
}

MetricsReport aggregates(const ConfusionMatrix& cm) {
    MetricsReport r;
    r.per_class = per_class_prf(cm);
    r.total = cm.total();
    const double n = static_cast<double>(r.total);
    for (const ClassMetrics& m : r.per_class) {
        r.macro_precision += m.precision;
        r.macro_recall += m.recall;
        r.macro_f1 += m.f1;
        const double w = static_cast<double>(m.support);
        r.weighted_precision += w * m.precision;
        r.weighted_recall += w * m.recall;
        r.weighted_f1 += w * m.f1;
    }
    const double k = static_cast<double>(cm.k);
    if (cm.k) {
        r.macro_precision /= k;
        r.macro_recall /= k;
        r.macro_f1 /= k;
    }
    if (r.total) {
        r.weighted_precision /= n;
        r.weighted_recall /= n;
        r.weighted_f1 /= n;
        r.accuracy = static_cast<double>(cm.trace()) / n;
    }
    return r;
}

std::vector<double> row_normalize(const ConfusionMatrix& cm) {
    std::vector<double> out(cm.k * cm.k, 0.0);
    for (std::size_t t = 0; t < cm.k; ++t) {
        const std::uint64_t row = cm.row_sum(t);
        if (!row) continue;
        for (std::size_t p = 0; p < cm.k; ++p)
            out[t * cm.k + p] = static_cast<double>(cm.cell(t, p)) / static_cast<double>(row);
    }
    return out;
}

double round_half_up_4dp(double v) {
    return std::floor(v * 10000.0 + 0.5) / 10000.0;
}

std::string format_4dp(double v) {
    // Half-up in decimal, formatted from the integer to sidestep printf's
    // own rounding.
    const long long scaled = static_cast<long long>(std::floor(v * 10000.0 + 0.5));
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%lld.%04lld", scaled / 10000,
                  scaled < 0 ? -(scaled % 10000) : scaled % 10000);
    return buf;
}

namespace {

void metrics_row(std::ostringstream& os, const std::string& name, double p, double r, double f1,
                 std::uint64_t support, bool skip_pr = false) {
    char buf[160];
    if (skip_pr)
        std::snprintf(buf, sizeof(buf), "%-14s %9s %9s %9s %9llu\n", name.c_str(), "", "",
                      format_4dp(f1).c_str(), static_cast<unsigned long long>(support));
    else
        std::snprintf(buf, sizeof(buf), "%-14s %9s %9s %9s %9llu\n", name.c_str(),
                      format_4dp(p).c_str(), format_4dp(r).c_str(), format_4dp(f1).c_str(),
                      static_cast<unsigned long long>(support));
    os << buf;
}

}  // namespace

std::string metrics_text(const MetricsReport& report, const std::vector<std::string>& names) {
    if (names.size() != report.per_class.size())
        throw std::invalid_argument("metrics_text: name count mismatch");
    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-14s %9s %9s %9s %9s\n", "", "precision", "recall",
                  "f1-score", "support");
    os << buf;
    for (std::size_t c = 0; c < names.size(); ++c) {
        const ClassMetrics& m = report.per_class[c];
        metrics_row(os, names[c], m.precision, m.recall, m.f1, m.support);
    }
    os << '\n';
    metrics_row(os, "accuracy", 0, 0, report.accuracy, report.total, /*skip_pr=*/true);
    metrics_row(os, "macro avg", report.macro_precision, report.macro_recall, report.macro_f1,
                report.total);
    metrics_row(os, "weighted avg", report.weighted_precision, report.weighted_recall,
                report.weighted_f1, report.total);
    return os.str();
}

std::string metrics_csv(const MetricsReport& report, const std::vector<std::string>& names) {
    if (names.size() != report.per_class.size())
        throw std::invalid_argument("metrics_csv: name count mismatch");
    std::ostringstream os;
    os << "class,precision,recall,f1,support\n";
    for (std::size_t c = 0; c < names.size(); ++c) {
        const ClassMetrics& m = report.per_class[c];
        os << names[c] << ',' << format_4dp(m.precision) << ',' << format_4dp(m.recall) << ','
           << format_4dp(m.f1) << ',' << m.support << '\n';
    }
    os << "macro avg," << format_4dp(report.macro_precision) << ','
       << format_4dp(report.macro_recall) << ',' << format_4dp(report.macro_f1) << ','
       << report.total << '\n';
    os << "weighted avg," << format_4dp(report.weighted_precision) << ','
       << format_4dp(report.weighted_recall) << ',' << format_4dp(report.weighted_f1) << ','
       << report.total << '\n';
    os << "accuracy,,," << format_4dp(report.accuracy) << ',' << report.total << '\n';
    return os.str();
}

std::string confusion_csv(const ConfusionMatrix& cm, const std::vector<std::string>& names,
                          bool normalized) {
    if (names.size() != cm.k) throw std::invalid_argument("confusion_csv: name count mismatch");
    std::ostringstream os;
    os << "true\\pred";
    for (const auto& n : names) os << ',' << n;
    os << '\n';
    const std::vector<double> norm = normalized ? row_normalize(cm) : std::vector<double>{};
    for (std::size_t t = 0; t < cm.k; ++t) {
        os << names[t];
        for (std::size_t p = 0; p < cm.k; ++p) {
            if (normalized)
                os << ',' << format_4dp(norm[t * cm.k + p]);
            else
                os << ',' << cm.cell(t, p);
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace vitmri
