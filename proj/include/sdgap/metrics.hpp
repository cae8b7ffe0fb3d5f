#pragma once

#include <ostream>
#include <span>
#include <string>

namespace sdgap {

/// Headline evaluation numbers for one prediction run, together with the two
/// knobs that define "hit" and "shortage" so every report is self-describing.
struct EvalReport {
    double mae = 0.0;
    double rmse = 0.0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t n = 0;
    double hit_tolerance = 1.0;
    double shortage_threshold = 1.0;

    bool operator==(const EvalReport&) const = default;
};

struct F1Result {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

double mae(std::span<const double> pred, std::span<const double> gap);
double rmse(std::span<const double> pred, std::span<const double> gap);

/// Hit rate: a prediction scores iff |pred - gap| <= hit_tolerance.
double accuracy(std::span<const double> pred, std::span<const double> gap,
                double hit_tolerance = 1.0);

/// Binarize both series at value >= shortage_threshold, then score the
/// predicted positives; each undefined ratio (0/0) reports as 0.
F1Result f1(std::span<const double> pred, std::span<const double> gap,
            double shortage_threshold = 1.0);

/// All four metrics at once with the thresholds recorded in the report.
EvalReport evaluate(std::span<const double> pred, std::span<const double> gap,
                    double hit_tolerance = 1.0, double shortage_threshold = 1.0);

/// Flat JSON object with exactly the EvalReport field names.
std::string report_json(const EvalReport& r);

/// One CSV ledger row (with header helper for new ledger files).
std::string report_csv_header();
std::string report_csv_row(const EvalReport& r);

} // namespace sdgap
