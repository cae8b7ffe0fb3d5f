#include "sdgap/metrics.hpp"

#include <cmath>
#include <sstream>

#include "sdgap/error.hpp"
#include "sdgap/gap_engine.hpp"

namespace sdgap {
namespace {

void check_lengths(std::span<const double> pred, std::span<const double> gap) {
    if (pred.empty()) throw DataError("metrics need at least one item");
    if (pred.size() != gap.size())
        throw DataError("prediction count " + std::to_string(pred.size()) +
                        " does not match gap count " + std::to_string(gap.size()));
}

} // namespace

double mae(std::span<const double> pred, std::span<const double> gap) {
    check_lengths(pred, gap);
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        sum += std::abs(gap[i] - pred[i]);
    return sum / static_cast<double>(pred.size());
}

double rmse(std::span<const double> pred, std::span<const double> gap) {
    check_lengths(pred, gap);
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double r = gap[i] - pred[i];
        sum += r * r;
    }
    return std::sqrt(sum / static_cast<double>(pred.size()));
}

double accuracy(std::span<const double> pred, std::span<const double> gap,
                double hit_tolerance) {
    check_lengths(pred, gap);
    if (hit_tolerance < 0.0) throw ConfigError("hit_tolerance must be >= 0");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (std::abs(pred[i] - gap[i]) <= hit_tolerance) ++hits;
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

F1Result f1(std::span<const double> pred, std::span<const double> gap,
            double shortage_threshold) {
    check_lengths(pred, gap);
    if (shortage_threshold < 0.0)
        throw ConfigError("shortage_threshold must be >= 0");
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] >= shortage_threshold;
        const bool g = gap[i] >= shortage_threshold;
        if (p && g) ++tp;
        else if (p) ++fp;
        else if (g) ++fn;
    }
    F1Result r;
    r.precision = tp + fp == 0 ? 0.0
                               : static_cast<double>(tp) /
                                     static_cast<double>(tp + fp);
    r.recall = tp + fn == 0
                   ? 0.0
                   : static_cast<double>(tp) / static_cast<double>(tp + fn);
    r.f1 = r.precision + r.recall == 0.0
               ? 0.0
               : 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

EvalReport evaluate(std::span<const double> pred, std::span<const double> gap,
                    double hit_tolerance, double shortage_threshold) {
    EvalReport r;
    r.mae = mae(pred, gap);
    r.rmse = rmse(pred, gap);
    r.accuracy = accuracy(pred, gap, hit_tolerance);
    const F1Result f = f1(pred, gap, shortage_threshold);
    r.precision = f.precision;
    r.recall = f.recall;
    r.f1 = f.f1;
    r.n = pred.size();
    r.hit_tolerance = hit_tolerance;
    r.shortage_threshold = shortage_threshold;
    return r;
}

std::string report_json(const EvalReport& r) {
    std::ostringstream out;
    out << "{\"mae\":" << num_str(r.mae) << ",\"rmse\":" << num_str(r.rmse)
        << ",\"accuracy\":" << num_str(r.accuracy)
        << ",\"precision\":" << num_str(r.precision)
        << ",\"recall\":" << num_str(r.recall) << ",\"f1\":" << num_str(r.f1)
        << ",\"n\":" << r.n << ",\"hit_tolerance\":" << num_str(r.hit_tolerance)
        << ",\"shortage_threshold\":" << num_str(r.shortage_threshold) << "}";
    return out.str();
}

std::string report_csv_header() {
    return "mae,rmse,accuracy,precision,recall,f1,n,hit_tolerance,"
           "shortage_threshold";
}

std::string report_csv_row(const EvalReport& r) {
    std::ostringstream out;
    out << num_str(r.mae) << ',' << num_str(r.rmse) << ',' << num_str(r.accuracy)
        << ',' << num_str(r.precision) << ',' << num_str(r.recall) << ','
        << num_str(r.f1) << ',' << r.n << ',' << num_str(r.hit_tolerance) << ','
        << num_str(r.shortage_threshold);
    return out.str();
}

} // namespace sdgap
