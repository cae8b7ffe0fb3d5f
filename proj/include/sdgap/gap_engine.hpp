#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sdgap/core_data.hpp"

namespace sdgap {

/// Count of unanswered orders per (block, day, 10-minute slot).
struct GapTensor {
    std::size_t blocks = 0;
    std::size_t days = 0;
    std::vector<std::int32_t> cells; // blocks x days x 144, row-major

    GapTensor() = default;
    GapTensor(std::size_t b, std::size_t d)
        : blocks(b), days(d), cells(b * d * kSlotsPerDay, 0) {}

    std::int32_t at(std::size_t b, std::size_t d, std::size_t s) const {
        return cells[(b * days + d) * kSlotsPerDay + s];
    }
    std::int32_t& at(std::size_t b, std::size_t d, std::size_t s) {
        return cells[(b * days + d) * kSlotsPerDay + s];
    }

    std::int64_t total() const;
};

/// gaps[b][d][s] = number of orders with start_block b, slice (d,s) and no
/// driver. Any order (answered or not) outside [0,D)x[0,144) is a DataError
/// naming the record.
GapTensor compute_gap_tensor(std::span<const OrderRecord> orders,
                             std::size_t blocks, std::size_t days,
                             const Date& dataset_start);

/// CSV `block_index,day,slot,gap`, nonzero cells only, ascending.
void write_gap_csv(std::ostream& out, const GapTensor& gap);

/// Feature recipe for supervised items.
struct FeatureConfig {
    int lag_count = 3;            // preceding-slot gap lags, 0..144
    bool include_weather = false; // pass-through column, used only if provided
    bool include_traffic = false;
    std::vector<int> selected_pois; // category indices into the PoiTable
};

/// Optional city-wide per-slot signals, indexed day*144+slot over the full
/// dataset range. Empty vector = signal absent (the feature is excluded).
struct ExtraSignals {
    std::vector<double> weather;
    std::vector<double> traffic;
};

struct DatasetKey {
    int block = 0;
    int day = 0;
    int slot = 0;

    bool operator==(const DatasetKey&) const = default;
};

/// Supervised items: one row per (block, day, slot) kept.
struct Dataset {
    std::size_t n = 0;
    std::size_t f = 0;
    std::vector<double> rows; // n x f, row-major
    std::vector<double> targets;
    std::vector<std::string> feature_names;
    std::vector<DatasetKey> keys;

    std::span<const double> row(std::size_t i) const {
        return {rows.data() + i * f, f};
    }

    bool operator==(const Dataset&) const = default;
};

/// Build items for days [d0, d1). Feature order per item:
///   slot, day-of-week (0=Mon), holiday flag, lag_1..lag_L, one column per
///   selected POI category, then weather/traffic when enabled and provided.
/// Lags count backwards across day boundaries but never before day d0; items
/// whose lag window would cross are dropped.
Dataset build_items(const GapTensor& gap, const PoiTable& poi, const Calendar& cal,
                    const FeatureConfig& cfg, int d0, int d1,
                    const ExtraSignals* extras = nullptr);

/// CSV with header feature_names + `target`.
void write_dataset_csv(std::ostream& out, const Dataset& ds);

/// Shortest decimal form that parses back to the same double (JSON-style).
std::string num_str(double v);

} // namespace sdgap
