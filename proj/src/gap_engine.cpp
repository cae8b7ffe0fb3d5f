#include "sdgap/gap_engine.hpp"

#include <cmath>
#include <numeric>

#include "json.hpp"

namespace sdgap {

std::int64_t GapTensor::total() const {
    return std::accumulate(cells.begin(), cells.end(), std::int64_t{0});
}

GapTensor compute_gap_tensor(std::span<const OrderRecord> orders,
                             std::size_t blocks, std::size_t days,
                             const Date& dataset_start) {
    if (blocks == 0 || days == 0)
        throw ConfigError("gap tensor needs positive block and day counts");
    GapTensor gap(blocks, days);
    for (const auto& o : orders) {
        if (o.start_block < 0 || static_cast<std::size_t>(o.start_block) >= blocks)
            throw DataError("order " + o.order_id + ": block index " +
                            std::to_string(o.start_block) + " outside [0," +
                            std::to_string(blocks) + ")");
        const TimeSlice ts = slice_of(o.timestamp, dataset_start);
        if (static_cast<std::size_t>(ts.day) >= days)
            throw DataError("order " + o.order_id + ": day " +
                            std::to_string(ts.day) + " outside [0," +
                            std::to_string(days) + ")");
        if (!o.driver_id) ++gap.at(o.start_block, ts.day, ts.slot);
    }
    return gap;
}

void write_gap_csv(std::ostream& out, const GapTensor& gap) {
    out << "block_index,day,slot,gap\n";
    for (std::size_t b = 0; b < gap.blocks; ++b)
        for (std::size_t d = 0; d < gap.days; ++d)
            for (int s = 0; s < kSlotsPerDay; ++s)
                if (const auto v = gap.at(b, d, s); v != 0)
                    out << b << ',' << d << ',' << s << ',' << v << '\n';
}

std::string num_str(double v) {
    // Integral values (the common case: gaps, counts, flags) print without a
    // fractional part; anything else gets the shortest round-trip decimal.
    if (std::abs(v) < 9.007199254740992e15 &&
        v == static_cast<double>(static_cast<std::int64_t>(v)))
        return std::to_string(static_cast<std::int64_t>(v));
    return nlohmann::json(v).dump();
}

Dataset build_items(const GapTensor& gap, const PoiTable& poi, const Calendar& cal,
                    const FeatureConfig& cfg, int d0, int d1,
                    const ExtraSignals* extras) {
    if (cfg.lag_count < 0 || cfg.lag_count > kSlotsPerDay)
        throw ConfigError("lag_count must be in [0,144]");
    if (d0 < 0 || d1 <= d0 || static_cast<std::size_t>(d1) > gap.days)
        throw ConfigError("bad day range [" + std::to_string(d0) + "," +
                          std::to_string(d1) + ")");
    if (gap.days > static_cast<std::size_t>(cal.days()))
        throw DataError("calendar shorter than the gap tensor");
    if (poi.blocks != gap.blocks)
        throw DataError("poi table has " + std::to_string(poi.blocks) +
                        " blocks, gap tensor " + std::to_string(gap.blocks));
    for (int p : cfg.selected_pois)
        if (p < 0 || static_cast<std::size_t>(p) >= poi.P())
            throw DataError("selected poi index " + std::to_string(p) +
                            " outside [0," + std::to_string(poi.P()) + ")");

    const double* weather = nullptr;
    const double* traffic = nullptr;
    const std::size_t need = gap.days * kSlotsPerDay;
    if (extras) {
        if (cfg.include_weather && !extras->weather.empty()) {
            if (extras->weather.size() != need)
                throw DataError("weather signal has " +
                                std::to_string(extras->weather.size()) +
                                " entries, want " + std::to_string(need));
            weather = extras->weather.data();
        }
        if (cfg.include_traffic && !extras->traffic.empty()) {
            if (extras->traffic.size() != need)
                throw DataError("traffic signal has " +
                                std::to_string(extras->traffic.size()) +
                                " entries, want " + std::to_string(need));
            traffic = extras->traffic.data();
        }
    }

    Dataset ds;
    ds.feature_names = {"slot", "dow", "holiday"};
    for (int j = 1; j <= cfg.lag_count; ++j)
        ds.feature_names.push_back("lag_" + std::to_string(j));
    for (int p : cfg.selected_pois)
        ds.feature_names.push_back("poi_" + poi.categories[p]);
    if (weather) ds.feature_names.push_back("weather");
    if (traffic) ds.feature_names.push_back("traffic");
    ds.f = ds.feature_names.size();

    const int range_origin = d0 * kSlotsPerDay;
    const std::size_t slots_per_block =
        static_cast<std::size_t>(d1 - d0) * kSlotsPerDay;
    ds.rows.reserve(gap.blocks * slots_per_block * ds.f);
    ds.targets.reserve(gap.blocks * slots_per_block);
    ds.keys.reserve(gap.blocks * slots_per_block);

    for (std::size_t b = 0; b < gap.blocks; ++b) {
        for (int d = d0; d < d1; ++d) {
            const double dow = cal.weekday_of(d);
            const double holiday = cal.is_holiday(d) ? 1.0 : 0.0;
            for (int s = 0; s < kSlotsPerDay; ++s) {
                const int g = d * kSlotsPerDay + s;
                if (g - cfg.lag_count < range_origin) continue; // window crosses d0
                ds.rows.push_back(s);
                ds.rows.push_back(dow);
                ds.rows.push_back(holiday);
                for (int j = 1; j <= cfg.lag_count; ++j) {
                    const int prev = g - j;
                    ds.rows.push_back(
                        gap.at(b, prev / kSlotsPerDay, prev % kSlotsPerDay));
                }
                for (int p : cfg.selected_pois)
                    ds.rows.push_back(static_cast<double>(poi.at(b, p)));
                if (weather) ds.rows.push_back(weather[g]);
                if (traffic) ds.rows.push_back(traffic[g]);
                ds.targets.push_back(gap.at(b, d, s));
                ds.keys.push_back({static_cast<int>(b), d, s});
            }
        }
    }
    ds.n = ds.targets.size();
    return ds;
}

void write_dataset_csv(std::ostream& out, const Dataset& ds) {
    for (std::size_t j = 0; j < ds.feature_names.size(); ++j)
        out << ds.feature_names[j] << ',';
    out << "target\n";
    for (std::size_t i = 0; i < ds.n; ++i) {
        const auto row = ds.row(i);
        for (double v : row) out << num_str(v) << ',';
        out << num_str(ds.targets[i]) << '\n';
    }
}

} // namespace sdgap
