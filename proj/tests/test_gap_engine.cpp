#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "sdgap/gap_engine.hpp"
#include "sdgap/rng.hpp"

using namespace sdgap;

namespace {

const Date kStart{2016, 3, 1};

OrderRecord make_order(int block, int day, int slot, bool answered, int id) {
    OrderRecord r;
    r.order_id = "o" + std::to_string(id);
    if (answered) r.driver_id = "d" + std::to_string(id);
    r.passenger_id = "p" + std::to_string(id);
    r.start_block = block;
    r.price = 5.0;
    r.timestamp.date = add_days(kStart, day);
    r.timestamp.hour = slot / 6;
    r.timestamp.minute = (slot % 6) * 10;
    r.timestamp.second = 0;
    return r;
}

/// Independent recount: walks every cell and every order.
std::int64_t brute_force_cell(std::span<const OrderRecord> orders, int b, int d,
                              int s) {
    std::int64_t n = 0;
    for (const auto& o : orders) {
        if (o.driver_id.has_value() || o.start_block != b) continue;
        const TimeSlice ts = slice_of(o.timestamp, kStart);
        if (ts.day == d && ts.slot == s) ++n;
    }
    return n;
}

std::vector<OrderRecord> random_orders(std::size_t n, int blocks, int days,
                                       std::uint64_t seed) {
    Rng rng(seed);
    std::vector<OrderRecord> orders;
    orders.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        orders.push_back(make_order(static_cast<int>(rng.below(blocks)),
                                    static_cast<int>(rng.below(days)),
                                    static_cast<int>(rng.below(144)),
                                    rng.below(10) < 6, static_cast<int>(i)));
    return orders;
}

PoiTable small_poi(std::size_t blocks, std::size_t P) {
    PoiTable poi;
    for (std::size_t p = 0; p < P; ++p)
        poi.categories.push_back("1#" + std::to_string(p));
    poi.blocks = blocks;
    poi.counts.assign(blocks * P, 0);
    for (std::size_t b = 0; b < blocks; ++b)
        for (std::size_t p = 0; p < P; ++p)
            poi.at(b, p) = static_cast<std::int64_t>(b * 10 + p);
    return poi;
}

Calendar default_cal(int days) {
    std::istringstream empty("");
    return parse_calendar(empty, kStart, days);
}

} // namespace

TEST_CASE("empty order list gives an all-zero tensor") {
    GapTensor gap = compute_gap_tensor({}, 3, 2, kStart);
    CHECK(gap.total() == 0);
    CHECK(gap.cells.size() == 3u * 2u * 144u);
}

TEST_CASE("only unanswered orders count") {
    std::vector<OrderRecord> orders = {
        make_order(1, 0, 80, false, 0),
        make_order(1, 0, 80, false, 1),
        make_order(1, 0, 80, true, 2),
    };
    GapTensor gap = compute_gap_tensor(orders, 2, 1, kStart);
    CHECK(gap.at(1, 0, 80) == 2);
    CHECK(gap.total() == 2);
}

TEST_CASE("gap tensor equals a brute-force recount") {
    auto orders = random_orders(3000, 4, 3, 99);
    GapTensor gap = compute_gap_tensor(orders, 4, 3, kStart);

    std::int64_t invalid = 0;
    for (const auto& o : orders)
        if (!o.driver_id) ++invalid;
    CHECK(gap.total() == invalid); // conservation, exact

    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        const int b = static_cast<int>(rng.below(4));
        const int d = static_cast<int>(rng.below(3));
        const int s = static_cast<int>(rng.below(144));
        CHECK(gap.at(b, d, s) == brute_force_cell(orders, b, d, s));
    }
}

TEST_CASE("orders outside the tensor range are errors naming the record") {
    std::vector<OrderRecord> orders = {make_order(0, 5, 0, false, 7)};
    try {
        compute_gap_tensor(orders, 1, 3, kStart);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("o7") != std::string::npos);
    }
    std::vector<OrderRecord> bad_block = {make_order(4, 0, 0, false, 8)};
    CHECK_THROWS_AS(compute_gap_tensor(bad_block, 2, 3, kStart), DataError);
}

TEST_CASE("tensor for 58 blocks over 24 days has 200,448 cells") {
    GapTensor gap = compute_gap_tensor({}, 58, 24, kStart);
    CHECK(gap.cells.size() == 200448u);
}

TEST_CASE("gap csv lists nonzero cells sorted") {
    std::vector<OrderRecord> orders = {make_order(1, 1, 3, false, 0),
                                       make_order(0, 0, 143, false, 1)};
    GapTensor gap = compute_gap_tensor(orders, 2, 2, kStart);
    std::ostringstream out;
    write_gap_csv(out, gap);
    CHECK(out.str() ==
          "block_index,day,slot,gap\n"
          "0,0,143,1\n"
          "1,1,3,1\n");
}

TEST_CASE("minimal item build: 144 items, three features") {
    GapTensor gap = compute_gap_tensor({}, 1, 1, kStart);
    PoiTable poi = small_poi(1, 2);
    FeatureConfig cfg;
    cfg.lag_count = 0;
    Dataset ds = build_items(gap, poi, default_cal(1), cfg, 0, 1);
    CHECK(ds.n == 144);
    CHECK(ds.f == 3);
    CHECK(ds.feature_names ==
          std::vector<std::string>{"slot", "dow", "holiday"});
}

TEST_CASE("feature count follows the layout") {
    GapTensor gap = compute_gap_tensor({}, 2, 2, kStart);
    PoiTable poi = small_poi(2, 6);
    FeatureConfig cfg;
    cfg.lag_count = 3;
    cfg.selected_pois = {0, 2, 3, 5};
    Dataset ds = build_items(gap, poi, default_cal(2), cfg, 0, 2);
    CHECK(ds.f == 3 + 3 + 4);
    CHECK(ds.feature_names[3] == "lag_1");
    CHECK(ds.feature_names[6] == "poi_1#0");
}

TEST_CASE("items with incomplete lag windows are dropped") {
    GapTensor gap = compute_gap_tensor({}, 1, 2, kStart);
    PoiTable poi = small_poi(1, 1);
    FeatureConfig cfg;
    cfg.lag_count = 3;
    Dataset ds = build_items(gap, poi, default_cal(2), cfg, 0, 2);
    // first 3 slots of day 0 dropped; day 1 lags reach back into day 0
    CHECK(ds.n == 2u * 144u - 3u);
    CHECK(ds.keys.front() == DatasetKey{0, 0, 3});
}

TEST_CASE("58 blocks x 7 days with no lags yields 58,464 items") {
    GapTensor gap = compute_gap_tensor({}, 58, 7, kStart);
    PoiTable poi = small_poi(58, 1);
    FeatureConfig cfg;
    cfg.lag_count = 0;
    Dataset ds = build_items(gap, poi, default_cal(7), cfg, 0, 7);
    CHECK(ds.n == 58464u);
}

TEST_CASE("lag features equal the tensor shifted back") {
    auto orders = random_orders(4000, 3, 4, 11);
    GapTensor gap = compute_gap_tensor(orders, 3, 4, kStart);
    PoiTable poi = small_poi(3, 2);
    FeatureConfig cfg;
    cfg.lag_count = 4;
    cfg.selected_pois = {1};
    Dataset ds = build_items(gap, poi, default_cal(4), cfg, 0, 4);

    Rng rng(17);
    for (int check = 0; check < 100; ++check) {
        const std::size_t i = rng.below(ds.n);
        const DatasetKey k = ds.keys[i];
        auto row = ds.row(i);
        CHECK(row[0] == k.slot);
        CHECK(ds.targets[i] == gap.at(k.block, k.day, k.slot));
        for (int j = 1; j <= cfg.lag_count; ++j) {
            const int g = k.day * 144 + k.slot - j;
            CHECK(row[2 + j] == gap.at(k.block, g / 144, g % 144));
        }
        CHECK(row[3 + cfg.lag_count] == poi.at(k.block, 1));
    }
}

TEST_CASE("calendar features: day of week and holiday flag") {
    GapTensor gap = compute_gap_tensor({}, 1, 7, kStart);
    PoiTable poi = small_poi(1, 1);
    FeatureConfig cfg;
    cfg.lag_count = 0;
    // kStart 2016-03-01 is a Tuesday; days 4,5 are Sat,Sun
    Dataset ds = build_items(gap, poi, default_cal(7), cfg, 0, 7);
    CHECK(ds.row(0)[1] == 1.0);            // Tuesday
    CHECK(ds.row(0)[2] == 0.0);            // workday
    CHECK(ds.row(4 * 144)[1] == 5.0);      // Saturday
    CHECK(ds.row(4 * 144)[2] == 1.0);      // holiday
}

TEST_CASE("identical inputs build bit-identical datasets") {
    auto orders = random_orders(1000, 2, 3, 3);
    GapTensor gap = compute_gap_tensor(orders, 2, 3, kStart);
    PoiTable poi = small_poi(2, 3);
    FeatureConfig cfg;
    cfg.lag_count = 2;
    cfg.selected_pois = {0, 1};
    Dataset a = build_items(gap, poi, default_cal(3), cfg, 0, 3);
    Dataset b = build_items(gap, poi, default_cal(3), cfg, 0, 3);
    CHECK(a == b);
}

TEST_CASE("bad item ranges and configs are errors") {
    GapTensor gap = compute_gap_tensor({}, 1, 2, kStart);
    PoiTable poi = small_poi(1, 1);
    FeatureConfig cfg;
    CHECK_THROWS_AS(build_items(gap, poi, default_cal(2), cfg, 1, 1), ConfigError);
    CHECK_THROWS_AS(build_items(gap, poi, default_cal(2), cfg, 0, 3), ConfigError);
    FeatureConfig bad_poi;
    bad_poi.selected_pois = {5};
    CHECK_THROWS_AS(build_items(gap, poi, default_cal(2), bad_poi, 0, 2), DataError);
    FeatureConfig bad_lag;
    bad_lag.lag_count = 145;
    CHECK_THROWS_AS(build_items(gap, poi, default_cal(2), bad_lag, 0, 2), ConfigError);
}

TEST_CASE("extra signals append columns only when provided") {
    GapTensor gap = compute_gap_tensor({}, 1, 1, kStart);
    PoiTable poi = small_poi(1, 1);
    FeatureConfig cfg;
    cfg.lag_count = 0;
    cfg.include_weather = true;
    cfg.include_traffic = true;

    // flags set but no signals: features excluded
    Dataset no_sig = build_items(gap, poi, default_cal(1), cfg, 0, 1);
    CHECK(no_sig.f == 3);

    ExtraSignals sig;
    sig.weather.assign(144, 0.0);
    for (int s = 0; s < 144; ++s) sig.weather[s] = 20.0 + s;
    Dataset with_sig = build_items(gap, poi, default_cal(1), cfg, 0, 1, &sig);
    CHECK(with_sig.f == 4);
    CHECK(with_sig.feature_names.back() == "weather");
    CHECK(with_sig.row(10)[3] == 30.0);

    sig.traffic.assign(10, 1.0); // wrong length
    CHECK_THROWS_AS(build_items(gap, poi, default_cal(1), cfg, 0, 1, &sig),
                    DataError);
}

TEST_CASE("dataset csv has the header and rows") {
    GapTensor gap = compute_gap_tensor({}, 1, 1, kStart);
    gap.at(0, 0, 0) = 3;
    PoiTable poi = small_poi(1, 1);
    FeatureConfig cfg;
    cfg.lag_count = 0;
    Dataset ds = build_items(gap, poi, default_cal(1), cfg, 0, 1);
    std::ostringstream out;
    write_dataset_csv(out, ds);
    std::istringstream lines(out.str());
    std::string header, first;
    std::getline(lines, header);
    std::getline(lines, first);
    CHECK(header == "slot,dow,holiday,target");
    CHECK(first == "0,1,0,3");
}
