#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "sdgap/clustering.hpp"
#include "sdgap/error.hpp"
#include "sdgap/gap_engine.hpp"
#include "sdgap/poi_select.hpp"
#include "sdgap/synth.hpp"

using namespace sdgap;

namespace {

std::string orders_text(const SynthCity& c) {
    std::string out;
    for (const OrderRecord& r : c.orders) out += format_order(r, c.blocks) + "\n";
    return out;
}

SynthConfig small_config(std::uint64_t seed) {
    SynthConfig cfg;
    cfg.blocks = 8;
    cfg.days = 3;
    cfg.categories = 12;
    cfg.planted = 3;
    cfg.seed = seed;
    return cfg;
}

} // namespace

TEST_CASE("same seed reproduces every artifact byte for byte") {
    const SynthConfig cfg = small_config(42);
    const SynthCity a = generate(cfg);
    const SynthCity b = generate(cfg);

    CHECK(orders_text(a) == orders_text(b));
    CHECK(a.blocks.format() == b.blocks.format());
    CHECK(format_poi_table(a.poi, a.blocks) == format_poi_table(b.poi, b.blocks));
    CHECK(format_calendar(a.calendar) == format_calendar(b.calendar));
    CHECK(truth_json(a) == truth_json(b));
    CHECK(a.truth == b.truth);

    const SynthCity c = generate(small_config(43));
    CHECK(orders_text(a) != orders_text(c));
}

TEST_CASE("artifacts parse cleanly through the strict readers") {
    SynthConfig cfg = small_config(7);
    cfg.blocks = 6;
    cfg.days = 4;
    const SynthCity city = generate(cfg);

    std::istringstream bl(city.blocks.format());
    const BlockMap blocks = BlockMap::parse(bl);
    REQUIRE(blocks.size() == city.blocks.size());
    for (std::size_t b = 0; b < blocks.size(); ++b)
        CHECK(blocks.hash_of(static_cast<int>(b)) ==
              city.blocks.hash_of(static_cast<int>(b)));

    std::istringstream ord(orders_text(city));
    const OrdersResult parsed = parse_orders(ord, blocks, ParseMode::Strict);
    CHECK(parsed.skipped == 0);
    REQUIRE(parsed.records.size() == city.orders.size());
    CHECK(parsed.records.front().order_id == city.orders.front().order_id);
    CHECK(parsed.records.front().start_block == city.orders.front().start_block);
    CHECK(parsed.records.front().timestamp == city.orders.front().timestamp);
    CHECK(parsed.records.front().driver_id.has_value() ==
          city.orders.front().driver_id.has_value());

    std::istringstream poi_in(format_poi_table(city.poi, blocks));
    CHECK(parse_poi_table(poi_in, blocks) == city.poi);

    std::istringstream cal_in(format_calendar(city.calendar));
    const Calendar cal =
        parse_calendar(cal_in, city.calendar.start(), city.calendar.days());
    CHECK(format_calendar(cal) == format_calendar(city.calendar));
}

TEST_CASE("poi_effect = 0 removes all block dependence from the expected gap") {
    SynthConfig cfg = small_config(5);
    cfg.days = 1;
    cfg.poi_effect = 0.0;
    const SynthCity city = generate(cfg);

    const Matrix& eg = city.truth.expected_gap;
    REQUIRE(eg.rows == static_cast<std::size_t>(cfg.blocks));
    REQUIRE(eg.cols == 2u * kSlotsPerDay);
    for (std::size_t b = 1; b < eg.rows; ++b)
        for (std::size_t c = 0; c < eg.cols; ++c)
            CHECK(eg.at(b, c) == eg.at(0, c));
}

TEST_CASE("holiday columns are the workday columns scaled by holiday_scale") {
    SynthConfig cfg = small_config(11);
    cfg.days = 1;
    const SynthCity city = generate(cfg);
    const Matrix& eg = city.truth.expected_gap;
    for (std::size_t b = 0; b < eg.rows; ++b)
        for (int s = 0; s < kSlotsPerDay; ++s)
            CHECK(eg.at(b, kSlotsPerDay + s) ==
                  eg.at(b, s) * cfg.holiday_scale);
}

TEST_CASE("base_rate = 0 with zero noise yields an empty city") {
    SynthConfig cfg = small_config(1);
    cfg.base_rate = 0.0;
    cfg.noise = 0.0;
    const SynthCity city = generate(cfg);
    CHECK(city.orders.empty());
    for (double v : city.truth.expected_gap.data) CHECK(v == 0.0);
}

TEST_CASE("archetype count resolution") {
    SynthConfig cfg = small_config(2);
    cfg.archetypes = 2;
    const SynthCity two = generate(cfg);
    CHECK(two.truth.archetypes == 2);
    for (int a : two.truth.block_cluster) CHECK(a < 2);

    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const SynthCity city = generate(small_config(seed));
        CHECK(city.truth.archetypes >= 3);
        CHECK(city.truth.archetypes <= 5);
        CHECK(city.truth.block_cluster.size() ==
              static_cast<std::size_t>(city.config.blocks));
    }
}

TEST_CASE("planted archetypes separate the POI vectors in every seed") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SynthConfig cfg; // defaults: 20 blocks, 60 categories, 4 planted
        cfg.seed = seed;
        const SynthCity city = generate(cfg);

        Clustering latent;
        latent.k = static_cast<std::size_t>(city.truth.archetypes);
        latent.assignment = city.truth.block_cluster;
        const auto [within, between] = mean_within_between(latent, city.poi, true);
        CHECK(within < between);
    }
}

TEST_CASE("realized gap profiles converge to the expected means") {
    SynthConfig cfg;
    cfg.blocks = 5;
    cfg.days = 200;
    cfg.seed = 3;
    const SynthCity city = generate(cfg);

    const GapTensor gap =
        compute_gap_tensor(city.orders, static_cast<std::size_t>(cfg.blocks),
                           static_cast<std::size_t>(cfg.days),
                           city.calendar.start());
    const Matrix realized = block_profiles(gap, city.calendar);
    const Matrix& expected = city.truth.expected_gap;
    REQUIRE(realized.rows == expected.rows);
    REQUIRE(realized.cols == expected.cols);

    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < expected.data.size(); ++i) {
        const double d = realized.data[i] - expected.data[i];
        num += d * d;
        den += expected.data[i] * expected.data[i];
    }
    REQUIRE(den > 0.0);
    CHECK(std::sqrt(num / den) < 0.15);
}

TEST_CASE("invalid configs are rejected") {
    SynthConfig cfg = small_config(0);
    cfg.planted = cfg.categories + 1;
    CHECK_THROWS_AS(generate(cfg), ConfigError);

    cfg = small_config(0);
    cfg.blocks = 0;
    CHECK_THROWS_AS(generate(cfg), ConfigError);

    cfg = small_config(0);
    cfg.archetypes = 1;
    CHECK_THROWS_AS(generate(cfg), ConfigError);

    cfg = small_config(0);
    cfg.noise = -0.1;
    CHECK_THROWS_AS(generate(cfg), ConfigError);

    cfg = small_config(0);
    cfg.holiday_scale = -1.0;
    CHECK_THROWS_AS(generate(cfg), ConfigError);
}

TEST_CASE("write_synth_dataset emits the five artifacts") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "sdgap_synth_test";
    fs::remove_all(dir);

    SynthConfig cfg = small_config(9);
    cfg.days = 2;
    const SynthCity city = generate(cfg);
    write_synth_dataset(dir, city);

    for (const char* name :
         {"orders.tsv", "blocks.tsv", "poi.txt", "calendar.tsv", "truth.json"})
        CHECK(fs::exists(dir / name));

    std::ifstream truth_in(dir / "truth.json");
    const nlohmann::json truth = nlohmann::json::parse(truth_in);
    CHECK(truth.at("format") == "sdgap-truth-1");
    CHECK(truth.at("archetypes") == city.truth.archetypes);
    CHECK(truth.at("planted_ids").get<std::vector<int>>() ==
          city.truth.planted_ids);
    CHECK(truth.at("block_cluster").get<std::vector<int>>() ==
          city.truth.block_cluster);
    CHECK(truth.at("config").at("seed") == 9);
    CHECK(truth.at("planted_labels").size() == city.truth.planted_ids.size());

    std::ifstream bl(dir / "blocks.tsv");
    const BlockMap blocks = BlockMap::parse(bl);
    std::ifstream ord(dir / "orders.tsv");
    const OrdersResult parsed = parse_orders(ord, blocks, ParseMode::Strict);
    CHECK(parsed.skipped == 0);
    CHECK(parsed.records.size() == city.orders.size());

    fs::remove_all(dir);
}
