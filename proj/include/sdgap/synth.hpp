#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sdgap/core_data.hpp"
#include "sdgap/matrix.hpp"

namespace sdgap {

struct SynthConfig {
    int blocks = 20;
    int days = 14;
    int categories = 60;
    int planted = 4; // influential categories with archetype-tied counts
    double base_rate = 2.0; // mean invalid orders per (block, slice)
    double poi_effect = 0.5;
    double noise = 0.2;         // lognormal sigma on per-cell rates
    double holiday_scale = 0.6; // demand multiplier on holidays
    std::uint64_t seed = 0;
    // 0 = draw 3-5 archetypes from the seed; otherwise the exact count (>= 2).
    int archetypes = 0;

    bool operator==(const SynthConfig&) const = default;
};

struct GroundTruth {
    std::vector<int> planted_ids;   // ascending category indices
    std::vector<int> block_cluster; // latent archetype per block
    int archetypes = 0;             // resolved archetype count
    // B x 288 generative means, same layout as the block profiles:
    // 144 workday slots then 144 holiday slots.
    Matrix expected_gap;

    bool operator==(const GroundTruth&) const = default;
};

/// A fully materialized synthetic city.
struct SynthCity {
    std::vector<OrderRecord> orders;
    BlockMap blocks;
    PoiTable poi;
    Calendar calendar;
    GroundTruth truth;
    SynthConfig config; // echo of the request
};

/// Deterministic generator: same config (seed included) reproduces the city
/// byte for byte. Blocks belong to latent archetypes whose planted-POI
/// levels are well separated; invalid-order counts are Poisson draws around
/// base_rate x rush-hour shape x (1 + poi_effect x planted load) x holiday
/// scale, with unit-mean lognormal rate noise.
SynthCity generate(const SynthConfig& cfg);

/// Write orders.tsv, blocks.tsv, poi.txt, calendar.tsv and truth.json.
void write_synth_dataset(const std::filesystem::path& dir, const SynthCity& city);

/// The truth.json payload (planted ids, archetypes, config echo).
std::string truth_json(const SynthCity& city);

} // namespace sdgap
