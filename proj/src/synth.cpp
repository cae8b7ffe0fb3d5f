#include "sdgap/synth.hpp"

#include <algorithm>
#include <cmath>
#include <utility>
#include <fstream>
#include <numeric>

#include "json.hpp"

#include "sdgap/error.hpp"
#include "sdgap/rng.hpp"

namespace sdgap {

namespace {

void check_config(const SynthConfig& cfg) {
    if (cfg.blocks < 1) throw ConfigError("synth: blocks must be >= 1");
    if (cfg.days < 1) throw ConfigError("synth: days must be >= 1");
    if (cfg.categories < 1) throw ConfigError("synth: categories must be >= 1");
    if (cfg.planted < 0 || cfg.planted > cfg.categories)
        throw ConfigError("synth: planted must lie in [0, categories]");
    if (cfg.base_rate < 0.0) throw ConfigError("synth: base_rate must be >= 0");
    if (cfg.poi_effect < 0.0) throw ConfigError("synth: poi_effect must be >= 0");
    if (cfg.noise < 0.0) throw ConfigError("synth: noise must be >= 0");
    if (cfg.holiday_scale < 0.0)
        throw ConfigError("synth: holiday_scale must be >= 0");
    if (cfg.archetypes != 0 && cfg.archetypes < 2)
        throw ConfigError("synth: archetypes must be 0 (auto) or >= 2");
}

std::string padded(char prefix, int value, int width) {
    const std::string digits = std::to_string(value);
    std::string out(1, prefix);
    if (std::cmp_less(digits.size(), width))
        out.append(static_cast<std::size_t>(width) - digits.size(), '0');
    return out + digits;
}

int digits_of(int n) {
    int d = 1;
    while (n >= 10) {
        n /= 10;
        ++d;
    }
    return d;
}

/// Two rush-hour bumps (morning around 08:30, evening around 18:00) over a
/// flat floor, rescaled so the 144-slot mean is exactly 1 and base_rate keeps
/// its meaning of "mean orders per slice".
std::vector<double> day_shape() {
    std::vector<double> shape(kSlotsPerDay);
    for (int s = 0; s < kSlotsPerDay; ++s) {
        const double morning = (s - 51.0) / 7.0;
        const double evening = (s - 108.0) / 8.0;
        shape[s] = 0.35 + 1.3 * std::exp(-morning * morning) +
                   1.5 * std::exp(-evening * evening);
    }
    const double mean =
        std::accumulate(shape.begin(), shape.end(), 0.0) / kSlotsPerDay;
    for (double& v : shape) v /= mean;
    return shape;
}

Calendar default_calendar(int days) {
    const Date start{2016, 3, 1};
    std::vector<DayType> types(days);
    for (int d = 0; d < days; ++d)
        types[d] = weekday(add_days(start, d)) < 5 ? DayType::Workday
                                                   : DayType::Holiday;
    return Calendar(start, std::move(types));
}

} // namespace

SynthCity generate(const SynthConfig& cfg) {
    check_config(cfg);
    Rng rng(cfg.seed);

    const int B = cfg.blocks;
    const int P = cfg.categories;

    SynthCity city;
    city.config = cfg;

    // Latent archetypes: each block belongs to one, round-robin so every
    // archetype is populated as evenly as possible.
    const int A = cfg.archetypes != 0
                      ? cfg.archetypes
                      : 3 + static_cast<int>(rng.below(3));
    city.truth.archetypes = A;
    city.truth.block_cluster.resize(B);
    for (int b = 0; b < B; ++b) city.truth.block_cluster[b] = b % A;

    // Planted categories: a uniform sample without replacement, reported in
    // ascending order.
    std::vector<int> ids(P);
    std::iota(ids.begin(), ids.end(), 0);
    for (int i = 0; i < cfg.planted; ++i) {
        const int j = i + static_cast<int>(rng.below(P - i));
        std::swap(ids[i], ids[j]);
    }
    ids.resize(cfg.planted);
    std::sort(ids.begin(), ids.end());
    city.truth.planted_ids = ids;

    // Archetype levels are far apart (25 .. 130) so planted columns separate
    // the archetypes; a small per-(archetype, category) jitter keeps the
    // columns from being exact multiples of each other.
    std::vector<double> level(A);
    for (int a = 0; a < A; ++a) level[a] = 25.0 + 105.0 * a / (A - 1);
    Matrix jitter(A, std::max(cfg.planted, 1));
    for (int a = 0; a < A; ++a)
        for (int j = 0; j < cfg.planted; ++j)
            jitter.at(a, j) = rng.uniform(0.8, 1.2);

    // Blocks and POI counts. Labels are zero-padded so the lexicographic
    // category order of PoiTable coincides with index order.
    std::vector<std::string> hashes(B);
    for (int b = 0; b < B; ++b) hashes[b] = padded('b', b, 4);
    city.blocks = BlockMap::from_hashes(hashes);

    city.poi.categories.resize(P);
    const int cat_width = digits_of(P - 1);
    for (int j = 0; j < P; ++j)
        city.poi.categories[j] = padded('c', j, cat_width);
    city.poi.blocks = static_cast<std::size_t>(B);
    city.poi.counts.assign(static_cast<std::size_t>(B) * P, 0);

    std::vector<int> planted_pos(P, -1); // category -> rank among planted ids
    for (int j = 0; j < cfg.planted; ++j) planted_pos[ids[j]] = j;

    for (int b = 0; b < B; ++b) {
        const int a = city.truth.block_cluster[b];
        for (int c = 0; c < P; ++c) {
            const int j = planted_pos[c];
            const double mean = j >= 0 ? level[a] * jitter.at(a, j) : 5.0;
            city.poi.at(b, c) = rng.poisson(mean);
        }
    }

    // Normalized planted load per block, computed from the observable counts
    // (not the latent means) so the POI table itself explains the demand.
    std::vector<double> load(B, 0.0);
    double max_sum = 0.0;
    for (int b = 0; b < B; ++b) {
        double sum = 0.0;
        for (int id : ids) sum += static_cast<double>(city.poi.at(b, id));
        load[b] = sum;
        max_sum = std::max(max_sum, sum);
    }
    for (double& v : load)
        v = max_sum > 0.0 ? v / max_sum : 0.0;

    city.calendar = default_calendar(cfg.days);

    const std::vector<double> shape = day_shape();
    city.truth.expected_gap = Matrix(B, 2 * kSlotsPerDay);
    for (int b = 0; b < B; ++b) {
        const double lift = 1.0 + cfg.poi_effect * load[b];
        for (int s = 0; s < kSlotsPerDay; ++s) {
            const double workday = cfg.base_rate * shape[s] * lift;
            city.truth.expected_gap.at(b, s) = workday;
            city.truth.expected_gap.at(b, kSlotsPerDay + s) =
                workday * cfg.holiday_scale;
        }
    }

    // Orders: Poisson counts of unanswered (gap) and answered rides around
    // the same mean, each with its own lognormal rate perturbation.
    int counter = 0;
    const int id_width = 9;
    for (int b = 0; b < B; ++b) {
        for (int d = 0; d < cfg.days; ++d) {
            const int regime = city.calendar.is_holiday(d) ? kSlotsPerDay : 0;
            const Date date = add_days(city.calendar.start(), d);
            for (int s = 0; s < kSlotsPerDay; ++s) {
                const double r = city.truth.expected_gap.at(b, regime + s);
                const std::uint32_t invalid =
                    rng.poisson(r * rng.lognormal_unit(cfg.noise));
                const std::uint32_t valid =
                    rng.poisson(r * rng.lognormal_unit(cfg.noise));
                for (std::uint32_t i = 0; i < invalid + valid; ++i) {
                    ++counter;
                    OrderRecord rec;
                    rec.order_id = padded('o', counter, id_width);
                    if (i >= invalid)
                        rec.driver_id = padded('d', counter, id_width);
                    rec.passenger_id = padded('p', counter, id_width);
                    rec.start_block = b;
                    rec.dest_block = static_cast<int>(rng.below(B));
                    rec.price = rng.uniform(5.0, 50.0);
                    const int offset = static_cast<int>(rng.below(600));
                    rec.timestamp.date = date;
                    rec.timestamp.hour = s / 6;
                    rec.timestamp.minute = (s % 6) * 10 + offset / 60;
                    rec.timestamp.second = offset % 60;
                    city.orders.push_back(std::move(rec));
                }
            }
        }
    }

    return city;
}

std::string truth_json(const SynthCity& city) {
    nlohmann::json j;
    j["format"] = "sdgap-truth-1";
    j["archetypes"] = city.truth.archetypes;
    j["planted_ids"] = city.truth.planted_ids;
    nlohmann::json labels = nlohmann::json::array();
    for (int id : city.truth.planted_ids)
        labels.push_back(city.poi.categories.at(id));
    j["planted_labels"] = std::move(labels);
    j["block_cluster"] = city.truth.block_cluster;
    j["config"] = {
        {"blocks", city.config.blocks},
        {"days", city.config.days},
        {"categories", city.config.categories},
        {"planted", city.config.planted},
        {"base_rate", city.config.base_rate},
        {"poi_effect", city.config.poi_effect},
        {"noise", city.config.noise},
        {"holiday_scale", city.config.holiday_scale},
        {"seed", city.config.seed},
        {"archetypes", city.config.archetypes},
    };
    return j.dump(2) + "\n";
}

void write_synth_dataset(const std::filesystem::path& dir,
                         const SynthCity& city) {
    std::filesystem::create_directories(dir);
    const auto write = [&dir](const char* name, const std::string& text) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw DataError(std::string("cannot write ") + name);
        out << text;
    };

    std::string orders;
    for (const OrderRecord& r : city.orders)
        orders += format_order(r, city.blocks) + "\n";
    write("orders.tsv", orders);
    write("blocks.tsv", city.blocks.format());
    write("poi.txt", format_poi_table(city.poi, city.blocks));
    write("calendar.tsv", format_calendar(city.calendar));
    write("truth.json", truth_json(city));
}

} // namespace sdgap
