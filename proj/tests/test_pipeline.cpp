#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "sdgap/error.hpp"
#include "sdgap/pipeline.hpp"

using namespace sdgap;
namespace fs = std::filesystem;

namespace {

/// A small planted city the whole file reuses: big enough for a real split,
/// small enough to train in milliseconds.
RunConfig small_run(std::uint64_t seed) {
    RunConfig cfg;
    cfg.use_synth = true;
    cfg.synth.blocks = 10;
    cfg.synth.days = 10;
    cfg.synth.categories = 12;
    cfg.synth.planted = 3;
    cfg.synth.seed = seed;
    cfg.k = 3;
    cfg.method = SelectMethod::Ppce;
    cfg.n_pois = 4;
    cfg.boost.rounds = 25;
    cfg.boost.max_depth = 4;
    cfg.seed = seed;
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string without_timestamp(const std::string& text) {
    std::istringstream in(text);
    std::string out, line;
    while (std::getline(in, line))
        if (line.find("\"timestamp\"") == std::string::npos) out += line + "\n";
    return out;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    return lines;
}

} // namespace

TEST_CASE("a run is deterministic and internally consistent") {
    const RunConfig cfg = small_run(5);
    const PipelineResult a = run_pipeline(cfg);
    const PipelineResult b = run_pipeline(cfg);

    CHECK(a.report == b.report);
    CHECK(a.model == b.model);
    CHECK(a.clustering == b.clustering);
    CHECK(a.selected == b.selected);
    CHECK(a.hash == b.hash);
    CHECK(pipeline_report_json(cfg, a, "") == pipeline_report_json(cfg, b, ""));

    CHECK(a.report.n == a.test_items);
    CHECK(a.report.mae >= 0.0);
    CHECK(a.report.accuracy >= 0.0);
    CHECK(a.report.accuracy <= 1.0);
    CHECK(a.selected.size() == 4);
    CHECK(a.selected_labels.size() == 4);
    CHECK(a.method == "ppce");
    // 10 days, auto split at 7: grown from 10 blocks x 144 slots.
    CHECK(a.train_items > a.test_items);
    CHECK(a.train_items + a.test_items <= 10u * 10u * 144u);
}

TEST_CASE("method none trains on temporal features only") {
    RunConfig cfg = small_run(5);
    cfg.method = SelectMethod::None;
    const PipelineResult res = run_pipeline(cfg);

    CHECK(res.n_pois == 0);
    CHECK(res.selected.empty());
    CHECK(res.ranking.entries.empty());
    const std::vector<std::string> expected = {"slot", "dow", "holiday",
                                               "lag_1", "lag_2", "lag_3"};
    CHECK(res.model.feature_names == expected);
}

TEST_CASE("gain selection produces a usable ranking") {
    RunConfig cfg = small_run(5);
    cfg.method = SelectMethod::Gain;
    cfg.n_pois = 2;
    const PipelineResult res = run_pipeline(cfg);
    CHECK(res.selected.size() == 2);
    CHECK(res.ranking.entries.size() == 12);
    CHECK(res.method == "gain");
    int poi_features = 0;
    for (const std::string& name : res.model.feature_names)
        if (name.rfind("poi_", 0) == 0) ++poi_features;
    CHECK(poi_features == 2); // only the kept categories reach the final model
}

TEST_CASE("random selection depends on the master seed") {
    RunConfig a_cfg = small_run(5);
    a_cfg.method = SelectMethod::Random;
    RunConfig b_cfg = a_cfg;
    b_cfg.seed = 6;
    b_cfg.synth.seed = 5; // same city, different selection seed

    const PipelineResult a = run_pipeline(a_cfg);
    const PipelineResult b = run_pipeline(b_cfg);
    CHECK(a.selected.size() == 4);
    CHECK(b.selected.size() == 4);
    CHECK(a.selected != b.selected);
    std::vector<int> sorted = a.selected;
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::unique(sorted.begin(), sorted.end()) == sorted.end());
}

TEST_CASE("repeat/best averages the top runs by accuracy") {
    RunConfig cfg = small_run(7);
    cfg.method = SelectMethod::Random;
    cfg.boost.subsample = 0.8; // make the learner seed matter
    cfg.repeat = 4;
    cfg.best = 2;
    const PipelineResult avg = run_pipeline(cfg);

    cfg.best = 1;
    const PipelineResult top = run_pipeline(cfg);
    CHECK(top.report.accuracy >= avg.report.accuracy);
    CHECK(avg.report.n == avg.test_items);

    cfg.repeat = 1;
    cfg.best = 2;
    CHECK_THROWS_AS(run_pipeline(cfg), ConfigError);
}

TEST_CASE("config hash covers the fields that change results") {
    const RunConfig base = small_run(5);
    CHECK(config_hash(base) == config_hash(base));

    RunConfig other = base;
    other.seed = 99;
    CHECK(config_hash(other) != config_hash(base));
    other = base;
    other.n_pois = 5;
    CHECK(config_hash(other) != config_hash(base));
    other = base;
    other.method = SelectMethod::Gain;
    CHECK(config_hash(other) != config_hash(base));
    other = base;
    other.boost.learning_rate = 0.2;
    CHECK(config_hash(other) != config_hash(base));
    other = base;
    other.out_dir = "elsewhere"; // artifact location is not part of the hash
    CHECK(config_hash(other) == config_hash(base));
}

TEST_CASE("artifacts land on disk and the ledger accumulates") {
    const fs::path dir = fs::temp_directory_path() / "sdgap_pipeline_test";
    fs::remove_all(dir);

    RunConfig cfg = small_run(3);
    cfg.out_dir = dir.string();
    const PipelineResult res = run_pipeline(cfg);

    for (const char* name : {"clustering.csv", "centroids.csv", "ranking.csv",
                             "model.json", "report.json", "ledger.csv"})
        CHECK(fs::exists(dir / name));

    const nlohmann::json report = nlohmann::json::parse(slurp(dir / "report.json"));
    CHECK(report.at("config_hash") == res.hash);
    CHECK(report.at("method") == "ppce");
    CHECK(report.at("n_pois") == 4);
    CHECK(report.at("metrics").at("mae") == res.report.mae);
    CHECK(report.at("metrics").at("n") == res.report.n);
    CHECK(report.contains("timestamp"));
    CHECK(report.at("selected_labels").size() == 4);

    // the saved model reloads to the exact model the run returned
    std::ifstream mf(dir / "model.json");
    CHECK(load_model(mf) == res.model);

    // a rerun appends a second, identical ledger row
    run_pipeline(cfg);
    const auto rows = lines_of(slurp(dir / "ledger.csv"));
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == ledger_header());
    CHECK(rows[1] == rows[2]);
    CHECK(rows[1] == ledger_row(cfg, res));
    CHECK(rows[1].find(res.hash) == 0);

    fs::remove_all(dir);
}

TEST_CASE("reruns are byte-identical modulo the timestamp") {
    const fs::path dir = fs::temp_directory_path() / "sdgap_pipeline_det";
    fs::remove_all(dir);

    RunConfig cfg = small_run(11);
    cfg.out_dir = (dir / "a").string();
    run_pipeline(cfg);
    const std::string a = slurp(dir / "a" / "report.json");
    cfg.out_dir = (dir / "b").string();
    run_pipeline(cfg);
    const std::string b = slurp(dir / "b" / "report.json");

    CHECK(without_timestamp(a) == without_timestamp(b));
    CHECK(without_timestamp(a) != "");

    fs::remove_all(dir);
}

TEST_CASE("sweep writes one ledger row per (method, n)") {
    const fs::path dir = fs::temp_directory_path() / "sdgap_sweep_test";
    fs::remove_all(dir);

    RunConfig base = small_run(2);
    base.out_dir = dir.string();
    const auto results = run_sweep(base, {0, 2},
                                   {SelectMethod::Ppce, SelectMethod::Random});
    REQUIRE(results.size() == 4);
    CHECK(results[0].n_pois == 0);
    CHECK(results[1].n_pois == 2);
    CHECK(results[0].method == "ppce");
    CHECK(results[2].method == "random");

    const auto rows = lines_of(slurp(dir / "ledger.csv"));
    REQUIRE(rows.size() == 5);
    CHECK(rows[0] == ledger_header());
    for (std::size_t i = 1; i < rows.size(); ++i)
        CHECK(rows[i].find(results[i - 1].hash) == 0);
    CHECK(fs::exists(dir / "ppce_n0" / "report.json"));
    CHECK(fs::exists(dir / "random_n2" / "model.json"));

    // n = 0 baselines coincide regardless of method
    CHECK(results[0].report == results[2].report);

    fs::remove_all(dir);
}

TEST_CASE("stage errors carry the stage name") {
    RunConfig cfg = small_run(1);
    cfg.use_synth = false;
    cfg.orders_path = "/nonexistent/orders.tsv";
    cfg.blocks_path = "/nonexistent/blocks.tsv";
    cfg.poi_path = "/nonexistent/poi.txt";
    cfg.calendar_path = "/nonexistent/calendar.tsv";
    cfg.days = 10;
    CHECK_THROWS_WITH_AS(run_pipeline(cfg),
                         doctest::Contains("stage ingest"), DataError);

    cfg = small_run(1);
    cfg.train_days = 10; // as long as the dataset
    CHECK_THROWS_AS(run_pipeline(cfg), ConfigError);

    cfg = small_run(1);
    cfg.n_pois = 13; // only 12 categories
    CHECK_THROWS_AS(run_pipeline(cfg), ConfigError);

    CHECK_THROWS_AS(parse_method("zzz"), ConfigError);
    CHECK(parse_method("ppce") == SelectMethod::Ppce);
    CHECK(parse_method("gain") == SelectMethod::Gain);
    CHECK(parse_method("random") == SelectMethod::Random);
    CHECK(parse_method("none") == SelectMethod::None);
    CHECK(method_name(SelectMethod::None) == "none");
}

TEST_CASE("file mode reproduces the in-memory synth run") {
    const fs::path dir = fs::temp_directory_path() / "sdgap_file_mode";
    fs::remove_all(dir);

    RunConfig cfg = small_run(9);
    write_synth_dataset(dir, generate(cfg.synth));

    RunConfig file_cfg = cfg;
    file_cfg.use_synth = false;
    file_cfg.orders_path = (dir / "orders.tsv").string();
    file_cfg.blocks_path = (dir / "blocks.tsv").string();
    file_cfg.poi_path = (dir / "poi.txt").string();
    file_cfg.calendar_path = (dir / "calendar.tsv").string();
    file_cfg.days = cfg.synth.days;

    const PipelineResult mem = run_pipeline(cfg);
    const PipelineResult file = run_pipeline(file_cfg);
    CHECK(file.report == mem.report);
    CHECK(file.selected == mem.selected);
    CHECK(file.clustering.assignment == mem.clustering.assignment);
    CHECK(file.model == mem.model);

    fs::remove_all(dir);
}
