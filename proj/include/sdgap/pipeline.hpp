#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdgap/clustering.hpp"
#include "sdgap/core_data.hpp"
#include "sdgap/gap_engine.hpp"
#include "sdgap/gbdt.hpp"
#include "sdgap/metrics.hpp"
#include "sdgap/poi_select.hpp"
#include "sdgap/synth.hpp"

namespace sdgap {

/// How the POI feature columns are chosen.
enum class SelectMethod { Ppce, Gain, Random, None };

/// Accepts "ppce", "gain", "random", "none"; anything else is a ConfigError.
SelectMethod parse_method(const std::string& name);
std::string method_name(SelectMethod m);

/// Everything one pipeline run depends on. Equal config hashes imply equal
/// outputs (timestamps aside).
struct RunConfig {
    // Inputs: either the four files or an in-memory synthetic city.
    bool use_synth = false;
    SynthConfig synth;
    std::string orders_path;
    std::string blocks_path;
    std::string poi_path;
    std::string calendar_path;
    Date start{2016, 3, 1}; // dataset start (file mode)
    int days = 0;           // dataset length in days (file mode)
    bool lenient = false;   // skip malformed order lines instead of failing

    FeatureConfig features; // selected_pois is filled by the selection stage
    int train_days = 0;     // chronological split point; 0 = 3/4 of days

    std::size_t k = 4; // block clusters
    int cluster_max_iter = 300;
    double cluster_tol = 1e-9;
    bool standardize = false;

    SelectMethod method = SelectMethod::Ppce;
    int n_pois = 4;
    bool first_pc_only = false;

    // Learner settings; the seed field is ignored here because the pipeline
    // derives the learner seed from `seed` (and the repeat index).
    BoostParams boost;

    double hit_tolerance = 1.0;
    double shortage_threshold = 1.0;

    // Repeated-trial protocol: run `repeat` times reseeding the learner and
    // any random selection, then average the metrics of the `best` runs
    // ranked by accuracy. Defaults mean a single run.
    int repeat = 1;
    int best = 1;

    std::uint64_t seed = 0;
    std::string out_dir; // empty = compute only, write nothing
};

/// FNV-1a over a canonical serialization of every result-affecting RunConfig
/// field (out_dir is excluded: it moves artifacts, not numbers).
std::string config_hash(const RunConfig& cfg);

/// The parsed inputs a run works from, either generated from cfg.synth or
/// loaded from the four files. `skipped` counts order lines dropped in
/// lenient mode (always 0 otherwise).
struct LoadedInputs {
    std::vector<OrderRecord> orders;
    BlockMap blocks;
    PoiTable poi;
    Calendar calendar;
    std::size_t skipped = 0;
};

LoadedInputs load_inputs(const RunConfig& cfg);

struct PipelineResult {
    EvalReport report; // averaged over the best runs when repeat > 1
    Clustering clustering;
    PoiRanking ranking;        // empty when method = none or n = 0
    std::vector<int> selected; // category indices the final model used
    std::vector<std::string> selected_labels;
    GbdtModel model; // best run's model
    std::string hash;
    std::string method;
    int n_pois = 0;
    std::size_t train_items = 0;
    std::size_t test_items = 0;
    std::vector<std::string> warnings;
};

/// Run ingest -> gap -> profiles -> cluster -> select -> split -> train ->
/// evaluate. When out_dir is set, also write clustering.csv, centroids.csv,
/// ranking.csv (when a ranking exists), model.json, report.json and append a
/// ledger.csv row; a failure removes the files this run already wrote.
/// Stage errors are rethrown with the stage name prefixed.
PipelineResult run_pipeline(const RunConfig& cfg);

/// One pipeline run per (method, n), sharing the master seed and therefore
/// the dataset and split. Per-run artifacts go to out_dir/<method>_n<k>/ and
/// every run appends to out_dir/ledger.csv.
std::vector<PipelineResult> run_sweep(const RunConfig& base,
                                      const std::vector<int>& n_list,
                                      const std::vector<SelectMethod>& methods);

/// The report.json text for a finished run (timestamp injected by callers
/// that want one; empty timestamp omits the field).
std::string pipeline_report_json(const RunConfig& cfg, const PipelineResult& res,
                                 const std::string& timestamp);

/// Shared ledger schema.
std::string ledger_header();
std::string ledger_row(const RunConfig& cfg, const PipelineResult& res);

} // namespace sdgap
