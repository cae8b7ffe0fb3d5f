#include "sdgap/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <utility>

#include "json.hpp"

#include "sdgap/error.hpp"
#include "sdgap/rng.hpp"

namespace fs = std::filesystem;

namespace sdgap {

namespace {

/// Rethrow stage failures with the stage named, so a user knows which part
/// of the pipeline to look at.
template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("stage ") + name + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(std::string("stage ") + name + ": " + e.what());
    }
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    return in;
}

/// Rows with key.day < split_day go to the first dataset, the rest to the
/// second; feature layout and names carry over.
std::pair<Dataset, Dataset> split_by_day(const Dataset& ds, int split_day) {
    Dataset head, tail;
    head.f = tail.f = ds.f;
    head.feature_names = tail.feature_names = ds.feature_names;
    for (std::size_t i = 0; i < ds.n; ++i) {
        Dataset& dst = ds.keys[i].day < split_day ? head : tail;
        const auto row = ds.row(i);
        dst.rows.insert(dst.rows.end(), row.begin(), row.end());
        dst.targets.push_back(ds.targets[i]);
        dst.keys.push_back(ds.keys[i]);
        ++dst.n;
    }
    return {std::move(head), std::move(tail)};
}

std::string now_timestamp() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d %02d:%02d:%02d",
                  tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                  tm.tm_min, tm.tm_sec);
    return buf;
}

struct RunOutcome {
    EvalReport report;
    GbdtModel model;
    PoiRanking ranking;
    std::vector<int> selected;
    std::size_t train_items = 0;
    std::size_t test_items = 0;
};

} // namespace

SelectMethod parse_method(const std::string& name) {
    if (name == "ppce") return SelectMethod::Ppce;
    if (name == "gain") return SelectMethod::Gain;
    if (name == "random") return SelectMethod::Random;
    if (name == "none") return SelectMethod::None;
    throw ConfigError("unknown selection method: " + name);
}

std::string method_name(SelectMethod m) {
    switch (m) {
    case SelectMethod::Ppce: return "ppce";
    case SelectMethod::Gain: return "gain";
    case SelectMethod::Random: return "random";
    case SelectMethod::None: return "none";
    }
    throw ConfigError("unknown selection method value");
}

LoadedInputs load_inputs(const RunConfig& cfg) {
    LoadedInputs in;
    if (cfg.use_synth) {
        SynthCity city = generate(cfg.synth);
        in.orders = std::move(city.orders);
        in.blocks = std::move(city.blocks);
        in.poi = std::move(city.poi);
        in.calendar = std::move(city.calendar);
        return in;
    }
    if (cfg.days < 1)
        throw ConfigError("days must be >= 1 when reading input files");
    auto blocks_in = open_input(cfg.blocks_path);
    in.blocks = BlockMap::parse(blocks_in);
    auto orders_in = open_input(cfg.orders_path);
    OrdersResult parsed = parse_orders(
        orders_in, in.blocks,
        cfg.lenient ? ParseMode::Lenient : ParseMode::Strict);
    in.orders = std::move(parsed.records);
    in.skipped = parsed.skipped;
    auto poi_in = open_input(cfg.poi_path);
    in.poi = parse_poi_table(poi_in, in.blocks);
    auto cal_in = open_input(cfg.calendar_path);
    in.calendar = parse_calendar(cal_in, cfg.start, cfg.days);
    return in;
}

std::string config_hash(const RunConfig& cfg) {
    std::ostringstream s;
    s << "synth=" << cfg.use_synth << ";blocks=" << cfg.synth.blocks
      << ";sdays=" << cfg.synth.days << ";cats=" << cfg.synth.categories
      << ";planted=" << cfg.synth.planted
      << ";base=" << num_str(cfg.synth.base_rate)
      << ";effect=" << num_str(cfg.synth.poi_effect)
      << ";noise=" << num_str(cfg.synth.noise)
      << ";hscale=" << num_str(cfg.synth.holiday_scale)
      << ";sseed=" << cfg.synth.seed << ";arch=" << cfg.synth.archetypes
      << ";orders=" << cfg.orders_path << ";blockf=" << cfg.blocks_path
      << ";poif=" << cfg.poi_path << ";calf=" << cfg.calendar_path
      << ";start=" << format_date(cfg.start) << ";days=" << cfg.days
      << ";lenient=" << cfg.lenient << ";lags=" << cfg.features.lag_count
      << ";weather=" << cfg.features.include_weather
      << ";traffic=" << cfg.features.include_traffic
      << ";tdays=" << cfg.train_days << ";k=" << cfg.k
      << ";citer=" << cfg.cluster_max_iter
      << ";ctol=" << num_str(cfg.cluster_tol) << ";std=" << cfg.standardize
      << ";method=" << method_name(cfg.method) << ";n=" << cfg.n_pois
      << ";firstpc=" << cfg.first_pc_only << ";rounds=" << cfg.boost.rounds
      << ";lr=" << num_str(cfg.boost.learning_rate)
      << ";depth=" << cfg.boost.max_depth
      << ";lambda=" << num_str(cfg.boost.lambda)
      << ";gamma=" << num_str(cfg.boost.gamma)
      << ";mcw=" << num_str(cfg.boost.min_child_weight)
      << ";subsample=" << num_str(cfg.boost.subsample)
      << ";hit=" << num_str(cfg.hit_tolerance)
      << ";shortage=" << num_str(cfg.shortage_threshold)
      << ";repeat=" << cfg.repeat << ";best=" << cfg.best
      << ";seed=" << cfg.seed;
    const std::string text = s.str();
    std::uint64_t h = 14695981039346656037ULL;
    for (const unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(h));
    return buf;
}

PipelineResult run_pipeline(const RunConfig& cfg) {
    if (cfg.repeat < 1) throw ConfigError("repeat must be >= 1");
    if (cfg.best < 1 || cfg.best > cfg.repeat)
        throw ConfigError("best must lie in [1, repeat]");
    if (cfg.n_pois < 0) throw ConfigError("n must be >= 0");

    PipelineResult res;
    res.hash = config_hash(cfg);
    res.method = method_name(cfg.method);

    const LoadedInputs in = stage("ingest", [&] { return load_inputs(cfg); });
    const std::size_t B = in.blocks.size();
    const int days = in.calendar.days();
    const int P = static_cast<int>(in.poi.P());

    const int n = cfg.method == SelectMethod::None ? 0 : cfg.n_pois;
    if (n > P)
        throw ConfigError("stage select: n = " + std::to_string(n) +
                          " exceeds the " + std::to_string(P) +
                          " POI categories");
    res.n_pois = n;

    int train_days = cfg.train_days > 0 ? cfg.train_days : days * 3 / 4;
    train_days = std::max(train_days, 1);
    if (train_days >= days)
        throw ConfigError("train_days = " + std::to_string(train_days) +
                          " leaves no test days out of " +
                          std::to_string(days));

    const GapTensor gap = stage("gap", [&] {
        return compute_gap_tensor(in.orders, B, static_cast<std::size_t>(days),
                                  in.calendar.start());
    });

    // Cluster on the training range only, so nothing downstream of the split
    // has seen a test day.
    res.clustering = stage("cluster", [&] {
        Matrix profiles = block_profiles(gap, in.calendar, 0, train_days);
        if (cfg.standardize) standardize_columns(profiles);
        const Matrix init =
            kmeans_pp_init(profiles, cfg.k, mix_seed(cfg.seed + 1));
        return kmeans(profiles, init, cfg.cluster_max_iter, cfg.cluster_tol);
    });

    // Method-fixed rankings are computed once; random draws are per repeat.
    PoiRanking fixed_ranking;
    std::vector<int> fixed_ids;
    if (n > 0 && cfg.method == SelectMethod::Ppce) {
        stage("select", [&] {
            const Matrix means =
                cluster_poi_means(res.clustering, in.poi, &res.warnings);
            fixed_ranking = rank_pois(pca(means), in.poi, cfg.first_pc_only);
            fixed_ids = select_top(fixed_ranking, n);
            return 0;
        });
    } else if (n > 0 && cfg.method == SelectMethod::Gain) {
        stage("select", [&] {
            FeatureConfig probe = cfg.features;
            probe.selected_pois.resize(static_cast<std::size_t>(P));
            std::iota(probe.selected_pois.begin(), probe.selected_pois.end(), 0);
            const Dataset full =
                build_items(gap, in.poi, in.calendar, probe, 0, days);
            const auto [tr, te] = split_by_day(full, train_days);
            if (tr.n == 0) throw DataError("empty training split");
            BoostParams bp = cfg.boost;
            bp.seed = mix_seed(cfg.seed + 2);
            fixed_ranking = gain_rank(train(tr, bp), in.poi);
            fixed_ids = select_top(fixed_ranking, n);
            return 0;
        });
    }

    std::vector<RunOutcome> runs;
    for (int r = 0; r < cfg.repeat; ++r) {
        RunOutcome run;
        run.ranking = fixed_ranking;
        run.selected = fixed_ids;
        if (n > 0 && cfg.method == SelectMethod::Random) {
            run.selected = random_select(
                P, n, mix_seed(cfg.seed + 3) + static_cast<std::uint64_t>(r));
            for (int id : run.selected)
                run.ranking.entries.push_back({id, 0.0});
        }

        FeatureConfig fc = cfg.features;
        fc.selected_pois = run.selected;
        const Dataset full = stage("dataset", [&] {
            return build_items(gap, in.poi, in.calendar, fc, 0, days);
        });
        auto [tr, te] = split_by_day(full, train_days);
        if (tr.n == 0)
            throw DataError("stage dataset: empty training split");
        if (te.n == 0)
            throw DataError("stage dataset: empty test split");
        run.train_items = tr.n;
        run.test_items = te.n;

        BoostParams bp = cfg.boost;
        bp.seed = mix_seed(cfg.seed + 4) + static_cast<std::uint64_t>(r);
        run.model = stage("train", [&] { return train(tr, bp); });

        stage("evaluate", [&] {
            const std::vector<double> preds = run.model.predict_many(te);
            run.report = evaluate(preds, te.targets, cfg.hit_tolerance,
                                  cfg.shortage_threshold);
            return 0;
        });
        runs.push_back(std::move(run));
    }

    // Rank repeats by accuracy and average the metrics of the best `best`;
    // the reported model/selection is the single best run's.
    std::stable_sort(runs.begin(), runs.end(),
                     [](const RunOutcome& a, const RunOutcome& b) {
                         return a.report.accuracy > b.report.accuracy;
                     });
    res.report = runs.front().report;
    if (cfg.best > 1) {
        double mae = 0, rmse = 0, acc = 0, prec = 0, rec = 0, f1 = 0;
        for (int i = 0; i < cfg.best; ++i) {
            mae += runs[i].report.mae;
            rmse += runs[i].report.rmse;
            acc += runs[i].report.accuracy;
            prec += runs[i].report.precision;
            rec += runs[i].report.recall;
            f1 += runs[i].report.f1;
        }
        const double d = cfg.best;
        res.report.mae = mae / d;
        res.report.rmse = rmse / d;
        res.report.accuracy = acc / d;
        res.report.precision = prec / d;
        res.report.recall = rec / d;
        res.report.f1 = f1 / d;
    }
    res.model = std::move(runs.front().model);
    res.ranking = std::move(runs.front().ranking);
    res.selected = std::move(runs.front().selected);
    res.train_items = runs.front().train_items;
    res.test_items = runs.front().test_items;
    for (int id : res.selected)
        res.selected_labels.push_back(
            in.poi.categories.at(static_cast<std::size_t>(id)));

    if (cfg.out_dir.empty()) return res;

    // Artifacts. Anything this run already wrote is removed on failure, so a
    // crashed run never leaves a half-written report behind.
    const fs::path out(cfg.out_dir);
    std::vector<fs::path> written;
    try {
        fs::create_directories(out);
        const auto emit = [&](const char* name, const std::string& text) {
            const fs::path p = out / name;
            std::ofstream f(p, std::ios::binary);
            if (!f) throw DataError("cannot write " + p.string());
            f << text;
            f.flush();
            if (!f) throw DataError("failed writing " + p.string());
            written.push_back(p);
        };

        std::ostringstream clu;
        write_clustering_csv(clu, res.clustering);
        emit("clustering.csv", clu.str());
        std::ostringstream cen;
        write_centroids_csv(cen, res.clustering.centroids);
        emit("centroids.csv", cen.str());
        if (!res.ranking.entries.empty()) {
            std::ostringstream rank;
            write_ranking_csv(rank, res.ranking, in.poi, res.method);
            emit("ranking.csv", rank.str());
        }
        emit("model.json", model_json(res.model));
        emit("report.json", pipeline_report_json(cfg, res, now_timestamp()));

        const fs::path ledger = out / "ledger.csv";
        const bool fresh = !fs::exists(ledger) || fs::file_size(ledger) == 0;
        std::ofstream lf(ledger, std::ios::binary | std::ios::app);
        if (!lf) throw DataError("cannot write " + ledger.string());
        if (fresh) lf << ledger_header() << '\n';
        lf << ledger_row(cfg, res) << '\n';
    } catch (const std::exception& e) {
        for (const fs::path& p : written) {
            std::error_code ec;
            fs::remove(p, ec);
        }
        throw DataError(std::string("stage write: ") + e.what());
    }
    return res;
}

std::vector<PipelineResult> run_sweep(const RunConfig& base,
                                      const std::vector<int>& n_list,
                                      const std::vector<SelectMethod>& methods) {
    if (n_list.empty()) throw ConfigError("sweep needs at least one n");
    if (methods.empty()) throw ConfigError("sweep needs at least one method");

    std::vector<PipelineResult> results;
    std::ofstream ledger;
    if (!base.out_dir.empty()) {
        fs::create_directories(base.out_dir);
        const fs::path path = fs::path(base.out_dir) / "ledger.csv";
        const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
        ledger.open(path, std::ios::binary | std::ios::app);
        if (!ledger) throw DataError("cannot write " + path.string());
        if (fresh) ledger << ledger_header() << '\n';
    }

    for (const SelectMethod m : methods) {
        for (const int n : n_list) {
            RunConfig cfg = base;
            cfg.method = m;
            cfg.n_pois = n;
            if (!base.out_dir.empty())
                cfg.out_dir = (fs::path(base.out_dir) /
                               (method_name(m) + "_n" + std::to_string(n)))
                                  .string();
            PipelineResult res = run_pipeline(cfg);
            if (ledger.is_open()) ledger << ledger_row(cfg, res) << '\n';
            results.push_back(std::move(res));
        }
    }
    return results;
}

std::string pipeline_report_json(const RunConfig& cfg, const PipelineResult& res,
                                 const std::string& timestamp) {
    nlohmann::json j;
    j["config_hash"] = res.hash;
    j["method"] = res.method;
    j["n_pois"] = res.n_pois;
    j["seed"] = cfg.seed;
    j["selected_labels"] = res.selected_labels;
    j["metrics"] = nlohmann::json::parse(report_json(res.report));
    j["train_items"] = res.train_items;
    j["test_items"] = res.test_items;
    j["warnings"] = res.warnings;
    if (!timestamp.empty()) j["timestamp"] = timestamp;
    return j.dump(2) + "\n";
}

std::string ledger_header() {
    return "config_hash,method,n_pois,seed,k,train_days,repeat,best," +
           report_csv_header();
}

std::string ledger_row(const RunConfig& cfg, const PipelineResult& res) {
    std::ostringstream s;
    s << res.hash << ',' << res.method << ',' << res.n_pois << ',' << cfg.seed
      << ',' << cfg.k << ',' << cfg.train_days << ',' << cfg.repeat << ','
      << cfg.best << ',' << report_csv_row(res.report);
    return s.str();
}

} // namespace sdgap
