#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "sdgap/error.hpp"
#include "sdgap/pipeline.hpp"
#include "sdgap/rng.hpp"

using namespace sdgap;

namespace {

void write_text(const std::string& path, const std::string& text) {
    const std::filesystem::path p(path);
    if (p.has_parent_path())
        std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << text;
    if (!out.flush()) throw DataError("failed writing " + path);
}

int resolve_train_days(const RunConfig& cfg, int days) {
    const int t = cfg.train_days > 0 ? cfg.train_days : days * 3 / 4;
    if (t < 1 || t >= days)
        throw ConfigError("train_days = " + std::to_string(t) +
                          " leaves no train/test split over " +
                          std::to_string(days) + " days");
    return t;
}

void add_file_opts(CLI::App* cmd, RunConfig& cfg, std::string& start_str) {
    cmd->add_option("--orders", cfg.orders_path, "orders.tsv")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--blocks-file", cfg.blocks_path, "blocks.tsv")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--poi", cfg.poi_path, "poi.txt")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--calendar", cfg.calendar_path, "calendar.tsv")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--start", start_str, "dataset start date, YYYY-MM-DD")
        ->capture_default_str();
    cmd->add_option("--days", cfg.days, "dataset length in days")->required();
    cmd->add_flag("--lenient", cfg.lenient,
                  "skip malformed order lines instead of failing");
}

void add_cluster_opts(CLI::App* cmd, RunConfig& cfg) {
    cmd->add_option("--k", cfg.k, "number of block clusters")
        ->capture_default_str();
    cmd->add_option("--cluster-max-iter", cfg.cluster_max_iter,
                    "Lloyd iteration cap")
        ->capture_default_str();
    cmd->add_option("--cluster-tol", cfg.cluster_tol,
                    "centroid-shift stopping tolerance")
        ->capture_default_str();
    cmd->add_flag("--standardize", cfg.standardize,
                  "z-score profile columns before clustering");
}

void add_boost_opts(CLI::App* cmd, BoostParams& p) {
    cmd->add_option("--rounds", p.rounds, "boosting rounds")
        ->capture_default_str();
    cmd->add_option("--learning-rate", p.learning_rate, "shrinkage per round")
        ->capture_default_str();
    cmd->add_option("--max-depth", p.max_depth, "tree depth cap")
        ->capture_default_str();
    cmd->add_option("--lambda", p.lambda, "L2 leaf regularization")
        ->capture_default_str();
    cmd->add_option("--gamma", p.gamma, "minimum split gain")
        ->capture_default_str();
    cmd->add_option("--min-child-weight", p.min_child_weight,
                    "minimum hessian sum per child")
        ->capture_default_str();
    cmd->add_option("--subsample", p.subsample, "row subsample fraction")
        ->capture_default_str();
}

void add_metric_opts(CLI::App* cmd, RunConfig& cfg) {
    cmd->add_option("--hit-tolerance", cfg.hit_tolerance,
                    "|pred - gap| ceiling that counts as a hit")
        ->capture_default_str();
    cmd->add_option("--shortage-threshold", cfg.shortage_threshold,
                    "gap level that counts as a shortage")
        ->capture_default_str();
}

void add_select_opts(CLI::App* cmd, std::string& method_str, RunConfig& cfg) {
    cmd->add_option("--method", method_str, "ppce | gain | random | none")
        ->capture_default_str();
    cmd->add_option("--n", cfg.n_pois, "POI categories to keep")
        ->capture_default_str();
    cmd->add_flag("--first-pc-only", cfg.first_pc_only,
                  "rank by the first principal component alone");
}

/// Profiles + k-means of a loaded city over all its days.
Clustering cluster_inputs(const LoadedInputs& in, const GapTensor& gap,
                          const RunConfig& cfg) {
    Matrix profiles = block_profiles(gap, in.calendar);
    if (cfg.standardize) standardize_columns(profiles);
    const Matrix init = kmeans_pp_init(profiles, cfg.k, mix_seed(cfg.seed + 1));
    return kmeans(profiles, init, cfg.cluster_max_iter, cfg.cluster_tol);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"supply-demand gap pipeline: block clustering, PCA-based POI "
                 "selection and boosted-tree gap prediction"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string start_str = "2016-03-01";
    std::string method_str = "ppce";
    std::string out_path;
    std::string out_dir = "out";
    std::string model_path = "model.json";
    std::vector<int> select_ids;
    std::vector<int> n_list;
    std::vector<std::string> method_list{"ppce"};

    // --- synth ---------------------------------------------------------
    auto* synth = app.add_subcommand(
        "synth", "generate a synthetic city with planted ground truth");
    synth->set_config("--config");
    synth->add_option("--out", out_path, "output directory")->required();
    synth->add_option("--blocks", cfg.synth.blocks, "city blocks")
        ->capture_default_str();
    synth->add_option("--days", cfg.synth.days, "days to simulate")
        ->capture_default_str();
    synth->add_option("--categories", cfg.synth.categories, "POI categories")
        ->capture_default_str();
    synth->add_option("--planted", cfg.synth.planted,
                      "influential categories to plant")
        ->capture_default_str();
    synth->add_option("--base-rate", cfg.synth.base_rate,
                      "mean unanswered orders per block-slice")
        ->capture_default_str();
    synth->add_option("--poi-effect", cfg.synth.poi_effect,
                      "demand lift of a fully loaded block")
        ->capture_default_str();
    synth->add_option("--noise", cfg.synth.noise, "lognormal rate noise sigma")
        ->capture_default_str();
    synth->add_option("--holiday-scale", cfg.synth.holiday_scale,
                      "holiday demand multiplier")
        ->capture_default_str();
    synth->add_option("--archetypes", cfg.synth.archetypes,
                      "latent block archetypes (0 = draw 3-5)")
        ->capture_default_str();
    synth->add_option("--seed", cfg.synth.seed, "generator seed")
        ->capture_default_str();
    synth->callback([&] {
        const SynthCity city = generate(cfg.synth);
        write_synth_dataset(out_path, city);
        std::cout << "wrote " << city.orders.size() << " orders over "
                  << city.calendar.days() << " days, " << city.blocks.size()
                  << " blocks, " << city.poi.P() << " POI categories ("
                  << city.truth.archetypes << " archetypes) to " << out_path
                  << "\n";
    });

    // --- ingest --------------------------------------------------------
    auto* ingest =
        app.add_subcommand("ingest", "parse the four inputs and summarize");
    ingest->set_config("--config");
    add_file_opts(ingest, cfg, start_str);
    ingest->callback([&] {
        cfg.start = parse_date(start_str);
        const LoadedInputs in = load_inputs(cfg);
        std::size_t invalid = 0;
        for (const OrderRecord& r : in.orders)
            if (!r.driver_id) ++invalid;
        std::cout << "blocks: " << in.blocks.size() << "\n"
                  << "orders: " << in.orders.size() << " (" << invalid
                  << " unanswered, " << in.skipped << " lines skipped)\n"
                  << "poi categories: " << in.poi.P() << "\n"
                  << "days: " << in.calendar.days() << " ("
                  << in.calendar.count(DayType::Workday) << " workdays, "
                  << in.calendar.count(DayType::Holiday) << " holidays)\n";
    });

    // --- gap -----------------------------------------------------------
    auto* gap_cmd = app.add_subcommand(
        "gap", "compute the gap tensor and write its sparse CSV");
    gap_cmd->set_config("--config");
    add_file_opts(gap_cmd, cfg, start_str);
    gap_cmd->add_option("--out", out_path, "gap CSV path")
        ->default_str("gap.csv");
    gap_cmd->callback([&] {
        cfg.start = parse_date(start_str);
        const LoadedInputs in = load_inputs(cfg);
        const GapTensor gap = compute_gap_tensor(
            in.orders, in.blocks.size(),
            static_cast<std::size_t>(in.calendar.days()), in.calendar.start());
        std::ostringstream csv;
        write_gap_csv(csv, gap);
        if (out_path.empty()) out_path = "gap.csv";
        write_text(out_path, csv.str());
        std::cout << "total gap " << gap.total() << " over " << gap.blocks
                  << " blocks x " << gap.days << " days -> " << out_path
                  << "\n";
    });

    // --- cluster -------------------------------------------------------
    auto* cluster_cmd = app.add_subcommand(
        "cluster", "k-means the 288-dim block gap profiles");
    cluster_cmd->set_config("--config");
    add_file_opts(cluster_cmd, cfg, start_str);
    add_cluster_opts(cluster_cmd, cfg);
    cluster_cmd->add_option("--seed", cfg.seed, "master seed")
        ->capture_default_str();
    cluster_cmd->add_option("--out-dir", out_dir, "artifact directory")
        ->capture_default_str();
    cluster_cmd->callback([&] {
        cfg.start = parse_date(start_str);
        const LoadedInputs in = load_inputs(cfg);
        const GapTensor gap = compute_gap_tensor(
            in.orders, in.blocks.size(),
            static_cast<std::size_t>(in.calendar.days()), in.calendar.start());
        const Clustering clu = cluster_inputs(in, gap, cfg);
        std::filesystem::create_directories(out_dir);
        std::ostringstream a, c;
        write_clustering_csv(a, clu);
        write_centroids_csv(c, clu.centroids);
        write_text(out_dir + "/clustering.csv", a.str());
        write_text(out_dir + "/centroids.csv", c.str());
        std::cout << "k = " << clu.k << ", inertia " << num_str(clu.inertia)
                  << " after " << clu.iterations << " iterations -> "
                  << out_dir << "\n";
    });

    // --- select-poi ----------------------------------------------------
    auto* select_cmd = app.add_subcommand(
        "select-poi", "rank POI categories and keep the top n");
    select_cmd->set_config("--config");
    add_file_opts(select_cmd, cfg, start_str);
    add_cluster_opts(select_cmd, cfg);
    add_boost_opts(select_cmd, cfg.boost);
    add_select_opts(select_cmd, method_str, cfg);
    select_cmd->add_option("--lags", cfg.features.lag_count,
                           "gap lag features for the gain probe")
        ->capture_default_str();
    select_cmd->add_option("--seed", cfg.seed, "master seed")
        ->capture_default_str();
    select_cmd->add_option("--out", out_path, "ranking CSV path")
        ->default_str("ranking.csv");
    select_cmd->callback([&] {
        cfg.start = parse_date(start_str);
        cfg.method = parse_method(method_str);
        if (cfg.method == SelectMethod::None)
            throw ConfigError("method none selects nothing; pick ppce, gain "
                              "or random");
        const LoadedInputs in = load_inputs(cfg);
        const int P = static_cast<int>(in.poi.P());
        if (cfg.n_pois < 0 || cfg.n_pois > P)
            throw ConfigError("--n must lie in [0, " + std::to_string(P) + "]");
        const GapTensor gap = compute_gap_tensor(
            in.orders, in.blocks.size(),
            static_cast<std::size_t>(in.calendar.days()), in.calendar.start());

        PoiRanking ranking;
        if (cfg.method == SelectMethod::Ppce) {
            const Clustering clu = cluster_inputs(in, gap, cfg);
            const Matrix means = cluster_poi_means(clu, in.poi);
            ranking = rank_pois(pca(means), in.poi, cfg.first_pc_only);
        } else if (cfg.method == SelectMethod::Gain) {
            FeatureConfig probe = cfg.features;
            probe.selected_pois.resize(static_cast<std::size_t>(P));
            std::iota(probe.selected_pois.begin(), probe.selected_pois.end(),
                      0);
            const Dataset full =
                build_items(gap, in.poi, in.calendar, probe, 0,
                            in.calendar.days());
            BoostParams bp = cfg.boost;
            bp.seed = mix_seed(cfg.seed + 2);
            ranking = gain_rank(train(full, bp), in.poi);
        } else {
            for (int id :
                 random_select(P, cfg.n_pois, mix_seed(cfg.seed + 3)))
                ranking.entries.push_back({id, 0.0});
        }

        std::ostringstream csv;
        write_ranking_csv(csv, ranking, in.poi, method_name(cfg.method));
        if (out_path.empty()) out_path = "ranking.csv";
        write_text(out_path, csv.str());
        std::cout << "top " << cfg.n_pois << " of " << P << " categories ("
                  << method_name(cfg.method) << "):";
        for (int id : select_top(ranking, cfg.n_pois))
            std::cout << ' '
                      << in.poi.categories[static_cast<std::size_t>(id)];
        std::cout << " -> " << out_path << "\n";
    });

    // --- train ---------------------------------------------------------
    auto* train_cmd = app.add_subcommand(
        "train", "fit the boosted-tree model on the training day range");
    train_cmd->set_config("--config");
    add_file_opts(train_cmd, cfg, start_str);
    add_boost_opts(train_cmd, cfg.boost);
    train_cmd->add_option("--lags", cfg.features.lag_count, "gap lag features")
        ->capture_default_str();
    train_cmd->add_option("--select", select_ids,
                          "POI category indices to use as features");
    train_cmd->add_option("--train-days", cfg.train_days,
                          "training day count (0 = 3/4 of days)")
        ->capture_default_str();
    train_cmd->add_option("--seed", cfg.boost.seed, "learner seed")
        ->capture_default_str();
    train_cmd->add_option("--out", model_path, "model JSON path")
        ->capture_default_str();
    train_cmd->callback([&] {
        cfg.start = parse_date(start_str);
        const LoadedInputs in = load_inputs(cfg);
        const GapTensor gap = compute_gap_tensor(
            in.orders, in.blocks.size(),
            static_cast<std::size_t>(in.calendar.days()), in.calendar.start());
        cfg.features.selected_pois = select_ids;
        const int t = resolve_train_days(cfg, in.calendar.days());
        const Dataset train_ds =
            build_items(gap, in.poi, in.calendar, cfg.features, 0, t);
        const GbdtModel model = train(train_ds, cfg.boost);
        write_text(model_path, model_json(model));
        std::cout << "trained " << model.trees.size() << " trees on "
                  << train_ds.n << " items; final training MSE "
                  << num_str(model.loss_curve.back()) << " -> " << model_path
                  << "\n";
    });

    // --- eval ----------------------------------------------------------
    auto* eval_cmd = app.add_subcommand(
        "eval", "score a saved model on the held-out day range");
    eval_cmd->set_config("--config");
    add_file_opts(eval_cmd, cfg, start_str);
    add_metric_opts(eval_cmd, cfg);
    eval_cmd->add_option("--model", model_path, "model JSON path")
        ->required()
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--lags", cfg.features.lag_count, "gap lag features")
        ->capture_default_str();
    eval_cmd->add_option("--select", select_ids,
                         "POI category indices the model was trained with");
    eval_cmd->add_option("--train-days", cfg.train_days,
                         "training day count (0 = 3/4 of days)")
        ->capture_default_str();
    eval_cmd->add_option("--out", out_path, "report JSON path (optional)");
    eval_cmd->callback([&] {
        cfg.start = parse_date(start_str);
        const LoadedInputs in = load_inputs(cfg);
        const GapTensor gap = compute_gap_tensor(
            in.orders, in.blocks.size(),
            static_cast<std::size_t>(in.calendar.days()), in.calendar.start());
        cfg.features.selected_pois = select_ids;
        const int t = resolve_train_days(cfg, in.calendar.days());
        const Dataset test_ds = build_items(gap, in.poi, in.calendar,
                                            cfg.features, t, in.calendar.days());
        std::ifstream mf(model_path, std::ios::binary);
        const GbdtModel model = load_model(mf);
        const std::vector<double> preds = model.predict_many(test_ds);
        const EvalReport report =
            evaluate(preds, test_ds.targets, cfg.hit_tolerance,
                     cfg.shortage_threshold);
        const std::string json = report_json(report);
        if (!out_path.empty()) write_text(out_path, json + "\n");
        std::cout << json << "\n";
    });

    // --- pipeline ------------------------------------------------------
    auto* pipe_cmd = app.add_subcommand(
        "pipeline", "run ingest -> cluster -> select -> train -> evaluate");
    pipe_cmd->set_config("--config");
    auto* synth_flag = pipe_cmd->add_flag(
        "--synth", cfg.use_synth, "generate the city instead of reading files");
    pipe_cmd->add_option("--orders", cfg.orders_path, "orders.tsv")
        ->excludes(synth_flag);
    pipe_cmd->add_option("--blocks-file", cfg.blocks_path, "blocks.tsv")
        ->excludes(synth_flag);
    pipe_cmd->add_option("--poi", cfg.poi_path, "poi.txt")
        ->excludes(synth_flag);
    pipe_cmd->add_option("--calendar", cfg.calendar_path, "calendar.tsv")
        ->excludes(synth_flag);
    pipe_cmd->add_option("--start", start_str, "dataset start date")
        ->capture_default_str();
    pipe_cmd->add_option("--days", cfg.days,
                         "dataset length in days (synth mode: days simulated)");
    pipe_cmd->add_flag("--lenient", cfg.lenient, "skip malformed order lines");
    pipe_cmd->add_option("--blocks", cfg.synth.blocks, "synth: city blocks")
        ->capture_default_str();
    pipe_cmd->add_option("--categories", cfg.synth.categories,
                         "synth: POI categories")
        ->capture_default_str();
    pipe_cmd->add_option("--planted", cfg.synth.planted,
                         "synth: planted categories")
        ->capture_default_str();
    pipe_cmd->add_option("--base-rate", cfg.synth.base_rate,
                         "synth: demand level")
        ->capture_default_str();
    pipe_cmd->add_option("--poi-effect", cfg.synth.poi_effect,
                         "synth: planted demand lift")
        ->capture_default_str();
    pipe_cmd->add_option("--noise", cfg.synth.noise, "synth: rate noise sigma")
        ->capture_default_str();
    pipe_cmd->add_option("--holiday-scale", cfg.synth.holiday_scale,
                         "synth: holiday multiplier")
        ->capture_default_str();
    pipe_cmd->add_option("--archetypes", cfg.synth.archetypes,
                         "synth: latent archetypes (0 = draw 3-5)")
        ->capture_default_str();
    pipe_cmd->add_option("--lags", cfg.features.lag_count, "gap lag features")
        ->capture_default_str();
    pipe_cmd->add_option("--train-days", cfg.train_days,
                         "training day count (0 = 3/4 of days)")
        ->capture_default_str();
    add_cluster_opts(pipe_cmd, cfg);
    add_select_opts(pipe_cmd, method_str, cfg);
    add_boost_opts(pipe_cmd, cfg.boost);
    add_metric_opts(pipe_cmd, cfg);
    pipe_cmd->add_option("--repeat", cfg.repeat,
                         "independent runs with reseeded learner/selection")
        ->capture_default_str();
    pipe_cmd->add_option("--best", cfg.best,
                         "average the metrics of the best K runs")
        ->capture_default_str();
    pipe_cmd->add_option("--seed", cfg.seed, "master seed")
        ->capture_default_str();
    pipe_cmd->add_option("--out-dir", cfg.out_dir,
                         "artifact directory (empty = print only)");
    pipe_cmd->callback([&] {
        cfg.start = parse_date(start_str);
        cfg.method = parse_method(method_str);
        if (cfg.use_synth) {
            cfg.synth.seed = cfg.seed;
            if (cfg.days > 0) cfg.synth.days = cfg.days;
        } else if (cfg.orders_path.empty() || cfg.blocks_path.empty() ||
                   cfg.poi_path.empty() || cfg.calendar_path.empty()) {
            throw ConfigError(
                "file mode needs --orders, --blocks-file, --poi and "
                "--calendar (or pass --synth)");
        }
        const PipelineResult res = run_pipeline(cfg);
        std::cout << pipeline_report_json(cfg, res, "");
    });

    // --- sweep ---------------------------------------------------------
    auto* sweep_cmd = app.add_subcommand(
        "sweep", "one pipeline run per (method, n) with a shared ledger");
    sweep_cmd->set_config("--config");
    sweep_cmd->add_flag("--synth", cfg.use_synth,
                        "generate the city instead of reading files");
    sweep_cmd->add_option("--orders", cfg.orders_path, "orders.tsv");
    sweep_cmd->add_option("--blocks-file", cfg.blocks_path, "blocks.tsv");
    sweep_cmd->add_option("--poi", cfg.poi_path, "poi.txt");
    sweep_cmd->add_option("--calendar", cfg.calendar_path, "calendar.tsv");
    sweep_cmd->add_option("--start", start_str, "dataset start date")
        ->capture_default_str();
    sweep_cmd->add_option("--days", cfg.days, "dataset length in days");
    sweep_cmd->add_option("--blocks", cfg.synth.blocks, "synth: city blocks")
        ->capture_default_str();
    sweep_cmd->add_option("--categories", cfg.synth.categories,
                          "synth: POI categories")
        ->capture_default_str();
    sweep_cmd->add_option("--planted", cfg.synth.planted,
                          "synth: planted categories")
        ->capture_default_str();
    sweep_cmd->add_option("--lags", cfg.features.lag_count, "gap lag features")
        ->capture_default_str();
    sweep_cmd->add_option("--train-days", cfg.train_days,
                          "training day count (0 = 3/4 of days)")
        ->capture_default_str();
    add_cluster_opts(sweep_cmd, cfg);
    sweep_cmd->add_flag("--first-pc-only", cfg.first_pc_only,
                        "rank by the first principal component alone");
    add_boost_opts(sweep_cmd, cfg.boost);
    add_metric_opts(sweep_cmd, cfg);
    sweep_cmd->add_option("--seed", cfg.seed, "master seed")
        ->capture_default_str();
    sweep_cmd->add_option("--n-list", n_list, "POI counts to sweep")
        ->required();
    sweep_cmd->add_option("--methods", method_list,
                          "selection methods to sweep")
        ->capture_default_str();
    sweep_cmd->add_option("--out-dir", cfg.out_dir,
                          "ledger + per-run artifact directory");
    sweep_cmd->callback([&] {
        cfg.start = parse_date(start_str);
        if (cfg.use_synth) {
            cfg.synth.seed = cfg.seed;
            if (cfg.days > 0) cfg.synth.days = cfg.days;
        } else if (cfg.orders_path.empty() || cfg.blocks_path.empty() ||
                   cfg.poi_path.empty() || cfg.calendar_path.empty()) {
            throw ConfigError(
                "file mode needs --orders, --blocks-file, --poi and "
                "--calendar (or pass --synth)");
        }
        std::vector<SelectMethod> methods;
        for (const std::string& m : method_list)
            methods.push_back(parse_method(m));
        const RunConfig base = cfg;
        const auto results = run_sweep(base, n_list, methods);
        std::cout << ledger_header() << "\n";
        std::size_t i = 0;
        for (const SelectMethod m : methods)
            for (const int n : n_list) {
                RunConfig row = base;
                row.method = m;
                row.n_pois = n;
                std::cout << ledger_row(row, results[i++]) << "\n";
            }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
