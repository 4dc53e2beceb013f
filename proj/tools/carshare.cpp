#include <carshare/clustering.hpp>
#include <carshare/digest.hpp>
#include <carshare/features.hpp>
#include <carshare/forecasting.hpp>
#include <carshare/grid.hpp>
#include <carshare/ingest.hpp>
#include <carshare/joincount.hpp>
#include <carshare/lasso.hpp>
#include <carshare/placement.hpp>
#include <carshare/synth.hpp>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace carshare;
using nlohmann::json;

namespace {

constexpr std::string_view kVersion = "1.0.0";
constexpr std::string_view kOutputDirEnv = "CARSHARE_OUTPUT_DIR";

struct Globals {
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    std::string timezone = "UTC";
    std::string city = "city";
};

/// Bookkeeping for one subcommand run; becomes <name>.manifest.json.
class Run {
public:
    Run(std::string name, const Globals& g, json options)
        : name_(std::move(name)), globals_(g), dir_(g.output_dir), options_(std::move(options)) {}

    const fs::path& dir() const { return dir_; }

    fs::path input(const std::string& path) {
        if (path.empty() || !fs::is_regular_file(path)) {
            throw InputError(fmt::format("missing input file: {}", path.empty() ? "<unset>" : path));
        }
        inputs_.push_back(path);
        return path;
    }

    template <typename Fn>
    void write(const std::string& name, Fn&& fn) {
        fs::create_directories(dir_);
        const fs::path path = dir_ / name;
        {
            std::ofstream out(path, std::ios::binary);
            if (!out) throw Error(fmt::format("cannot write {}", path.string()));
            fn(out);
            if (!out) throw Error(fmt::format("write failed: {}", path.string()));
        }
        outputs_.push_back(name);
    }

    void write_json(const std::string& name, const json& doc) {
        write(name, [&](std::ostream& out) { out << doc.dump(2) << '\n'; });
    }

    void warn(const std::string& message) { std::cerr << "warning: " << message << '\n'; }

    void finish() {
        json inputs = json::array();
        for (const auto& p : inputs_) inputs.push_back({{"path", p}, {"sha256", sha256_file(p)}});
        json outputs = json::array();
        for (const auto& name : outputs_) {
            const fs::path p = dir_ / name;
            outputs.push_back({{"path", name}, {"sha256", sha256_file(p)}, {"bytes", fs::file_size(p)}});
        }
        json doc = {{"subcommand", name_},
                    {"options", options_},
                    {"config_hash", sha256_hex(options_.dump())},
                    {"seed", globals_.seed},
                    {"inputs", inputs},
                    {"outputs", outputs},
                    {"versions", versions()}};
        std::ofstream out(dir_ / (name_ + ".manifest.json"), std::ios::binary);
        out << doc.dump(2) << '\n';
    }

    static json versions() {
        return {{"carshare", kVersion},
                {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
                {"fmt", FMT_VERSION},
                {"nlohmann_json", fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR, NLOHMANN_JSON_VERSION_MINOR,
                                              NLOHMANN_JSON_VERSION_PATCH)}};
    }

private:
    std::string name_;
    Globals globals_;
    fs::path dir_;
    json options_;
    std::vector<std::string> inputs_;
    std::vector<std::string> outputs_;
};

/// Parsed option values of a subcommand, for the manifest.
json describe(const CLI::App& app, const Globals& g) {
    json doc = {{"seed", g.seed}, {"timezone", g.timezone}, {"city", g.city}};
    for (const CLI::Option* opt : app.get_options()) {
        if (opt->get_name() == "--help" || opt->get_name().empty()) continue;
        const auto& results = opt->results();
        if (results.size() == 1) {
            doc[opt->get_name()] = results.front();
        } else {
            doc[opt->get_name()] = results;
        }
    }
    return doc;
}

TimeZone zone(const Globals& g) {
    try {
        return TimeZone::from_spec(g.timezone);
    } catch (const Error& e) {
        throw InputError(e.what());
    }
}

Grid load_grid(Run& run, const std::string& grid_path, const std::string& area_path, double cell_side,
               const std::string& city) {
    if (!grid_path.empty()) {
        std::ifstream in(run.input(grid_path));
        json doc;
        try {
            doc = json::parse(in);
        } catch (const json::exception& e) {
            throw InputError(fmt::format("{}: {}", grid_path, e.what()));
        }
        return grid_from_geojson(doc);
    }
    if (area_path.empty()) {
        throw InputError("either --grid or --area is required");
    }
    return build_grid(load_operation_area(run.input(area_path), city), cell_side);
}

SnapshotSet load_snapshots(Run& run, const std::string& path, const std::string& mapping_path,
                           const std::string& format) {
    const FieldMapping mapping = mapping_path.empty() ? FieldMapping{} : FieldMapping::load(run.input(mapping_path));
    const InputFormat fmt = format == "ndjson" ? InputFormat::ndjson
                            : format == "csv"  ? InputFormat::csv
                                               : InputFormat::automatic;
    return parse_snapshots_file(run.input(path), mapping, fmt);
}

json area_geojson(const OperationArea& area) {
    return {{"type", "FeatureCollection"},
            {"features",
             json::array({{{"type", "Feature"},
                           {"properties", {{"city", area.city()}}},
                           {"geometry", ring_to_geojson_geometry(area.ring())}}})}};
}

std::size_t observation_days(const SnapshotSet& s, const TimeZone& tz) {
    const auto polls = s.poll_instants();
    if (polls.empty()) return 0;
    auto day = [&](Timestamp t) { return std::chrono::floor<std::chrono::days>(tz.to_local(t)).time_since_epoch().count(); };
    return static_cast<std::size_t>(day(polls.back()) - day(polls.front()) + 1);
}

CellId parse_cell(const std::string& text) {
    const auto comma = text.find(',');
    try {
        if (comma == std::string::npos) throw std::invalid_argument(text);
        return {std::stoi(text.substr(0, comma)), std::stoi(text.substr(comma + 1))};
    } catch (const std::exception&) {
        throw InvalidArgument(fmt::format("cell must be given as ROW,COL, got '{}'", text));
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Free-floating car sharing analysis toolkit"};
    app.set_version_flag("--version", std::string(kVersion));
    app.set_config("--config", "", "INI/TOML file with option values");
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
    app.add_option("-o,--output-dir", g.output_dir, "Output directory (env CARSHARE_OUTPUT_DIR)")
        ->capture_default_str();
    app.add_option("--tz", g.timezone, "City time zone: UTC, +HH:MM or an IANA name")->capture_default_str();
    app.add_option("--city", g.city, "City name")->capture_default_str();
    app.fallthrough();

    std::function<void()> action;
    auto command = [&](const std::string& name, const std::string& help) { return app.add_subcommand(name, help); };

    // ingest
    std::string snapshots_path, area_path, mapping_path, input_format = "auto";
    {
        auto* sub = command("ingest", "Parse and clean raw snapshots");
        sub->add_option("--snapshots", snapshots_path, "NDJSON or CSV snapshot feed")->required();
        sub->add_option("--area", area_path, "Operation area GeoJSON")->required();
        sub->add_option("--mapping", mapping_path, "Field mapping file");
        sub->add_option("--format", input_format, "auto, ndjson or csv")
            ->check(CLI::IsMember({"auto", "ndjson", "csv"}))
            ->capture_default_str();
        sub->final_callback([&, sub] {
            action = [&] {
                Run run("ingest", g, describe(*sub, g));
                SnapshotSet raw = load_snapshots(run, snapshots_path, mapping_path, input_format);
                const OperationArea area = load_operation_area(run.input(area_path), g.city);
                SnapshotSet cleaned = clean(raw, area);
                run.write("snapshots_clean.csv", [&](std::ostream& out) { write_snapshots_csv(out, cleaned); });
                run.write_json("discard_report.json", cleaned.report.to_json());
                run.finish();
            };
        });
    }

    // trips
    int min_gap = 10, poll_minutes = 1;
    double jitter_m = 30.0, cell_side = 500.0;
    {
        auto* sub = command("trips", "Infer trips from snapshots");
        sub->add_option("--snapshots", snapshots_path, "Snapshot feed")->required();
        sub->add_option("--area", area_path, "Operation area; when given, records are cleaned first");
        sub->add_option("--mapping", mapping_path, "Field mapping file");
        sub->add_option("--format", input_format, "auto, ndjson or csv")
            ->check(CLI::IsMember({"auto", "ndjson", "csv"}));
        sub->add_option("--min-gap", min_gap, "Minimum unavailability in minutes")->capture_default_str();
        sub->add_option("--jitter", jitter_m, "GPS jitter radius in metres")->capture_default_str();
        sub->add_option("--poll-minutes", poll_minutes, "Polling interval")->capture_default_str();
        sub->add_option("--cell-side", cell_side, "Cell side in metres for per-cell utilisation")
            ->capture_default_str();
        sub->final_callback([&, sub] {
            action = [&] {
                Run run("trips", g, describe(*sub, g));
                const TimeZone tz = zone(g);
                SnapshotSet snaps = load_snapshots(run, snapshots_path, mapping_path, input_format);
                std::optional<OperationArea> area;
                if (!area_path.empty()) {
                    area = load_operation_area(run.input(area_path), g.city);
                    snaps = clean(snaps, *area);
                }
                TripInferenceOptions opts;
                opts.min_gap = std::chrono::minutes(min_gap);
                opts.jitter_radius_m = jitter_m;
                opts.poll_interval = std::chrono::minutes(poll_minutes);
                const TripSet trips = infer_trips(snaps, opts);
                run.write("trips.csv", [&](std::ostream& out) { write_trips_csv(out, trips); });
                const auto days = observation_days(snaps, tz);
                const auto fleet = snaps.vins().size();
                json util = {{"trips", trips.trips.size()},
                             {"fleet_size", fleet},
                             {"observation_days", days},
                             {"short_gaps", trips.short_gaps},
                             {"jitter_gaps", trips.jitter_gaps}};
                if (fleet > 0 && days > 0) {
                    util["trips_per_vehicle_day"] = utilisation_rate(trips, fleet, static_cast<double>(days));
                }
                run.write_json("utilisation.json", util);
                run.write_json("discard_report.json", trips.report.to_json());
                if (area && fleet > 0 && days > 0) {
                    const Grid grid = build_grid(*area, cell_side);
                    const auto rows = utilisation_by_cell(trips, grid, fleet, static_cast<double>(days));
                    run.write("utilisation_cells.csv", [&](std::ostream& out) {
                        out << "row,col,trips,vehicles_seen,per_vehicle_seen,per_fleet_vehicle\n";
                        for (const auto& r : rows) {
                            out << fmt::format("{},{},{},{},{},{}\n", r.cell.row, r.cell.col, r.trips,
                                               r.vehicles_seen, r.per_vehicle_seen, r.per_fleet_vehicle);
                        }
                    });
                }
                run.finish();
            };
        });
    }

    // grid
    {
        auto* sub = command("grid", "Tessellate the operation area");
        sub->add_option("--area", area_path, "Operation area GeoJSON")->required();
        sub->add_option("--cell-side", cell_side, "Cell side in metres")->capture_default_str();
        sub->final_callback([&, sub] {
            action = [&] {
                Run run("grid", g, describe(*sub, g));
                const Grid grid = build_grid(load_operation_area(run.input(area_path), g.city), cell_side);
                run.write_json("grid.geojson", grid_to_geojson(grid));
                run.finish();
            };
        });
    }

    // features
    std::string trips_path, grid_path, poi_path, census_path;
    int bin_minutes = 60, hops = 2;
    double min_events = 30.0, min_overlap = 0.2, skew_threshold = 2.0;
    {
        auto* sub = command("features", "Binned event series, feature table, entropy and census overlay");
        sub->add_option("--trips", trips_path, "Trips CSV")->required();
        sub->add_option("--grid", grid_path, "Grid GeoJSON");
        sub->add_option("--area", area_path, "Operation area GeoJSON");
        sub->add_option("--cell-side", cell_side, "Cell side when building the grid")->capture_default_str();
        sub->add_option("--bin-minutes", bin_minutes, "Time bin length")->capture_default_str();
        sub->add_option("--min-events", min_events, "Activity threshold for modelled cells")->capture_default_str();
        sub->add_option("--hops", hops, "Neighbourhood radius in cells")->capture_default_str();
        sub->add_option("--poi", poi_path, "PoI counts CSV (area_id,category,count)");
        sub->add_option("--census", census_path, "Census units GeoJSON (needs --area)");
        sub->add_option("--min-overlap", min_overlap, "Minimum census overlap")->capture_default_str();
        sub->add_option("--skew-threshold", skew_threshold, "Skewness flag threshold")->capture_default_str();
        sub->final_callback([&, sub] {
            action = [&] {
                Run run("features", g, describe(*sub, g));
                const TimeZone tz = zone(g);
                const TripSet trips = read_trips_file(run.input(trips_path));
                const Grid grid = load_grid(run, grid_path, area_path, cell_side, g.city);
                const Calendar calendar = trip_calendar(trips, tz);
                const EventPanel pick = bin_events(trips, grid, bin_minutes, EventKind::pickup, tz, calendar);
                const EventPanel drop = bin_events(trips, grid, bin_minutes, EventKind::dropoff, tz, calendar);
                const auto activity = activity_totals(pick, drop);
                run.write("pickups.csv", [&](std::ostream& out) { write_event_series_csv(out, pick); });
                run.write("dropoffs.csv", [&](std::ostream& out) { write_event_series_csv(out, drop); });
                const auto rows = build_feature_table(pick, grid, activity, min_events, hops);
                run.write("features.csv", [&](std::ostream& out) { write_feature_table_csv(out, rows, calendar); });
                std::vector<PoIProfile> pois;
                if (!poi_path.empty()) {
                    std::ifstream in(run.input(poi_path));
                    pois = read_poi_csv(in);
                    run.write("entropy.csv", [&](std::ostream& out) { write_entropy_csv(out, pois); });
                }
                if (!census_path.empty()) {
                    if (area_path.empty()) throw InputError("--census requires --area");
                    std::ifstream in(run.input(census_path));
                    json doc;
                    try {
                        doc = json::parse(in);
                    } catch (const json::exception& e) {
                        throw InputError(fmt::format("{}: {}", census_path, e.what()));
                    }
                    const OperationArea area = load_operation_area(area_path, g.city);
                    const auto overlay =
                        census_overlay(read_census_geojson(doc), area, trips, min_overlap, skew_threshold);
                    for (const auto& id : overlay.discarded) run.warn(fmt::format("census unit {} discarded", id));
                    run.write("census_units.csv",
                              [&](std::ostream& out) { write_census_units_csv(out, overlay, pois); });
                }
                run.finish();
            };
        });
    }

    // forecast
    std::vector<std::string> method_names{"all"};
    double train_frac = 0.8;
    int trees = 500, cv_folds = 5;
    std::string tag_cell, target_kind = "pickup";
    bool random_folds = false;
    {
        auto* sub = command("forecast", "Fit and compare demand forecasters");
        sub->add_option("--trips", trips_path, "Trips CSV")->required();
        sub->add_option("--grid", grid_path, "Grid GeoJSON");
        sub->add_option("--area", area_path, "Operation area GeoJSON");
        sub->add_option("--cell-side", cell_side, "Cell side when building the grid")->capture_default_str();
        sub->add_option("--method", method_names, "ha, hm, ha+, hm+, sarima, rf, mlp, weikl or all")
            ->delimiter(',')
            ->capture_default_str();
        sub->add_option("--bin-minutes", bin_minutes, "Time bin length")->capture_default_str();
        sub->add_option("--train-frac", train_frac, "Share of days used for training")->capture_default_str();
        sub->add_option("--min-events", min_events, "Activity threshold for modelled cells")->capture_default_str();
        sub->add_option("--hops", hops, "Neighbourhood radius in cells")->capture_default_str();
        sub->add_option("--trees", trees, "Random forest size")->capture_default_str();
        sub->add_option("--cv-folds", cv_folds, "Folds for hyperparameter selection")->capture_default_str();
        sub->add_flag("--random-folds", random_folds, "Random row folds instead of day blocks");
        sub->add_option("--tag-cell", tag_cell, "ROW,COL of the cell whose series is written");
        sub->add_option("--target", target_kind, "Events to forecast: pickup or dropoff")
            ->check(CLI::IsMember({"pickup", "dropoff"}))
            ->capture_default_str();
        sub->final_callback([&, sub] {
            action = [&] {
                Run run("forecast", g, describe(*sub, g));
                std::vector<Method> methods;
                for (const auto& name : method_names) {
                    if (name == "all") {
                        methods.assign(kAllMethods.begin(), kAllMethods.end());
                        break;
                    }
                    auto m = parse_method(name);
                    if (!m) throw InvalidArgument(fmt::format("unknown method '{}'", name));
                    if (std::find(methods.begin(), methods.end(), *m) == methods.end()) methods.push_back(*m);
                }
                const TimeZone tz = zone(g);
                const TripSet trips = read_trips_file(run.input(trips_path));
                const Grid grid = load_grid(run, grid_path, area_path, cell_side, g.city);
                const Calendar calendar = trip_calendar(trips, tz);
                const EventPanel pick = bin_events(trips, grid, bin_minutes, EventKind::pickup, tz, calendar);
                const EventPanel drop = bin_events(trips, grid, bin_minutes, EventKind::dropoff, tz, calendar);
                const auto activity = activity_totals(pick, drop);
                SplitSpec split;
                split.train_fraction = train_frac;
                const DemandData data =
                    make_demand_data(target_kind == "dropoff" ? drop : pick, grid, activity, split, min_events, hops);
                if (data.cells.empty()) throw InvalidArgument("no cell exceeds the activity threshold");
                ForecastOptions opts;
                opts.seed = g.seed;
                opts.cv_folds = cv_folds;
                opts.random_folds = random_folds;
                opts.forest.trees = trees;
                const Comparison cmp = compare_forecasters(data, methods, opts);
                for (const auto& model : cmp.models)
                    for (const auto& w : model->warnings()) run.warn(w);
                run.write("rmse.csv", [&](std::ostream& out) { write_rmse_csv(out, cmp, data); });
                run.write("best_method.csv", [&](std::ostream& out) { write_best_method_csv(out, cmp, data); });
                run.write_json("forecast_summary.json", comparison_summary(cmp));
                std::size_t tagged = data.cells.front();
                if (!tag_cell.empty()) {
                    auto idx = data.panel.cell_index(parse_cell(tag_cell));
                    if (!idx || std::find(data.cells.begin(), data.cells.end(), *idx) == data.cells.end()) {
                        throw InvalidArgument(fmt::format("cell {} is not modelled", tag_cell));
                    }
                    tagged = *idx;
                } else {
                    for (auto c : data.cells)
                        if (activity[c] > activity[tagged]) tagged = c;
                }
                run.write("tagged_series.csv",
                          [&](std::ostream& out) { write_tagged_series_csv(out, cmp, data, tagged); });
                run.finish();
            };
        });
    }

    // regress
    std::string design_path, response = "pickups", rule_name = "one-se";
    int folds = 10;
    {
        auto* sub = command("regress", "Lasso regression of demand on census indicators");
        sub->add_option("--design", design_path, "Unit table CSV (census_units.csv)")->required();
        sub->add_option("--response", response, "Response column")->capture_default_str();
        sub->add_option("--folds", folds, "Cross-validation folds")->capture_default_str();
        sub->add_option("--rule", rule_name, "min or one-se")
            ->check(CLI::IsMember({"min", "one-se"}))
            ->capture_default_str();
        sub->add_option("--skew-threshold", skew_threshold, "Log-transform columns more skewed than this; 0 disables")
            ->capture_default_str();
        sub->final_callback([&, sub] {
            action = [&] {
                Run run("regress", g, describe(*sub, g));
                std::ifstream in(run.input(design_path));
                DesignMatrix design = read_design_csv(in, response);
                if (skew_threshold > 0.0) log_transform_skewed(design, skew_threshold);
                const auto rule = rule_name == "min" ? LambdaRule::min : LambdaRule::one_se;
                const LassoCv cv = cv_select(design.x, design.y, folds, g.seed, rule);
                for (const auto& w : cv.warnings) run.warn(w);
                run.write("coefficients.csv", [&](std::ostream& out) {
                    write_coefficients_csv(out, design.names, cv.path, cv.selected);
                });
                run.write("cv_curve.csv", [&](std::ostream& out) { write_cv_curve_csv(out, cv); });
                json summary = sign_summary(design.names, cv.path, cv.selected);
                summary["lambda_min"] = cv.path.lambda[cv.index_min];
                summary["lambda_1se"] = cv.path.lambda[cv.index_1se];
                summary["rule"] = rule_name;
                summary["rows"] = design.x.rows();
                summary["dropped_rows"] = design.dropped_rows;
                summary["dropped_columns"] = design.dropped_columns;
                json logged = json::array();
                for (std::size_t j = 0; j < design.names.size(); ++j)
                    if (design.log_transformed[j]) logged.push_back(design.names[j]);
                summary["log_transformed"] = logged;
                run.write_json("lasso.json", summary);
                run.finish();
            };
        });
    }

    // cluster
    int profile_bin = 10, band_bins = 12, k_min = 2, k_max = 8;
    {
        auto* sub = command("cluster", "Cluster cells by availability profile");
        sub->add_option("--snapshots", snapshots_path, "Snapshot feed")->required();
        sub->add_option("--grid", grid_path, "Grid GeoJSON");
        sub->add_option("--area", area_path, "Operation area GeoJSON");
        sub->add_option("--cell-side", cell_side, "Cell side when building the grid")->capture_default_str();
        sub->add_option("--mapping", mapping_path, "Field mapping file");
        sub->add_option("--bin-minutes", profile_bin, "Profile bin length")->capture_default_str();
        sub->add_option("--band-bins", band_bins, "Sakoe-Chiba band in bins")->capture_default_str();
        sub->add_option("--kmin", k_min, "Smallest k")->capture_default_str();
        sub->add_option("--kmax", k_max, "Largest k")->capture_default_str();
        sub->final_callback([&, sub] {
            action = [&] {
                Run run("cluster", g, describe(*sub, g));
                const TimeZone tz = zone(g);
                const Grid grid = load_grid(run, grid_path, area_path, cell_side, g.city);
                const SnapshotSet snaps = load_snapshots(run, snapshots_path, mapping_path, "auto");
                const auto profiles = availability_profiles(snaps, grid, profile_bin, tz);
                std::vector<std::vector<double>> series;
                for (const auto& p : profiles) series.push_back(p.values);
                const auto d = dtw_matrix(series, band_bins);
                const auto sel = select_k(d, k_min, k_max);
                for (const auto& w : sel.warnings) run.warn(w);
                LabelRules rules;
                rules.bin_minutes = profile_bin;
                const auto labels = label_clusters(series, sel.clustering.assignment, sel.k, rules);
                run.write("assignment.csv", [&](std::ostream& out) {
                    write_assignment_csv(out, profiles, sel.clustering.assignment, labels);
                });
                run.write("cluster_profiles.csv",
                          [&](std::ostream& out) { write_cluster_profiles_csv(out, labels, profile_bin); });
                run.write_json("clusters.geojson",
                               labelled_cells_geojson(grid, profiles, sel.clustering.assignment, labels));
                json summary = {{"k", sel.k}, {"cells", profiles.size()}, {"cost", sel.clustering.cost}};
                json widths = json::array();
                for (auto [k, s] : sel.silhouettes) widths.push_back({{"k", k}, {"silhouette", s}});
                summary["silhouettes"] = widths;
                json clusters = json::array();
                for (std::size_t c = 0; c < labels.size(); ++c) {
                    clusters.push_back({{"cluster", c},
                                        {"label", labels[c].label},
                                        {"size", labels[c].size},
                                        {"range", labels[c].range},
                                        {"peak_minute", labels[c].peak_bin * profile_bin}});
                }
                summary["clusters"] = clusters;
                summary["warnings"] = sel.warnings;
                run.write_json("cluster.json", summary);
                run.finish();
            };
        });
    }

    // joincount
    std::string assignment_path, sampling = "nonfree", adjacency = "queen";
    int permutations = 999;
    {
        auto* sub = command("joincount", "Join count test on cluster labels");
        sub->add_option("--assignment", assignment_path, "assignment.csv from cluster")->required();
        sub->add_option("--permutations", permutations, "Monte-Carlo permutations; 0 disables")
            ->capture_default_str();
        sub->add_option("--sampling", sampling, "nonfree or free")
            ->check(CLI::IsMember({"nonfree", "free"}))
            ->capture_default_str();
        sub->add_option("--adjacency", adjacency, "queen or rook")
            ->check(CLI::IsMember({"queen", "rook"}))
            ->capture_default_str();
        sub->final_callback([&, sub] {
            action = [&] {
                Run run("joincount", g, describe(*sub, g));
                std::ifstream in(run.input(assignment_path));
                const auto lattice =
                    read_assignment_csv(in, adjacency == "rook" ? Adjacency::rook : Adjacency::queen);
                JoinCountOptions opts;
                opts.sampling = sampling == "free" ? Sampling::free : Sampling::nonfree;
                opts.permutations = permutations;
                opts.seed = g.seed;
                const auto result = join_count(lattice, opts);
                for (const auto& n : result.notes) run.warn(n);
                run.write("joincount.csv", [&](std::ostream& out) { write_join_count_csv(out, result); });
                run.finish();
            };
        });
    }

    // service-areas
    int window_days = 30;
    double threshold = 0.5;
    std::size_t top = 3, fleet_size = 0;
    bool first_window = false;
    {
        auto* sub = command("service-areas", "Rank cells for maintenance sites");
        auto* snap_opt = sub->add_option("--snapshots", snapshots_path, "Snapshot feed (parked presence)");
        sub->add_option("--trips", trips_path, "Trips CSV (trip endpoints as presence)")->excludes(snap_opt);
        sub->add_option("--grid", grid_path, "Grid GeoJSON");
        sub->add_option("--area", area_path, "Operation area GeoJSON");
        sub->add_option("--cell-side", cell_side, "Cell side when building the grid")->capture_default_str();
        sub->add_option("--window-days", window_days, "Tolerance window W")->capture_default_str();
        sub->add_option("--threshold", threshold, "Minimum fleet fraction")->capture_default_str();
        sub->add_option("--top", top, "Maximum number of sites")->capture_default_str();
        sub->add_option("--fleet-size", fleet_size, "Fleet size; 0 counts distinct vehicles")
            ->capture_default_str();
        sub->add_flag("--first-window", first_window, "Use only the first window instead of the best one");
        sub->final_callback([&, sub] {
            action = [&] {
                Run run("service-areas", g, describe(*sub, g));
                const Grid grid = load_grid(run, grid_path, area_path, cell_side, g.city);
                CoverageOptions opts;
                opts.window_days = window_days;
                opts.mode = first_window ? WindowMode::first_window : WindowMode::sliding_max;
                opts.tz = zone(g);
                opts.fleet_size = fleet_size;
                std::vector<CoverageRow> table;
                if (!trips_path.empty()) {
                    table = coverage(read_trips_file(run.input(trips_path)), grid, opts);
                } else {
                    if (snapshots_path.empty()) throw InputError("either --snapshots or --trips is required");
                    table = coverage(load_snapshots(run, snapshots_path, "", "auto"), grid, opts);
                }
                const auto sites = select_sites(table, threshold, top);
                run.write("coverage.csv", [&](std::ostream& out) { write_coverage_csv(out, table); });
                run.write_json("sites.geojson", sites_geojson(grid, sites));
                run.finish();
            };
        });
    }

    // synth
    std::string scenario_path;
    int days = 0, rows = 10, cols = 5;
    std::size_t fleet = 0;
    bool demand_only = false, airport = false;
    double outlier_fraction = -1.0, weekday_ratio = -1.0, day_noise = -1.0;
    {
        auto* sub = command("synth", "Generate a synthetic city");
        sub->add_option("--scenario", scenario_path, "Scenario INI file");
        sub->add_option("--days", days, "Override the number of days");
        sub->add_option("--fleet-size", fleet, "Override the fleet size");
        sub->add_flag("--airport", airport, "Plant an airport cell");
        sub->add_option("--outlier-fraction", outlier_fraction, "Override the planted outlier share");
        sub->add_option("--weekday-ratio", weekday_ratio, "Override the weekday/weekend demand ratio");
        sub->add_option("--day-noise", day_noise, "Override the day-level noise SD");
        sub->add_flag("--demand", demand_only, "Demand-only city for forecasting (trips, no snapshots)");
        sub->add_option("--rows", rows, "Demand-only grid rows")->capture_default_str();
        sub->add_option("--cols", cols, "Demand-only grid columns")->capture_default_str();
        sub->add_option("--bin-minutes", bin_minutes, "Demand-only bin length")->capture_default_str();
        sub->final_callback([&, sub] {
            action = [&] {
                Run run("synth", g, describe(*sub, g));
                if (demand_only) {
                    DemandScenario s;
                    s.seed = g.seed;
                    s.rows = rows;
                    s.cols = cols;
                    s.bin_minutes = bin_minutes;
                    if (days > 0) s.days = days;
                    if (weekday_ratio > 0.0) s.weekday_weekend_ratio = weekday_ratio;
                    if (day_noise >= 0.0) s.day_noise_sd = day_noise;
                    const DemandCity city = generate_demand(s);
                    run.write("trips.csv", [&](std::ostream& out) { write_trips_csv(out, city.trips); });
                    run.write_json("area.geojson", area_geojson(city.area));
                    run.write("calendar.csv", [&](std::ostream& out) { write_calendar_csv(out, city.calendar); });
                    run.finish();
                    return;
                }
                CityScenario s = scenario_path.empty() ? CityScenario{} : load_scenario(run.input(scenario_path));
                s.seed = g.seed;
                if (g.city != "city") s.city = g.city;
                if (days > 0) s.days = days;
                if (fleet > 0) s.fleet_size = fleet;
                if (airport) s.airport = true;
                if (outlier_fraction >= 0.0) s.outlier_fraction = outlier_fraction;
                if (weekday_ratio > 0.0) s.weekday_weekend_ratio = weekday_ratio;
                if (day_noise >= 0.0) s.day_noise_sd = day_noise;
                const SynthCity city = generate_city(s);
                for (const auto& w : city.warnings) run.warn(w);
                run.write("scenario.ini", [&](std::ostream& out) { write_scenario(out, s); });
                run.write("snapshots.csv", [&](std::ostream& out) { write_snapshots_csv(out, city.snapshots); });
                run.write_json("area.geojson", area_geojson(city.area));
                run.write("trips_truth.csv", [&](std::ostream& out) { write_trips_csv(out, city.trips); });
                run.write("classes.csv", [&](std::ostream& out) { write_classes_csv(out, city); });
                run.write("calendar.csv", [&](std::ostream& out) { write_calendar_csv(out, city.calendar); });
                run.write_json("synth.json", {{"records", city.snapshots.size()},
                                              {"trips", city.trips.trips.size()},
                                              {"trips_per_vehicle_day", city.realised_trips_per_vehicle_day},
                                              {"outlier_records", city.outlier_records},
                                              {"outlier_vins", city.outlier_vins},
                                              {"warnings", city.warnings}});
                run.finish();
            };
        });
    }

    // report
    {
        auto* sub = command("report", "Write manifest.json covering every artifact in the output directory");
        sub->final_callback([&, sub] {
            action = [&] {
                const fs::path dir = g.output_dir;
                if (!fs::is_directory(dir)) throw InputError(fmt::format("missing output directory: {}", dir.string()));
                std::vector<fs::path> manifests, artifacts;
                for (const auto& entry : fs::directory_iterator(dir)) {
                    if (!entry.is_regular_file()) continue;
                    const auto name = entry.path().filename().string();
                    if (name == "manifest.json") continue;
                    if (name.ends_with(".manifest.json")) {
                        manifests.push_back(entry.path());
                    } else {
                        artifacts.push_back(entry.path());
                    }
                }
                std::sort(manifests.begin(), manifests.end());
                std::sort(artifacts.begin(), artifacts.end());
                json runs = json::array();
                std::map<std::string, std::string> producer;
                for (const auto& m : manifests) {
                    std::ifstream in(m);
                    json doc = json::parse(in);
                    for (const auto& out : doc.at("outputs")) {
                        producer[out.at("path").get<std::string>()] = doc.at("subcommand").get<std::string>();
                        const fs::path p = dir / out.at("path").get<std::string>();
                        if (!fs::exists(p) || sha256_file(p) != out.at("sha256").get<std::string>()) {
                            std::cerr << "warning: " << p.string() << " changed since it was produced\n";
                        }
                    }
                    runs.push_back(std::move(doc));
                }
                json list = json::array();
                for (const auto& a : artifacts) {
                    const auto name = a.filename().string();
                    json entry = {{"path", name}, {"sha256", sha256_file(a)}, {"bytes", fs::file_size(a)}};
                    auto it = producer.find(name);
                    entry["producer"] = it == producer.end() ? json(nullptr) : json(it->second);
                    list.push_back(std::move(entry));
                }
                json doc = {{"tool", "carshare"},
                            {"versions", Run::versions()},
                            {"seed", g.seed},
                            {"runs", runs},
                            {"artifacts", list}};
                std::ofstream out(dir / "manifest.json", std::ios::binary);
                out << doc.dump(2) << '\n';
            };
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    // The environment overrides the config file but not an explicit flag.
    if (const char* env = std::getenv(std::string(kOutputDirEnv).c_str()); env && *env) {
        bool explicit_flag = false;
        for (int i = 1; i < argc; ++i) {
            const std::string_view a = argv[i];
            if (a == "-o" || a == "--output-dir" || a.starts_with("--output-dir=")) explicit_flag = true;
        }
        if (!explicit_flag) g.output_dir = env;
    }

    try {
        if (!action) {
            std::cerr << app.help();
            return 2;
        }
        action();
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
