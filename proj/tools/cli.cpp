// Scenario driver: run / check / sweep / analyze.
#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "netfdi/montecarlo.hpp"
#include "netfdi/scenario.hpp"

using namespace netfdi;
using nlohmann::json;

namespace {

const char* level_name(FaultLevel l) {
    switch (l) {
        case FaultLevel::L99: return "faulty_99";
        case FaultLevel::L95: return "faulty_95";
        case FaultLevel::L68: return "faulty_68";
        default: return "healthy";
    }
}

void print_summary(const ScenarioReport& rep) {
    std::printf("networked observability: rank %d / %d (%s)\n", rep.networked_obs.rank,
                rep.networked_obs.dimension,
                rep.networked_obs.observable ? "observable" : "NOT observable");
    std::printf("gain: method=%s rho(Ahat)=%.6f b=%.6f\n",
                rep.gain.method == GainMethod::Lmi ? "lmi" : "fallback", rep.gain.rho,
                rep.gain.spectral_norm);
    if (rep.thresholds) {
        const auto& t = *rep.thresholds;
        std::printf("thresholds: phi=%.6f T68=%.6f T95=%.6f T99=%.6f\n", t.phi, t.t68,
                    t.t95, t.t99);
    }
}

void print_verdicts(const FdiReport& fdi) {
    for (size_t i = 0; i < fdi.verdicts.size(); ++i) {
        const auto& v = fdi.verdicts[i];
        std::printf("sensor %zu: %s", i + 1, level_name(v.level));
        if (v.first_crossing_95) std::printf(" (95%% crossing at k=%d)", *v.first_crossing_95);
        std::printf("\n");
    }
    std::printf("isolated:");
    for (int i : fdi.isolated) std::printf(" %d", i + 1);
    std::printf("\n");
}

std::pair<uint64_t, uint64_t> parse_seed_range(const std::string& range) {
    const auto dots = range.find("..");
    if (dots == std::string::npos) {
        const uint64_t s = std::stoull(range);
        return {s, s};
    }
    return {std::stoull(range.substr(0, dots)), std::stoull(range.substr(dots + 2))};
}

int cmd_run(const std::string& config_path, const std::string& out_dir) {
    const ScenarioConfig config = ScenarioConfig::load(config_path);
    const ScenarioReport rep = run_scenario(config);
    print_summary(rep);
    print_verdicts(rep.fdi);
    if (rep.recovery) {
        for (const auto& a : rep.recovery->actions) {
            switch (a.kind) {
                case ReplacementKind::ReplaceWith:
                    std::printf("recovery: sensor %d now measures state %d\n",
                                a.sensor + 1, *a.replacement_state + 1);
                    break;
                case ReplacementKind::RemovalSafe:
                    std::printf("recovery: sensor %d removed\n", a.sensor + 1);
                    break;
                case ReplacementKind::Irreplaceable:
                    std::printf("recovery: sensor %d unrecoverable\n", a.sensor + 1);
                    break;
            }
        }
        std::printf("post-recovery observable: %s\n",
                    rep.post_recovery_obs->observable ? "yes" : "no");
    }
    for (const auto& f : emit_reports(rep, out_dir)) std::printf("wrote %s\n", f.c_str());
    return 0;
}

int cmd_check(const std::string& config_path) {
    const ScenarioConfig config = ScenarioConfig::load(config_path);
    const ScenarioReport rep = check_scenario(config);
    print_summary(rep);
    return rep.networked_obs.observable && rep.gain.success ? 0 : 1;
}

int cmd_sweep(const std::string& config_path, const std::string& seeds,
              const std::string& out_dir, bool parallel) {
    const ScenarioConfig config = ScenarioConfig::load(config_path);
    // one instance and one gain; replications vary only the noise streams
    const ScenarioReport base = check_scenario(config);
    if (!base.thresholds) return 1;

    const auto [lo, hi] = parse_seed_range(seeds);
    const int count = static_cast<int>(hi - lo + 1);
    struct Row {
        uint64_t seed;
        std::vector<SensorVerdict> verdicts;
        std::vector<int> isolated;
        double max_msee = 0.0;
    };
    std::vector<Row> rows(count);

    run_replications(count, parallel, [&](int idx) {
        const uint64_t seed = lo + static_cast<uint64_t>(idx);
        const FilterRun run =
            run_filter(base.system, base.mm, base.net, base.gain.gain_columns,
                       config.faults, config.horizon, seed);
        const FdiReport fdi =
            detect_and_isolate(run.residuals, *base.thresholds, config.burn_in,
                               config.persistence, config.decision_level);
        Row& r = rows[idx];
        r.seed = seed;
        r.verdicts = fdi.verdicts;
        r.isolated = fdi.isolated;
        for (size_t k = config.burn_in; k < run.errors.msee.size(); ++k)
            r.max_msee = std::max(r.max_msee, run.errors.msee[k]);
    });

    std::filesystem::create_directories(out_dir);
    const std::string csv_path =
        (std::filesystem::path(out_dir) / "sweep.csv").string();
    std::ofstream csv(csv_path, std::ios::binary);
    csv << "seed,sensor,level,first_crossing_95,isolated,max_msee\n";
    std::vector<int> isolation_count(base.mm.count(), 0);
    for (const auto& r : rows) {
        for (size_t i = 0; i < r.verdicts.size(); ++i) {
            const auto& v = r.verdicts[i];
            const bool iso = std::find(r.isolated.begin(), r.isolated.end(),
                                       static_cast<int>(i)) != r.isolated.end();
            if (iso) ++isolation_count[i];
            csv << r.seed << ',' << (i + 1) << ',' << level_name(v.level) << ',';
            if (v.first_crossing_95) csv << *v.first_crossing_95;
            csv << ',' << (iso ? 1 : 0) << ',' << r.max_msee << '\n';
        }
    }
    csv.close();
    std::printf("wrote %s (%d replications)\n", csv_path.c_str(), count);
    for (int i = 0; i < base.mm.count(); ++i)
        std::printf("sensor %d isolation rate: %.1f%%\n", i + 1,
                    100.0 * isolation_count[i] / count);
    return 0;
}

int cmd_analyze(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream mf(fs::path(dir) / "manifest.json");
    if (!mf) {
        std::fprintf(stderr, "analyze: no manifest.json in %s\n", dir.c_str());
        return 1;
    }
    json manifest = json::parse(mf);
    ThresholdSet t;
    t.b = manifest["thresholds"]["b"];
    t.phi = manifest["thresholds"]["phi"];
    t.t68 = manifest["thresholds"]["t68"];
    t.t95 = manifest["thresholds"]["t95"];
    t.t99 = manifest["thresholds"]["t99"];
    const int burn_in = manifest["config"].value("burn_in", 10);
    const int persistence = manifest["config"].value("persistence", 1);
    const int decision_level = manifest["config"].value("decision_level", 95);

    std::ifstream rf(fs::path(dir) / "residuals.csv");
    if (!rf) {
        std::fprintf(stderr, "analyze: no residuals.csv in %s\n", dir.c_str());
        return 1;
    }
    std::string line;
    std::getline(rf, line);  // header
    std::vector<std::vector<double>> residuals;
    while (std::getline(rf, line)) {
        std::stringstream ss(line);
        std::string field;
        std::getline(ss, field, ',');
        const int k = std::stoi(field);
        std::getline(ss, field, ',');
        const size_t sensor = std::stoul(field);
        std::getline(ss, field, ',');
        const double r = std::stod(field);
        if (residuals.size() < static_cast<size_t>(k)) residuals.resize(k);
        auto& row = residuals[k - 1];
        if (row.size() < sensor) row.resize(sensor);
        row[sensor - 1] = r;
    }

    const FdiReport fdi =
        detect_and_isolate(residuals, t, burn_in, persistence, decision_level);
    print_verdicts(fdi);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"networked estimator with sensor fault detection and recovery"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", seeds = "1..100", trace_dir;
    bool parallel = false;

    auto* run = app.add_subcommand("run", "full pipeline: simulate, detect, recover");
    run->add_option("config", config_path, "scenario config (JSON)")->required();
    run->add_option("--out", out_dir, "output directory");

    auto* check = app.add_subcommand("check", "observability and gain design only");
    check->add_option("config", config_path, "scenario config (JSON)")->required();

    auto* sweep = app.add_subcommand("sweep", "Monte Carlo over noise seeds");
    sweep->add_option("config", config_path, "scenario config (JSON)")->required();
    sweep->add_option("--seeds", seeds, "seed range a..b");
    sweep->add_option("--out", out_dir, "output directory");
    sweep->add_flag("--parallel", parallel, "replications in parallel (OpenMP)");

    auto* analyze = app.add_subcommand("analyze", "re-run detection on stored traces");
    analyze->add_option("dir", trace_dir, "directory with residuals.csv + manifest.json")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, out_dir);
        if (check->parsed()) return cmd_check(config_path);
        if (sweep->parsed()) return cmd_sweep(config_path, seeds, out_dir, parallel);
        if (analyze->parsed()) return cmd_analyze(trace_dir);
    } catch (const StageError& e) {
        std::fprintf(stderr, "[%s] %s\n", e.stage.c_str(), e.message.c_str());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
