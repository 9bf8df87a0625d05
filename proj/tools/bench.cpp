// Compares the serial and OpenMP replication loops on a fixed instance and
// verifies they produce identical results.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include "netfdi/montecarlo.hpp"
#include "netfdi/scenario.hpp"

using namespace netfdi;

int main(int argc, char** argv) {
    const int reps = argc > 1 ? std::atoi(argv[1]) : 64;
    const int steps = argc > 2 ? std::atoi(argv[2]) : 300;

    ScenarioConfig config = ScenarioConfig::load("data/demo_scenario.json");
    config.faults.intervals.clear();
    const ScenarioReport base = check_scenario(config);

    auto simulate = [&](bool parallel, std::vector<double>& out) {
        out.assign(reps, 0.0);
        run_replications(reps, parallel, [&](int i) {
            const FilterRun run =
                run_filter(base.system, base.mm, base.net, base.gain.gain_columns,
                           FaultProfile{}, steps, replication_seed(config.seed, i));
            double acc = 0.0;
            for (size_t k = config.burn_in; k < run.errors.msee.size(); ++k)
                acc += run.errors.msee[k];
            out[i] = acc;
        });
    };

    std::vector<double> serial, parallel;
    const auto t0 = std::chrono::steady_clock::now();
    simulate(false, serial);
    const auto t1 = std::chrono::steady_clock::now();
    simulate(true, parallel);
    const auto t2 = std::chrono::steady_clock::now();

    const double ts = std::chrono::duration<double>(t1 - t0).count();
    const double tp = std::chrono::duration<double>(t2 - t1).count();
    bool identical = true;
    for (int i = 0; i < reps; ++i)
        if (serial[i] != parallel[i]) identical = false;

    std::printf("%d replications x %d steps\n", reps, steps);
    std::printf("serial:   %.3f s\n", ts);
    std::printf("parallel: %.3f s (speedup %.2fx)\n", tp, ts / tp);
    std::printf("results identical: %s\n", identical ? "yes" : "NO");
    return identical ? 0 : 1;
}
