// Benchmark: serial vs OpenMP MI-signal kernel on a synthetic demo.
#include <chrono>
#include <cstdio>
#include <cstdlib>

#include "skelex/segmenter.hpp"
#include "skelex/synthgen.hpp"

using namespace skelex;

int main(int argc, char** argv) {
    const int objects = argc > 1 ? std::atoi(argv[1]) : 8;
    const int repeats = argc > 2 ? std::atoi(argv[2]) : 3;

    TaskTemplate t = pick_place_template(0);
    t.noise_pos = 0.001;
    for (int i = 4; i < objects; ++i) {
        t.roster.push_back({"obj" + std::to_string(i), Role::Distractor,
                            Vec3(0.2 * i, -0.3, 0.0), 0.01});
    }
    t.steps_per_primitive = 400;
    const SynthResult r = generate(t, 1, 1);
    const Config cfg;

    printf("objects=%d frames=%d pairs=%zu\n", objects, r.demos[0].length(),
           mi_signals_serial(r.demos[0], cfg).pairs.size());

    using clock = std::chrono::steady_clock;
    double best_serial = 1e30, best_parallel = 1e30;
    double checksum_serial = 0, checksum_parallel = 0;
    for (int k = 0; k < repeats; ++k) {
        auto t0 = clock::now();
        const MiSignals ser = mi_signals_serial(r.demos[0], cfg);
        auto t1 = clock::now();
        const MiSignals par = mi_signals(r.demos[0], cfg);
        auto t2 = clock::now();
        best_serial = std::min(best_serial, std::chrono::duration<double>(t1 - t0).count());
        best_parallel = std::min(best_parallel, std::chrono::duration<double>(t2 - t1).count());
        checksum_serial = checksum_parallel = 0;
        for (const auto& s : ser.series) {
            for (double v : s) checksum_serial += v;
        }
        for (const auto& s : par.series) {
            for (double v : s) checksum_parallel += v;
        }
    }
    printf("serial   %.3f s (checksum %.6f)\n", best_serial, checksum_serial);
    printf("parallel %.3f s (checksum %.6f)\n", best_parallel, checksum_parallel);
    printf("speedup  %.2fx, identical=%s\n", best_serial / best_parallel,
           checksum_serial == checksum_parallel ? "yes" : "NO");
    return checksum_serial == checksum_parallel ? 0 : 1;
}
