// Benchmarks the OpenMP kernels against their serial reference paths and
// checks that both produce identical results while timing them.
//
//   meshadv-bench [--points N] [--repeats R]

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "meshadv/classifier.hpp"
#include "meshadv/defense.hpp"
#include "meshadv/losses.hpp"
#include "meshadv/rng.hpp"

using namespace meshadv;

namespace {

using Clock = std::chrono::steady_clock;

double time_of(int repeats, const std::function<void()>& fn) {
    fn();  // warm up
    const auto t0 = Clock::now();
    for (int r = 0; r < repeats; ++r) fn();
    return std::chrono::duration<double>(Clock::now() - t0).count() / repeats;
}

void report(const char* name, double serial, double parallel, bool identical) {
    std::printf("%-28s serial %8.3f ms   parallel %8.3f ms   speedup %5.2fx   identical %s\n",
                name, serial * 1e3, parallel * 1e3, serial / parallel, identical ? "yes" : "NO");
}

}  // namespace

int main(int argc, char** argv) {
    int num_points = 2048;
    int repeats = 5;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--points") == 0 && i + 1 < argc) {
            num_points = std::atoi(argv[++i]);
        } else if (std::strcmp(argv[i], "--repeats") == 0 && i + 1 < argc) {
            repeats = std::atoi(argv[++i]);
        } else {
            std::fprintf(stderr, "usage: %s [--points N] [--repeats R]\n", argv[0]);
            return 1;
        }
    }
#ifdef _OPENMP
    std::printf("threads: %d, points: %d, repeats: %d\n", omp_get_max_threads(), num_points,
                repeats);
#else
    std::printf("built without OpenMP; points: %d, repeats: %d\n", num_points, repeats);
#endif

    Rng rng(12345);
    std::vector<Vec3> s1(static_cast<std::size_t>(num_points));
    std::vector<Vec3> s2(static_cast<std::size_t>(num_points));
    for (Vec3& p : s1) p = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    for (Vec3& p : s2) p = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};

    {  // Chamfer nearest-neighbor kernel (brute force).
        ChamferResult rs, rp;
        const double ts = time_of(repeats, [&] {
            rs = chamfer_loss(s1, s2, Execution::Serial, NearestNeighborPolicy::BruteForce);
        });
        const double tp = time_of(repeats, [&] {
            rp = chamfer_loss(s1, s2, Execution::Parallel, NearestNeighborPolicy::BruteForce);
        });
        report("chamfer (brute force)", ts, tp, rs.loss == rp.loss && rs.grad_s2 == rp.grad_s2);
    }
    {  // Chamfer with the voxel-grid search.
        ChamferResult rs, rp;
        const double ts = time_of(repeats, [&] {
            rs = chamfer_loss(s1, s2, Execution::Serial, NearestNeighborPolicy::Grid);
        });
        const double tp = time_of(repeats, [&] {
            rp = chamfer_loss(s1, s2, Execution::Parallel, NearestNeighborPolicy::Grid);
        });
        report("chamfer (voxel grid)", ts, tp, rs.loss == rp.loss && rs.grad_s2 == rp.grad_s2);
    }
    {  // Classifier forward (per-point MLP + max pool).
        const ClassifierModel model = ClassifierModel::initialize(8, 7);
        std::vector<double> ls, lp;
        const double ts =
            time_of(repeats, [&] { ls = forward(model, s1, nullptr, Execution::Serial); });
        const double tp =
            time_of(repeats, [&] { lp = forward(model, s1, nullptr, Execution::Parallel); });
        report("classifier forward", ts, tp, ls == lp);
    }
    {  // SOR mean-kNN statistic.
        std::vector<double> ds, dp;
        const double ts =
            time_of(repeats, [&] { ds = mean_knn_distances(s1, 2, Execution::Serial); });
        const double tp =
            time_of(repeats, [&] { dp = mean_knn_distances(s1, 2, Execution::Parallel); });
        report("sor mean-knn distances", ts, tp, ds == dp);
    }
    return 0;
}
