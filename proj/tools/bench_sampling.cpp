// Times the serial reference sampler against the OpenMP kernel on the
// contest generator and checks that both produce identical output.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "dagfit/dataset.hpp"
#include "dagfit/scm.hpp"

using namespace dagfit;

namespace {

double seconds_for(const Scm& scm, std::int64_t n, bool parallel, Dataset* out) {
    SampleOptions opts;
    opts.parallel = parallel;
    const auto start = std::chrono::steady_clock::now();
    Dataset data = parallel ? sample(scm, n, 7, opts) : sample_serial(scm, n, 7, opts);
    const auto stop = std::chrono::steady_clock::now();
    if (out) *out = std::move(data);
    return std::chrono::duration<double>(stop - start).count();
}

bool identical(const Dataset& a, const Dataset& b) {
    if (a.row_count() != b.row_count() || a.column_count() != b.column_count()) return false;
    for (const auto& col : a.columns()) {
        const Column& other = b.column(col.name);
        if (col.codes != other.codes || col.counts != other.counts ||
            col.values != other.values) {
            return false;
        }
    }
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    std::int64_t n = argc > 1 ? std::atoll(argv[1]) : 2'000'000;
    const Scm scm = codejam_scm(CodeJamParams{});

#ifdef _OPENMP
    const int threads = omp_get_max_threads();
#else
    const int threads = 1;
#endif
    std::printf("sampling %lld rows of the contest generator (%d thread%s)\n",
                static_cast<long long>(n), threads, threads == 1 ? "" : "s");

    Dataset serial_out, parallel_out;
    // Warm-up pass so page faults do not bias the first measurement.
    seconds_for(scm, std::min<std::int64_t>(n, 100'000), false, nullptr);

    const double t_serial = seconds_for(scm, n, false, &serial_out);
    const double t_parallel = seconds_for(scm, n, true, &parallel_out);

    std::printf("  serial reference: %8.3f s  (%.2f M rows/s)\n", t_serial,
                n / t_serial / 1e6);
    std::printf("  openmp kernel:    %8.3f s  (%.2f M rows/s)\n", t_parallel,
                n / t_parallel / 1e6);
    std::printf("  speedup:          %8.2fx\n", t_serial / t_parallel);

    if (!identical(serial_out, parallel_out)) {
        std::printf("MISMATCH: serial and parallel outputs differ\n");
        return 1;
    }
    std::printf("outputs are bit-identical\n");
    return 0;
}
