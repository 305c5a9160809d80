// Compares the im2col+GEMM convolution against the naive serial reference
// kept for testing. Build target: bench_conv.

#include <chrono>
#include <cstdio>
#include <random>

#include "firecast/layers.hpp"
#include "firecast/reference.hpp"

using namespace firecast;

namespace {

using Clock = std::chrono::steady_clock;

template <typename Fn>
double time_ms(Fn fn, int reps) {
    fn(); // warm-up
    const auto t0 = Clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

} // namespace

int main() {
    struct Case {
        int c_in, c_out, size, kernel, stride, reps;
    };
    const Case cases[] = {
        {3, 48, 251, 7, 2, 3},  // paper-scale encoder block 1
        {48, 96, 61, 3, 2, 5},  // encoder block 2
        {128, 64, 61, 3, 1, 5}, // convlstm-style gate conv
        {3, 32, 64, 7, 2, 20},  // desk-scale block 1
    };

    std::mt19937_64 rng(1);
    std::printf("%-28s %12s %12s %8s %10s\n", "case", "im2col+gemm", "reference", "speedup",
                "max|diff|");
    for (const Case& c : cases) {
        Tensor<float> x({c.c_in, c.size, c.size});
        Tensor<float> w({c.c_out, c.c_in, c.kernel, c.kernel});
        Tensor<float> b({c.c_out});
        fill_uniform(x, rng, -1.0, 1.0);
        fill_normal(w, rng, 0.1);
        fill_normal(b, rng, 0.1);

        Tensor<float> fast, ref;
        const double t_fast =
            time_ms([&] { fast = conv2d_fwd(x, w, b, c.stride, 0); }, c.reps);
        const double t_ref =
            time_ms([&] { ref = conv2d_reference(x, w, b, c.stride, 0); }, c.reps);

        float max_diff = 0;
        for (std::size_t i = 0; i < fast.numel(); ++i)
            max_diff = std::max(max_diff, std::abs(fast[i] - ref[i]));

        char label[64];
        std::snprintf(label, sizeof(label), "%dx%dx%d k%d s%d -> %d", c.c_in, c.size, c.size,
                      c.kernel, c.stride, c.c_out);
        std::printf("%-28s %9.3f ms %9.3f ms %7.1fx %10.2e\n", label, t_fast, t_ref,
                    t_ref / t_fast, static_cast<double>(max_diff));
    }
    return 0;
}
