#include <benchmark/benchmark.h>

#include "foct/kernels.hpp"
#include "foct/rng.hpp"

// Serial reference vs OpenMP kernels at training-like shapes. Args are
// {channels, spatial}: {8, 64} is a shallow stage, {64, 8} a deep one.

namespace {

using foct::Tensor;

Tensor<float> random_tensor(int n, int c, int h, int w, std::uint64_t seed) {
    Tensor<float> t(n, c, h, w);
    foct::Rng rng(seed);
    for (auto& v : t.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    return t;
}

constexpr int kBatch = 4;

struct ConvSetup {
    Tensor<float> x, w, y, dy, dx, dw;
    std::vector<float> b, db;
    ConvSetup(int c, int hw)
        : x(random_tensor(kBatch, c, hw, hw, 1)),
          w(random_tensor(c, c, 3, 3, 2)),
          y(kBatch, c, hw, hw),
          dy(random_tensor(kBatch, c, hw, hw, 3)),
          dx(kBatch, c, hw, hw),
          dw(c, c, 3, 3),
          b(c, 0.1f),
          db(c, 0.f) {}
    double flops() const { return 2.0 * kBatch * x.c * w.n * 9.0 * x.h * x.w; }
};

void conv_fwd_serial(benchmark::State& state) {
    ConvSetup s(state.range(0), state.range(1));
    for (auto _ : state) {
        foct::kernels::serial::conv2d_forward(s.x, s.w, s.b, s.y, 1, 1);
        benchmark::DoNotOptimize(s.y.ptr());
    }
    state.counters["flops"] = benchmark::Counter(s.flops(), benchmark::Counter::kIsIterationInvariantRate);
}

void conv_fwd_omp(benchmark::State& state) {
    ConvSetup s(state.range(0), state.range(1));
    for (auto _ : state) {
        foct::kernels::omp::conv2d_forward(s.x, s.w, s.b, s.y, 1, 1);
        benchmark::DoNotOptimize(s.y.ptr());
    }
    state.counters["flops"] = benchmark::Counter(s.flops(), benchmark::Counter::kIsIterationInvariantRate);
}

void conv_bwd_input_serial(benchmark::State& state) {
    ConvSetup s(state.range(0), state.range(1));
    for (auto _ : state) {
        foct::kernels::serial::conv2d_backward_input(s.dy, s.w, s.dx, 1, 1);
        benchmark::DoNotOptimize(s.dx.ptr());
    }
    state.counters["flops"] = benchmark::Counter(s.flops(), benchmark::Counter::kIsIterationInvariantRate);
}

void conv_bwd_input_omp(benchmark::State& state) {
    ConvSetup s(state.range(0), state.range(1));
    for (auto _ : state) {
        foct::kernels::omp::conv2d_backward_input(s.dy, s.w, s.dx, 1, 1);
        benchmark::DoNotOptimize(s.dx.ptr());
    }
    state.counters["flops"] = benchmark::Counter(s.flops(), benchmark::Counter::kIsIterationInvariantRate);
}

void conv_bwd_params_serial(benchmark::State& state) {
    ConvSetup s(state.range(0), state.range(1));
    for (auto _ : state) {
        s.dw.fill(0);
        std::fill(s.db.begin(), s.db.end(), 0.f);
        foct::kernels::serial::conv2d_backward_params(s.x, s.dy, s.dw, s.db, 1, 1);
        benchmark::DoNotOptimize(s.dw.ptr());
    }
    state.counters["flops"] = benchmark::Counter(s.flops(), benchmark::Counter::kIsIterationInvariantRate);
}

void conv_bwd_params_omp(benchmark::State& state) {
    ConvSetup s(state.range(0), state.range(1));
    for (auto _ : state) {
        s.dw.fill(0);
        std::fill(s.db.begin(), s.db.end(), 0.f);
        foct::kernels::omp::conv2d_backward_params(s.x, s.dy, s.dw, s.db, 1, 1);
        benchmark::DoNotOptimize(s.dw.ptr());
    }
    state.counters["flops"] = benchmark::Counter(s.flops(), benchmark::Counter::kIsIterationInvariantRate);
}

struct NormSetup {
    Tensor<float> x, y, dy, dx;
    std::vector<float> gamma, beta, mean, rstd, dgamma, dbeta;
    int groups;
    NormSetup(int c, int hw)
        : x(random_tensor(kBatch, c, hw, hw, 4)),
          y(kBatch, c, hw, hw),
          dy(random_tensor(kBatch, c, hw, hw, 5)),
          dx(kBatch, c, hw, hw),
          gamma(c, 1.f),
          beta(c, 0.f),
          dgamma(c, 0.f),
          dbeta(c, 0.f),
          groups(c >= 8 ? 8 : c) {
        foct::kernels::serial::group_norm_forward(x, gamma, beta, groups, 1e-5f, y, mean, rstd);
    }
};

void group_norm_fwd_serial(benchmark::State& state) {
    NormSetup s(state.range(0), state.range(1));
    for (auto _ : state) {
        foct::kernels::serial::group_norm_forward(s.x, s.gamma, s.beta, s.groups, 1e-5f, s.y,
                                                  s.mean, s.rstd);
        benchmark::DoNotOptimize(s.y.ptr());
    }
}

void group_norm_fwd_omp(benchmark::State& state) {
    NormSetup s(state.range(0), state.range(1));
    for (auto _ : state) {
        foct::kernels::omp::group_norm_forward(s.x, s.gamma, s.beta, s.groups, 1e-5f, s.y, s.mean,
                                               s.rstd);
        benchmark::DoNotOptimize(s.y.ptr());
    }
}

void group_norm_bwd_serial(benchmark::State& state) {
    NormSetup s(state.range(0), state.range(1));
    for (auto _ : state) {
        foct::kernels::serial::group_norm_backward(s.x, s.dy, s.gamma, s.groups, s.mean, s.rstd,
                                                   s.dx, s.dgamma, s.dbeta);
        benchmark::DoNotOptimize(s.dx.ptr());
    }
}

void group_norm_bwd_omp(benchmark::State& state) {
    NormSetup s(state.range(0), state.range(1));
    for (auto _ : state) {
        foct::kernels::omp::group_norm_backward(s.x, s.dy, s.gamma, s.groups, s.mean, s.rstd,
                                                s.dx, s.dgamma, s.dbeta);
        benchmark::DoNotOptimize(s.dx.ptr());
    }
}

void softmax_fwd_serial(benchmark::State& state) {
    Tensor<float> logits = random_tensor(kBatch, 2, 128, 128, 6);
    Tensor<float> probs(kBatch, 2, 128, 128);
    for (auto _ : state) {
        foct::kernels::serial::softmax_forward(logits, probs);
        benchmark::DoNotOptimize(probs.ptr());
    }
}

void softmax_fwd_omp(benchmark::State& state) {
    Tensor<float> logits = random_tensor(kBatch, 2, 128, 128, 6);
    Tensor<float> probs(kBatch, 2, 128, 128);
    for (auto _ : state) {
        foct::kernels::omp::softmax_forward(logits, probs);
        benchmark::DoNotOptimize(probs.ptr());
    }
}

void upsample_fwd_serial(benchmark::State& state) {
    Tensor<float> x = random_tensor(kBatch, 16, 32, 32, 7);
    Tensor<float> y(kBatch, 16, 64, 64);
    for (auto _ : state) {
        foct::kernels::serial::upsample2x_forward(x, y);
        benchmark::DoNotOptimize(y.ptr());
    }
}

void upsample_fwd_omp(benchmark::State& state) {
    Tensor<float> x = random_tensor(kBatch, 16, 32, 32, 7);
    Tensor<float> y(kBatch, 16, 64, 64);
    for (auto _ : state) {
        foct::kernels::omp::upsample2x_forward(x, y);
        benchmark::DoNotOptimize(y.ptr());
    }
}

}  // namespace

BENCHMARK(conv_fwd_serial)->Args({8, 64})->Args({64, 8});
BENCHMARK(conv_fwd_omp)->Args({8, 64})->Args({64, 8});
BENCHMARK(conv_bwd_input_serial)->Args({8, 64})->Args({64, 8});
BENCHMARK(conv_bwd_input_omp)->Args({8, 64})->Args({64, 8});
BENCHMARK(conv_bwd_params_serial)->Args({8, 64})->Args({64, 8});
BENCHMARK(conv_bwd_params_omp)->Args({8, 64})->Args({64, 8});
BENCHMARK(group_norm_fwd_serial)->Args({8, 64})->Args({64, 8});
BENCHMARK(group_norm_fwd_omp)->Args({8, 64})->Args({64, 8});
BENCHMARK(group_norm_bwd_serial)->Args({8, 64})->Args({64, 8});
BENCHMARK(group_norm_bwd_omp)->Args({8, 64})->Args({64, 8});
BENCHMARK(softmax_fwd_serial);
BENCHMARK(softmax_fwd_omp);
BENCHMARK(upsample_fwd_serial);
BENCHMARK(upsample_fwd_omp);

BENCHMARK_MAIN();
