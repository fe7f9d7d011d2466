#pragma once

#include <cstdint>
#include <stdexcept>

#include "foct/rng.hpp"
#include "foct/tensor.hpp"

namespace foct::perturb {

inline constexpr double kDefaultNoiseBound = 0.3;

// Uniform noise over [-bound, bound], one draw per feature element.
template <typename T>
Tensor<T> sample_noise(int n, int c, int h, int w, std::uint64_t seed,
                       double bound = kDefaultNoiseBound) {
    if (bound < 0) throw std::invalid_argument("sample_noise: negative bound");
    Tensor<T> out(n, c, h, w);
    Rng rng(seed);
    for (auto& v : out.data) v = static_cast<T>(rng.uniform(-bound, bound));
    return out;
}

// z~ = (z .* n) + z. The noise tensor is a constant; the result stays
// differentiable in z with local gradient (1 + n).
template <typename T>
Tensor<T> inject(const Tensor<T>& z, const Tensor<T>& noise) {
    check_same_shape(z, noise, "inject");
    Tensor<T> out(z.n, z.c, z.h, z.w);
    for (std::size_t i = 0; i < z.size(); ++i)
        out.data[i] = z.data[i] * noise.data[i] + z.data[i];
    return out;
}

}  // namespace foct::perturb
