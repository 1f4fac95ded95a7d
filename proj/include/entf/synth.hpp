// Synthetic hyperspectral scenes with ground truth: endmember spectra,
// simplex abundance maps, linear mixing, and additive Gaussian noise
// rescaled to an exact signal-to-noise ratio.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>

#include "entf/tensor.hpp"

namespace entf {

enum class EndmemberFamily { SmoothGaussianMixture, RandomPositive };
enum class AbundanceFamily { Dirichlet, SmoothFields };

struct SceneParams {
    std::size_t bands = 16;
    std::size_t width = 12;   // J
    std::size_t height = 12;  // K
    std::size_t endmembers = 3;
    std::optional<double> snr_db;  // empty: noiseless scene
    std::uint64_t seed = 0;
    EndmemberFamily endmember_family = EndmemberFamily::SmoothGaussianMixture;
    AbundanceFamily abundance_family = AbundanceFamily::Dirichlet;
};

struct SyntheticScene {
    DenseTensor endmembers;  // I x r
    DenseTensor abundances;  // r x J x K, each pixel on the simplex
    DenseTensor clean;       // endmembers *_1 abundances
    DenseTensor noisy;
    double snr_db;  // realized (after clamping), +inf when noiseless
    std::uint64_t seed;
};

/// Strictly positive spectra, one column per endmember, unit-max
/// normalized. The smooth family sums 2-4 Gaussian bumps over a small
/// positive floor so band-to-band curvature stays gentle.
inline DenseTensor gen_endmembers(std::size_t bands, std::size_t r, std::uint64_t seed,
                                  EndmemberFamily family) {
    if (r < 2)
        throw Error("gen_endmembers: need at least 2 endmembers");
    if (bands < r)
        throw Error("gen_endmembers: need at least as many bands as endmembers");

    std::mt19937_64 rng(seed);
    DenseTensor x({bands, r});
    std::vector<double> col(bands);
    for (std::size_t c = 0; c < r; ++c) {
        if (family == EndmemberFamily::RandomPositive) {
            for (std::size_t i = 0; i < bands; ++i)
                col[i] = detail::uniform_open_closed(rng, 0.0, 1.0);
        } else {
            std::fill(col.begin(), col.end(), 0.1);
            const std::size_t bumps = 2 + rng() % 3;
            for (std::size_t b = 0; b < bumps; ++b) {
                const double center = detail::canonical(rng) * static_cast<double>(bands - 1);
                const double sigma_hi = std::max(3.5, 0.3 * static_cast<double>(bands));
                const double sigma = detail::uniform_open_closed(rng, 3.0, sigma_hi);
                const double amp = detail::uniform_open_closed(rng, 0.3, 1.0);
                for (std::size_t i = 0; i < bands; ++i) {
                    const double t = (static_cast<double>(i) - center) / sigma;
                    col[i] += amp * std::exp(-0.5 * t * t);
                }
            }
        }
        const double peak = *std::max_element(col.begin(), col.end());
        for (std::size_t i = 0; i < bands; ++i)
            x(i, c) = col[i] / peak;
    }
    return x;
}

/// Abundance maps on the pixel simplex: nonnegative with per-pixel sums
/// renormalized to 1. Dirichlet pixels are i.i.d.; the smooth family takes
/// a softmax over random quadratic fields, giving spatially coherent maps.
inline DenseTensor gen_abundances(std::size_t r, std::size_t j, std::size_t k,
                                  std::uint64_t seed, AbundanceFamily family) {
    if (r < 2)
        throw Error("gen_abundances: need at least 2 endmembers");

    std::mt19937_64 rng(seed);
    DenseTensor y({r, j, k});
    const std::size_t pixels = j * k;

    if (family == AbundanceFamily::Dirichlet) {
        std::vector<double> e(r);
        for (std::size_t px = 0; px < pixels; ++px) {
            double sum = 0.0;
            for (std::size_t i = 0; i < r; ++i) {
                e[i] = -std::log(detail::uniform_open_closed(rng, 0.0, 1.0));
                sum += e[i];
            }
            for (std::size_t i = 0; i < r; ++i)
                y[i * pixels + px] = e[i] / sum;
        }
    } else {
        // One quadratic field per endmember on [-1,1]^2 coordinates.
        std::vector<std::array<double, 6>> coeff(r);
        for (auto& c : coeff)
            for (double& v : c)
                v = detail::uniform_open_closed(rng, -2.0, 2.0);
        for (std::size_t ju = 0; ju < j; ++ju)
            for (std::size_t kv = 0; kv < k; ++kv) {
                const double u = j > 1 ? 2.0 * static_cast<double>(ju) / (j - 1) - 1.0 : 0.0;
                const double v = k > 1 ? 2.0 * static_cast<double>(kv) / (k - 1) - 1.0 : 0.0;
                double norm = 0.0;
                for (std::size_t i = 0; i < r; ++i) {
                    const auto& c = coeff[i];
                    const double f = c[0] + c[1] * u + c[2] * v + c[3] * u * u +
                                     c[4] * u * v + c[5] * v * v;
                    const double w = std::exp(f);
                    y(i, ju, kv) = w;
                    norm += w;
                }
                for (std::size_t i = 0; i < r; ++i)
                    y(i, ju, kv) /= norm;
            }
    }

    // Renormalize so every pixel sums to 1 up to rounding.
    for (std::size_t px = 0; px < pixels; ++px) {
        double sum = 0.0;
        for (std::size_t i = 0; i < r; ++i)
            sum += y[i * pixels + px];
        for (std::size_t i = 0; i < r; ++i)
            y[i * pixels + px] /= sum;
    }
    return y;
}

inline double realized_snr_db(const DenseTensor& clean, const DenseTensor& noisy) {
    const double signal = frobenius_norm(clean);
    const double noise = frobenius_norm(sub(noisy, clean));
    if (noise == 0.0)
        return std::numeric_limits<double>::infinity();
    return 20.0 * std::log10(signal / noise);
}

/// Adds i.i.d. Gaussian noise rescaled post-draw so the pre-clamp SNR hits
/// the target exactly, then clamps at zero to keep the cube nonnegative.
inline DenseTensor add_noise(const DenseTensor& clean, double snr_db, std::uint64_t seed) {
    if (snr_db < 0.0)
        throw Error("add_noise: snr_db must be nonnegative");
    const double signal = frobenius_norm(clean);
    if (signal == 0.0)
        throw Error("add_noise: clean cube must be nonzero");

    std::mt19937_64 rng(seed);
    DenseTensor noise(clean.shape());
    for (double& v : noise.data())
        v = detail::gaussian(rng);
    const double scale_to = signal / (frobenius_norm(noise) * std::pow(10.0, snr_db / 20.0));

    DenseTensor noisy(clean.shape());
    for (std::size_t i = 0; i < noisy.size(); ++i)
        noisy[i] = std::max(0.0, clean[i] + scale_to * noise[i]);
    return noisy;
}

inline SyntheticScene make_scene(const SceneParams& params) {
    const std::uint64_t endmember_seed = params.seed;
    const std::uint64_t abundance_seed = params.seed + 0x9e3779b97f4a7c15ull;
    const std::uint64_t noise_seed = params.seed + 0x3c6ef372fe94f82aull;

    DenseTensor x = gen_endmembers(params.bands, params.endmembers, endmember_seed,
                                   params.endmember_family);
    DenseTensor y = gen_abundances(params.endmembers, params.width, params.height,
                                   abundance_seed, params.abundance_family);
    DenseTensor clean = einstein_product(x, y, 1);
    DenseTensor noisy = params.snr_db ? add_noise(clean, *params.snr_db, noise_seed) : clean;
    const double realized = realized_snr_db(clean, noisy);
    return {std::move(x), std::move(y), std::move(clean), std::move(noisy), realized,
            params.seed};
}

}  // namespace entf
