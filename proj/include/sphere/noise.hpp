#pragma once

// Spherical Gaussian diffusion process: an AR(1) recursion on spherical
// harmonic coefficients, z_n = phi z_{n-1} + sigma_l eta, parameterized in
// the spectral domain. Supplies temporally and spatially correlated latent
// noise.
//
// The l = 0 mode is excluded from the forcing: the normalization constant
// F_0 sums over l > 0, so sigma_0 = 0 keeps the process mean-free. For m > 0
// the real and imaginary parts of eta are drawn i.i.d. N(0, 1/2), for m = 0
// eta is real N(0, 1); the synthesized real field then has per-mode variance
// sigma_l^2 and a stationary angular PSD of (2l+1) sigma_l^2 / (1 - phi^2).

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "sphere/field.hpp"
#include "sphere/harmonics.hpp"
#include "sphere/rng.hpp"

namespace sphere {

struct DiffusionParams {
    double sigma = 0.0;
    double lambda = 0.0;
    double k_T = 0.0;
    std::size_t lmax = 0;
    double phi = 0.0;              // e^{-lambda}
    double F0 = 0.0;
    std::vector<double> sigma_l;   // [lmax], sigma_0 = 0
};

inline DiffusionParams diffusion_params(double sigma, double lambda, double k_T,
                                        std::size_t lmax) {
    if (sigma <= 0.0 || lambda <= 0.0 || k_T <= 0.0)
        throw std::invalid_argument("diffusion_params: sigma, lambda and k_T must be > 0");
    if (lmax < 2) throw std::invalid_argument("diffusion_params: lmax must be >= 2");
    DiffusionParams p;
    p.sigma = sigma;
    p.lambda = lambda;
    p.k_T = k_T;
    p.lmax = lmax;
    p.phi = std::exp(-lambda);
    double denom = 0.0;
    for (std::size_t l = 1; l < lmax; ++l) {
        const double ld = static_cast<double>(l);
        denom += (2.0 * ld + 1.0) * std::exp(-k_T * ld * (ld + 1.0));
    }
    if (!(denom > 0.0)) throw std::invalid_argument("diffusion_params: degenerate spectrum");
    p.F0 = sigma * std::sqrt(2.0 * pi * (1.0 - p.phi * p.phi) / denom);
    p.sigma_l.assign(lmax, 0.0);
    for (std::size_t l = 1; l < lmax; ++l) {
        const double ld = static_cast<double>(l);
        p.sigma_l[l] = p.F0 * std::exp(-0.5 * k_T * ld * (ld + 1.0));
    }
    return p;
}

struct NoiseState {
    SpectralCoeffs coeffs;
    std::size_t step = 0;
};

inline NoiseState make_noise_state(const DiffusionParams& p) {
    return NoiseState{SpectralCoeffs(p.lmax, p.lmax, 1), 0};
}

// One AR(1) update: zhat <- phi * zhat + sigma_l * eta, independent draws per
// stored (l, m) coefficient. With flip_sign the same generator stream yields
// the antithetic (noise-centered) partner.
inline NoiseState diffusion_step(const NoiseState& state, const DiffusionParams& params,
                                 Rng& rng, bool flip_sign = false) {
    if (state.coeffs.lmax != params.lmax || state.coeffs.channels != 1)
        throw std::invalid_argument("diffusion_step: state does not match params");
    NoiseState next = state;
    const double s = flip_sign ? -1.0 : 1.0;
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (std::size_t l = 1; l < params.lmax; ++l) {
        const double sl = params.sigma_l[l];
        for (std::size_t m = 0; m <= std::min(l, params.lmax - 1); ++m) {
            const std::complex<double> eta =
                m == 0 ? std::complex<double>(rng.normal(), 0.0)
                       : std::complex<double>(rng.normal() * inv_sqrt2,
                                              rng.normal() * inv_sqrt2);
            next.coeffs.at(0, l, m) = params.phi * state.coeffs.at(0, l, m) + sl * s * eta;
        }
    }
    next.step = state.step + 1;
    return next;
}

// Synthesize the current state onto a grid.
inline SphericalField noise_field(const NoiseState& state, const GridSpec& grid) {
    return sht_inverse(state.coeffs, grid);
}

// The eight spatial scales used for the model's noise conditioning channels,
// all sharing lambda = 1 and sigma = 1.
inline const std::vector<double>& noise_channel_scales() {
    static const std::vector<double> kt{3.08e-5, 1.23e-4, 4.93e-4, 1.97e-3,
                                        7.89e-3, 3.16e-2, 1.26e-1, 5.05e-1};
    return kt;
}

// A bundle of independent diffusion processes, one per channel, with optional
// antithetic pairing: with centering enabled, stream 2e+1 consumes the same
// eta draws as stream 2e with the sign flipped.
class NoiseStream {
public:
    NoiseStream(std::vector<DiffusionParams> params, const GridSpec& grid,
                std::uint64_t seed, bool centered = false, std::size_t member = 0)
        : params_(std::move(params)),
          grid_(grid),
          flip_(centered && member % 2 == 1) {
        // paired members share a generator stream; the odd one flips the sign
        const std::uint64_t stream = centered ? member / 2 * 2 : member;
        rng_ = Rng(seed ^ (stream * 0x9e3779b97f4a7c15ULL));
        for (const auto& p : params_) states_.push_back(make_noise_state(p));
    }

    // Advance every channel one step and synthesize the stacked field.
    SphericalField step() {
        SphericalField out(grid_, params_.size());
        for (std::size_t c = 0; c < params_.size(); ++c) {
            states_[c] = diffusion_step(states_[c], params_[c], rng_, flip_);
            const SphericalField f = noise_field(states_[c], grid_);
            for (std::size_t k = 0; k < f.npoints(); ++k)
                out.data[c * f.npoints() + k] = f.data[k];
        }
        return out;
    }

    bool flipped() const { return flip_; }

private:
    std::vector<DiffusionParams> params_;
    GridSpec grid_;
    bool flip_ = false;
    Rng rng_{0};
    std::vector<NoiseState> states_;
};

}  // namespace sphere
