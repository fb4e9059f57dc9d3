#pragma once

// The training objective: spatial CRPS, spectral CRPS, channel/temporal/
// rollout weighting, and analytic subgradients of the pointwise CRPS.
//
// The spectral term applies the real CRPS separately to the real and
// imaginary parts of each spherical harmonic coefficient and counts stored
// m > 0 coefficients twice, for their conjugate partners.

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "sphere/harmonics.hpp"
#include "sphere/metrics.hpp"

namespace sphere {

struct LossWeights {
    std::vector<double> w_c;       // per-channel weight
    std::vector<double> w_dt;      // per-channel temporal weight
    std::vector<double> w_n;       // per-rollout-step weight
    double lambda_spectral = 0.0;
    CrpsVariant variant = CrpsVariant::spread_skill;
    std::size_t lmax_sum = 0;      // 0: default nlat/2
};

// Spatially averaged pointwise CRPS; identical to metrics::crps_field.
inline std::vector<double> spatial_crps_loss(const EnsembleField& ens,
                                             const SphericalField& obs, const GridSpec& grid,
                                             CrpsVariant variant) {
    return crps_field(ens, obs, grid, variant);
}

// CRPS of each spectral coefficient, summed over 1 <= l <= lmax_sum and all
// stored orders, real and imaginary parts scored independently.
inline std::vector<double> spectral_crps_loss(const EnsembleField& ens,
                                              const SphericalField& obs,
                                              std::size_t lmax_sum, CrpsVariant variant) {
    if (ens.grid.kind != GridKind::gaussian)
        throw std::invalid_argument("spectral_crps_loss: requires a gaussian grid");
    if (!ens.grid.same_sampling(obs.grid) || ens.channels != obs.channels)
        throw std::invalid_argument("spectral_crps_loss: shape mismatch");
    if (lmax_sum == 0) lmax_sum = ens.grid.nlat / 2;
    if (lmax_sum + 1 > ens.grid.nlat)
        throw std::invalid_argument("spectral_crps_loss: lmax_sum exceeds grid capacity");

    const std::size_t lmax = lmax_sum + 1;
    const std::size_t mmax = std::min(lmax, ens.grid.nlon / 2);
    const LegendreTable table = weighted_legendre_table(lmax, mmax, ens.grid);

    // transform the observation and every member
    SphericalField member(ens.grid, ens.channels);
    std::vector<SpectralCoeffs> mc;
    mc.reserve(ens.members);
    for (std::size_t e = 0; e < ens.members; ++e) {
        std::copy(ens.values.begin() + e * ens.channels * ens.npoints(),
                  ens.values.begin() + (e + 1) * ens.channels * ens.npoints(),
                  member.data.begin());
        mc.push_back(sht_forward(member, lmax, mmax, table));
    }
    const SpectralCoeffs oc = sht_forward(obs, lmax, mmax, table);

    std::vector<double> out(ens.channels, 0.0);
    std::vector<double> re(ens.members), im(ens.members);
    for (std::size_t c = 0; c < ens.channels; ++c) {
        double acc = 0.0;
        for (std::size_t l = 1; l <= lmax_sum; ++l)
            for (std::size_t m = 0; m <= std::min(l, mmax - 1); ++m) {
                for (std::size_t e = 0; e < ens.members; ++e) {
                    re[e] = mc[e].at(c, l, m).real();
                    im[e] = mc[e].at(c, l, m).imag();
                }
                const double mult = m == 0 ? 1.0 : 2.0;
                acc += mult * crps_pointwise(re, oc.at(c, l, m).real(), variant);
                acc += mult * crps_pointwise(im, oc.at(c, l, m).imag(), variant);
            }
        out[c] = acc;
    }
    return out;
}

// Reciprocal of the mean spatial standard deviation of one-step differences,
// per channel. The series must hold at least two consecutive states.
inline std::vector<double> temporal_weights(const std::vector<SphericalField>& series,
                                            const GridSpec& grid) {
    if (series.size() < 2)
        throw std::invalid_argument("temporal_weights: need at least two samples");
    const std::size_t channels = series.front().channels;
    for (const auto& f : series) {
        require_same_sampling(f, grid, "temporal_weights");
        if (f.channels != channels)
            throw std::invalid_argument("temporal_weights: channel count mismatch");
    }
    std::vector<double> mean_std(channels, 0.0);
    for (std::size_t t = 0; t + 1 < series.size(); ++t) {
        for (std::size_t c = 0; c < channels; ++c) {
            double mean = 0.0;
            for (std::size_t i = 0; i < grid.nlat; ++i) {
                const double w = grid.quad_weights[i];
                for (std::size_t j = 0; j < grid.nlon; ++j)
                    mean += w * (series[t + 1].at(c, i, j) - series[t].at(c, i, j));
            }
            mean /= four_pi;
            double var = 0.0;
            for (std::size_t i = 0; i < grid.nlat; ++i) {
                const double w = grid.quad_weights[i];
                for (std::size_t j = 0; j < grid.nlon; ++j) {
                    const double d =
                        series[t + 1].at(c, i, j) - series[t].at(c, i, j) - mean;
                    var += w * d * d;
                }
            }
            mean_std[c] += std::sqrt(var / four_pi);
        }
    }
    std::vector<double> out(channels);
    for (std::size_t c = 0; c < channels; ++c) {
        const double s = mean_std[c] / static_cast<double>(series.size() - 1);
        if (s <= 0.0)
            throw std::invalid_argument("temporal_weights: channel has zero difference variance");
        out[c] = 1.0 / s;
    }
    return out;
}

// Triple-weighted objective over rollout steps and channels:
// sum_n sum_c w_c w_dt w_n (L_spatial + lambda L_spectral).
inline double combined_loss(
    const std::vector<std::pair<EnsembleField, SphericalField>>& rollout,
    const LossWeights& weights, const GridSpec& grid) {
    if (rollout.empty()) throw std::invalid_argument("combined_loss: empty rollout");
    const std::size_t channels = rollout.front().first.channels;
    if (weights.w_c.size() != channels || weights.w_dt.size() != channels)
        throw std::invalid_argument("combined_loss: weight/channel count mismatch");
    for (const auto* ws : {&weights.w_c, &weights.w_dt, &weights.w_n})
        for (double w : *ws)
            if (!(w >= 0.0) || !std::isfinite(w))
                throw std::invalid_argument("combined_loss: weights must be finite and >= 0");
    std::vector<double> w_n = weights.w_n;
    if (w_n.empty())
        w_n.assign(rollout.size(), 1.0 / static_cast<double>(rollout.size()));
    if (w_n.size() != rollout.size())
        throw std::invalid_argument("combined_loss: rollout weight count mismatch");

    double total = 0.0;
    for (std::size_t n = 0; n < rollout.size(); ++n) {
        const auto& [ens, obs] = rollout[n];
        const std::vector<double> spatial = spatial_crps_loss(ens, obs, grid, weights.variant);
        std::vector<double> spectral(channels, 0.0);
        if (weights.lambda_spectral != 0.0)
            spectral = spectral_crps_loss(ens, obs, weights.lmax_sum, weights.variant);
        for (std::size_t c = 0; c < channels; ++c)
            total += weights.w_c[c] * weights.w_dt[c] * w_n[n] *
                     (spatial[c] + weights.lambda_spectral * spectral[c]);
    }
    return total;
}

// Exact subgradient of crps_pointwise with respect to each member, with the
// tie convention sign(0) = 0:
//   d/du_e = sign(u_e - u*)/N - sum_i sign(u_e - u_i) / D,
// where D = N^2 for the biased variants and N(N-1) for fair.
inline std::vector<double> crps_subgradient(const std::vector<double>& ens, double obs,
                                            CrpsVariant variant) {
    if (ens.empty()) throw std::invalid_argument("crps_subgradient: empty ensemble");
    if (variant == CrpsVariant::fair && ens.size() < 2)
        throw std::invalid_argument("crps_subgradient: fair variant needs E >= 2");
    const double n = static_cast<double>(ens.size());
    const double denom =
        variant == CrpsVariant::fair ? n * (n - 1.0) : n * n;
    auto sign = [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); };
    std::vector<double> grad(ens.size(), 0.0);
    for (std::size_t e = 0; e < ens.size(); ++e) {
        double pair_sum = 0.0;
        for (std::size_t i = 0; i < ens.size(); ++i) pair_sum += sign(ens[e] - ens[i]);
        grad[e] = sign(ens[e] - obs) / n - (ens.size() > 1 ? pair_sum / denom : 0.0);
    }
    return grad;
}

}  // namespace sphere
