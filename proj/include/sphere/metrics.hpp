#pragma once

// Deterministic and probabilistic verification metrics plus spectral
// diagnostics. Spatial averages are quadrature-weighted integrals normalized
// by 4*pi, following the metric definitions.
//
// The two biased CRPS estimators (sorted-CDF form and spread/skill form) are
// implemented as genuinely separate code paths; they agree algebraically and
// the tests hold them to 1e-12 of each other.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sphere/field.hpp"
#include "sphere/grid.hpp"
#include "sphere/harmonics.hpp"
#include "sphere/rng.hpp"

namespace sphere {

enum class CrpsVariant { cdf, spread_skill, fair };

// Ensemble of fields, [member][channel][lat][lon] on a shared grid.
struct EnsembleField {
    GridSpec grid;
    std::size_t members = 0;
    std::size_t channels = 0;
    std::vector<double> values;  // [E][C][H][W]

    EnsembleField() = default;
    EnsembleField(GridSpec g, std::size_t e, std::size_t c)
        : grid(std::move(g)), members(e), channels(c),
          values(e * c * grid.nlat * grid.nlon, 0.0) {}

    std::size_t npoints() const { return grid.nlat * grid.nlon; }
    double& at(std::size_t e, std::size_t c, std::size_t i, std::size_t j) {
        return values[((e * channels + c) * grid.nlat + i) * grid.nlon + j];
    }
    double at(std::size_t e, std::size_t c, std::size_t i, std::size_t j) const {
        return values[((e * channels + c) * grid.nlat + i) * grid.nlon + j];
    }
};

struct RankHistogram {
    std::vector<double> counts;  // [E + 1], quadrature-weighted
    double total_weight = 0.0;
};

namespace detail {

inline void check_pair(const SphericalField& a, const SphericalField& b, const GridSpec& g,
                       const char* where) {
    require_same_sampling(a, g, where);
    require_same_sampling(b, g, where);
    if (a.channels != b.channels)
        throw std::invalid_argument(std::string(where) + ": channel count mismatch");
}

}  // namespace detail

// L_p error: p = 2 gives sqrt(1/(4*pi) int |u - u*|^2), p = 1 the mean
// absolute error.
inline std::vector<double> lp_error(const SphericalField& pred, const SphericalField& truth,
                                    const GridSpec& grid, int p) {
    detail::check_pair(pred, truth, grid, "lp_error");
    if (p != 1 && p != 2) throw std::invalid_argument("lp_error: p must be 1 or 2");
    std::vector<double> out(pred.channels, 0.0);
    for (std::size_t c = 0; c < pred.channels; ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < grid.nlat; ++i) {
            const double w = grid.quad_weights[i];
            for (std::size_t j = 0; j < grid.nlon; ++j) {
                const double d = pred.at(c, i, j) - truth.at(c, i, j);
                acc += w * (p == 2 ? d * d : std::abs(d));
            }
        }
        acc /= four_pi;
        out[c] = p == 2 ? std::sqrt(acc) : acc;
    }
    return out;
}

// Anomaly correlation coefficient. Returns nullopt for channels whose anomaly
// variance vanishes (undefined ratio).
inline std::vector<std::optional<double>> acc(const SphericalField& pred,
                                              const SphericalField& truth,
                                              const SphericalField& climatology,
                                              const GridSpec& grid) {
    detail::check_pair(pred, truth, grid, "acc");
    require_same_sampling(climatology, grid, "acc");
    if (climatology.channels != pred.channels)
        throw std::invalid_argument("acc: climatology channel mismatch");
    std::vector<std::optional<double>> out(pred.channels);
    for (std::size_t c = 0; c < pred.channels; ++c) {
        double num = 0.0, den_p = 0.0, den_t = 0.0;
        for (std::size_t i = 0; i < grid.nlat; ++i) {
            const double w = grid.quad_weights[i];
            for (std::size_t j = 0; j < grid.nlon; ++j) {
                const double ap = pred.at(c, i, j) - climatology.at(c, i, j);
                const double at = truth.at(c, i, j) - climatology.at(c, i, j);
                num += w * ap * at;
                den_p += w * ap * ap;
                den_t += w * at * at;
            }
        }
        if (den_p <= 0.0 || den_t <= 0.0)
            out[c] = std::nullopt;
        else
            out[c] = num / std::sqrt(den_p * den_t);
    }
    return out;
}

// Ensemble mean and unbiased (Bessel-corrected) variance.
inline std::pair<SphericalField, SphericalField> ensemble_stats(const EnsembleField& ens) {
    if (ens.members < 2)
        throw std::invalid_argument("ensemble_stats: variance needs at least two members");
    SphericalField mean(ens.grid, ens.channels);
    SphericalField var(ens.grid, ens.channels);
    const double ne = static_cast<double>(ens.members);
    for (std::size_t c = 0; c < ens.channels; ++c)
        for (std::size_t i = 0; i < ens.grid.nlat; ++i)
            for (std::size_t j = 0; j < ens.grid.nlon; ++j) {
                double m = 0.0;
                for (std::size_t e = 0; e < ens.members; ++e) m += ens.at(e, c, i, j);
                m /= ne;
                double v = 0.0;
                for (std::size_t e = 0; e < ens.members; ++e) {
                    const double d = ens.at(e, c, i, j) - m;
                    v += d * d;
                }
                mean.at(c, i, j) = m;
                var.at(c, i, j) = v / (ne - 1.0);
            }
    return {std::move(mean), std::move(var)};
}

inline SphericalField ensemble_mean(const EnsembleField& ens) {
    if (ens.members < 1) throw std::invalid_argument("ensemble_mean: empty ensemble");
    SphericalField mean(ens.grid, ens.channels);
    for (std::size_t c = 0; c < ens.channels; ++c)
        for (std::size_t i = 0; i < ens.grid.nlat; ++i)
            for (std::size_t j = 0; j < ens.grid.nlon; ++j) {
                double m = 0.0;
                for (std::size_t e = 0; e < ens.members; ++e) m += ens.at(e, c, i, j);
                mean.at(c, i, j) = m / static_cast<double>(ens.members);
            }
    return mean;
}

namespace detail {

// Sorted-CDF evaluation: with members ascending and the observation falling
// between ranks e* and e*+1,
//   CRPS = sum_{e<=e*} (2e-1)/N^2 (u* - u_e) + sum_{e>e*} (2N+1-2e)/N^2 (u_e - u*).
inline double crps_cdf_sorted(const std::vector<double>& sorted, double obs) {
    const double n = static_cast<double>(sorted.size());
    double acc = 0.0;
    for (std::size_t e = 1; e <= sorted.size(); ++e) {
        const double ue = sorted[e - 1];
        if (ue <= obs)
            acc += (2.0 * static_cast<double>(e) - 1.0) / (n * n) * (obs - ue);
        else
            acc += (2.0 * n + 1.0 - 2.0 * static_cast<double>(e)) / (n * n) * (ue - obs);
    }
    return acc;
}

// Spread/skill evaluation with the pairwise sum computed in O(N) from the
// sorted members: sum_{e,i} |u_e - u_i| = 2 sum_e (2e - 1 - N) u_(e).
inline double crps_spread_skill_sorted(const std::vector<double>& sorted, double obs,
                                       bool fair) {
    const std::size_t nsz = sorted.size();
    const double n = static_cast<double>(nsz);
    double skill = 0.0;
    for (double u : sorted) skill += std::abs(u - obs);
    skill /= n;
    double pairwise = 0.0;
    for (std::size_t e = 1; e <= nsz; ++e)
        pairwise += (2.0 * static_cast<double>(e) - 1.0 - n) * sorted[e - 1];
    pairwise *= 2.0;
    const double denom = fair ? 2.0 * n * (n - 1.0) : 2.0 * n * n;
    return skill - pairwise / denom;
}

}  // namespace detail

// Pointwise ensemble CRPS. The cdf and spread_skill variants are the two
// biased evaluations of the same integral; fair applies the 1/(2N(N-1))
// spread correction and requires at least two members.
inline double crps_pointwise(std::vector<double> ens, double obs, CrpsVariant variant) {
    if (ens.empty()) throw std::invalid_argument("crps_pointwise: empty ensemble");
    if (variant == CrpsVariant::fair && ens.size() < 2)
        throw std::invalid_argument("crps_pointwise: fair variant needs E >= 2");
    std::sort(ens.begin(), ens.end());
    switch (variant) {
        case CrpsVariant::cdf:
            return detail::crps_cdf_sorted(ens, obs);
        case CrpsVariant::spread_skill:
            return detail::crps_spread_skill_sorted(ens, obs, false);
        case CrpsVariant::fair:
            return detail::crps_spread_skill_sorted(ens, obs, true);
    }
    throw std::logic_error("crps_pointwise: unreachable");
}

// Quadrature-weighted spatial mean of the pointwise CRPS, per channel.
inline std::vector<double> crps_field(const EnsembleField& ens, const SphericalField& obs,
                                      const GridSpec& grid, CrpsVariant variant) {
    require_same_sampling(obs, grid, "crps_field");
    if (!ens.grid.same_sampling(grid) || ens.channels != obs.channels)
        throw std::invalid_argument("crps_field: ensemble/observation shape mismatch");
    std::vector<double> out(ens.channels, 0.0);
    std::vector<double> members(ens.members);
    for (std::size_t c = 0; c < ens.channels; ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < grid.nlat; ++i) {
            const double w = grid.quad_weights[i];
            for (std::size_t j = 0; j < grid.nlon; ++j) {
                for (std::size_t e = 0; e < ens.members; ++e) members[e] = ens.at(e, c, i, j);
                acc += w * crps_pointwise(members, obs.at(c, i, j), variant);
            }
        }
        out[c] = acc / four_pi;
    }
    return out;
}

// Spread/skill ratio with the sqrt((N+1)/N) finite-ensemble factor. Channels
// with zero skill report nullopt.
inline std::vector<std::optional<double>> ssr(const EnsembleField& ens,
                                              const SphericalField& obs,
                                              const GridSpec& grid) {
    require_same_sampling(obs, grid, "ssr");
    if (!ens.grid.same_sampling(grid) || ens.channels != obs.channels)
        throw std::invalid_argument("ssr: ensemble/observation shape mismatch");
    if (ens.members < 2) throw std::invalid_argument("ssr: needs at least two members");
    const auto [mean, var] = ensemble_stats(ens);
    std::vector<std::optional<double>> out(ens.channels);
    const double factor = std::sqrt((static_cast<double>(ens.members) + 1.0) /
                                    static_cast<double>(ens.members));
    for (std::size_t c = 0; c < ens.channels; ++c) {
        double spread2 = 0.0, skill2 = 0.0;
        for (std::size_t i = 0; i < grid.nlat; ++i) {
            const double w = grid.quad_weights[i];
            for (std::size_t j = 0; j < grid.nlon; ++j) {
                spread2 += w * var.at(c, i, j);
                const double d = mean.at(c, i, j) - obs.at(c, i, j);
                skill2 += w * d * d;
            }
        }
        if (skill2 <= 0.0)
            out[c] = std::nullopt;
        else
            out[c] = factor * std::sqrt(spread2 / skill2);
    }
    return out;
}

// Rank histogram: the observation's rank is the number of members strictly
// below it, with ties broken by uniform random placement among the equal
// values. Bins accumulate quadrature weights.
inline std::vector<RankHistogram> rank_histogram(const EnsembleField& ens,
                                                 const SphericalField& obs,
                                                 const GridSpec& grid, Rng& rng) {
    require_same_sampling(obs, grid, "rank_histogram");
    if (!ens.grid.same_sampling(grid) || ens.channels != obs.channels)
        throw std::invalid_argument("rank_histogram: ensemble/observation shape mismatch");
    std::vector<RankHistogram> out(ens.channels);
    for (auto& h : out) h.counts.assign(ens.members + 1, 0.0);
    for (std::size_t c = 0; c < ens.channels; ++c) {
        for (std::size_t i = 0; i < grid.nlat; ++i) {
            const double w = grid.quad_weights[i];
            for (std::size_t j = 0; j < grid.nlon; ++j) {
                const double o = obs.at(c, i, j);
                std::size_t below = 0, ties = 0;
                for (std::size_t e = 0; e < ens.members; ++e) {
                    const double u = ens.at(e, c, i, j);
                    if (u < o)
                        ++below;
                    else if (u == o)
                        ++ties;
                }
                std::size_t rank = below;
                if (ties > 0) rank += static_cast<std::size_t>(rng.below(ties + 1));
                out[c].counts[rank] += w;
                out[c].total_weight += w;
            }
        }
    }
    return out;
}

// Angular power spectral density: PSD(l) = sum_{|m|<=l} |uhat_l^m|^2, with
// the negative orders folded in through conjugate symmetry.
inline std::vector<std::vector<double>> angular_psd(const SphericalField& field) {
    const std::size_t lmax = field.grid.nlat;
    const std::size_t mmax = std::min(default_mmax(lmax, field.grid.nlon),
                                      field.grid.nlon / 2);
    const SpectralCoeffs c = sht_forward(field, lmax, std::max<std::size_t>(mmax, 1));
    std::vector<std::vector<double>> out(field.channels, std::vector<double>(lmax, 0.0));
    for (std::size_t ch = 0; ch < field.channels; ++ch)
        for (std::size_t l = 0; l < lmax; ++l) {
            double s = std::norm(c.at(ch, l, 0));
            for (std::size_t m = 1; m <= std::min(l, c.mmax - 1); ++m)
                s += 2.0 * std::norm(c.at(ch, l, m));
            out[ch][l] = s;
        }
    return out;
}

// Zonal power spectral density of one latitude ring:
// 2*pi*sin(theta) |dphi sum_j u e^{-im phi_j}|^2.
inline std::vector<std::vector<double>> zonal_psd(const SphericalField& field,
                                                  std::size_t lat_index) {
    if (lat_index >= field.grid.nlat)
        throw std::invalid_argument("zonal_psd: latitude index out of range");
    const std::size_t nlon = field.grid.nlon;
    const std::size_t mmax = nlon / 2 + 1;
    const double dphi = 2.0 * pi / static_cast<double>(nlon);
    const double ring = 2.0 * pi * std::sin(field.grid.colatitudes[lat_index]);
    std::vector<std::vector<double>> out(field.channels, std::vector<double>(mmax, 0.0));
    for (std::size_t c = 0; c < field.channels; ++c) {
        const auto bins = rfft_bins(
            std::span<const double>(field.channel(c) + lat_index * nlon, nlon), mmax);
        for (std::size_t m = 0; m < mmax; ++m) out[c][m] = ring * std::norm(bins[m] * dphi);
    }
    return out;
}

}  // namespace sphere
