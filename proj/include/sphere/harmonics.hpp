#pragma once

// Normalized associated Legendre evaluation and the spherical harmonic
// transform pair, factored as an FFT along longitude and a Legendre
// contraction along latitude.
//
// Conventions: Y_l^m = Phat_l^m(cos theta) e^{i m phi} with
// Phat_l^m = (-1)^m c_l^m P_l^m and c_l^m = sqrt((2l+1)/(4pi) (l-m)!/(l+m)!),
// so the harmonics are orthonormal in L^2(S^2). Only m >= 0 coefficients are
// stored; for real signals uhat_l^{-m} = (-1)^m conj(uhat_l^m).

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "sphere/fft.hpp"
#include "sphere/field.hpp"
#include "sphere/grid.hpp"

namespace sphere {

struct SpectralCoeffs {
    std::size_t lmax = 0;      // degrees 0..lmax-1
    std::size_t mmax = 0;      // orders 0..mmax-1, mmax <= lmax
    std::size_t channels = 1;
    std::vector<std::complex<double>> coeffs;  // [channels][lmax][mmax], zero above diagonal

    SpectralCoeffs() = default;
    SpectralCoeffs(std::size_t l, std::size_t m, std::size_t c = 1)
        : lmax(l), mmax(m), channels(c), coeffs(c * l * m, {0.0, 0.0}) {
        if (m > l) throw std::invalid_argument("SpectralCoeffs: mmax must be <= lmax");
    }

    std::complex<double>& at(std::size_t c, std::size_t l, std::size_t m) {
        return coeffs[(c * lmax + l) * mmax + m];
    }
    std::complex<double> at(std::size_t c, std::size_t l, std::size_t m) const {
        return coeffs[(c * lmax + l) * mmax + m];
    }
};

// Table of Phat_l^m(cos theta_i), optionally pre-multiplied with the
// per-latitude quadrature weight (longitudinal spacing divided out).
struct LegendreTable {
    std::size_t nlat = 0, lmax = 0, mmax = 0;
    bool weighted = false;
    std::vector<double> values;  // [nlat][lmax][mmax]

    double at(std::size_t i, std::size_t l, std::size_t m) const {
        return values[(i * lmax + l) * mmax + m];
    }
};

// Stable three-term recurrence in l at fixed m, seeded by the closed-form
// diagonal. The normalization is folded into the recurrence, so entries stay
// bounded up to lmax = 2048 and beyond.
inline LegendreTable legendre_table(std::size_t lmax, std::size_t mmax,
                                    std::span<const double> colatitudes) {
    if (mmax > lmax) throw std::invalid_argument("legendre_table: mmax must be <= lmax");
    LegendreTable t;
    t.nlat = colatitudes.size();
    t.lmax = lmax;
    t.mmax = mmax;
    t.values.assign(t.nlat * lmax * mmax, 0.0);

    for (std::size_t i = 0; i < t.nlat; ++i) {
        const double x = std::cos(colatitudes[i]);
        const double omx2 = (1.0 - x) * (1.0 + x);
        double* row = t.values.data() + i * lmax * mmax;
        for (std::size_t m = 0; m < mmax; ++m) {
            // Phat_m^m = (-1)^m sqrt((2m+1)/(4pi) * prod_i (1-x^2)(2i-1)/(2i))
            double pmm = 1.0;
            double fact = 1.0;
            for (std::size_t k = 1; k <= m; ++k) {
                pmm *= omx2 * fact / (fact + 1.0);
                fact += 2.0;
            }
            pmm = std::sqrt((2.0 * static_cast<double>(m) + 1.0) * pmm / four_pi);
            if (m & 1) pmm = -pmm;
            if (m < lmax) row[m * mmax + m] = pmm;
            if (m + 1 < lmax) {
                const double pmmp1 = x * std::sqrt(2.0 * static_cast<double>(m) + 3.0) * pmm;
                row[(m + 1) * mmax + m] = pmmp1;
                double oldfact = std::sqrt(2.0 * static_cast<double>(m) + 3.0);
                double pa = pmm, pb = pmmp1;
                for (std::size_t l = m + 2; l < lmax; ++l) {
                    const double ld = static_cast<double>(l);
                    const double md = static_cast<double>(m);
                    const double f = std::sqrt((4.0 * ld * ld - 1.0) / (ld * ld - md * md));
                    const double pl = (x * pb - pa / oldfact) * f;
                    row[l * mmax + m] = pl;
                    oldfact = f;
                    pa = pb;
                    pb = pl;
                }
            }
        }
    }
    return t;
}

// Table with the grid's per-latitude weight folded in (the L tensor of the
// forward transform).
inline LegendreTable weighted_legendre_table(std::size_t lmax, std::size_t mmax,
                                             const GridSpec& grid) {
    LegendreTable t = legendre_table(lmax, mmax, grid.colatitudes);
    const double nlon_over_dphi = static_cast<double>(grid.nlon) / (2.0 * pi);
    for (std::size_t i = 0; i < grid.nlat; ++i) {
        const double w = grid.quad_weights[i] * nlon_over_dphi;  // per-latitude weight
        double* row = t.values.data() + i * lmax * mmax;
        for (std::size_t k = 0; k < lmax * mmax; ++k) row[k] *= w;
    }
    t.weighted = true;
    return t;
}

// Default truncation: lmax = nlat, mmax = min(lmax, nlon/2 + 1).
inline std::size_t default_mmax(std::size_t lmax, std::size_t nlon) {
    return std::min(lmax, nlon / 2 + 1);
}

// Forward SHT on a Gaussian grid: longitudinal FFT carrying the 2*pi/nlon
// quadrature factor, then contraction with the weighted Legendre table.
inline SpectralCoeffs sht_forward(const SphericalField& field, std::size_t lmax,
                                  std::size_t mmax, const LegendreTable& table) {
    const GridSpec& g = field.grid;
    if (g.kind != GridKind::gaussian)
        throw std::invalid_argument("sht_forward: requires a gaussian grid");
    if (g.nlat < lmax || g.nlon < 2 * mmax)
        throw std::invalid_argument("sht_forward: resolution insufficient for lmax/mmax");
    if (!table.weighted || table.nlat != g.nlat || table.lmax < lmax || table.mmax < mmax)
        throw std::invalid_argument("sht_forward: table mismatch");

    SpectralCoeffs out(lmax, mmax, field.channels);
    const double fscale = 2.0 * pi / static_cast<double>(g.nlon);
    std::vector<std::complex<double>> ring;
    for (std::size_t c = 0; c < field.channels; ++c) {
        // G[i][m]: scaled longitudinal Fourier integral per latitude ring
        std::vector<std::complex<double>> G(g.nlat * mmax);
        for (std::size_t i = 0; i < g.nlat; ++i) {
            ring = rfft_bins(std::span<const double>(field.channel(c) + i * g.nlon, g.nlon),
                             mmax);
            for (std::size_t m = 0; m < mmax; ++m) G[i * mmax + m] = ring[m] * fscale;
        }
        for (std::size_t l = 0; l < lmax; ++l) {
            for (std::size_t m = 0; m <= std::min(l, mmax - 1); ++m) {
                std::complex<double> acc{0.0, 0.0};
                for (std::size_t i = 0; i < g.nlat; ++i)
                    acc += table.at(i, l, m) * G[i * mmax + m];
                out.at(c, l, m) = acc;
            }
        }
    }
    return out;
}

inline SpectralCoeffs sht_forward(const SphericalField& field, std::size_t lmax,
                                  std::size_t mmax) {
    return sht_forward(field, lmax, mmax, weighted_legendre_table(lmax, mmax, field.grid));
}

inline SpectralCoeffs sht_forward(const SphericalField& field) {
    const std::size_t lmax = field.grid.nlat;
    const std::size_t mmax = std::min(default_mmax(lmax, field.grid.nlon),
                                      field.grid.nlon / 2);
    return sht_forward(field, lmax, std::max<std::size_t>(mmax, 1));
}

// Pointwise synthesis on any grid kind: Legendre synthesis per ring followed
// by an inverse FFT. Orders at or above the grid's Nyquist are dropped.
inline SphericalField sht_inverse(const SpectralCoeffs& coeffs, const GridSpec& grid,
                                  const LegendreTable& table) {
    if (table.weighted || table.nlat != grid.nlat || table.lmax < coeffs.lmax ||
        table.mmax < coeffs.mmax)
        throw std::invalid_argument("sht_inverse: table mismatch");
    SphericalField out(grid, coeffs.channels);
    const std::size_t msynth = std::min(coeffs.mmax, (grid.nlon - 1) / 2 + 1);
    std::vector<std::complex<double>> bins(grid.nlon);
    for (std::size_t c = 0; c < coeffs.channels; ++c) {
        for (std::size_t i = 0; i < grid.nlat; ++i) {
            std::fill(bins.begin(), bins.end(), std::complex<double>{0.0, 0.0});
            for (std::size_t m = 0; m < msynth; ++m) {
                std::complex<double> h{0.0, 0.0};
                for (std::size_t l = m; l < coeffs.lmax; ++l)
                    h += coeffs.at(c, l, m) * table.at(i, l, m);
                if (m == 0) {
                    bins[0] = h;
                } else {
                    bins[m] = h;
                    bins[grid.nlon - m] = std::conj(h);
                }
            }
            const std::vector<double> ring = real_synthesis(bins);
            for (std::size_t j = 0; j < grid.nlon; ++j) out.at(c, i, j) = ring[j];
        }
    }
    return out;
}

inline SphericalField sht_inverse(const SpectralCoeffs& coeffs, const GridSpec& grid) {
    return sht_inverse(coeffs, grid,
                       legendre_table(coeffs.lmax, coeffs.mmax, grid.colatitudes));
}

}  // namespace sphere
