#pragma once

// Spherical convolutions: global spectral convolutions via the convolution
// theorem, and local anisotropic discrete-continuous (DISCO) convolutions
// with a Hann-windowed Morlet filter basis.
//
// DISCO operators are assembled once per grid pair: the filter is rotated
// analytically to each output latitude (at longitude zero), evaluated at all
// input points inside the cutoff disk, and the input quadrature weight is
// folded into the stored entry. Longitude shifts reuse the same entries, so
// applications are circular correlations over the longitude index.

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sphere/field.hpp"
#include "sphere/grid.hpp"
#include "sphere/harmonics.hpp"

namespace sphere {

// Morlet-type filter basis on the cutoff disk: Fourier modes along the local
// chart axes, tapered by the Hann window h(t') = cos^2(pi/2 t'). Each complex
// (l_w, m_w) pair is split into separate real basis functions; the (0, 0)
// pair is purely real.
struct FilterBasis {
    double theta_cutoff = 0.0;
    std::vector<std::pair<int, int>> indices;  // (l_w, m_w)

    std::size_t n_pairs() const { return indices.size(); }

    // Complex basis function b at disk coordinates (theta, phi); zero outside
    // the cutoff. h(0) = 1, h(cutoff) = 0.
    std::complex<double> eval(std::size_t b, double theta, double phi) const {
        if (b >= indices.size()) throw std::invalid_argument("FilterBasis::eval: bad index");
        const double tp = theta / theta_cutoff;
        if (tp > 1.0) return {0.0, 0.0};
        const double c = std::cos(0.5 * pi * tp);
        const double h = c * c;
        const double arg = pi * tp *
                           (static_cast<double>(indices[b].first) * std::sin(phi) +
                            static_cast<double>(indices[b].second) * std::cos(phi));
        return {h * std::cos(arg), h * std::sin(arg)};
    }

    // Real basis functions: real part for every pair, imaginary part for all
    // pairs other than (0, 0).
    std::size_t n_real() const {
        std::size_t n = 0;
        for (const auto& [l, m] : indices) n += (l == 0 && m == 0) ? 1 : 2;
        return n;
    }

    double eval_real(std::size_t k, double theta, double phi) const {
        std::size_t b = 0;
        for (; b < indices.size(); ++b) {
            const std::size_t parts = (indices[b].first == 0 && indices[b].second == 0) ? 1 : 2;
            if (k < parts) break;
            k -= parts;
        }
        if (b == indices.size()) throw std::invalid_argument("FilterBasis::eval_real: bad index");
        const std::complex<double> v = eval(b, theta, phi);
        return k == 0 ? v.real() : v.imag();
    }
};

// Default basis: the five Fourier index pairs shown in the filter-basis
// figure, yielding 9 real basis functions.
inline FilterBasis morlet_basis(double theta_cutoff) {
    if (theta_cutoff <= 0.0) throw std::invalid_argument("morlet_basis: cutoff must be > 0");
    return FilterBasis{theta_cutoff, {{0, 0}, {0, 1}, {0, 2}, {2, 1}, {2, 2}}};
}

inline FilterBasis isotropic_basis(double theta_cutoff) {
    if (theta_cutoff <= 0.0) throw std::invalid_argument("isotropic_basis: cutoff must be > 0");
    return FilterBasis{theta_cutoff, {{0, 0}}};
}

namespace detail {

// Coordinates of an input point in the filter chart centered at the output
// point (theta_out, 0): colatitude = great-circle distance, azimuth measured
// from the southward meridian (gamma = 0 convention).
struct ChartCoord {
    double dist;
    double azimuth;
};

inline ChartCoord chart_coordinates(double theta_out, double theta_in, double dphi) {
    const double st_o = std::sin(theta_out), ct_o = std::cos(theta_out);
    const double st_i = std::sin(theta_in), ct_i = std::cos(theta_in);
    const double cd = std::cos(dphi);
    const double x = ct_o * st_i * cd - st_o * ct_i;  // component along e_theta
    const double y = st_i * std::sin(dphi);           // component along e_phi
    const double z = st_o * st_i * cd + ct_o * ct_i;  // cos(distance)
    return {std::atan2(std::hypot(x, y), z), std::atan2(y, x)};
}

}  // namespace detail

struct DiscoEntry {
    std::size_t h_in;
    std::size_t w_rel;
    double value;  // basis value times input quadrature weight
    double base;   // plain basis value, used by the transposed contraction
};

struct DiscoOperator {
    GridSpec in_grid;
    GridSpec out_grid;
    std::size_t n_basis = 0;  // real basis functions
    std::size_t stride = 1;   // nlon_in / nlon_out
    // entries grouped by basis function and output latitude
    std::vector<std::vector<std::vector<DiscoEntry>>> rows;  // [k][h_out]

    const std::vector<DiscoEntry>& row(std::size_t k, std::size_t h_out) const {
        return rows[k][h_out];
    }
};

// Per-channel-pair mixing weights for DISCO applications: [c_out][c_in][k].
struct MixTensor {
    std::size_t c_out = 0, c_in = 0, k = 0;
    std::vector<double> w;

    MixTensor() = default;
    MixTensor(std::size_t co, std::size_t ci, std::size_t kk)
        : c_out(co), c_in(ci), k(kk), w(co * ci * kk, 0.0) {}
    double& at(std::size_t o, std::size_t i, std::size_t b) {
        return w[(o * c_in + i) * k + b];
    }
    double at(std::size_t o, std::size_t i, std::size_t b) const {
        return w[(o * c_in + i) * k + b];
    }
};

inline DiscoOperator assemble_disco(const GridSpec& in_grid, const GridSpec& out_grid,
                                    const FilterBasis& basis) {
    if (out_grid.nlon == 0 || in_grid.nlon % out_grid.nlon != 0)
        throw std::invalid_argument(
            "assemble_disco: output longitudes must be a uniform subset of the input");
    DiscoOperator op;
    op.in_grid = in_grid;
    op.out_grid = out_grid;
    op.n_basis = basis.n_real();
    op.stride = in_grid.nlon / out_grid.nlon;
    op.rows.assign(op.n_basis, std::vector<std::vector<DiscoEntry>>(out_grid.nlat));

    for (std::size_t h = 0; h < out_grid.nlat; ++h) {
        const double theta_out = out_grid.colatitudes[h];
        std::size_t support = 0;
        for (std::size_t hi = 0; hi < in_grid.nlat; ++hi) {
            const double theta_in = in_grid.colatitudes[hi];
            // cheap meridional reject before the per-column scan
            if (std::abs(theta_in - theta_out) >= basis.theta_cutoff) continue;
            const double w_in = in_grid.quad_weights[hi];
            for (std::size_t wj = 0; wj < in_grid.nlon; ++wj) {
                const auto cc =
                    detail::chart_coordinates(theta_out, theta_in, in_grid.longitudes[wj]);
                if (cc.dist >= basis.theta_cutoff) continue;
                ++support;
                for (std::size_t k = 0; k < op.n_basis; ++k) {
                    const double b = basis.eval_real(k, cc.dist, cc.azimuth);
                    op.rows[k][h].push_back({hi, wj, b * w_in, b});
                }
            }
        }
        if (support == 0)
            throw std::invalid_argument(
                "assemble_disco: empty filter support (cutoff below grid spacing)");
    }
    return op;
}

// y[c_out, h, w] = sum_{c_in, k} mix[c_out, c_in, k]
//                  sum_entries psi[k, h, h', w'] u[c_in, h', (w' + w*stride) mod nlon_in]
inline SphericalField disco_apply(const DiscoOperator& op, const SphericalField& field,
                                  const MixTensor& mix) {
    require_same_sampling(field, op.in_grid, "disco_apply");
    if (mix.c_in != field.channels || mix.k != op.n_basis)
        throw std::invalid_argument("disco_apply: mix tensor shape mismatch");

    const std::size_t nlon_in = op.in_grid.nlon;
    const std::size_t nlon_out = op.out_grid.nlon;
    const std::size_t nlat_out = op.out_grid.nlat;

    // t[k][c_in][h][w]
    std::vector<double> t(op.n_basis * mix.c_in * nlat_out * nlon_out, 0.0);
    for (std::size_t k = 0; k < op.n_basis; ++k)
        for (std::size_t h = 0; h < nlat_out; ++h)
            for (const DiscoEntry& e : op.rows[k][h])
                for (std::size_t c = 0; c < mix.c_in; ++c) {
                    const double* u = field.channel(c) + e.h_in * nlon_in;
                    double* dst = t.data() + ((k * mix.c_in + c) * nlat_out + h) * nlon_out;
                    std::size_t col = e.w_rel;
                    for (std::size_t w = 0; w < nlon_out; ++w) {
                        dst[w] += e.value * u[col];
                        col += op.stride;
                        if (col >= nlon_in) col -= nlon_in;
                    }
                }

    SphericalField out(op.out_grid, mix.c_out);
    const std::size_t plane = nlat_out * nlon_out;
    for (std::size_t o = 0; o < mix.c_out; ++o) {
        double* y = out.channel(o);
        for (std::size_t c = 0; c < mix.c_in; ++c)
            for (std::size_t k = 0; k < op.n_basis; ++k) {
                const double wkc = mix.at(o, c, k);
                if (wkc == 0.0) continue;
                const double* src = t.data() + (k * mix.c_in + c) * plane;
                for (std::size_t p = 0; p < plane; ++p) y[p] += wkc * src[p];
            }
    }
    return out;
}

// Transposed DISCO convolution mapping fields on the output grid back to the
// input grid. The stored entries carry the input grid's quadrature weight;
// the transpose re-weights them with the output grid's weight, making the
// pair adjoint under the quadrature inner products of their grids.
inline SphericalField disco_transpose_apply(const DiscoOperator& op,
                                            const SphericalField& field,
                                            const MixTensor& mix) {
    require_same_sampling(field, op.out_grid, "disco_transpose_apply");
    if (mix.c_in == 0 || mix.k != op.n_basis)
        throw std::invalid_argument("disco_transpose_apply: mix tensor shape mismatch");
    if (mix.c_out != field.channels)
        throw std::invalid_argument("disco_transpose_apply: mix tensor shape mismatch");

    const std::size_t nlon_in = op.in_grid.nlon;
    const std::size_t nlon_out = op.out_grid.nlon;

    // s[k][c_out][h_out][w] = sum_o mix contributions deferred; accumulate raw
    SphericalField out(op.in_grid, mix.c_in);
    std::vector<double> vrow(nlon_out);
    for (std::size_t k = 0; k < op.n_basis; ++k)
        for (std::size_t h = 0; h < op.out_grid.nlat; ++h) {
            const double w_out = op.out_grid.quad_weights[h];
            for (std::size_t ci = 0; ci < mix.c_in; ++ci) {
                // fold the channel mix first: v[w] = sum_co mix[co,ci,k] field[co,h,w]
                std::fill(vrow.begin(), vrow.end(), 0.0);
                for (std::size_t co = 0; co < mix.c_out; ++co) {
                    const double wkc = mix.at(co, ci, k);
                    if (wkc == 0.0) continue;
                    const double* v = field.channel(co) + h * nlon_out;
                    for (std::size_t w = 0; w < nlon_out; ++w) vrow[w] += wkc * v[w];
                }
                for (const DiscoEntry& e : op.rows[k][h]) {
                    const double scale = e.base * w_out;
                    double* dst = out.channel(ci) + e.h_in * nlon_in;
                    std::size_t col = e.w_rel;
                    for (std::size_t w = 0; w < nlon_out; ++w) {
                        dst[col] += scale * vrow[w];
                        col += op.stride;
                        if (col >= nlon_in) col -= nlon_in;
                    }
                }
            }
        }
    return out;
}

// Axisymmetric spectral kernel khat_l^0 per (channel_out, channel_in) pair.
struct SpectralKernel {
    std::size_t c_out = 0, c_in = 0, lmax = 0;
    std::vector<double> k;  // [c_out][c_in][lmax]

    SpectralKernel() = default;
    SpectralKernel(std::size_t co, std::size_t ci, std::size_t l)
        : c_out(co), c_in(ci), lmax(l), k(co * ci * l, 0.0) {}
    double& at(std::size_t o, std::size_t i, std::size_t l) {
        return k[(o * c_in + i) * lmax + l];
    }
    double at(std::size_t o, std::size_t i, std::size_t l) const {
        return k[(o * c_in + i) * lmax + l];
    }
};

// Global convolution via the convolution theorem: the output coefficient
// (l, m) is uhat_l^m * khat_l^0, summed over input channels.
inline SphericalField spectral_conv(const SphericalField& field, const SpectralKernel& kernel) {
    if (field.grid.kind != GridKind::gaussian)
        throw std::invalid_argument("spectral_conv: requires a gaussian grid");
    if (kernel.c_in != field.channels)
        throw std::invalid_argument("spectral_conv: kernel channel mismatch");
    const std::size_t lmax = std::min(kernel.lmax, field.grid.nlat);
    const std::size_t mmax = std::min(lmax, field.grid.nlon / 2);
    const SpectralCoeffs c = sht_forward(field, lmax, mmax);
    SpectralCoeffs y(lmax, mmax, kernel.c_out);
    for (std::size_t o = 0; o < kernel.c_out; ++o)
        for (std::size_t i = 0; i < kernel.c_in; ++i)
            for (std::size_t l = 0; l < lmax; ++l) {
                const double kl = kernel.at(o, i, l);
                if (kl == 0.0) continue;
                for (std::size_t m = 0; m <= std::min(l, mmax - 1); ++m)
                    y.at(o, l, m) += c.at(i, l, m) * kl;
            }
    return sht_inverse(y, field.grid);
}

}  // namespace sphere
