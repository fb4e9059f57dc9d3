#pragma once

// Grid-to-grid resampling: bilinear interpolation with pole extension, and
// alias-free spectral resampling through the SHT.

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "sphere/field.hpp"
#include "sphere/grid.hpp"
#include "sphere/harmonics.hpp"

namespace sphere {

// Adds theta = 0 and/or theta = pi rows where absent. The pole value is the
// uniformly weighted mean of the closest latitude ring. Pole rows carry zero
// quadrature weight on the extended grid.
inline SphericalField extend_to_poles(const SphericalField& field) {
    const GridSpec& g = field.grid;
    const bool add_north = g.colatitudes.front() > 0.0;
    const bool add_south = g.colatitudes.back() < pi;
    if (!add_north && !add_south) return field;

    GridSpec eg = g;
    eg.nlat = g.nlat + (add_north ? 1 : 0) + (add_south ? 1 : 0);
    eg.colatitudes.clear();
    eg.quad_weights.clear();
    if (add_north) {
        eg.colatitudes.push_back(0.0);
        eg.quad_weights.push_back(0.0);
    }
    eg.colatitudes.insert(eg.colatitudes.end(), g.colatitudes.begin(), g.colatitudes.end());
    eg.quad_weights.insert(eg.quad_weights.end(), g.quad_weights.begin(),
                           g.quad_weights.end());
    if (add_south) {
        eg.colatitudes.push_back(pi);
        eg.quad_weights.push_back(0.0);
    }

    SphericalField out(eg, field.channels);
    const std::size_t row0 = add_north ? 1 : 0;
    for (std::size_t c = 0; c < field.channels; ++c) {
        for (std::size_t i = 0; i < g.nlat; ++i)
            for (std::size_t j = 0; j < g.nlon; ++j)
                out.at(c, i + row0, j) = field.at(c, i, j);
        if (add_north) {
            double mean = 0.0;
            for (std::size_t j = 0; j < g.nlon; ++j) mean += field.at(c, 0, j);
            mean /= static_cast<double>(g.nlon);
            for (std::size_t j = 0; j < g.nlon; ++j) out.at(c, 0, j) = mean;
        }
        if (add_south) {
            double mean = 0.0;
            for (std::size_t j = 0; j < g.nlon; ++j) mean += field.at(c, g.nlat - 1, j);
            mean /= static_cast<double>(g.nlon);
            for (std::size_t j = 0; j < g.nlon; ++j) out.at(c, eg.nlat - 1, j) = mean;
        }
    }
    return out;
}

// Four-weight bilinear interpolation in (theta, phi) with modular longitude
// arithmetic. Output latitudes beyond the input's range use pole-extension
// rows. Ties at exact grid latitudes resolve to weight zero for the upper
// neighbor, so resampling onto the same grid is the identity.
inline SphericalField bilinear_resample(const SphericalField& field,
                                        const GridSpec& out_grid) {
    const SphericalField src =
        (out_grid.colatitudes.front() < field.grid.colatitudes.front() ||
         out_grid.colatitudes.back() > field.grid.colatitudes.back())
            ? extend_to_poles(field)
            : field;
    const GridSpec& g = src.grid;
    const std::size_t nlon = g.nlon;
    const double dphi = 2.0 * pi / static_cast<double>(nlon);

    SphericalField out(out_grid, field.channels);
    for (std::size_t oi = 0; oi < out_grid.nlat; ++oi) {
        const double theta = out_grid.colatitudes[oi];
        // bracketing latitude interval via binary search
        const auto it =
            std::upper_bound(g.colatitudes.begin(), g.colatitudes.end(), theta);
        std::size_t i1 = static_cast<std::size_t>(it - g.colatitudes.begin());
        std::size_t i0 = i1 > 0 ? i1 - 1 : 0;
        if (i1 >= g.nlat) i1 = g.nlat - 1;
        const double t0 = g.colatitudes[i0], t1 = g.colatitudes[i1];
        const double wt = (i1 == i0 || theta <= t0) ? 0.0 : (theta - t0) / (t1 - t0);

        for (std::size_t oj = 0; oj < out_grid.nlon; ++oj) {
            const double phi = out_grid.longitudes[oj];
            const double pos = phi / dphi;
            std::size_t j0 = std::min(static_cast<std::size_t>(pos), nlon - 1);
            double wp = pos - static_cast<double>(j0);
            // snap to the node when the position is a rounding error away, so
            // coincident grids reproduce samples exactly
            if (wp < 1e-12) {
                wp = 0.0;
            } else if (wp > 1.0 - 1e-12) {
                j0 = (j0 + 1) % nlon;
                wp = 0.0;
            }
            const std::size_t j1 = (j0 + 1) % nlon;  // wrap-around at phi = 2*pi
            for (std::size_t c = 0; c < field.channels; ++c) {
                out.at(c, oi, oj) = (1.0 - wt) * (1.0 - wp) * src.at(c, i0, j0) +
                                    wt * (1.0 - wp) * src.at(c, i1, j0) +
                                    (1.0 - wt) * wp * src.at(c, i0, j1) +
                                    wt * wp * src.at(c, i1, j1);
            }
        }
    }
    return out;
}

// Alias-free resampling: forward SHT truncated to the smaller of the two
// grids' capacities, then synthesis on the output grid. Non-gaussian inputs
// are first moved to a gaussian grid of the same size by bilinear
// interpolation.
inline SphericalField spectral_resample(const SphericalField& field,
                                        const GridSpec& out_grid) {
    const SphericalField* src = &field;
    SphericalField moved;
    if (field.grid.kind != GridKind::gaussian) {
        moved = bilinear_resample(field, build_gaussian(field.grid.nlat, field.grid.nlon));
        src = &moved;
    }
    const std::size_t lmax = std::min(src->grid.nlat, out_grid.nlat);
    const std::size_t mmax = std::min(
        {lmax, src->grid.nlon / 2, (out_grid.nlon - 1) / 2 + 1});
    return sht_inverse(sht_forward(*src, lmax, mmax), out_grid);
}

}  // namespace sphere
