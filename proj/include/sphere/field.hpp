#pragma once

// SphericalField: real-valued multi-channel samples on a GridSpec, stored
// row-major [channel][lat][lon]. The universal spatial carrier for every
// module in the library.

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "sphere/grid.hpp"

namespace sphere {

struct SphericalField {
    GridSpec grid;
    std::size_t channels = 0;
    std::vector<double> data;  // [channels][nlat][nlon]

    SphericalField() = default;
    SphericalField(GridSpec g, std::size_t c)
        : grid(std::move(g)), channels(c), data(c * grid.nlat * grid.nlon, 0.0) {}

    std::size_t npoints() const { return grid.nlat * grid.nlon; }

    double& at(std::size_t c, std::size_t i, std::size_t j) {
        return data[(c * grid.nlat + i) * grid.nlon + j];
    }
    double at(std::size_t c, std::size_t i, std::size_t j) const {
        return data[(c * grid.nlat + i) * grid.nlon + j];
    }

    double* channel(std::size_t c) { return data.data() + c * npoints(); }
    const double* channel(std::size_t c) const { return data.data() + c * npoints(); }
};

inline void require_same_sampling(const SphericalField& f, const GridSpec& g,
                                  const char* where) {
    if (!f.grid.same_sampling(g))
        throw std::invalid_argument(std::string(where) + ": grid/field shape mismatch");
    if (f.data.size() != f.channels * f.npoints())
        throw std::invalid_argument(std::string(where) + ": field storage inconsistent");
}

// Weighted spherical integral per channel: sum_ij u(x_ij) * omega_ij.
inline std::vector<double> integrate(const SphericalField& field, const GridSpec& grid) {
    require_same_sampling(field, grid, "integrate");
    std::vector<double> out(field.channels, 0.0);
    for (std::size_t c = 0; c < field.channels; ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < grid.nlat; ++i) {
            const double w = grid.quad_weights[i];
            double row = 0.0;
            for (std::size_t j = 0; j < grid.nlon; ++j) row += field.at(c, i, j);
            acc += w * row;
        }
        out[c] = acc;
    }
    return out;
}

inline std::vector<double> integrate(const SphericalField& field) {
    return integrate(field, field.grid);
}

}  // namespace sphere
