#pragma once

// Spherical grids and quadrature rules. Two samplings are supported: the
// equiangular lat/lon grid with trapezoidal weights, and the Gaussian grid
// whose colatitudes are Gauss-Legendre nodes in cos(theta), giving exact
// quadrature for polynomial integrands up to degree 2*nlat - 1.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace sphere {

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double four_pi = 4.0 * pi;

enum class GridKind { equiangular, gaussian };

inline const char* to_string(GridKind k) {
    return k == GridKind::equiangular ? "equiangular" : "gaussian";
}

struct GridSpec {
    GridKind kind = GridKind::equiangular;
    std::size_t nlat = 0;
    std::size_t nlon = 0;
    std::vector<double> colatitudes;   // [nlat], increasing
    std::vector<double> longitudes;    // [nlon], 2*pi*j/nlon
    std::vector<double> quad_weights;  // [nlat], per-point weight, delta_phi folded in

    bool same_sampling(const GridSpec& o) const {
        return kind == o.kind && nlat == o.nlat && nlon == o.nlon;
    }

    // Total quadrature weight over all grid points.
    double total_weight() const {
        double s = 0.0;
        for (double w : quad_weights) s += w;
        return s * static_cast<double>(nlon);
    }
};

namespace detail {

// Legendre polynomial P_n and its derivative at x, by upward recurrence.
inline void legendre_pn(std::size_t n, double x, double& pn, double& dpn) {
    double p0 = 1.0, p1 = x;
    if (n == 0) {
        pn = 1.0;
        dpn = 0.0;
        return;
    }
    for (std::size_t k = 2; k <= n; ++k) {
        const double kk = static_cast<double>(k);
        const double p2 = ((2.0 * kk - 1.0) * x * p1 - (kk - 1.0) * p0) / kk;
        p0 = p1;
        p1 = p2;
    }
    pn = p1;
    dpn = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
}

}  // namespace detail

// Equiangular grid: theta_i = pi*i/nlat (North pole row included, theta = pi
// absent), phi_j = 2*pi*j/nlon, weights omega_ij = 2*pi^2/(nlat*nlon) * sin(theta_i).
inline GridSpec build_equiangular(std::size_t nlat, std::size_t nlon) {
    if (nlat < 2 || nlon < 2)
        throw std::invalid_argument("build_equiangular: nlat and nlon must be >= 2");
    GridSpec g;
    g.kind = GridKind::equiangular;
    g.nlat = nlat;
    g.nlon = nlon;
    g.colatitudes.resize(nlat);
    g.quad_weights.resize(nlat);
    g.longitudes.resize(nlon);
    const double wfac = 2.0 * pi * pi / (static_cast<double>(nlat) * static_cast<double>(nlon));
    for (std::size_t i = 0; i < nlat; ++i) {
        g.colatitudes[i] = pi * static_cast<double>(i) / static_cast<double>(nlat);
        g.quad_weights[i] = wfac * std::sin(g.colatitudes[i]);
    }
    for (std::size_t j = 0; j < nlon; ++j)
        g.longitudes[j] = 2.0 * pi * static_cast<double>(j) / static_cast<double>(nlon);
    return g;
}

// Gaussian grid: cos(theta_i) are the roots of P_nlat, found by Newton
// iteration from the Chebyshev initial guess cos(pi*(i+0.75)/(nlat+0.5)).
inline GridSpec build_gaussian(std::size_t nlat, std::size_t nlon) {
    if (nlat < 1 || nlon < 2)
        throw std::invalid_argument("build_gaussian: need nlat >= 1 and nlon >= 2");
    GridSpec g;
    g.kind = GridKind::gaussian;
    g.nlat = nlat;
    g.nlon = nlon;
    g.colatitudes.resize(nlat);
    g.quad_weights.resize(nlat);
    g.longitudes.resize(nlon);
    const double dphi = 2.0 * pi / static_cast<double>(nlon);
    for (std::size_t i = 0; i < nlat; ++i) {
        // roots ordered by descending x, i.e. ascending colatitude
        double x = std::cos(pi * (static_cast<double>(i) + 0.75) /
                            (static_cast<double>(nlat) + 0.5));
        double pn = 0.0, dpn = 0.0;
        bool converged = false;
        for (int it = 0; it < 100; ++it) {
            detail::legendre_pn(nlat, x, pn, dpn);
            const double dx = pn / dpn;
            x -= dx;
            if (std::abs(dx) <= 1e-15) {
                converged = true;
                break;
            }
        }
        if (!converged)
            throw std::runtime_error("build_gaussian: Newton iteration failed at node " +
                                     std::to_string(i));
        detail::legendre_pn(nlat, x, pn, dpn);
        const double wgl = 2.0 / ((1.0 - x * x) * dpn * dpn);
        g.colatitudes[i] = std::acos(x);
        g.quad_weights[i] = wgl * dphi;
    }
    for (std::size_t j = 0; j < nlon; ++j)
        g.longitudes[j] = 2.0 * pi * static_cast<double>(j) / static_cast<double>(nlon);
    return g;
}

}  // namespace sphere
