#pragma once

// Complex FFT used by the spherical harmonic transforms and spectra.
// Power-of-two lengths run through an iterative radix-2 kernel; all other
// lengths fall back to Bluestein's chirp-z algorithm, keeping the transform
// O(n log n) for every n.

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace sphere {

namespace detail {

constexpr double kPi = 3.14159265358979323846;

inline bool is_pow2(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

inline void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    if (n < 2) return;

    // bit reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * kPi / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

// Bluestein: express the length-n DFT as a convolution of chirped sequences,
// evaluated with a zero-padded radix-2 FFT.
inline void fft_bluestein(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    std::size_t m = 1;
    while (m < 2 * n + 1) m <<= 1;

    const double sign = inverse ? 1.0 : -1.0;
    std::vector<std::complex<double>> chirp(n);
    for (std::size_t k = 0; k < n; ++k) {
        // k^2 mod 2n keeps the chirp argument small and exact
        const std::size_t k2 = (k * k) % (2 * n);
        const double ang = sign * kPi * static_cast<double>(k2) / static_cast<double>(n);
        chirp[k] = {std::cos(ang), std::sin(ang)};
    }

    std::vector<std::complex<double>> x(m, {0.0, 0.0});
    std::vector<std::complex<double>> y(m, {0.0, 0.0});
    for (std::size_t k = 0; k < n; ++k) x[k] = a[k] * chirp[k];
    for (std::size_t k = 0; k < n; ++k) {
        y[k] = std::conj(chirp[k]);
        if (k > 0) y[m - k] = std::conj(chirp[k]);
    }

    fft_radix2(x, false);
    fft_radix2(y, false);
    for (std::size_t k = 0; k < m; ++k) x[k] *= y[k];
    fft_radix2(x, true);

    const double scale = 1.0 / static_cast<double>(m);
    for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * scale * chirp[k];
}

}  // namespace detail

// In-place DFT, sum convention: forward computes sum_j a_j e^{-2pi i jk/n},
// inverse computes sum_j a_j e^{+2pi i jk/n}. No 1/n normalization is applied.
inline void fft(std::vector<std::complex<double>>& a, bool inverse = false) {
    if (a.empty()) throw std::invalid_argument("fft: empty input");
    if (detail::is_pow2(a.size())) {
        detail::fft_radix2(a, inverse);
    } else {
        detail::fft_bluestein(a, inverse);
    }
}

// First nbins bins of the forward DFT of a real sequence.
inline std::vector<std::complex<double>> rfft_bins(std::span<const double> x,
                                                   std::size_t nbins) {
    std::vector<std::complex<double>> a(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) a[j] = {x[j], 0.0};
    fft(a);
    a.resize(nbins);
    return a;
}

// Real synthesis sum_m c_m e^{+2pi i m j/n} for a conjugate-symmetric
// spectrum given as full-length complex bins.
inline std::vector<double> real_synthesis(std::vector<std::complex<double>> bins) {
    fft(bins, true);
    std::vector<double> out(bins.size());
    for (std::size_t j = 0; j < bins.size(); ++j) out[j] = bins[j].real();
    return out;
}

}  // namespace sphere
