#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "priorcl/errors.hpp"
#include "priorcl/signal.hpp"

namespace priorcl {

// ---------------------------------------------------------------------------
// Power spectrum of one epoch: |P(k)|^2 for every DFT bin, plus the bin width.
// ---------------------------------------------------------------------------

struct Spectrum {
    std::vector<double> magnitudes_sq; // |P(k)|^2, k = 0..N-1
    double bin_hz = 0.0;               // sample_rate_hz / N
};

// Per-rhythm signal energies. Units are squared microvolts; only ratios and
// distances between features matter downstream.
struct PriorFeature {
    double e_delta = 0.0;
    double e_theta = 0.0;
    double e_alpha = 0.0;
    double e_beta = 0.0;

    std::array<double, 4> as_array() const { return {e_delta, e_theta, e_alpha, e_beta}; }
    double total() const { return e_delta + e_theta + e_alpha + e_beta; }
};

struct Band {
    double low_hz;
    double high_hz;
};

inline constexpr std::array<const char*, 4> kBandNames = {"delta", "theta", "alpha", "beta"};

// Rhythm bands as half-open intervals [low, high). Delta/theta and theta/alpha
// share an edge; half-openness keeps the shared bins singly counted. The
// 13-14 Hz gap between alpha and beta is intentional.
struct BandTable {
    std::array<Band, 4> bands = {{{1.0, 4.0}, {4.0, 8.0}, {8.0, 13.0}, {14.0, 30.0}}};
};

inline void validate(const BandTable& t) {
    for (std::size_t i = 0; i < t.bands.size(); ++i) {
        if (!(t.bands[i].low_hz < t.bands[i].high_hz))
            throw DomainError(std::string(kBandNames[i]) + " band has low >= high");
    }
    for (std::size_t i = 0; i < t.bands.size(); ++i) {
        for (std::size_t j = i + 1; j < t.bands.size(); ++j) {
            const Band& a = t.bands[i];
            const Band& b = t.bands[j];
            if (a.low_hz < b.high_hz && b.low_hz < a.high_hz)
                throw DomainError(std::string(kBandNames[i]) + " and " + kBandNames[j] +
                                  " bands overlap");
        }
    }
}

// ---------------------------------------------------------------------------
// DFT. Power-of-two lengths run the iterative radix-2 transform directly;
// every other length goes through the Bluestein chirp, whose convolution is
// again a power-of-two transform. Either path must reproduce the direct
// summation definition P(k) = sum_n x(n) exp(-2*pi*i*k*n/N).
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

using cdouble = std::complex<double>;

// roots[j] = exp(-2*pi*i*j/n) for j < n/2; n a power of two
inline std::vector<cdouble> fft_roots(std::size_t n) {
    std::vector<cdouble> r(n / 2);
    for (std::size_t j = 0; j < n / 2; ++j) {
        const double ang = -2.0 * kPi * static_cast<double>(j) / static_cast<double>(n);
        r[j] = cdouble(std::cos(ang), std::sin(ang));
    }
    return r;
}

inline void fft_pow2(std::vector<cdouble>& a, const std::vector<cdouble>& roots, bool inverse) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        const std::size_t stride = n / len;
        for (std::size_t block = 0; block < n; block += len) {
            for (std::size_t j = 0; j < half; ++j) {
                const cdouble w =
                    inverse ? std::conj(roots[stride * j]) : roots[stride * j];
                const cdouble u = a[block + j];
                const cdouble v = a[block + j + half] * w;
                a[block + j] = u + v;
                a[block + j + half] = u - v;
            }
        }
    }
    if (inverse) {
        const double inv = 1.0 / static_cast<double>(n);
        for (cdouble& x : a) x *= inv;
    }
}

// exp(-i*pi*k^2/n) with the angle reduced through k^2 mod 2n, which keeps the
// trig argument small for any epoch length.
inline cdouble chirp(std::uint64_t k, std::uint64_t n) {
    const std::uint64_t r = (k * k) % (2 * n);
    const double ang = -kPi * static_cast<double>(r) / static_cast<double>(n);
    return cdouble(std::cos(ang), std::sin(ang));
}

inline std::vector<cdouble> dft_complex(const std::vector<cdouble>& x) {
    const std::size_t n = x.size();
    if (n == 0) return {};
    if ((n & (n - 1)) == 0) {
        std::vector<cdouble> a = x;
        fft_pow2(a, fft_roots(n), false);
        return a;
    }
    std::size_t m = 1;
    while (m < 2 * n - 1) m <<= 1;
    const std::vector<cdouble> roots = fft_roots(m);

    std::vector<cdouble> a(m, cdouble(0.0, 0.0));
    std::vector<cdouble> b(m, cdouble(0.0, 0.0));
    for (std::size_t k = 0; k < n; ++k) {
        const cdouble c = chirp(k, n);
        a[k] = x[k] * c;
        b[k] = std::conj(c);
        if (k > 0) b[m - k] = std::conj(c);
    }
    fft_pow2(a, roots, false);
    fft_pow2(b, roots, false);
    for (std::size_t i = 0; i < m; ++i) a[i] *= b[i];
    fft_pow2(a, roots, true);

    std::vector<cdouble> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = chirp(k, n) * a[k];
    return out;
}

} // namespace detail

inline Spectrum dft_power(const std::vector<double>& samples, double sample_rate_hz) {
    if (samples.size() < 2) throw DomainError("spectrum needs at least 2 samples");
    if (sample_rate_hz <= 0.0) throw DomainError("spectrum needs a positive sampling rate");
    std::vector<detail::cdouble> x(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) x[i] = detail::cdouble(samples[i], 0.0);
    const std::vector<detail::cdouble> bins = detail::dft_complex(x);
    Spectrum s;
    s.magnitudes_sq.resize(bins.size());
    for (std::size_t k = 0; k < bins.size(); ++k) s.magnitudes_sq[k] = std::norm(bins[k]);
    s.bin_hz = sample_rate_hz / static_cast<double>(samples.size());
    return s;
}

inline Spectrum dft_power(const Epoch& epoch) {
    return dft_power(epoch.samples, epoch.sample_rate_hz);
}

// ---------------------------------------------------------------------------
// Band energies: E(band) = sum over non-negative-frequency bins with
// low <= f_k < high of |P(k)|^2 / N. Bin membership is decided by comparing
// k * rate against bound * N so integral band edges resolve exactly instead
// of through a rounded bin width.
// ---------------------------------------------------------------------------

inline PriorFeature band_energies(const Spectrum& spectrum, const BandTable& table = {}) {
    validate(table);
    const std::size_t n = spectrum.magnitudes_sq.size();
    if (n < 2) throw DomainError("spectrum is empty");
    const double rate = spectrum.bin_hz * static_cast<double>(n);
    const double nyquist = rate / 2.0;
    for (std::size_t b = 0; b < table.bands.size(); ++b) {
        if (table.bands[b].high_hz > nyquist)
            throw DomainError(std::string(kBandNames[b]) + " band reaches " +
                              std::to_string(table.bands[b].high_hz) + " Hz, above the " +
                              std::to_string(nyquist) + " Hz Nyquist limit");
    }
    std::array<double, 4> acc = {0.0, 0.0, 0.0, 0.0};
    const auto dn = static_cast<double>(n);
    for (std::size_t k = 0; k <= n / 2; ++k) {
        const double k_rate = static_cast<double>(k) * rate;
        for (std::size_t b = 0; b < table.bands.size(); ++b) {
            if (k_rate >= table.bands[b].low_hz * dn && k_rate < table.bands[b].high_hz * dn) {
                acc[b] += spectrum.magnitudes_sq[k] / dn;
                break;
            }
        }
    }
    return PriorFeature{acc[0], acc[1], acc[2], acc[3]};
}

inline PriorFeature compute_prior_feature(const Epoch& epoch, const BandTable& table = {}) {
    return band_energies(dft_power(epoch), table);
}

inline std::vector<PriorFeature> compute_prior_features(const std::vector<Epoch>& epochs,
                                                        const BandTable& table = {}) {
    std::vector<PriorFeature> out;
    out.reserve(epochs.size());
    for (const Epoch& e : epochs) out.push_back(compute_prior_feature(e, table));
    return out;
}

// ---------------------------------------------------------------------------
// Log-Euclidean dissimilarity between two prior features. The clamp keeps the
// identical-feature case finite while leaving it ranked most similar.
// ---------------------------------------------------------------------------

inline constexpr double kDissimilarityEps = 1e-12;

inline double dissimilarity(const PriorFeature& a, const PriorFeature& b,
                            double eps = kDissimilarityEps) {
    const std::array<double, 4> ea = a.as_array();
    const std::array<double, 4> eb = b.as_array();
    double sq = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        const double d = ea[i] - eb[i];
        sq += d * d;
    }
    return std::log(std::max(std::sqrt(sq), eps));
}

inline std::vector<double> dissimilarity_row(const PriorFeature& anchor,
                                             const std::vector<PriorFeature>& candidates,
                                             double eps = kDissimilarityEps) {
    if (candidates.empty()) throw DomainError("dissimilarity row needs at least one candidate");
    std::vector<double> out;
    out.reserve(candidates.size());
    for (const PriorFeature& c : candidates) out.push_back(dissimilarity(anchor, c, eps));
    return out;
}

} // namespace priorcl
