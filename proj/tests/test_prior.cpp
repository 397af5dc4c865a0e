#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "priorcl/prior.hpp"
#include "priorcl/rng.hpp"
#include "priorcl/signal.hpp"

using namespace priorcl;

namespace {

// Independent O(N^2) direct-sum transform in extended precision. Twiddles
// come from one table indexed by n*k mod N so the trig arguments never grow.
std::vector<double> direct_power(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<long double>> roots(n);
    const long double pi = 3.14159265358979323846264338327950288L;
    for (std::size_t j = 0; j < n; ++j) {
        const long double ang = -2.0L * pi * static_cast<long double>(j) / static_cast<long double>(n);
        roots[j] = {std::cos(ang), std::sin(ang)};
    }
    std::vector<double> power(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<long double> acc(0.0L, 0.0L);
        for (std::size_t m = 0; m < n; ++m) acc += static_cast<long double>(x[m]) * roots[(m * k) % n];
        power[k] = static_cast<double>(std::norm(acc));
    }
    return power;
}

std::vector<double> random_signal(std::size_t n, std::uint64_t seed) {
    Rng r(seed);
    std::vector<double> x(n);
    for (double& v : x) v = r.uniform(-1.0, 1.0);
    return x;
}

void check_against_direct(std::size_t n, std::uint64_t seed) {
    const std::vector<double> x = random_signal(n, seed);
    const Spectrum s = dft_power(x, 100.0);
    const std::vector<double> oracle = direct_power(x);
    REQUIRE(s.magnitudes_sq.size() == n);
    double scale = 0.0;
    for (double v : oracle) scale = std::max(scale, v);
    for (std::size_t k = 0; k < n; ++k) {
        const double err = std::abs(s.magnitudes_sq[k] - oracle[k]);
        REQUIRE(err <= 1e-9 * std::max(oracle[k], scale * 1e-6));
    }
}

std::vector<double> tone(std::size_t n, double rate, double hz, double amp, double phase) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = amp * std::cos(2.0 * M_PI * hz * static_cast<double>(i) / rate + phase);
    return x;
}

} // namespace

TEST_CASE("constant signal concentrates at DC", "[prior]") {
    const std::size_t n = 300;
    const double c = 2.5;
    Spectrum s = dft_power(std::vector<double>(n, c), 100.0);
    CHECK(s.magnitudes_sq[0] == Catch::Approx(c * n * c * n).epsilon(1e-12));
    for (std::size_t k = 1; k < n; ++k)
        CHECK(s.magnitudes_sq[k] <= 1e-15 * s.magnitudes_sq[0]);
    CHECK(s.bin_hz == Catch::Approx(100.0 / 300.0));
}

TEST_CASE("pure cosine at an exact bin splits between conjugate bins", "[prior]") {
    const std::size_t n = 3000;
    const double rate = 100.0;
    const double amp = 3.0;
    const std::size_t k0 = 60; // 2 Hz
    Spectrum s = dft_power(tone(n, rate, 2.0, amp, 0.0), rate);
    const double expect = amp * n / 2.0 * amp * n / 2.0;
    CHECK(s.magnitudes_sq[k0] == Catch::Approx(expect).epsilon(1e-9));
    CHECK(s.magnitudes_sq[n - k0] == Catch::Approx(expect).epsilon(1e-9));
    double rest = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        if (k != k0 && k != n - k0) rest += s.magnitudes_sq[k];
    CHECK(rest <= 1e-12 * expect);
}

TEST_CASE("transform matches the direct summation", "[prior]") {
    SECTION("power-of-two length") { check_against_direct(1024, 31); }
    SECTION("epoch length 3000") { check_against_direct(3000, 32); }
    SECTION("prime length") { check_against_direct(1021, 33); }
    SECTION("short odd length") { check_against_direct(9, 34); }
}

TEST_CASE("Parseval consistency", "[prior]") {
    const std::vector<double> x = random_signal(3000, 77);
    Spectrum s = dft_power(x, 100.0);
    double lhs = 0.0;
    for (double v : s.magnitudes_sq) lhs += v;
    lhs /= static_cast<double>(x.size());
    double sq = 0.0;
    for (double v : x) sq += v * v;
    CHECK(lhs == Catch::Approx(sq).epsilon(1e-9));
}

TEST_CASE("degenerate spectra are rejected", "[prior]") {
    CHECK_THROWS_AS(dft_power(std::vector<double>{}, 100.0), DomainError);
    CHECK_THROWS_AS(dft_power(std::vector<double>{1.0}, 100.0), DomainError);
    CHECK_THROWS_AS(dft_power(std::vector<double>(16, 0.0), 0.0), DomainError);
}

TEST_CASE("band energies of silence are zero", "[prior]") {
    Spectrum s = dft_power(std::vector<double>(3000, 0.0), 100.0);
    PriorFeature f = band_energies(s);
    CHECK(f.e_delta == 0.0);
    CHECK(f.e_theta == 0.0);
    CHECK(f.e_alpha == 0.0);
    CHECK(f.e_beta == 0.0);
}

TEST_CASE("a 2 Hz tone lands almost entirely in delta", "[prior]") {
    PriorFeature f = band_energies(dft_power(tone(3000, 100.0, 2.0, 1.0, 0.3), 100.0));
    CHECK(f.e_delta >= 0.99 * f.total());
}

TEST_CASE("equal tones in delta and alpha give equal energies", "[prior]") {
    std::vector<double> x = tone(3000, 100.0, 2.0, 1.0, 0.1);
    const std::vector<double> y = tone(3000, 100.0, 10.0, 1.0, 1.7);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += y[i];
    PriorFeature f = band_energies(dft_power(x, 100.0));
    CHECK(f.e_delta == Catch::Approx(f.e_alpha).epsilon(0.01));
}

TEST_CASE("shared band edges are singly counted", "[prior]") {
    // 4 Hz sits exactly on the theta side of the delta/theta edge.
    PriorFeature f = band_energies(dft_power(tone(3000, 100.0, 4.0, 1.0, 0.0), 100.0));
    CHECK(f.e_theta >= 0.99 * f.total());
    CHECK(f.e_delta <= 0.01 * f.total());
}

TEST_CASE("band energy scales quadratically with amplitude", "[prior]") {
    std::vector<double> x = random_signal(3000, 5);
    std::vector<double> sx = x;
    const double s = 3.5;
    for (double& v : sx) v *= s;
    PriorFeature a = band_energies(dft_power(x, 100.0));
    PriorFeature b = band_energies(dft_power(sx, 100.0));
    CHECK(b.e_delta == Catch::Approx(s * s * a.e_delta).epsilon(1e-12));
    CHECK(b.e_theta == Catch::Approx(s * s * a.e_theta).epsilon(1e-12));
    CHECK(b.e_alpha == Catch::Approx(s * s * a.e_alpha).epsilon(1e-12));
    CHECK(b.e_beta == Catch::Approx(s * s * a.e_beta).epsilon(1e-12));
}

TEST_CASE("bands above Nyquist are rejected by name", "[prior]") {
    Spectrum s = dft_power(random_signal(300, 1), 50.0); // Nyquist 25 Hz
    try {
        band_energies(s);
        FAIL("expected DomainError");
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("beta") != std::string::npos);
    }
}

TEST_CASE("band table validation", "[prior]") {
    BandTable bad;
    bad.bands[1] = {8.0, 4.0};
    CHECK_THROWS_AS(validate(bad), DomainError);
    BandTable overlap;
    overlap.bands[2] = {7.0, 13.0}; // reaches into theta
    CHECK_THROWS_AS(validate(overlap), DomainError);
    BandTable touching; // shared edges are fine under half-open intervals
    CHECK_NOTHROW(validate(touching));
}

TEST_CASE("synthetic deep sleep is delta-dominant", "[prior]") {
    Dataset ds = synth_dataset(4, 100.0, 2, 99);
    for (const Epoch& e : ds.epochs()) {
        if (e.label != SleepStage::N3) continue;
        PriorFeature f = compute_prior_feature(e);
        CHECK(f.e_delta >= 0.8 * f.total());
    }
}

TEST_CASE("dissimilarity closed-form cases", "[prior]") {
    PriorFeature a{1.0, 0.0, 0.0, 0.0};
    PriorFeature b{0.0, 1.0, 0.0, 0.0};
    CHECK(dissimilarity(a, a) == Catch::Approx(std::log(1e-12)).epsilon(1e-12));
    CHECK(dissimilarity(a, b) == Catch::Approx(std::log(std::sqrt(2.0))).epsilon(1e-12));
}

TEST_CASE("dissimilarity matches a direct evaluation on random pairs", "[prior]") {
    Rng r(123);
    for (int i = 0; i < 200; ++i) {
        PriorFeature a{r.uniform(0.0, 10.0), r.uniform(0.0, 10.0), r.uniform(0.0, 10.0),
                       r.uniform(0.0, 10.0)};
        PriorFeature b{r.uniform(0.0, 10.0), r.uniform(0.0, 10.0), r.uniform(0.0, 10.0),
                       r.uniform(0.0, 10.0)};
        const double norm = std::sqrt((a.e_delta - b.e_delta) * (a.e_delta - b.e_delta) +
                                      (a.e_theta - b.e_theta) * (a.e_theta - b.e_theta) +
                                      (a.e_alpha - b.e_alpha) * (a.e_alpha - b.e_alpha) +
                                      (a.e_beta - b.e_beta) * (a.e_beta - b.e_beta));
        const double oracle = std::log(std::max(norm, 1e-12));
        CHECK(dissimilarity(a, b) == Catch::Approx(oracle).margin(1e-12));
        CHECK(dissimilarity(a, b) == dissimilarity(b, a)); // bitwise symmetry
    }
}

TEST_CASE("log preserves distance rankings", "[prior]") {
    Rng r(321);
    for (int i = 0; i < 200; ++i) {
        PriorFeature a{r.uniform(0.0, 5.0), r.uniform(0.0, 5.0), r.uniform(0.0, 5.0),
                       r.uniform(0.0, 5.0)};
        PriorFeature b{r.uniform(0.0, 5.0), r.uniform(0.0, 5.0), r.uniform(0.0, 5.0),
                       r.uniform(0.0, 5.0)};
        PriorFeature c{r.uniform(0.0, 5.0), r.uniform(0.0, 5.0), r.uniform(0.0, 5.0),
                       r.uniform(0.0, 5.0)};
        auto norm = [](const PriorFeature& u, const PriorFeature& v) {
            double sq = 0.0;
            auto ua = u.as_array(), va = v.as_array();
            for (int j = 0; j < 4; ++j) sq += (ua[j] - va[j]) * (ua[j] - va[j]);
            return std::sqrt(sq);
        };
        if (norm(a, b) < norm(a, c)) CHECK(dissimilarity(a, b) < dissimilarity(a, c));
        if (norm(a, b) > norm(a, c)) CHECK(dissimilarity(a, b) > dissimilarity(a, c));
    }
}

TEST_CASE("dissimilarity row composes scalar calls", "[prior]") {
    Rng r(9);
    PriorFeature anchor{1.0, 2.0, 3.0, 4.0};
    std::vector<PriorFeature> cands;
    for (int i = 0; i < 128; ++i)
        cands.push_back({r.uniform(0.0, 4.0), r.uniform(0.0, 4.0), r.uniform(0.0, 4.0),
                         r.uniform(0.0, 4.0)});
    std::vector<double> row = dissimilarity_row(anchor, cands);
    REQUIRE(row.size() == cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i)
        CHECK(row[i] == dissimilarity(anchor, cands[i]));

    std::vector<PriorFeature> same(3, anchor);
    for (double d : dissimilarity_row(anchor, same)) CHECK(d == std::log(1e-12));
    CHECK_THROWS_AS(dissimilarity_row(anchor, {}), DomainError);
}
