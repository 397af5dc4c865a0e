#include <cmath>
#include <limits>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "priorcl/gradcheck.hpp"
#include "priorcl/loss.hpp"
#include "priorcl/mining.hpp"
#include "priorcl/rng.hpp"

using namespace priorcl;

namespace {

// Literal unstabilized transcription of the adaptive-temperature objective in
// extended precision; valid while s/tau stays far from overflow.
long double transcribed_loss(const std::vector<double>& sims, const ContrastPlan& plan) {
    long double acc = 0.0L;
    long double d = 0.0L;
    for (const PlanMember& n : plan.negatives)
        d += std::exp(static_cast<long double>(sims[n.view]) / n.temperature);
    for (const PlanMember& p : plan.positives) {
        const long double a = std::exp(static_cast<long double>(sims[p.view]) / p.temperature);
        acc += std::log(a / (a + d));
    }
    return -acc / static_cast<long double>(plan.positives.size());
}

struct RandomInstance {
    std::vector<double> sims;
    ContrastPlan plan;
};

RandomInstance random_instance(Rng& r, std::size_t p_count, std::size_t n_count, double tau_lo,
                               double tau_hi) {
    RandomInstance inst;
    const std::size_t views = 1 + p_count + n_count;
    inst.sims.resize(views);
    for (double& s : inst.sims) s = r.uniform(-1.0, 1.0);
    inst.plan.anchor = 0;
    for (std::size_t i = 0; i < p_count; ++i)
        inst.plan.positives.push_back({1 + i, r.uniform(tau_lo, tau_hi)});
    for (std::size_t i = 0; i < n_count; ++i)
        inst.plan.negatives.push_back({1 + p_count + i, r.uniform(tau_lo, tau_hi)});
    return inst;
}

// Central finite differences of the loss in one similarity slot.
double fd_loss_grad(std::vector<double> sims, const ContrastPlan& plan, std::size_t view,
                    double h = 1e-6) {
    sims[view] += h;
    const double up = loss_multipositive(sims, plan);
    sims[view] -= 2.0 * h;
    const double down = loss_multipositive(sims, plan);
    return (up - down) / (2.0 * h);
}

Tensor random_vec(std::size_t n, Rng& r) {
    Tensor t({n});
    for (std::size_t i = 0; i < n; ++i) t[i] = r.uniform(-1.0, 1.0);
    return t;
}

} // namespace

TEST_CASE("cosine similarity basics", "[loss]") {
    Rng r(1);
    Tensor z = random_vec(32, r);
    CHECK(cosine_similarity(z, z) == Catch::Approx(1.0).epsilon(1e-9));

    Tensor az = z, bz = z;
    for (std::size_t i = 0; i < z.size(); ++i) {
        az[i] *= 3.7;
        bz[i] *= 0.02;
    }
    Tensor w = random_vec(32, r);
    CHECK(cosine_similarity(az, w) == Catch::Approx(cosine_similarity(z, w)).epsilon(1e-9));
    CHECK(cosine_similarity(z, bz) == Catch::Approx(1.0).epsilon(1e-9));

    Tensor zero({32});
    CHECK(cosine_similarity(zero, w) == 0.0); // guarded, no NaN
    CHECK(std::isfinite(cosine_similarity_grad(zero, w).value));

    for (int i = 0; i < 50; ++i) {
        const double s = cosine_similarity(random_vec(8, r), random_vec(8, r));
        CHECK(std::abs(s) <= 1.0 + 1e-12);
    }
}

TEST_CASE("cosine backward matches finite differences", "[loss]") {
    Rng r(2);
    for (int rep = 0; rep < 5; ++rep) {
        Tensor zi = random_vec(32, r), zj = random_vec(32, r);
        CosineGrad g = cosine_similarity_grad(zi, zj);
        CHECK(g.value == cosine_similarity(zi, zj));
        const double h = 1e-6;
        for (std::size_t k = 0; k < zi.size(); ++k) {
            Tensor up = zi, down = zi;
            up[k] += h;
            down[k] -= h;
            const double fd =
                (cosine_similarity(up, zj) - cosine_similarity(down, zj)) / (2.0 * h);
            CHECK(g.d_zi[k] == Catch::Approx(fd).margin(1e-7));
        }
        for (std::size_t k = 0; k < zj.size(); ++k) {
            Tensor up = zj, down = zj;
            up[k] += h;
            down[k] -= h;
            const double fd =
                (cosine_similarity(zi, up) - cosine_similarity(zi, down)) / (2.0 * h);
            CHECK(g.d_zj[k] == Catch::Approx(fd).margin(1e-7));
        }
    }
}

TEST_CASE("similarity matrix is symmetric with unit diagonal", "[loss]") {
    Rng r(3);
    std::vector<Tensor> z;
    for (int i = 0; i < 6; ++i) z.push_back(random_vec(16, r));
    SimilarityMatrix m = similarity_matrix(z);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(m.at(i, i) == 1.0);
        for (std::size_t j = 0; j < 6; ++j) CHECK(m.at(i, j) == m.at(j, i));
    }
    validate_similarity_row(m.row(2));
}

TEST_CASE("single-positive loss closed forms", "[loss]") {
    SECTION("equal similarities give log(1 + negatives)") {
        for (std::size_t n : {std::size_t(1), std::size_t(7), std::size_t(100)}) {
            std::vector<double> sims(2 + n, 0.42);
            CHECK(loss_simclr(sims, 0, 1, 0.1) ==
                  Catch::Approx(std::log(1.0 + static_cast<double>(n))).epsilon(1e-12));
        }
    }
    SECTION("no negatives means zero loss") {
        std::vector<double> sims = {1.0, 0.3};
        CHECK(loss_simclr(sims, 0, 1, 0.05) == 0.0);
    }
    SECTION("matches an extended-precision direct evaluation") {
        Rng r(4);
        for (int rep = 0; rep < 100; ++rep) {
            std::vector<double> sims(12);
            for (double& s : sims) s = r.uniform(-1.0, 1.0);
            const double tau = 0.1;
            long double a = std::exp(static_cast<long double>(sims[1]) / tau);
            long double d = 0.0L;
            for (std::size_t i = 2; i < sims.size(); ++i)
                d += std::exp(static_cast<long double>(sims[i]) / tau);
            const auto oracle = static_cast<double>(-std::log(a / (a + d)));
            CHECK(loss_simclr(sims, 0, 1, tau) == Catch::Approx(oracle).margin(1e-10));
        }
    }
    SECTION("guards") {
        std::vector<double> sims = {0.0, 0.5, 0.1};
        CHECK_THROWS_AS(loss_simclr(sims, 0, 0, 0.1), DomainError);
        CHECK_THROWS_AS(loss_simclr(sims, 0, 1, 0.0), DomainError);
    }
}

TEST_CASE("multi-positive loss matches the transcription oracle", "[loss]") {
    Rng r(5);
    SECTION("the printed 10-positive 100-negative shape") {
        RandomInstance inst = random_instance(r, 10, 100, 0.05, 1.0);
        const auto oracle = static_cast<double>(transcribed_loss(inst.sims, inst.plan));
        CHECK(loss_multipositive(inst.sims, inst.plan) ==
              Catch::Approx(oracle).epsilon(1e-12));
    }
    SECTION("random shapes") {
        for (int rep = 0; rep < 100; ++rep) {
            const std::size_t p = 1 + r.below(8);
            const std::size_t n = 1 + r.below(40);
            RandomInstance inst = random_instance(r, p, n, 0.05, 1.0);
            const auto oracle = static_cast<double>(transcribed_loss(inst.sims, inst.plan));
            CHECK(loss_multipositive(inst.sims, inst.plan) ==
                  Catch::Approx(oracle).margin(1e-12).epsilon(1e-12));
        }
    }
    SECTION("empty positive set is rejected") {
        ContrastPlan plan;
        plan.anchor = 0;
        plan.negatives.push_back({1, 0.1});
        CHECK_THROWS_AS(loss_multipositive({0.0, 0.0}, plan), DomainError);
    }
}

TEST_CASE("objective reduction chain", "[loss]") {
    Rng r(6);
    SECTION("uniform temperature, one positive collapses to the single-positive loss") {
        for (int rep = 0; rep < 100; ++rep) {
            const std::size_t n = 1 + r.below(30);
            std::vector<double> sims(2 + n);
            for (double& s : sims) s = r.uniform(-1.0, 1.0);
            const double tau = r.uniform(0.05, 1.0);
            ContrastPlan plan;
            plan.anchor = 0;
            plan.positives.push_back({1, tau});
            for (std::size_t i = 0; i < n; ++i) plan.negatives.push_back({2 + i, tau});
            CHECK(loss_multipositive(sims, plan) ==
                  Catch::Approx(loss_simclr(sims, 0, 1, tau)).margin(1e-12).epsilon(1e-12));
        }
    }
    SECTION("uniform temperature equals the fixed-tau transcription") {
        for (int rep = 0; rep < 100; ++rep) {
            const std::size_t p = 2 + r.below(6);
            const std::size_t n = 1 + r.below(30);
            RandomInstance inst = random_instance(r, p, n, 0.1, 0.1); // all tau equal
            const auto oracle = static_cast<double>(transcribed_loss(inst.sims, inst.plan));
            CHECK(loss_multipositive(inst.sims, inst.plan) ==
                  Catch::Approx(oracle).margin(1e-12).epsilon(1e-12));
        }
    }
}

TEST_CASE("closed-form gradients match finite differences", "[loss]") {
    Rng r(7);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t p = 1 + r.below(20);
        const std::size_t n = 1 + r.below(200);
        RandomInstance inst = random_instance(r, p, n, 0.05, 1.0);
        PlanGradients g = loss_gradient_similarities(inst.sims, inst.plan);
        REQUIRE(g.positives.size() == p);
        REQUIRE(g.negatives.size() == n);
        for (std::size_t i = 0; i < p; ++i) {
            const double fd = fd_loss_grad(inst.sims, inst.plan, inst.plan.positives[i].view);
            CHECK(g.positives[i] ==
                  Catch::Approx(fd).epsilon(1e-6).margin(1e-8));
            CHECK(g.positives[i] <= 0.0);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double fd = fd_loss_grad(inst.sims, inst.plan, inst.plan.negatives[i].view);
            CHECK(g.negatives[i] ==
                  Catch::Approx(fd).epsilon(1e-6).margin(1e-8));
            CHECK(g.negatives[i] >= 0.0);
        }
    }
}

TEST_CASE("uniform instance has the closed-form gradient value", "[loss]") {
    const std::size_t p = 4, n = 9;
    const double tau = 0.2, s = 0.3;
    RandomInstance inst;
    inst.sims.assign(1 + p + n, s);
    inst.plan.anchor = 0;
    for (std::size_t i = 0; i < p; ++i) inst.plan.positives.push_back({1 + i, tau});
    for (std::size_t i = 0; i < n; ++i) inst.plan.negatives.push_back({1 + p + i, tau});
    PlanGradients g = loss_gradient_similarities(inst.sims, inst.plan);
    const double expect_p = -(1.0 / (tau * p)) * (static_cast<double>(n) / (1.0 + n));
    for (double gp : g.positives) CHECK(gp == Catch::Approx(expect_p).epsilon(1e-12));
    const double expect_n = (1.0 / tau) * (1.0 / (1.0 + n));
    for (double gn : g.negatives) CHECK(gn == Catch::Approx(expect_n).epsilon(1e-12));
}

TEST_CASE("hardness monotonicity", "[loss]") {
    RandomInstance inst;
    inst.sims.assign(1 + 5 + 20, 0.1);
    inst.plan.anchor = 0;
    for (std::size_t i = 0; i < 5; ++i) inst.plan.positives.push_back({1 + i, 0.07});
    for (std::size_t i = 0; i < 20; ++i) inst.plan.negatives.push_back({6 + i, 0.07});

    double prev_p = -std::numeric_limits<double>::infinity();
    double prev_n = -std::numeric_limits<double>::infinity();
    for (double s = -1.0; s <= 1.0; s += 0.05) {
        inst.sims[1] = s; // first positive
        const double gp =
            std::abs(loss_gradient_similarities(inst.sims, inst.plan).positives[0]);
        if (prev_p != -std::numeric_limits<double>::infinity()) CHECK(gp < prev_p);
        prev_p = gp;
    }
    inst.sims[1] = 0.1;
    for (double s = -1.0; s <= 1.0; s += 0.05) {
        inst.sims[6] = s; // first negative
        const double gn = loss_gradient_similarities(inst.sims, inst.plan).negatives[0];
        CHECK(gn > prev_n);
        prev_n = gn;
    }
}

TEST_CASE("losses stay finite at extreme temperatures", "[loss]") {
    Rng r(8);
    for (double tau : {1e-3, 1e-2, 1.0, 10.0}) {
        const std::size_t n = 10000;
        std::vector<double> sims(2 + n);
        for (double& s : sims) s = r.uniform(-1.0, 1.0);
        ContrastPlan plan;
        plan.anchor = 0;
        plan.positives.push_back({1, tau});
        for (std::size_t i = 0; i < n; ++i)
            plan.negatives.push_back({2 + i, i % 2 == 0 ? tau : 10.0});
        const double loss = loss_multipositive(sims, plan);
        CHECK(std::isfinite(loss));
        PlanGradients g = loss_gradient_similarities(sims, plan);
        for (double v : g.positives) CHECK(std::isfinite(v));
        for (double v : g.negatives) CHECK(std::isfinite(v));
    }
}

TEST_CASE("batch loss aggregates anchors", "[loss]") {
    Rng r(9);
    std::vector<Tensor> z;
    for (int i = 0; i < 8; ++i) z.push_back(random_vec(16, r));
    std::vector<PriorFeature> feats;
    for (int i = 0; i < 8; ++i)
        feats.push_back({r.uniform(0.0, 3.0), r.uniform(0.0, 3.0), r.uniform(0.0, 3.0),
                         r.uniform(0.0, 3.0)});
    auto plans = plan_batch(feats, 2, TempSchedule{0.05, 0.1});
    SimilarityMatrix m = similarity_matrix(z);
    LossBreakdown bd = batch_loss(m, plans);
    REQUIRE(bd.per_anchor.size() == plans.size());
    double mean = 0.0;
    for (double v : bd.per_anchor) mean += v;
    mean /= static_cast<double>(bd.per_anchor.size());
    CHECK(bd.total == Catch::Approx(mean).epsilon(1e-15));
    for (std::size_t i = 0; i < plans.size(); ++i) {
        CHECK(bd.grad_wrt_similarities[i].positives.size() == plans[i].positives.size());
        CHECK(bd.grad_wrt_similarities[i].negatives.size() == plans[i].negatives.size());
    }
}

TEST_CASE("projection-space gradients match finite differences", "[loss]") {
    Rng r(10);
    const std::size_t views = 6, dim = 5;
    std::vector<Tensor> z;
    for (std::size_t i = 0; i < views; ++i) z.push_back(random_vec(dim, r));
    std::vector<PriorFeature> feats;
    for (std::size_t i = 0; i < views; ++i)
        feats.push_back({r.uniform(0.0, 3.0), r.uniform(0.0, 3.0), r.uniform(0.0, 3.0),
                         r.uniform(0.0, 3.0)});
    auto plans = plan_batch(feats, 2, TempSchedule{0.05, 0.1});

    auto total = [&plans](const std::vector<Tensor>& zz) {
        return batch_loss(similarity_matrix(zz), plans).total;
    };
    LossBreakdown bd = batch_loss(similarity_matrix(z), plans);
    std::vector<Tensor> dz = backward_to_views(z, plans, bd);
    const double h = 1e-6;
    for (std::size_t v = 0; v < views; ++v) {
        for (std::size_t k = 0; k < dim; ++k) {
            std::vector<Tensor> up = z, down = z;
            up[v][k] += h;
            down[v][k] -= h;
            const double fd = (total(up) - total(down)) / (2.0 * h);
            CHECK(dz[v][k] == Catch::Approx(fd).epsilon(1e-5).margin(1e-8));
        }
    }
}

TEST_CASE("fused loss node differentiates through the tape", "[loss]") {
    Rng r(11);
    const std::size_t views = 6, dim = 4;
    std::vector<PriorFeature> feats;
    for (std::size_t i = 0; i < views; ++i)
        feats.push_back({r.uniform(0.0, 3.0), r.uniform(0.0, 3.0), r.uniform(0.0, 3.0),
                         r.uniform(0.0, 3.0)});
    auto plans = plan_batch(feats, 2, TempSchedule{0.05, 0.1});

    std::vector<Tensor> base;
    for (std::size_t i = 0; i < views; ++i) base.push_back(random_vec(dim, r));

    // Leaves feed the fused node through an elementwise op so the pullback
    // has to flow through intermediate tape nodes as well.
    auto report = finite_diff_check(
        base,
        [&plans](Tape& t, const std::vector<NodeId>& in) {
            std::vector<NodeId> zs;
            zs.reserve(in.size());
            for (NodeId id : in) zs.push_back(t.scale(id, 1.5));
            return contrastive_node(t, zs, plans);
        },
        1e-5, 1e-5, 1e-8);
    INFO("max diff " << report.max_abs_diff);
    CHECK(report.pass);
}

TEST_CASE("gradient curves reproduce the temperature orderings", "[loss]") {
    GradientCurveConfig cfg; // 10 positives, 100 negatives, others at 0.5 / 0.0
    SECTION("hard positive: colder is steeper") {
        double prev = std::numeric_limits<double>::infinity();
        for (double tau : {0.05, 0.07, 0.1, 1.0}) {
            const double g = std::abs(gradient_at(cfg, tau, -0.5));
            CHECK(g < prev);
            prev = g;
        }
    }
    SECTION("hard negative: colder is steeper") {
        GradientCurveConfig ncfg = cfg;
        ncfg.sweep_positive = false;
        double prev = std::numeric_limits<double>::infinity();
        for (double tau : {0.05, 0.07, 0.1, 1.0}) {
            const double g = std::abs(gradient_at(ncfg, tau, 0.9));
            CHECK(g < prev);
            prev = g;
        }
    }
    SECTION("easy positives feel temperature weakly") {
        // Absolute spread at the easy end is an order of magnitude below the
        // hard end's.
        double easy_lo = std::numeric_limits<double>::infinity(), easy_hi = 0.0;
        double hard_lo = std::numeric_limits<double>::infinity(), hard_hi = 0.0;
        for (double tau : {0.05, 0.07, 0.1, 1.0}) {
            const double e = std::abs(gradient_at(cfg, tau, 0.999));
            const double h = std::abs(gradient_at(cfg, tau, -0.5));
            easy_lo = std::min(easy_lo, e);
            easy_hi = std::max(easy_hi, e);
            hard_lo = std::min(hard_lo, h);
            hard_hi = std::max(hard_hi, h);
        }
        CHECK(easy_hi - easy_lo < 0.1 * (hard_hi - hard_lo));
    }
    SECTION("table layout") {
        GradientCurveConfig small;
        small.p_count = 2;
        small.n_count = 3;
        small.taus = {0.1, 1.0};
        small.points = 5;
        auto table = gradient_curve(small);
        REQUIRE(table.size() == 10);
        CHECK(table.front().tau == 0.1);
        CHECK(table.front().s == -1.0);
        CHECK(table.back().tau == 1.0);
        CHECK(table.back().s == 1.0);
        for (const auto& pt : table) CHECK(std::isfinite(pt.grad));
    }
}
