#include <catch2/catch_amalgamated.hpp>

#include "priorcl/tensor.hpp"

using priorcl::ShapeError;
using priorcl::Tensor;

TEST_CASE("zero construction and shape accounting", "[tensor]") {
    Tensor t({2, 3, 4});
    CHECK(t.rank() == 3);
    CHECK(t.dim(0) == 2);
    CHECK(t.dim(1) == 3);
    CHECK(t.dim(2) == 4);
    CHECK(t.size() == 24);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i] == 0.0);
}

TEST_CASE("construction from data validates element count", "[tensor]") {
    CHECK_NOTHROW(Tensor({2, 2}, {1.0, 2.0, 3.0, 4.0}));
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
}

TEST_CASE("row-major indexing", "[tensor]") {
    Tensor t({2, 3}, {0, 1, 2, 3, 4, 5});
    CHECK(t.at(0, 0) == 0.0);
    CHECK(t.at(0, 2) == 2.0);
    CHECK(t.at(1, 0) == 3.0);
    CHECK(t.at(1, 2) == 5.0);

    Tensor u({2, 2, 2}, {0, 1, 2, 3, 4, 5, 6, 7});
    CHECK(u.at(0, 1, 1) == 3.0);
    CHECK(u.at(1, 0, 1) == 5.0);
}

TEST_CASE("factories", "[tensor]") {
    Tensor f = Tensor::full({3}, 2.5);
    CHECK(f.size() == 3);
    CHECK(f[1] == 2.5);

    Tensor s = Tensor::scalar(7.0);
    CHECK(s.rank() == 1);
    CHECK(s.size() == 1);
    CHECK(s[0] == 7.0);

    Tensor v = Tensor::vector({1.0, 2.0});
    CHECK(v.rank() == 1);
    CHECK(v.dim(0) == 2);
}

TEST_CASE("shape requirements throw with axis detail", "[tensor]") {
    Tensor t({2, 3});
    CHECK_NOTHROW(priorcl::require_shape(t, {2, 3}, "x"));
    CHECK_THROWS_AS(priorcl::require_shape(t, {3, 2}, "x"), ShapeError);
    CHECK_THROWS_AS(priorcl::require_rank(t, 3, "x"), ShapeError);
    try {
        priorcl::require_shape(t, {2, 4}, "weights");
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("weights") != std::string::npos);
        CHECK(msg.find("axis 1") != std::string::npos);
    }
}

TEST_CASE("finiteness check", "[tensor]") {
    Tensor t({2}, {1.0, 2.0});
    CHECK(t.all_finite());
    t[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_FALSE(t.all_finite());
    t[1] = std::numeric_limits<double>::infinity();
    CHECK_FALSE(t.all_finite());
}
