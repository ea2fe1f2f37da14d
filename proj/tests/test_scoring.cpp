#include "doctest.h"

#include <cmath>

#include "ncb/scoring.hpp"

using namespace ncb;

namespace {
Mat from_rows(const std::vector<std::vector<double>>& rows) {
    Mat m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (int i = 0; i < m.rows; ++i) {
        for (int j = 0; j < m.cols; ++j) m.row(i)[j] = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
    }
    return m;
}
}  // namespace

TEST_CASE("maxsim hand-built example") {
    const Mat q = from_rows({{1, 0}, {0, 1}});
    const Mat d = from_rows({{0.8, 0.6}, {0.6, 0.8}});
    const Score s = maxsim(q, d);
    CHECK(s.value == doctest::Approx(1.6).epsilon(1e-15));
    CHECK(s.per_token_argmax == std::vector<int>{0, 1});
    CHECK(s.per_token_max[0] == doctest::Approx(0.8));
    CHECK(s.per_token_max[1] == doctest::Approx(0.8));
}

TEST_CASE("maxsim single identical unit vector scores 1") {
    const Mat q = from_rows({{1, 0, 0}});
    const Mat d = from_rows({{1, 0, 0}});
    CHECK(maxsim(q, d).value == 1.0);
}

TEST_CASE("maxsim tie-break picks lowest document row") {
    const Mat q = from_rows({{1, 0}});
    const Mat d = from_rows({{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}});
    CHECK(maxsim(q, d).per_token_argmax == std::vector<int>{0});
}

TEST_CASE("maxsim score equals sum of per-token maxima") {
    Rng rng(5);
    Mat q(6, 8), d(10, 8);
    for (double& v : q.a) v = rng.unit() * 2 - 1;
    for (double& v : d.a) v = rng.unit() * 2 - 1;
    const Score s = maxsim(q, d);
    double sum = 0.0;
    for (double v : s.per_token_max) sum += v;
    CHECK(std::fabs(s.value - sum) < 1e-9);
}

TEST_CASE("maxsim additivity over query rows") {
    Rng rng(6);
    Mat q(5, 4), d(7, 4);
    for (double& v : q.a) v = rng.unit() * 2 - 1;
    for (double& v : d.a) v = rng.unit() * 2 - 1;
    Mat q1(2, 4), q2(3, 4);
    std::copy(q.a.begin(), q.a.begin() + 8, q1.a.begin());
    std::copy(q.a.begin() + 8, q.a.end(), q2.a.begin());
    CHECK(maxsim(q, d).value ==
          doctest::Approx(maxsim(q1, d).value + maxsim(q2, d).value).epsilon(1e-12));
}

TEST_CASE("positive scaling keeps argmax and scales contribution") {
    Rng rng(8);
    Mat q(4, 6), d(9, 6);
    for (double& v : q.a) v = rng.unit() * 2 - 1;
    for (double& v : d.a) v = rng.unit() * 2 - 1;
    const Score before = maxsim(q, d);
    const double g = 2.0;
    Mat q2 = q;
    for (int r = 0; r < q.cols; ++r) q2.row(1)[r] *= g;
    const Score after = maxsim(q2, d);
    CHECK(after.per_token_argmax == before.per_token_argmax);
    CHECK(after.per_token_max[1] == doctest::Approx(g * before.per_token_max[1]).epsilon(1e-12));
    CHECK(after.value ==
          doctest::Approx(before.value + (g - 1) * before.per_token_max[1]).epsilon(1e-12));
}

TEST_CASE("maxsim errors") {
    const Mat q = from_rows({{1, 0}});
    Mat empty;
    empty.cols = 2;
    CHECK_THROWS_AS(maxsim(q, empty), data_error);
    const Mat wrong = from_rows({{1, 0, 0}});
    CHECK_THROWS_AS(maxsim(q, wrong), data_error);
}

TEST_CASE("mean_pool_numeric") {
    QueryEmbeddings q;
    q.e_pre = from_rows({{1, 0}, {0, 1}, {0.5, 0.5}});
    q.e = q.e_pre;
    q.tokens = {"a", "b", "c"};

    SUBCASE("two orthogonal flagged rows pool to norm 1/sqrt(2)") {
        q.numeric_mask = {1, 1, 0};
        const auto pooled = mean_pool_numeric(q);
        REQUIRE(pooled);
        CHECK((*pooled)[0] == 0.5);
        CHECK((*pooled)[1] == 0.5);
        CHECK(norm2(pooled->data(), 2) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
    }
    SUBCASE("single flagged row is returned as-is") {
        q.numeric_mask = {0, 1, 0};
        const auto pooled = mean_pool_numeric(q);
        REQUIRE(pooled);
        CHECK((*pooled)[0] == 0.0);
        CHECK((*pooled)[1] == 1.0);
    }
    SUBCASE("no numeric tokens yields nullopt") {
        q.numeric_mask = {0, 0, 0};
        CHECK(!mean_pool_numeric(q));
    }
}

TEST_CASE("s_cont picks the max dot product") {
    const Mat d = from_rows({{1, 0}, {0.9, 0.1}, {0, 1}});
    int arg = -1;
    const double v = s_cont({1.0, 0.0}, d, &arg);
    CHECK(v == 1.0);
    CHECK(arg == 0);
}
