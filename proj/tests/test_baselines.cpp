#include "calib/baselines.hpp"

#include "calib/estimator.hpp"
#include "calib/synthetic.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace calib;

namespace {

LabeledDataset constant_binary(double p_pos, const std::vector<int>& labels)
{
    PredictionMatrix p(static_cast<Eigen::Index>(labels.size()), 2);
    p.col(0).setConstant(p_pos);
    p.col(1).setConstant(1.0 - p_pos);
    return LabeledDataset(std::move(p), labels);
}

// Equal-width ECE written as a literal loop over bins.
double oracle_ece(const LabeledDataset& d, int bins)
{
    double total = 0.0;
    for (int b = 0; b < bins; ++b) {
        const double lo = b / static_cast<double>(bins);
        const double hi = (b + 1) / static_cast<double>(bins);
        double conf = 0.0;
        double acc = 0.0;
        double cnt = 0.0;
        for (std::size_t i = 0; i < d.n(); ++i) {
            const double x = d.row(i)[0];
            const bool in = (x >= lo && x < hi) || (b == bins - 1 && x == 1.0);
            if (!in) continue;
            conf += x;
            acc += d.label(i) == 0 ? 1.0 : 0.0;
            cnt += 1.0;
        }
        if (cnt > 0) total += cnt / static_cast<double>(d.n()) * std::abs(acc / cnt - conf / cnt);
    }
    return total;
}

}  // namespace

TEST_CASE("binned ECE examples")
{
    CHECK(binned_ece_binary(constant_binary(0.7, {0, 0, 0, 0, 0, 0, 0, 1, 1, 1})) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(binned_ece_binary(constant_binary(0.8, {0, 0, 0, 0})) == doctest::Approx(0.2));
    CHECK_THROWS(binned_ece_binary(test::make_dataset({{0.2, 0.3, 0.5}}, {0})));
    CHECK_THROWS(binned_ece_binary(constant_binary(0.5, {0}), 0));
}

TEST_CASE("binned ECE agrees with a literal bin loop and has the expected structure")
{
    Rng rng(101);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 1 + rng.below(300);
        PredictionMatrix p(static_cast<Eigen::Index>(n), 2);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            // Mix in exact bin edges and the endpoints.
            const double u = rng.below(4) == 0 ? rng.below(16) / 15.0 : rng.uniform();
            p(static_cast<Eigen::Index>(i), 0) = u;
            p(static_cast<Eigen::Index>(i), 1) = 1.0 - u;
            y[i] = rng.uniform() < 0.5 ? 0 : 1;
        }
        const LabeledDataset d(p, y);
        const double ece = binned_ece_binary(d, 15);
        REQUIRE(ece == doctest::Approx(oracle_ece(d, 15)).epsilon(1e-12));
        REQUIRE(ece >= 0.0);
        REQUIRE(ece <= 1.0);

        // A single bin reduces to |mean(y == positive) - mean(p_pos)|.
        double acc = 0.0;
        double conf = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            acc += y[i] == 0;
            conf += p(static_cast<Eigen::Index>(i), 0);
        }
        REQUIRE(binned_ece_binary(d, 1) == doctest::Approx(std::abs(acc - conf) / static_cast<double>(n)).epsilon(1e-12));

        // Row order does not matter.
        std::vector<std::size_t> perm(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = n - 1 - i;
        REQUIRE(binned_ece_binary(d.subset(perm), 15) == doctest::Approx(ece).epsilon(1e-12));
        REQUIRE(binned_ece_binary(d.subset(perm), 10, BinningScheme::equal_count) ==
                doctest::Approx(binned_ece_binary(d, 10, BinningScheme::equal_count)).epsilon(1e-12));
    }
}

TEST_CASE("equal-count bins keep ties together")
{
    // Four tied predictions cannot be split even though 2 bins of 3 are requested.
    const auto d = test::make_dataset({{0.3, 0.7}, {0.3, 0.7}, {0.3, 0.7}, {0.3, 0.7}, {0.9, 0.1}, {0.9, 0.1}},
                                      {0, 1, 1, 1, 0, 0});
    const double ece = binned_ece_binary(d, 2, BinningScheme::equal_count);
    // Bins {0.3 x4} and {0.9 x2}: 4/6 * |0.25 - 0.3| + 2/6 * |1 - 0.9|.
    CHECK(ece == doctest::Approx(4.0 / 6.0 * 0.05 + 2.0 / 6.0 * 0.1));
}

TEST_CASE("clustered ECE")
{
    SUBCASE("one cluster is the distance between mean label and mean prediction")
    {
        const auto d = test::make_dataset({{0.2, 0.5, 0.3}, {0.6, 0.2, 0.2}, {0.1, 0.1, 0.8}, {0.3, 0.3, 0.4}}, {0, 2, 2, 1});
        Eigen::Vector3d acc(0.25, 0.25, 0.5);
        Eigen::Vector3d conf = d.predictions().colwise().mean().transpose();
        CHECK(clustered_ece_multiclass(d, 1, 0) == doctest::Approx((acc - conf).norm()));
        CHECK(clustered_ece_multiclass(d, 1, 0, 1.0) == doctest::Approx((acc - conf).lpNorm<1>()));
    }
    SUBCASE("constant predictions per cluster with matching labels tend to zero")
    {
        const std::vector<Eigen::Vector3d> centers{{0.7, 0.2, 0.1}, {0.1, 0.8, 0.1}, {0.2, 0.2, 0.6}};
        const std::size_t n = 60000;
        PredictionMatrix p(static_cast<Eigen::Index>(n), 3);
        for (std::size_t i = 0; i < n; ++i) p.row(static_cast<Eigen::Index>(i)) = centers[i % 3].transpose();
        const LabeledDataset d(p, sample_labels(p, 5));
        CHECK(clustered_ece_multiclass(d, 3, 0) < 0.01);
    }
    SUBCASE("deterministic for a fixed seed")
    {
        Scenario s;
        s.kind = ScenarioKind::multiclass_overconfident;
        s.classes = 3;
        s.seed = 3;
        const auto d = generate_dataset(s, 2000);
        CHECK(clustered_ece_multiclass(d, 30, 4) == clustered_ece_multiclass(d, 30, 4));
        CHECK(clustered_ece_multiclass(d, 30, 4) > 0.0);
    }
}

TEST_CASE("binning over-estimates on calibrated data relative to the CV estimate")
{
    Scenario s;
    s.seed = 77;
    const auto d = generate_dataset(s, 10000);
    const double ece = binned_ece_binary(d, 15);
    const double cv = estimate_ce_cv(d, MetricSpec::l1(), RecalibratorSpec{RecalibratorKind::isotonic}, 5, 0).estimate;
    CHECK(ece > 0.0);
    // ECE is on the scalar scale; the vector L1 estimate is twice that.
    CHECK(ece > cv / 2.0);
}
