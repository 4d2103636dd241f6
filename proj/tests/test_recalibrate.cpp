#include "calib/recalibrate.hpp"

#include "calib/losses.hpp"
#include "calib/synthetic.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

using namespace calib;

namespace {

// Brute-force monotone least squares on a grid of step 1/steps (n <= 3).
std::vector<double> grid_isotonic(const std::vector<double>& ys, int steps)
{
    const std::size_t n = ys.size();
    std::vector<int> idx(n, 0);
    std::vector<double> best;
    double best_sse = std::numeric_limits<double>::infinity();
    for (;;) {
        bool monotone = true;
        for (std::size_t i = 1; i < n; ++i) monotone = monotone && idx[i] >= idx[i - 1];
        if (monotone) {
            double sse = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double v = idx[i] / static_cast<double>(steps);
                sse += (v - ys[i]) * (v - ys[i]);
            }
            if (sse < best_sse) {
                best_sse = sse;
                best.assign(n, 0.0);
                for (std::size_t i = 0; i < n; ++i) best[i] = idx[i] / static_cast<double>(steps);
            }
        }
        std::size_t pos = 0;
        while (pos < n && ++idx[pos] > steps) idx[pos++] = 0;
        if (pos == n) break;
    }
    return best;
}

double kmeans_inertia(const PredictionMatrix& pts, const std::vector<int>& assign, int clusters)
{
    PredictionMatrix c = PredictionMatrix::Zero(clusters, pts.cols());
    std::vector<double> cnt(static_cast<std::size_t>(clusters), 0.0);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        c.row(assign[static_cast<std::size_t>(i)]) += pts.row(i);
        cnt[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])] += 1.0;
    }
    for (int j = 0; j < clusters; ++j)
        if (cnt[static_cast<std::size_t>(j)] > 0) c.row(j) /= cnt[static_cast<std::size_t>(j)];
    double s = 0.0;
    for (Eigen::Index i = 0; i < pts.rows(); ++i) s += (pts.row(i) - c.row(assign[static_cast<std::size_t>(i)])).squaredNorm();
    return s;
}

LabeledDataset calibrated_binary(std::size_t n, std::uint64_t seed)
{
    Scenario s;
    s.seed = seed;
    return generate_dataset(s, n);
}

}  // namespace

TEST_CASE("fit_isotonic_binary examples")
{
    const std::vector<double> x1{0.1, 0.9};
    const std::vector<double> y1{0.0, 1.0};
    CHECK(fit_isotonic_binary(x1, y1).fitted == std::vector<double>{0.0, 1.0});

    const std::vector<double> x2{0.1, 0.2, 0.3};
    const std::vector<double> y2{1.0, 0.0, 1.0};
    const auto fit = fit_isotonic_binary(x2, y2);
    const auto oracle = grid_isotonic(y2, 100);
    REQUIRE(oracle.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(fit.fitted[i] == doctest::Approx(oracle[i]));
    CHECK(fit.fitted == std::vector<double>{0.5, 0.5, 1.0});

    const std::vector<double> x3{0.4, 0.4, 0.4, 0.4};
    const std::vector<double> y3{1.0, 0.0, 0.0, 1.0};
    const auto pooled = fit_isotonic_binary(x3, y3);
    CHECK(pooled.values.size() == 1);
    CHECK(pooled.values[0] == 0.5);

    CHECK_THROWS(fit_isotonic_binary(std::vector<double>{}, std::vector<double>{}));
}

TEST_CASE("isotonic step prediction uses the left step and constant extension")
{
    const std::vector<double> xs{0.2, 0.4, 0.6};
    const std::vector<double> ys{0.0, 1.0, 1.0};
    const auto f = fit_isotonic_binary(xs, ys);
    CHECK(f(0.0) == 0.0);
    CHECK(f(0.3) == 0.0);
    CHECK(f(0.4) == 1.0);
    CHECK(f(0.99) == 1.0);
}

TEST_CASE("PAVA matches exhaustive monotone fits for n <= 8")
{
    for (std::size_t n = 1; n <= 8; ++n) {
        std::vector<double> xs(n);
        for (std::size_t i = 0; i < n; ++i) xs[i] = static_cast<double>(i) / static_cast<double>(n);
        for (std::uint32_t pattern = 0; pattern < (1u << n); ++pattern) {
            std::vector<double> ys(n);
            for (std::size_t i = 0; i < n; ++i) ys[i] = (pattern >> i) & 1u ? 1.0 : 0.0;
            const auto fit = fit_isotonic_binary(xs, ys);
            REQUIRE(std::abs(test::sse(fit.fitted, ys) - test::best_partition_sse(ys)) < 1e-12);
        }
    }
}

TEST_CASE("isotonic output is nondecreasing")
{
    Rng rng(41);
    std::vector<double> xs(500);
    std::vector<double> ys(500);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        xs[i] = rng.uniform();
        ys[i] = rng.uniform() < xs[i] ? 1.0 : 0.0;
    }
    const auto f = fit_isotonic_binary(xs, ys);
    double prev = -1.0;
    for (int i = 0; i <= 1000; ++i) {
        const double v = f(i / 1000.0);
        REQUIRE(v >= prev);
        prev = v;
    }
}

TEST_CASE("one-vs-rest isotonic")
{
    SUBCASE("identity on support for large calibrated samples")
    {
        const auto d = calibrated_binary(20000, 3);
        const auto g = fit_isotonic_multiclass(d);
        double dev = 0.0;
        for (std::size_t i = 0; i < d.n(); ++i) dev += std::abs(g.predict(d.row(i))[0] - d.row(i)[0]);
        CHECK(dev / static_cast<double>(d.n()) < 0.02);
    }
    SUBCASE("k = 2 agrees with the binary fit on the positive class")
    {
        const auto d = calibrated_binary(500, 4);
        const auto g = fit_isotonic_multiclass(d);
        std::vector<double> xs(d.n());
        std::vector<double> ys(d.n());
        for (std::size_t i = 0; i < d.n(); ++i) {
            xs[i] = d.row(i)[0];
            ys[i] = d.label(i) == 0 ? 1.0 : 0.0;
        }
        const auto bin = fit_isotonic_binary(xs, ys);
        for (std::size_t i = 0; i < d.n(); ++i) REQUIRE(g.predict(d.row(i))[0] == doctest::Approx(bin.fitted[i]).epsilon(1e-12));
    }
    SUBCASE("all labels class 0")
    {
        const auto d = test::make_dataset({{0.2, 0.5, 0.3}, {0.6, 0.2, 0.2}, {0.1, 0.1, 0.8}}, {0, 0, 0});
        const auto g = fit_isotonic_multiclass(d);
        for (double t : {0.0, 0.3, 0.7}) {
            const Eigen::Vector3d x(t, (1.0 - t) / 2, (1.0 - t) / 2);
            CHECK(g.predict(Vector(x))[0] == doctest::Approx(1.0));
        }
    }
}

TEST_CASE("temperature scaling")
{
    SUBCASE("uniform predictions resolve to T = 1")
    {
        PredictionMatrix p = PredictionMatrix::Constant(50, 2, 0.5);
        std::vector<int> y(50);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 2);
        const auto g = fit_temperature(LabeledDataset(p, y));
        CHECK(std::get<Recalibrator::Temperature>(g.model()).temperature == 1.0);
    }
    SUBCASE("calibrated data gives T close to 1")
    {
        Scenario s;
        s.classes = 3;
        s.seed = 7;
        const auto small = generate_dataset(s, 2000);
        const auto large = generate_dataset(s, 50000);
        const double t_small = std::get<Recalibrator::Temperature>(fit_temperature(small).model()).temperature;
        const double t_large = std::get<Recalibrator::Temperature>(fit_temperature(large).model()).temperature;
        CHECK(std::abs(t_large - 1.0) < 0.03);
        CHECK(std::abs(t_large - 1.0) <= std::abs(t_small - 1.0) + 0.01);
    }
    SUBCASE("over-confident predictor is softened and held-out NLL improves")
    {
        Scenario s;
        s.kind = ScenarioKind::binary_overconfident;
        s.seed = 8;
        const auto train = generate_dataset(s, 5000);
        s.seed = 9;
        const auto test = generate_dataset(s, 5000);
        const auto g = fit_temperature(train);
        const double t = std::get<Recalibrator::Temperature>(g.model()).temperature;
        CHECK(t > 1.0);
        CHECK(temperature_objective(test, t) < temperature_objective(test, 1.0));
    }
    SUBCASE("argmax is preserved and T = 1 is the identity")
    {
        Rng rng(43);
        const Recalibrator g(4, Recalibrator::Temperature{2.7});
        const Recalibrator id(4, Recalibrator::Temperature{1.0});
        for (int t = 0; t < 500; ++t) {
            const Vector x = test::random_simplex(rng, 4);
            REQUIRE(argmax_lowest(g.predict(x).values()) == argmax_lowest(x));
            REQUIRE((id.predict(x).values() - x).cwiseAbs().maxCoeff() <= 1e-12);
            REQUIRE((apply_temperature(x, 1.0) - x).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
}

TEST_CASE("Nadaraya-Watson")
{
    const auto d = test::make_dataset({{0.2, 0.8}, {0.8, 0.2}}, {1, 0});
    SUBCASE("small bandwidth recovers the nearest label")
    {
        const auto g = fit_nadaraya_watson(d, 1e-3);
        CHECK(g.predict(Vector(Eigen::Vector2d(0.2, 0.8)))[1] == doctest::Approx(1.0));
        CHECK(g.predict(Vector(Eigen::Vector2d(0.8, 0.2)))[0] == doctest::Approx(1.0));
    }
    SUBCASE("equidistant query is split evenly")
    {
        const auto g = fit_nadaraya_watson(d, 0.1);
        const auto out = g.predict(Vector(Eigen::Vector2d(0.5, 0.5)));
        CHECK(out[0] == doctest::Approx(0.5));
        CHECK(out[1] == doctest::Approx(0.5));
    }
    SUBCASE("single sample")
    {
        const auto g = fit_nadaraya_watson(test::make_dataset({{0.3, 0.7}}, {0}), 0.1);
        CHECK(g.predict(Vector(Eigen::Vector2d(0.99, 0.01)))[0] == 1.0);
    }
    CHECK_THROWS(fit_nadaraya_watson(d, 0.0));
}

TEST_CASE("kmeans")
{
    SUBCASE("one cluster per distinct point")
    {
        Rng rng(47);
        PredictionMatrix pts(8, 3);
        for (Eigen::Index i = 0; i < 8; ++i) pts.row(i) = test::random_simplex(rng, 3).transpose();
        const auto km = kmeans(pts, 8, 1);
        CHECK(km.inertia == 0.0);
    }
    SUBCASE("single cluster is the mean")
    {
        Rng rng(53);
        PredictionMatrix pts(30, 2);
        for (Eigen::Index i = 0; i < 30; ++i) pts.row(i) = test::random_simplex(rng, 2).transpose();
        const auto km = kmeans(pts, 1, 1);
        CHECK((km.centroids.row(0) - pts.colwise().mean()).norm() < 1e-12);
    }
    SUBCASE("two blobs reach the best 2-partition")
    {
        Rng rng(59);
        for (int trial = 0; trial < 10; ++trial) {
            const Eigen::Index n = 12;
            PredictionMatrix pts(n, 2);
            for (Eigen::Index i = 0; i < n; ++i) {
                const double center = i < n / 2 ? 0.15 : 0.85;
                const double u = center + 0.05 * (rng.uniform() - 0.5);
                pts(i, 0) = u;
                pts(i, 1) = 1.0 - u;
            }
            double best = std::numeric_limits<double>::infinity();
            for (std::uint32_t mask = 1; mask + 1 < (1u << n); ++mask) {
                std::vector<int> a(static_cast<std::size_t>(n));
                for (Eigen::Index i = 0; i < n; ++i) a[static_cast<std::size_t>(i)] = (mask >> i) & 1u;
                best = std::min(best, kmeans_inertia(pts, a, 2));
            }
            const auto km = kmeans(pts, 2, static_cast<std::uint64_t>(trial));
            REQUIRE(km.inertia <= best + 1e-12);
        }
    }
    SUBCASE("inertia never increases and runs are deterministic")
    {
        Scenario s;
        s.classes = 3;
        s.seed = 61;
        const auto pts = sample_predictions(s, 2000);
        const auto km = kmeans(pts, 30, 5);
        for (std::size_t i = 1; i < km.inertia_history.size(); ++i)
            REQUIRE(km.inertia_history[i] <= km.inertia_history[i - 1] + 1e-12);
        const auto again = kmeans(pts, 30, 5);
        CHECK(again.centroids == km.centroids);
        CHECK(again.assignments == km.assignments);
    }
    SUBCASE("duplicates do not break seeding")
    {
        PredictionMatrix pts = PredictionMatrix::Constant(10, 2, 0.5);
        const auto km = kmeans(pts, 3, 0);
        CHECK(km.inertia == 0.0);
    }
    CHECK_THROWS(kmeans(PredictionMatrix::Constant(2, 2, 0.5), 3, 0));
}

TEST_CASE("partition-wise recalibration")
{
    SUBCASE("one cluster predicts the global label frequency")
    {
        const auto d = test::make_dataset({{0.2, 0.8}, {0.7, 0.3}, {0.9, 0.1}, {0.4, 0.6}}, {0, 1, 1, 1});
        const auto g = fit_partitionwise(d, 1, 0);
        const auto out = g.predict(Vector(Eigen::Vector2d(0.5, 0.5)));
        CHECK(out[0] == doctest::Approx(0.25));
    }
    SUBCASE("label-pure clusters give one-hot predictions")
    {
        const auto d = test::make_dataset({{0.9, 0.1}, {0.95, 0.05}, {0.1, 0.9}, {0.05, 0.95}}, {0, 0, 1, 1});
        const auto g = fit_partitionwise(d, 2, 0);
        CHECK(g.predict(Vector(Eigen::Vector2d(0.92, 0.08)))[0] == 1.0);
        CHECK(g.predict(Vector(Eigen::Vector2d(0.08, 0.92)))[1] == 1.0);
    }
    SUBCASE("calibrated data: cluster label means track centroids")
    {
        double prev = std::numeric_limits<double>::infinity();
        for (std::size_t n : {2000, 50000}) {
            const auto d = calibrated_binary(n, 67);
            const auto g = fit_partitionwise(d, 15, 1);
            const auto& m = std::get<Recalibrator::PartitionWise>(g.model());
            const double dev = (m.centroids - m.label_means).cwiseAbs().col(0).mean();
            CHECK(dev < prev);
            prev = dev;
        }
        CHECK(prev < 0.02);
    }
    CHECK_THROWS(fit_partitionwise(test::make_dataset({{0.5, 0.5}}, {0}), 2, 0));
}

TEST_CASE("every recalibrator emits simplex points and is deterministic")
{
    Scenario s;
    s.kind = ScenarioKind::multiclass_overconfident;
    s.classes = 4;
    s.seed = 71;
    const auto d = generate_dataset(s, 600);
    Rng rng(73);
    for (auto kind : {RecalibratorKind::identity, RecalibratorKind::isotonic, RecalibratorKind::temperature,
                      RecalibratorKind::nadaraya_watson, RecalibratorKind::partition_wise}) {
        RecalibratorSpec spec;
        spec.kind = kind;
        spec.seed = 3;
        const auto g = fit_recalibrator(d, spec);
        const auto g2 = fit_recalibrator(d, spec);
        for (int t = 0; t < 200; ++t) {
            const Vector x = test::random_simplex(rng, 4);
            const Vector out = g.predict(x).values();
            REQUIRE_NOTHROW(validate_simplex(out, 1e-9));
            REQUIRE(out == g2.predict(x).values());
        }
        CHECK_THROWS(g.predict(Vector(Eigen::Vector2d(0.5, 0.5))));
    }
    const Vector x = test::random_simplex(rng, 4);
    CHECK(Recalibrator::identity(4).predict(x).values() == x);
}
