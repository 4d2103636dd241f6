#include "calib/recalibrate.hpp"

#include "calib/rng.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace calib {

namespace {

double squared_distance(const PredictionMatrix& a, Eigen::Index i, const PredictionMatrix& b, Eigen::Index j)
{
    return (a.row(i) - b.row(j)).squaredNorm();
}

// Returns inertia; fills assignment and per-point squared distance.
double assign(const PredictionMatrix& points, const PredictionMatrix& centroids, std::vector<int>& assignments,
              std::vector<double>& dist)
{
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        int best = 0;
        double best_d = squared_distance(points, i, centroids, 0);
        for (Eigen::Index c = 1; c < centroids.rows(); ++c) {
            const double d = squared_distance(points, i, centroids, c);
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(c);
            }
        }
        assignments[static_cast<std::size_t>(i)] = best;
        dist[static_cast<std::size_t>(i)] = best_d;
        inertia += best_d;
    }
    return inertia;
}

PredictionMatrix plus_plus_init(const PredictionMatrix& points, int n_clusters, Rng& rng)
{
    const auto n = static_cast<std::size_t>(points.rows());
    PredictionMatrix centroids(n_clusters, points.cols());
    std::vector<bool> chosen(n, false);

    std::size_t first = rng.below(n);
    centroids.row(0) = points.row(static_cast<Eigen::Index>(first));
    chosen[first] = true;

    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points, static_cast<Eigen::Index>(i), centroids, 0);

    for (int c = 1; c < n_clusters; ++c) {
        double total = 0.0;
        for (double v : d2) total += v;

        std::size_t pick = n;
        if (total > 0.0) {
            const double r = rng.uniform() * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (d2[i] <= 0.0) continue;
                acc += d2[i];
                pick = i;
                if (acc > r) break;
            }
        }
        if (pick == n) {
            // All remaining mass is zero (duplicates): take the first unused point.
            for (std::size_t i = 0; i < n; ++i)
                if (!chosen[i]) {
                    pick = i;
                    break;
                }
        }
        chosen[pick] = true;
        centroids.row(c) = points.row(static_cast<Eigen::Index>(pick));
        for (std::size_t i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], squared_distance(points, static_cast<Eigen::Index>(i), centroids, c));
    }
    return centroids;
}

}  // namespace

int nearest_centroid(const PredictionMatrix& centroids, const Eigen::Ref<const Vector>& x)
{
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
        const double d = (centroids.row(c).transpose() - x).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

KMeansResult kmeans(const PredictionMatrix& points, int n_clusters, std::uint64_t seed, int max_iters, double tol)
{
    if (n_clusters < 1) throw std::invalid_argument("kmeans: n_clusters must be at least 1");
    if (points.rows() < n_clusters) throw std::invalid_argument("kmeans: fewer points than clusters");

    const auto n = static_cast<std::size_t>(points.rows());
    Rng rng(seed);
    KMeansResult result;
    result.centroids = plus_plus_init(points, n_clusters, rng);
    result.assignments.assign(n, 0);
    std::vector<double> dist(n, 0.0);

    for (int iter = 0; iter < max_iters; ++iter) {
        result.inertia_history.push_back(assign(points, result.centroids, result.assignments, dist));
        ++result.iterations;

        PredictionMatrix next = PredictionMatrix::Zero(n_clusters, points.cols());
        std::vector<std::size_t> counts(static_cast<std::size_t>(n_clusters), 0);
        for (std::size_t i = 0; i < n; ++i) {
            next.row(result.assignments[i]) += points.row(static_cast<Eigen::Index>(i));
            ++counts[static_cast<std::size_t>(result.assignments[i])];
        }
        for (int c = 0; c < n_clusters; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                next.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
                continue;
            }
            // Empty cluster: move it onto the point currently worst served.
            std::size_t far = 0;
            for (std::size_t i = 1; i < n; ++i)
                if (dist[i] > dist[far]) far = i;
            next.row(c) = points.row(static_cast<Eigen::Index>(far));
            dist[far] = 0.0;
        }

        double movement = 0.0;
        for (int c = 0; c < n_clusters; ++c)
            movement = std::max(movement, (next.row(c) - result.centroids.row(c)).norm());
        result.centroids = std::move(next);
        if (movement < tol) break;
    }

    result.inertia = assign(points, result.centroids, result.assignments, dist);
    result.inertia_history.push_back(result.inertia);
    return result;
}

}  // namespace calib
