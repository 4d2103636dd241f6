#include "calib/baselines.hpp"

#include "calib/losses.hpp"
#include "calib/recalibrate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace calib {

namespace {

// Bin index per sample for equal-count bins; equal values always share a bin.
std::vector<int> equal_count_bins(const std::vector<double>& x, int n_bins)
{
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });

    std::vector<int> bin(n, 0);
    for (std::size_t pos = 0; pos < n; ++pos) {
        int b = static_cast<int>((pos * static_cast<std::size_t>(n_bins)) / n);
        if (pos > 0 && x[order[pos]] == x[order[pos - 1]]) b = bin[order[pos - 1]];
        bin[order[pos]] = b;
    }
    return bin;
}

}  // namespace

double binned_ece_binary(const LabeledDataset& d, int n_bins, BinningScheme scheme)
{
    if (n_bins < 1) throw std::invalid_argument("binned ECE needs at least one bin");
    if (d.k() != 2) throw std::invalid_argument("binned ECE expects binary data");

    const std::size_t n = d.n();
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = d.predictions()(static_cast<Eigen::Index>(i), kPositiveClass);

    std::vector<int> bin(n);
    if (scheme == BinningScheme::equal_width) {
        const double width = static_cast<double>(n_bins);
        for (std::size_t i = 0; i < n; ++i) {
            int b = static_cast<int>(std::floor(x[i] * width));
            // x * B can round across an edge; compare against the edges themselves.
            if (b > 0 && x[i] < b / width) --b;
            if (b + 1 < n_bins && x[i] >= (b + 1) / width) ++b;
            bin[i] = std::clamp(b, 0, n_bins - 1);
        }
    } else {
        bin = equal_count_bins(x, n_bins);
    }

    std::vector<double> conf(static_cast<std::size_t>(n_bins), 0.0);
    std::vector<double> acc(static_cast<std::size_t>(n_bins), 0.0);
    std::vector<double> count(static_cast<std::size_t>(n_bins), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto b = static_cast<std::size_t>(bin[i]);
        conf[b] += x[i];
        acc[b] += d.label(i) == kPositiveClass ? 1.0 : 0.0;
        count[b] += 1.0;
    }
    double ece = 0.0;
    for (std::size_t b = 0; b < conf.size(); ++b) {
        if (count[b] == 0.0) continue;
        ece += (count[b] / static_cast<double>(n)) * std::abs(acc[b] / count[b] - conf[b] / count[b]);
    }
    return ece;
}

double clustered_ece_multiclass(const LabeledDataset& d, int n_clusters, std::uint64_t seed, double p)
{
    if (n_clusters < 1) throw std::invalid_argument("clustered ECE needs at least one cluster");
    if (d.n() < static_cast<std::size_t>(n_clusters)) throw std::invalid_argument("clustered ECE: fewer samples than clusters");

    const KMeansResult km = kmeans(d.predictions(), n_clusters, seed);
    const int k = d.k();
    PredictionMatrix acc = PredictionMatrix::Zero(n_clusters, k);
    PredictionMatrix conf = PredictionMatrix::Zero(n_clusters, k);
    std::vector<double> count(static_cast<std::size_t>(n_clusters), 0.0);
    for (std::size_t i = 0; i < d.n(); ++i) {
        const int c = km.assignments[i];
        acc(c, d.label(i)) += 1.0;
        conf.row(c) += d.predictions().row(static_cast<Eigen::Index>(i));
        count[static_cast<std::size_t>(c)] += 1.0;
    }
    double ece = 0.0;
    for (int c = 0; c < n_clusters; ++c) {
        const double m = count[static_cast<std::size_t>(c)];
        if (m == 0.0) continue;
        const Vector gap = ((acc.row(c) - conf.row(c)) / m).transpose();
        ece += (m / static_cast<double>(d.n())) * lp_norm(gap, p);
    }
    return ece;
}

}  // namespace calib
