#include "calib/core.hpp"

#include "calib/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace calib {

SimplexVector SimplexVector::binary(double positive)
{
    Vector v(2);
    v << positive, 1.0 - positive;
    return validate_simplex(v, kSumTolerance);
}

SimplexVector validate_simplex(const Eigen::Ref<const Vector>& v, double tol)
{
    if (v.size() < 2) throw SimplexError("simplex vector needs at least 2 entries");
    if (!v.allFinite()) throw SimplexError("simplex vector has non-finite entries");

    Vector out = v;
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        if (out[i] < -kNegativeTolerance) {
            std::ostringstream msg;
            msg << "negative probability " << out[i] << " at index " << i;
            throw SimplexError(msg.str());
        }
        if (out[i] > 1.0 + kNegativeTolerance) {
            std::ostringstream msg;
            msg << "probability " << out[i] << " exceeds 1 at index " << i;
            throw SimplexError(msg.str());
        }
        out[i] = std::clamp(out[i], 0.0, 1.0);
    }

    const double sum = out.sum();
    const double deviation = std::abs(sum - 1.0);
    if (deviation > tol) {
        std::ostringstream msg;
        msg << "probabilities sum to " << sum << " (tolerance " << tol << ")";
        throw SimplexError(msg.str());
    }
    if (deviation > kExactSumSlack) out /= sum;
    return SimplexVector(std::move(out));
}

LabeledDataset::LabeledDataset(PredictionMatrix predictions, std::vector<int> labels)
{
    const auto n = static_cast<std::size_t>(predictions.rows());
    if (n == 0) throw std::invalid_argument("dataset must contain at least one row");
    if (labels.size() != n) throw std::invalid_argument("label count does not match prediction rows");
    if (predictions.cols() < 2) throw std::invalid_argument("dataset needs at least 2 classes");

    const auto k = static_cast<int>(predictions.cols());
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        try {
            predictions.row(r) = validate_simplex(predictions.row(r).transpose()).values().transpose();
        } catch (const SimplexError& e) {
            throw SimplexError("row " + std::to_string(i) + ": " + e.what());
        }
        if (labels[i] < 0 || labels[i] >= k) {
            throw std::invalid_argument("row " + std::to_string(i) + ": label " + std::to_string(labels[i]) +
                                        " outside [0, " + std::to_string(k) + ")");
        }
    }
    predictions_ = std::move(predictions);
    labels_ = std::move(labels);
}

Vector LabeledDataset::one_hot(std::size_t i) const
{
    Vector y = Vector::Zero(k());
    y[labels_[i]] = 1.0;
    return y;
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const
{
    PredictionMatrix p(static_cast<Eigen::Index>(indices.size()), predictions_.cols());
    std::vector<int> y(indices.size());
    for (std::size_t j = 0; j < indices.size(); ++j) {
        p.row(static_cast<Eigen::Index>(j)) = predictions_.row(static_cast<Eigen::Index>(indices[j]));
        y[j] = labels_[indices[j]];
    }
    return LabeledDataset(Trusted{}, std::move(p), std::move(y));
}

std::vector<std::size_t> FoldPlan::fold_indices(int fold) const
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
        if (assignments[i] == fold) out.push_back(i);
    return out;
}

std::vector<std::size_t> FoldPlan::complement_indices(int fold) const
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
        if (assignments[i] != fold) out.push_back(i);
    return out;
}

std::vector<std::size_t> FoldPlan::fold_sizes() const
{
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k_folds), 0);
    for (int a : assignments) ++sizes[static_cast<std::size_t>(a)];
    return sizes;
}

namespace {

void check_fold_count(std::size_t n, int k_folds)
{
    if (k_folds < 2) throw std::invalid_argument("k_folds must be at least 2");
    if (static_cast<std::size_t>(k_folds) > n) throw std::invalid_argument("k_folds exceeds sample count");
}

template <class It>
void shuffle(It first, It last, Rng& rng)
{
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
        const auto j = rng.below(i);
        std::iter_swap(first + static_cast<std::ptrdiff_t>(i - 1), first + static_cast<std::ptrdiff_t>(j));
    }
}

}  // namespace

FoldPlan make_folds(std::size_t n, int k_folds, std::uint64_t seed)
{
    check_fold_count(n, k_folds);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    shuffle(order.begin(), order.end(), rng);

    FoldPlan plan{std::vector<int>(n), k_folds, seed};
    for (std::size_t pos = 0; pos < n; ++pos)
        plan.assignments[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k_folds));
    return plan;
}

FoldPlan make_folds_stratified(std::span<const int> labels, int k_folds, std::uint64_t seed)
{
    const std::size_t n = labels.size();
    check_fold_count(n, k_folds);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    shuffle(order.begin(), order.end(), rng);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return labels[a] < labels[b]; });

    FoldPlan plan{std::vector<int>(n), k_folds, seed};
    for (std::size_t pos = 0; pos < n; ++pos)
        plan.assignments[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k_folds));
    return plan;
}

Eigen::Index argmax_lowest(const Eigen::Ref<const Vector>& v)
{
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < v.size(); ++j)
        if (v[j] > v[best]) best = j;
    return best;
}

LabeledDataset top_class_binarize(const LabeledDataset& d)
{
    const auto n = static_cast<Eigen::Index>(d.n());
    PredictionMatrix p(n, 2);
    std::vector<int> y(d.n());
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto row = d.predictions().row(i);
        Eigen::Index top = 0;
        for (Eigen::Index j = 1; j < row.size(); ++j)
            if (row[j] > row[top]) top = j;
        p(i, 0) = row[top];
        p(i, 1) = 1.0 - row[top];
        y[static_cast<std::size_t>(i)] = d.label(static_cast<std::size_t>(i)) == top ? 0 : 1;
    }
    return LabeledDataset(std::move(p), std::move(y));
}

bool MetricSpec::is_topclass() const noexcept
{
    return kind == MetricKind::topclass_l1 || kind == MetricKind::topclass_over ||
           kind == MetricKind::topclass_under;
}

bool MetricSpec::is_over_under() const noexcept
{
    return kind == MetricKind::over_confidence || kind == MetricKind::under_confidence ||
           kind == MetricKind::topclass_over || kind == MetricKind::topclass_under;
}

bool MetricSpec::is_anchored() const noexcept
{
    return kind == MetricKind::lp || kind == MetricKind::topclass_l1 || is_over_under();
}

std::string MetricSpec::name() const
{
    switch (kind) {
    case MetricKind::lp:
        if (p == 1.0) return "l1";
        if (p == 2.0) return "l2";
        return "lp";
    case MetricKind::lp_power_p: return "lp_pow";
    case MetricKind::brier: return "brier";
    case MetricKind::logloss: return "logloss";
    case MetricKind::over_confidence: return "over";
    case MetricKind::under_confidence: return "under";
    case MetricKind::topclass_l1: return "topclass_l1";
    case MetricKind::topclass_over: return "topclass_over";
    case MetricKind::topclass_under: return "topclass_under";
    }
    return "unknown";
}

void MetricSpec::validate() const
{
    if (!(p >= 1.0) || !std::isfinite(p)) throw std::invalid_argument("metric exponent p must be finite and >= 1");
    if (kind == MetricKind::topclass_l1 && p != 1.0)
        throw std::invalid_argument("topclass_l1 is defined for p = 1 only");
}

}  // namespace calib
