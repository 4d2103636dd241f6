#pragma once

// Shared domain types for calibration-error estimation: simplex points,
// labelled prediction sets, fold plans, metric selection and reports.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace calib {

using Vector = Eigen::VectorXd;
using PredictionMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Binary data is stored as 2-vectors (p_pos, p_neg); class 0 is the positive class.
inline constexpr int kPositiveClass = 0;

inline constexpr double kSumTolerance = 1e-6;
inline constexpr double kNegativeTolerance = 1e-9;
/// Sums closer to 1 than this are left untouched, which makes repair idempotent.
inline constexpr double kExactSumSlack = 1e-12;

class SimplexError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A point of the probability simplex with at least two coordinates.
class SimplexVector {
public:
    SimplexVector() = default;

    const Vector& values() const noexcept { return values_; }
    Eigen::Index size() const noexcept { return values_.size(); }
    double operator[](Eigen::Index i) const { return values_[i]; }

    /// Two-class point (p, 1 - p).
    static SimplexVector binary(double positive);

private:
    explicit SimplexVector(Vector v) : values_(std::move(v)) {}
    friend SimplexVector validate_simplex(const Eigen::Ref<const Vector>& v, double tol);

    Vector values_;
};

/// Checks simplex membership. Entries in [-1e-9, 0) are clamped to 0. Sums off by
/// more than 1e-12 but at most `tol` are repaired by renormalization.
SimplexVector validate_simplex(const Eigen::Ref<const Vector>& v, double tol = kSumTolerance);

/// n prediction rows on the k-simplex plus integer labels in [0, k).
class LabeledDataset {
public:
    LabeledDataset() = default;
    /// Validates (and repairs within tolerance) every row.
    LabeledDataset(PredictionMatrix predictions, std::vector<int> labels);

    const PredictionMatrix& predictions() const noexcept { return predictions_; }
    const std::vector<int>& labels() const noexcept { return labels_; }
    std::size_t n() const noexcept { return labels_.size(); }
    int k() const noexcept { return static_cast<int>(predictions_.cols()); }

    Vector row(std::size_t i) const { return predictions_.row(static_cast<Eigen::Index>(i)).transpose(); }
    int label(std::size_t i) const { return labels_[i]; }
    Vector one_hot(std::size_t i) const;

    LabeledDataset subset(std::span<const std::size_t> indices) const;

private:
    struct Trusted {};
    LabeledDataset(Trusted, PredictionMatrix predictions, std::vector<int> labels)
        : predictions_(std::move(predictions)), labels_(std::move(labels)) {}

    PredictionMatrix predictions_;
    std::vector<int> labels_;
};

/// Assignment of n samples to k_folds folds whose sizes differ by at most one.
struct FoldPlan {
    std::vector<int> assignments;
    int k_folds = 0;
    std::uint64_t seed = 0;

    std::vector<std::size_t> fold_indices(int fold) const;
    std::vector<std::size_t> complement_indices(int fold) const;
    std::vector<std::size_t> fold_sizes() const;
};

/// Uniformly shuffled partition, deterministic in (n, k_folds, seed).
FoldPlan make_folds(std::size_t n, int k_folds, std::uint64_t seed);
/// Stratified variant: each class is shuffled, then samples are dealt round-robin
/// class by class, so fold sizes still differ by at most one.
FoldPlan make_folds_stratified(std::span<const int> labels, int k_folds, std::uint64_t seed);

/// Top-class reduction: row i becomes (max_j p_ij, 1 - max_j p_ij), label 0 iff the
/// argmax (lowest index on ties) equals the original label.
LabeledDataset top_class_binarize(const LabeledDataset& d);

/// Index of the largest entry; ties go to the lowest index.
Eigen::Index argmax_lowest(const Eigen::Ref<const Vector>& v);

enum class MetricKind {
    lp,
    lp_power_p,
    brier,
    logloss,
    over_confidence,
    under_confidence,
    topclass_l1,
    topclass_over,
    topclass_under,
};

struct MetricSpec {
    MetricKind kind = MetricKind::lp;
    double p = 1.0;

    bool is_topclass() const noexcept;
    bool is_over_under() const noexcept;
    /// Metrics evaluated with the anchored L_p family (including clipped variants).
    bool is_anchored() const noexcept;
    /// Stable short name used in reports: l1, l2, lp, lp_pow, brier, logloss, over, ...
    std::string name() const;
    void validate() const;

    static MetricSpec l1() { return {MetricKind::lp, 1.0}; }
    static MetricSpec l2() { return {MetricKind::lp, 2.0}; }
};

struct FoldEstimate {
    std::size_t size = 0;
    double value = 0.0;
};

struct CEReport {
    MetricSpec metric;
    double estimate = 0.0;
    double estimate_clipped = 0.0;
    std::vector<FoldEstimate> per_fold;
    double standard_error = 0.0;
    std::size_t n = 0;
    int k = 0;
    int k_folds = 0;
    std::uint64_t seed = 0;
    std::string recalibrator;
    bool cross_validated = true;
};

/// splitmix64 finalizer; used to derive child seeds from a parent seed and tags.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept
{
    return mix64(mix64(seed) ^ (tag * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
}

template <class... Tags>
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, Tags... rest) noexcept
{
    return derive_seed(derive_seed(seed, tag), static_cast<std::uint64_t>(rest)...);
}

}  // namespace calib
