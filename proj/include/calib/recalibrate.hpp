#pragma once

// Recalibration maps g: simplex -> simplex fitted on (f(X), Y) pairs. These are
// the estimates of E[Y | f(X)] plugged into the variational estimator.

#include "calib/core.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace calib {

enum class RecalibratorKind { identity, isotonic, temperature, nadaraya_watson, partition_wise };

struct RecalibratorSpec {
    RecalibratorKind kind = RecalibratorKind::isotonic;
    double bandwidth = 0.1;
    /// 0 selects the default: 15 clusters for binary data, 30 otherwise.
    int n_clusters = 0;
    std::uint64_t seed = 0;

    int clusters_for(int k) const noexcept { return n_clusters > 0 ? n_clusters : (k == 2 ? 15 : 30); }
    std::string name() const;
    void validate() const;
};

/// Nondecreasing step function from pool-adjacent-violators. Block j holds
/// `values[j]` on [starts[j], starts[j+1]); the first value extends to the left.
struct IsotonicStep {
    std::vector<double> starts;
    std::vector<double> values;
    /// Fitted value for each training input, in input order.
    std::vector<double> fitted;

    double operator()(double x) const;
};

/// Weighted least-squares isotonic fit. Equal xs are pooled before fitting.
IsotonicStep fit_isotonic_binary(std::span<const double> xs, std::span<const double> ys);

/// Weighted PAVA on an already sorted sequence; returns the fitted value per element.
std::vector<double> pava(std::span<const double> ys, std::span<const double> weights);

struct KMeansResult {
    PredictionMatrix centroids;           // n_clusters x dim
    std::vector<int> assignments;         // one per point
    double inertia = 0.0;
    std::vector<double> inertia_history;  // after each assignment step
    int iterations = 0;
};

/// k-means++ seeding followed by Lloyd iterations. Stops when no centroid moves more
/// than `tol` or after `max_iters`. Empty clusters are re-seeded at the point
/// farthest from its centroid. Ties in assignment go to the lowest cluster index.
KMeansResult kmeans(const PredictionMatrix& points, int n_clusters, std::uint64_t seed, int max_iters = 100,
                    double tol = 1e-6);

/// Nearest centroid (lowest index on ties).
int nearest_centroid(const PredictionMatrix& centroids, const Eigen::Ref<const Vector>& x);

/// Fitted recalibration map. Immutable; predict is deterministic and thread-safe.
class Recalibrator {
public:
    struct Identity {};
    struct Isotonic {
        std::vector<IsotonicStep> per_class;
    };
    struct Temperature {
        double temperature = 1.0;
    };
    struct NadarayaWatson {
        PredictionMatrix points;
        std::vector<int> labels;
        double bandwidth = 0.1;
    };
    struct PartitionWise {
        PredictionMatrix centroids;
        PredictionMatrix label_means;
    };
    /// Arbitrary user map, e.g. an exactly known g*.
    struct Custom {
        std::function<Vector(const Vector&)> map;
        std::string name;
    };
    using Model = std::variant<Identity, Isotonic, Temperature, NadarayaWatson, PartitionWise, Custom>;

    Recalibrator(int k, Model model) : k_(k), model_(std::make_shared<const Model>(std::move(model))) {}

    static Recalibrator identity(int k) { return {k, Identity{}}; }
    static Recalibrator custom(int k, std::function<Vector(const Vector&)> map, std::string name = "custom")
    {
        return {k, Custom{std::move(map), std::move(name)}};
    }

    int k() const noexcept { return k_; }
    const Model& model() const noexcept { return *model_; }
    std::string name() const;

    SimplexVector predict(const SimplexVector& x) const;
    SimplexVector predict(const Eigen::Ref<const Vector>& x) const;
    /// Row-wise predict.
    PredictionMatrix predict_all(const PredictionMatrix& x) const;

private:
    Vector raw_predict(const Eigen::Ref<const Vector>& x) const;

    int k_;
    std::shared_ptr<const Model> model_;
};

Recalibrator fit_isotonic_multiclass(const LabeledDataset& d);
Recalibrator fit_temperature(const LabeledDataset& d);
Recalibrator fit_nadaraya_watson(const LabeledDataset& d, double bandwidth = 0.1);
Recalibrator fit_partitionwise(const LabeledDataset& d, int n_clusters, std::uint64_t seed);

/// Dispatches on spec.kind.
Recalibrator fit_recalibrator(const LabeledDataset& d, const RecalibratorSpec& spec);

/// Mean log loss of softmax(log(max(p, 1e-15)) / T); the temperature objective.
double temperature_objective(const LabeledDataset& d, double temperature);
Vector apply_temperature(const Eigen::Ref<const Vector>& p, double temperature);

/// Builds a recalibrator from training data; used for cross-validation.
using RecalibratorFactory = std::function<Recalibrator(const LabeledDataset&)>;
RecalibratorFactory make_factory(const RecalibratorSpec& spec);

}  // namespace calib
