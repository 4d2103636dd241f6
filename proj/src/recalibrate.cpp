#include "calib/recalibrate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace calib {

namespace {

constexpr double kLogitFloor = 1e-15;
constexpr double kLogTemperatureMin = -4.0;
constexpr double kLogTemperatureMax = 4.0;
constexpr double kLogTemperatureTol = 1e-6;
constexpr double kRenormalizeFloor = 1e-12;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Vector uniform_vector(int k) { return Vector::Constant(k, 1.0 / k); }

}  // namespace

std::string RecalibratorSpec::name() const
{
    switch (kind) {
    case RecalibratorKind::identity: return "identity";
    case RecalibratorKind::isotonic: return "isotonic";
    case RecalibratorKind::temperature: return "temperature";
    case RecalibratorKind::nadaraya_watson: return "nw";
    case RecalibratorKind::partition_wise: return "partition";
    }
    return "unknown";
}

void RecalibratorSpec::validate() const
{
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw std::invalid_argument("bandwidth must be positive");
    if (n_clusters < 0) throw std::invalid_argument("n_clusters must be positive");
}

// ---------------------------------------------------------------------------
// Isotonic regression

std::vector<double> pava(std::span<const double> ys, std::span<const double> weights)
{
    if (ys.size() != weights.size()) throw std::invalid_argument("pava: size mismatch");
    struct Block {
        double value;
        double weight;
        std::size_t count;
    };
    std::vector<Block> stack;
    stack.reserve(ys.size());
    for (std::size_t i = 0; i < ys.size(); ++i) {
        stack.push_back({ys[i], weights[i], 1});
        while (stack.size() > 1 && stack[stack.size() - 2].value >= stack.back().value) {
            const Block top = stack.back();
            stack.pop_back();
            Block& prev = stack.back();
            const double w = prev.weight + top.weight;
            prev.value = (prev.weight * prev.value + top.weight * top.value) / w;
            prev.weight = w;
            prev.count += top.count;
        }
    }
    std::vector<double> out;
    out.reserve(ys.size());
    for (const Block& b : stack) out.insert(out.end(), b.count, b.value);
    return out;
}

double IsotonicStep::operator()(double x) const
{
    const auto it = std::upper_bound(starts.begin(), starts.end(), x);
    const auto idx = it == starts.begin() ? 0 : static_cast<std::size_t>(it - starts.begin()) - 1;
    return values[idx];
}

IsotonicStep fit_isotonic_binary(std::span<const double> xs, std::span<const double> ys)
{
    if (xs.empty()) throw std::invalid_argument("isotonic fit needs at least one sample");
    if (xs.size() != ys.size()) throw std::invalid_argument("isotonic fit: xs and ys differ in length");

    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });

    // Pool ties in x.
    std::vector<double> group_x;
    std::vector<double> group_y;
    std::vector<double> group_w;
    std::vector<std::size_t> group_of(xs.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        const std::size_t i = order[pos];
        if (group_x.empty() || xs[i] != group_x.back()) {
            group_x.push_back(xs[i]);
            group_y.push_back(0.0);
            group_w.push_back(0.0);
        }
        group_y.back() += ys[i];
        group_w.back() += 1.0;
        group_of[i] = group_x.size() - 1;
    }
    for (std::size_t g = 0; g < group_x.size(); ++g) group_y[g] /= group_w[g];

    const std::vector<double> fitted_groups = pava(group_y, group_w);

    IsotonicStep step;
    for (std::size_t g = 0; g < group_x.size(); ++g) {
        if (step.values.empty() || fitted_groups[g] != step.values.back()) {
            step.starts.push_back(group_x[g]);
            step.values.push_back(fitted_groups[g]);
        }
    }
    step.fitted.resize(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) step.fitted[i] = fitted_groups[group_of[i]];
    return step;
}

Recalibrator fit_isotonic_multiclass(const LabeledDataset& d)
{
    const int k = d.k();
    Recalibrator::Isotonic model;
    model.per_class.reserve(static_cast<std::size_t>(k));
    std::vector<double> xs(d.n());
    std::vector<double> ys(d.n());
    for (int j = 0; j < k; ++j) {
        for (std::size_t i = 0; i < d.n(); ++i) {
            xs[i] = d.predictions()(static_cast<Eigen::Index>(i), j);
            ys[i] = d.label(i) == j ? 1.0 : 0.0;
        }
        IsotonicStep step = fit_isotonic_binary(xs, ys);
        step.fitted.clear();
        step.fitted.shrink_to_fit();
        model.per_class.push_back(std::move(step));
    }
    return {k, std::move(model)};
}

// ---------------------------------------------------------------------------
// Temperature scaling

Vector apply_temperature(const Eigen::Ref<const Vector>& p, double temperature)
{
    Vector logits = p.cwiseMax(kLogitFloor).array().log() / temperature;
    logits.array() -= logits.maxCoeff();
    Vector e = logits.array().exp();
    return e / e.sum();
}

namespace {

double mean_nll(const PredictionMatrix& logits, const std::vector<int>& labels, double temperature)
{
    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const auto row = logits.row(i);
        const double m = row.maxCoeff() / temperature;
        const double lse = m + std::log(((row.array() / temperature) - m).exp().sum());
        total += lse - row[labels[static_cast<std::size_t>(i)]] / temperature;
    }
    return total / static_cast<double>(logits.rows());
}

}  // namespace

double temperature_objective(const LabeledDataset& d, double temperature)
{
    const PredictionMatrix logits = d.predictions().cwiseMax(kLogitFloor).array().log().matrix();
    return mean_nll(logits, d.labels(), temperature);
}

Recalibrator fit_temperature(const LabeledDataset& d)
{
    const PredictionMatrix logits = d.predictions().cwiseMax(kLogitFloor).array().log().matrix();
    auto objective = [&](double log_t) { return mean_nll(logits, d.labels(), std::exp(log_t)); };

    // Golden-section search on log T; the objective is unimodal there because the
    // NLL is convex in 1/T.
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = kLogTemperatureMin;
    double b = kLogTemperatureMax;
    double c = b - inv_phi * (b - a);
    double e = a + inv_phi * (b - a);
    double fc = objective(c);
    double fe = objective(e);
    while (b - a > kLogTemperatureTol) {
        if (fc <= fe) {
            b = e;
            e = c;
            fe = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + inv_phi * (b - a);
            fe = objective(e);
        }
    }
    const double log_t = 0.5 * (a + b);
    double temperature = std::exp(log_t);
    // Flat or near-flat objectives resolve to the identity map.
    if (objective(0.0) <= objective(log_t)) temperature = 1.0;
    return {d.k(), Recalibrator::Temperature{temperature}};
}

// ---------------------------------------------------------------------------
// Nadaraya-Watson and partition-wise

Recalibrator fit_nadaraya_watson(const LabeledDataset& d, double bandwidth)
{
    if (!(bandwidth > 0.0)) throw std::invalid_argument("Nadaraya-Watson bandwidth must be positive");
    return {d.k(), Recalibrator::NadarayaWatson{d.predictions(), d.labels(), bandwidth}};
}

Recalibrator fit_partitionwise(const LabeledDataset& d, int n_clusters, std::uint64_t seed)
{
    if (n_clusters < 1) throw std::invalid_argument("partition-wise recalibration needs at least one cluster");
    if (d.n() < static_cast<std::size_t>(n_clusters))
        throw std::invalid_argument("partition-wise recalibration: fewer samples than clusters");

    const KMeansResult km = kmeans(d.predictions(), n_clusters, seed);
    const int k = d.k();
    PredictionMatrix means = PredictionMatrix::Zero(n_clusters, k);
    std::vector<double> counts(static_cast<std::size_t>(n_clusters), 0.0);
    Vector global = Vector::Zero(k);
    for (std::size_t i = 0; i < d.n(); ++i) {
        const int c = km.assignments[i];
        means(c, d.label(i)) += 1.0;
        counts[static_cast<std::size_t>(c)] += 1.0;
        global[d.label(i)] += 1.0;
    }
    global /= static_cast<double>(d.n());
    for (int c = 0; c < n_clusters; ++c) {
        if (counts[static_cast<std::size_t>(c)] > 0.0)
            means.row(c) /= counts[static_cast<std::size_t>(c)];
        else
            means.row(c) = global.transpose();
    }
    return {k, Recalibrator::PartitionWise{km.centroids, std::move(means)}};
}

Recalibrator fit_recalibrator(const LabeledDataset& d, const RecalibratorSpec& spec)
{
    spec.validate();
    switch (spec.kind) {
    case RecalibratorKind::identity: return Recalibrator::identity(d.k());
    case RecalibratorKind::isotonic: return fit_isotonic_multiclass(d);
    case RecalibratorKind::temperature: return fit_temperature(d);
    case RecalibratorKind::nadaraya_watson: return fit_nadaraya_watson(d, spec.bandwidth);
    case RecalibratorKind::partition_wise: return fit_partitionwise(d, spec.clusters_for(d.k()), spec.seed);
    }
    throw std::invalid_argument("unknown recalibrator kind");
}

RecalibratorFactory make_factory(const RecalibratorSpec& spec)
{
    spec.validate();
    return [spec](const LabeledDataset& d) { return fit_recalibrator(d, spec); };
}

// ---------------------------------------------------------------------------
// Prediction

std::string Recalibrator::name() const
{
    return std::visit(overloaded{
                          [](const Identity&) -> std::string { return "identity"; },
                          [](const Isotonic&) -> std::string { return "isotonic"; },
                          [](const Temperature&) -> std::string { return "temperature"; },
                          [](const NadarayaWatson&) -> std::string { return "nw"; },
                          [](const PartitionWise&) -> std::string { return "partition"; },
                          [](const Custom& c) -> std::string { return c.name; },
                      },
                      *model_);
}

Vector Recalibrator::raw_predict(const Eigen::Ref<const Vector>& x) const
{
    return std::visit(
        overloaded{
            [&](const Identity&) -> Vector { return x; },
            [&](const Isotonic& m) -> Vector {
                Vector out(k_);
                for (int j = 0; j < k_; ++j) out[j] = m.per_class[static_cast<std::size_t>(j)](x[j]);
                const double s = out.sum();
                if (s <= kRenormalizeFloor) return uniform_vector(k_);
                return out / s;
            },
            [&](const Temperature& m) -> Vector {
                if (m.temperature == 1.0) return x;
                return apply_temperature(x, m.temperature);
            },
            [&](const NadarayaWatson& m) -> Vector {
                const Eigen::VectorXd d2 = (m.points.rowwise() - x.transpose()).rowwise().squaredNorm();
                // Shift by the nearest distance: the largest weight is exactly 1.
                const double scale = 1.0 / (2.0 * m.bandwidth * m.bandwidth);
                const Eigen::VectorXd w = (-(d2.array() - d2.minCoeff()) * scale).exp();
                Vector out = Vector::Zero(k_);
                for (Eigen::Index i = 0; i < w.size(); ++i) out[m.labels[static_cast<std::size_t>(i)]] += w[i];
                return out / w.sum();
            },
            [&](const PartitionWise& m) -> Vector {
                return m.label_means.row(nearest_centroid(m.centroids, x)).transpose();
            },
            [&](const Custom& m) -> Vector { return m.map(x); },
        },
        *model_);
}

SimplexVector Recalibrator::predict(const Eigen::Ref<const Vector>& x) const
{
    if (x.size() != k_) throw std::invalid_argument("recalibrator: input dimension does not match training classes");
    return validate_simplex(raw_predict(x));
}

SimplexVector Recalibrator::predict(const SimplexVector& x) const { return predict(x.values()); }

PredictionMatrix Recalibrator::predict_all(const PredictionMatrix& x) const
{
    if (x.cols() != k_) throw std::invalid_argument("recalibrator: input dimension does not match training classes");
    PredictionMatrix out(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        out.row(i) = predict(Vector(x.row(i).transpose())).values().transpose();
    return out;
}

}  // namespace calib
