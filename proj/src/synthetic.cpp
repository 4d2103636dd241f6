#include "calib/synthetic.hpp"

#include "calib/losses.hpp"
#include "calib/parallel.hpp"
#include "calib/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace calib {

namespace {

constexpr double kLogitClamp = 1e-12;
constexpr double kDirichletConcentration = 0.5;

enum SeedTag : std::uint64_t { tag_predictions = 1, tag_labels = 2, tag_oracle = 3 };

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double clamp_open(double u) { return std::clamp(u, kLogitClamp, 1.0 - kLogitClamp); }

bool is_binary_kind(ScenarioKind k)
{
    return k == ScenarioKind::binary_overconfident || k == ScenarioKind::binary_shifted;
}

std::size_t block_count(std::size_t n) { return (n + kSampleBlock - 1) / kSampleBlock; }

double gstar_positive(const Scenario& s, double u)
{
    switch (s.kind) {
    case ScenarioKind::binary_overconfident: {
        const double c = clamp_open(u);
        return sigmoid(s.slope * std::log(c / (1.0 - c)) + s.bias);
    }
    case ScenarioKind::binary_shifted: return std::min(1.0, u + s.epsilon);
    default: return u;
    }
}

Vector gstar_raw(const Scenario& s, const Eigen::Ref<const Vector>& u)
{
    switch (s.kind) {
    case ScenarioKind::calibrated: return u;
    case ScenarioKind::binary_overconfident:
    case ScenarioKind::binary_shifted: {
        const double v = gstar_positive(s, u[kPositiveClass]);
        Vector out(2);
        out << v, 1.0 - v;
        return out;
    }
    case ScenarioKind::multiclass_overconfident:
    case ScenarioKind::multiclass_underconfident: {
        const double alpha = s.effective_alpha();
        Vector out(u.size());
        for (Eigen::Index j = 0; j < u.size(); ++j) out[j] = sigmoid(alpha * std::log(std::max(u[j], kLogitClamp)));
        return out / out.sum();
    }
    }
    throw std::invalid_argument("unknown scenario kind");
}

}  // namespace

double Scenario::effective_alpha() const noexcept
{
    if (alpha > 0.0) return alpha;
    return kind == ScenarioKind::multiclass_underconfident ? 2.0 : 0.3;
}

std::string scenario_kind_name(ScenarioKind kind)
{
    switch (kind) {
    case ScenarioKind::calibrated: return "calibrated";
    case ScenarioKind::binary_overconfident: return "binary-overconfident";
    case ScenarioKind::binary_shifted: return "binary-shifted";
    case ScenarioKind::multiclass_overconfident: return "multiclass-overconfident";
    case ScenarioKind::multiclass_underconfident: return "multiclass-underconfident";
    }
    return "unknown";
}

ScenarioKind parse_scenario_kind(const std::string& name)
{
    std::string key = name;
    std::replace(key.begin(), key.end(), '_', '-');
    for (ScenarioKind k : {ScenarioKind::calibrated, ScenarioKind::binary_overconfident, ScenarioKind::binary_shifted,
                           ScenarioKind::multiclass_overconfident, ScenarioKind::multiclass_underconfident})
        if (scenario_kind_name(k) == key) return k;
    throw std::invalid_argument("unknown scenario '" + name + "'");
}

std::string Scenario::name() const { return scenario_kind_name(kind); }

void Scenario::validate() const
{
    if (classes < 2) throw std::invalid_argument("scenario needs at least 2 classes");
    if (is_binary_kind(kind) && classes != 2) throw std::invalid_argument(name() + " is a binary scenario");
    if (!(epsilon >= 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must lie in [0, 1)");
    if (alpha < 0.0) throw std::invalid_argument("alpha must be positive");
}

PredictionMatrix sample_predictions(const Scenario& s, std::size_t n, std::uint64_t seed)
{
    s.validate();
    const int k = s.classes;
    PredictionMatrix out(static_cast<Eigen::Index>(n), k);
    parallel_for(block_count(n), [&](std::size_t b) {
        Rng rng(derive_seed(seed, b));
        const std::size_t end = std::min(n, (b + 1) * kSampleBlock);
        for (std::size_t i = b * kSampleBlock; i < end; ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            if (k == 2) {
                const double u = rng.beta(kDirichletConcentration, kDirichletConcentration);
                out(r, 0) = u;
                out(r, 1) = 1.0 - u;
            } else {
                double total = 0.0;
                for (int j = 0; j < k; ++j) {
                    out(r, j) = rng.gamma(kDirichletConcentration);
                    total += out(r, j);
                }
                out.row(r) /= total;
            }
        }
    });
    return out;
}

PredictionMatrix sample_predictions(const Scenario& s, std::size_t n)
{
    return sample_predictions(s, n, derive_seed(s.seed, tag_predictions));
}

SimplexVector apply_gstar(const Scenario& s, const SimplexVector& u)
{
    if (u.size() != s.classes) throw std::invalid_argument("apply_gstar: dimension mismatch");
    return validate_simplex(gstar_raw(s, u.values()));
}

PredictionMatrix apply_gstar(const Scenario& s, const PredictionMatrix& u)
{
    if (u.cols() != s.classes) throw std::invalid_argument("apply_gstar: dimension mismatch");
    PredictionMatrix out(u.rows(), u.cols());
    for (Eigen::Index i = 0; i < u.rows(); ++i) out.row(i) = gstar_raw(s, u.row(i).transpose()).transpose();
    return out;
}

std::vector<int> sample_labels(const PredictionMatrix& probs, std::uint64_t seed)
{
    const auto n = static_cast<std::size_t>(probs.rows());
    std::vector<int> labels(n, 0);
    parallel_for(block_count(n), [&](std::size_t b) {
        Rng rng(derive_seed(seed, b));
        const std::size_t end = std::min(n, (b + 1) * kSampleBlock);
        for (std::size_t i = b * kSampleBlock; i < end; ++i) {
            const auto row = probs.row(static_cast<Eigen::Index>(i));
            const double r = rng.uniform();
            double acc = 0.0;
            int label = static_cast<int>(row.size()) - 1;
            for (Eigen::Index j = 0; j < row.size(); ++j) {
                acc += row[j];
                if (r < acc) {
                    label = static_cast<int>(j);
                    break;
                }
            }
            // Never land on a zero-probability class through rounding at the top.
            while (label > 0 && row[label] == 0.0) --label;
            labels[i] = label;
        }
    });
    return labels;
}

LabeledDataset generate_dataset(const Scenario& s, std::size_t n)
{
    PredictionMatrix u = sample_predictions(s, n);
    const PredictionMatrix g = apply_gstar(s, u);
    std::vector<int> labels = sample_labels(g, derive_seed(s.seed, tag_labels));
    return LabeledDataset(std::move(u), std::move(labels));
}

namespace {

MonteCarloValue summarize(const std::vector<double>& v)
{
    const auto n = static_cast<double>(v.size());
    double sum = 0.0;
    for (double x : v) sum += x;
    const double mean = sum / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double se = v.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    return {mean, se};
}

}  // namespace

MonteCarloValue true_ce_monte_carlo(const Scenario& s, double p, std::size_t n_samples, std::uint64_t seed)
{
    if (!(p >= 1.0)) throw std::invalid_argument("p must be >= 1");
    if (n_samples == 0) throw std::invalid_argument("need at least one Monte Carlo sample");
    const PredictionMatrix u = sample_predictions(s, n_samples, derive_seed(seed, tag_oracle));
    std::vector<double> dist(n_samples);
    parallel_for(block_count(n_samples), [&](std::size_t b) {
        const std::size_t end = std::min(n_samples, (b + 1) * kSampleBlock);
        for (std::size_t i = b * kSampleBlock; i < end; ++i) {
            const auto row = u.row(static_cast<Eigen::Index>(i)).transpose();
            dist[i] = lp_norm((row - gstar_raw(s, row)).eval(), p);
        }
    });
    return summarize(dist);
}

TrueOverUnder true_over_under_monte_carlo(const Scenario& s, double p, std::size_t n_samples, std::uint64_t seed)
{
    if (s.classes != 2) throw std::invalid_argument("over/under split is defined for binary scenarios");
    if (!(p >= 1.0)) throw std::invalid_argument("p must be >= 1");
    const PredictionMatrix u = sample_predictions(s, n_samples, derive_seed(seed, tag_oracle));
    std::vector<double> over(n_samples, 0.0);
    std::vector<double> under(n_samples, 0.0);
    std::vector<double> total(n_samples, 0.0);
    const double scale = std::pow(2.0, 1.0 / p);
    for (std::size_t i = 0; i < n_samples; ++i) {
        const double f = u(static_cast<Eigen::Index>(i), kPositiveClass);
        const double c = gstar_positive(s, f);
        const double gap = scale * std::abs(f - c);
        total[i] = gap;
        // Over-confident: the truth lies between the prediction and 1/2.
        const bool over_confident = (f > 0.5 && c < f) || (f < 0.5 && c > f);
        const bool under_confident = (f > 0.5 && c > f) || (f < 0.5 && c < f);
        if (over_confident) over[i] = gap;
        if (under_confident) under[i] = gap;
    }
    return {summarize(over), summarize(under), summarize(total)};
}

}  // namespace calib
