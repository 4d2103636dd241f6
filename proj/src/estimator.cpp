#include "calib/estimator.hpp"

#include "calib/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace calib {

void check_metric_applicable(const MetricSpec& metric, int k)
{
    metric.validate();
    if ((metric.kind == MetricKind::over_confidence || metric.kind == MetricKind::under_confidence) && k != 2)
        throw std::invalid_argument("over/under-confidence requires binary data; use a top-class metric for k > 2");
}

double standard_error(const std::vector<double>& terms)
{
    const std::size_t n = terms.size();
    if (n < 2) return 0.0;
    double mean = 0.0;
    for (double t : terms) mean += t;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double t : terms) ss += (t - mean) * (t - mean);
    return std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
}

namespace {

double mean_of(const std::vector<double>& v, std::size_t first, std::size_t count)
{
    double s = 0.0;
    for (std::size_t i = first; i < first + count; ++i) s += v[i];
    return count == 0 ? 0.0 : s / static_cast<double>(count);
}

double sample_term(const MetricSpec& metric, const Eigen::Ref<const Vector>& f, const Vector& g, int y)
{
    switch (metric.kind) {
    case MetricKind::lp:
        return -lp_anchored_loss(g, y, f, metric.p);
    case MetricKind::topclass_l1:
        return -lp_anchored_loss(g, y, f, 1.0);
    case MetricKind::lp_power_p:
        return -lp_power_anchored_loss(g, y, f, metric.p);
    case MetricKind::brier:
        return brier_loss(f, y) - brier_loss(g, y);
    case MetricKind::logloss:
        return log_loss(f, y) - log_loss(g, y);
    case MetricKind::over_confidence:
    case MetricKind::topclass_over:
        return -over_confidence_loss(g[kPositiveClass], y, f[kPositiveClass], metric.p);
    case MetricKind::under_confidence:
    case MetricKind::topclass_under:
        return -under_confidence_loss(g[kPositiveClass], y, f[kPositiveClass], metric.p);
    }
    throw std::invalid_argument("unknown metric kind");
}

LabeledDataset prepare(const LabeledDataset& d, const MetricSpec& metric)
{
    check_metric_applicable(metric, d.k());
    return metric.is_topclass() ? top_class_binarize(d) : d;
}

FoldPlan plan_folds(const LabeledDataset& d, int k_folds, std::uint64_t seed, CvOptions options)
{
    if (k_folds < 2) throw std::invalid_argument("cross-validation needs k_folds >= 2");
    if (d.n() < 2 * static_cast<std::size_t>(k_folds))
        throw std::invalid_argument("cross-validation needs at least 2 * k_folds samples");
    return options.stratified ? make_folds_stratified(d.labels(), k_folds, seed) : make_folds(d.n(), k_folds, seed);
}

CEReport make_report(const MetricSpec& metric, const LabeledDataset& original, std::vector<FoldEstimate> folds,
                     const std::vector<double>& all_terms, int k_folds, std::uint64_t seed, std::string name,
                     bool cv)
{
    CEReport r;
    r.metric = metric;
    const double n = static_cast<double>(original.n());
    double estimate = 0.0;
    for (const FoldEstimate& f : folds) estimate += (static_cast<double>(f.size) / n) * f.value;
    r.estimate = estimate;
    r.estimate_clipped = std::max(estimate, 0.0);
    r.per_fold = std::move(folds);
    r.standard_error = standard_error(all_terms);
    r.n = original.n();
    r.k = original.k();
    r.k_folds = k_folds;
    r.seed = seed;
    r.recalibrator = std::move(name);
    r.cross_validated = cv;
    return r;
}

}  // namespace

std::vector<double> per_sample_terms(const LabeledDataset& val, const MetricSpec& metric, const Recalibrator& g)
{
    if (g.k() != val.k()) throw std::invalid_argument("recalibrator and data disagree on the number of classes");
    check_metric_applicable(metric, val.k());
    if (metric.is_topclass() && val.k() != 2) throw std::invalid_argument("top-class metrics need binarized data");

    std::vector<double> terms(val.n());
    for (std::size_t i = 0; i < val.n(); ++i) {
        const auto f = val.predictions().row(static_cast<Eigen::Index>(i)).transpose();
        const SimplexVector gf = g.predict(Vector(f));
        terms[i] = sample_term(metric, f, gf.values(), val.label(i)) + 0.0;
    }
    return terms;
}

FoldResult per_fold_ce(const LabeledDataset& train, const LabeledDataset& val, const MetricSpec& metric,
                       const RecalibratorFactory& fit)
{
    if (train.k() != val.k()) throw std::invalid_argument("train and validation folds disagree on k");
    const LabeledDataset tr = prepare(train, metric);
    const LabeledDataset va = prepare(val, metric);
    const Recalibrator g = fit(tr);
    FoldResult out;
    out.terms = per_sample_terms(va, metric, g);
    out.estimate = mean_of(out.terms, 0, out.terms.size());
    return out;
}

FoldResult per_fold_ce(const LabeledDataset& train, const LabeledDataset& val, const MetricSpec& metric,
                       const RecalibratorSpec& spec)
{
    return per_fold_ce(train, val, metric, make_factory(spec));
}

CEReport estimate_ce_cv(const LabeledDataset& d, const MetricSpec& metric, const RecalibratorFactory& fit,
                        int k_folds, std::uint64_t seed, CvOptions options, const std::string& recalibrator_name)
{
    const LabeledDataset work = prepare(d, metric);
    const FoldPlan plan = plan_folds(work, k_folds, seed, options);

    std::vector<FoldEstimate> folds;
    std::vector<double> all_terms;
    all_terms.reserve(d.n());
    for (int j = 0; j < k_folds; ++j) {
        const auto val_idx = plan.fold_indices(j);
        const auto tr_idx = plan.complement_indices(j);
        const Recalibrator g = fit(work.subset(tr_idx));
        const std::vector<double> terms = per_sample_terms(work.subset(val_idx), metric, g);
        folds.push_back({val_idx.size(), mean_of(terms, 0, terms.size())});
        all_terms.insert(all_terms.end(), terms.begin(), terms.end());
    }
    return make_report(metric, d, std::move(folds), all_terms, k_folds, seed, recalibrator_name, true);
}

CEReport estimate_ce_cv(const LabeledDataset& d, const MetricSpec& metric, const RecalibratorSpec& spec,
                        int k_folds, std::uint64_t seed, CvOptions options)
{
    return estimate_ce_cv(d, metric, make_factory(spec), k_folds, seed, options, spec.name());
}

CEReport estimate_ce_insample(const LabeledDataset& d, const MetricSpec& metric, const RecalibratorFactory& fit,
                              const std::string& recalibrator_name)
{
    const LabeledDataset work = prepare(d, metric);
    const Recalibrator g = fit(work);
    const std::vector<double> terms = per_sample_terms(work, metric, g);
    std::vector<FoldEstimate> folds{{terms.size(), mean_of(terms, 0, terms.size())}};
    return make_report(metric, d, std::move(folds), terms, 1, 0, recalibrator_name, false);
}

CEReport estimate_ce_insample(const LabeledDataset& d, const MetricSpec& metric, const RecalibratorSpec& spec)
{
    return estimate_ce_insample(d, metric, make_factory(spec), spec.name());
}

OverUnderReport estimate_over_under(const LabeledDataset& d, const RecalibratorFactory& fit, int k_folds,
                                    std::uint64_t seed, double p, bool topclass, CvOptions options,
                                    const std::string& recalibrator_name)
{
    if (!topclass && d.k() != 2)
        throw std::invalid_argument("over/under-confidence requires binary data or the top-class reduction");
    const MetricSpec over_metric{topclass ? MetricKind::topclass_over : MetricKind::over_confidence, p};
    const MetricSpec under_metric{topclass ? MetricKind::topclass_under : MetricKind::under_confidence, p};
    const MetricSpec total_metric{topclass ? MetricKind::topclass_l1 : MetricKind::lp, p};
    over_metric.validate();
    if (topclass) total_metric.validate();

    const LabeledDataset work = topclass ? top_class_binarize(d) : d;
    const FoldPlan plan = plan_folds(work, k_folds, seed, options);

    OverUnderReport out;
    out.over_terms.assign(work.n(), 0.0);
    out.under_terms.assign(work.n(), 0.0);
    out.total_terms.assign(work.n(), 0.0);
    std::vector<FoldEstimate> over_folds;
    std::vector<FoldEstimate> under_folds;
    std::vector<FoldEstimate> total_folds;
    std::vector<double> over_all;
    std::vector<double> under_all;
    std::vector<double> total_all;

    for (int j = 0; j < k_folds; ++j) {
        const auto val_idx = plan.fold_indices(j);
        const Recalibrator g = fit(work.subset(plan.complement_indices(j)));
        double so = 0.0;
        double su = 0.0;
        double st = 0.0;
        for (std::size_t i : val_idx) {
            const Vector f = work.row(i);
            const double z = g.predict(f)[kPositiveClass];
            const double anchor = f[kPositiveClass];
            const int y = work.label(i);
            // All three go through the same two-class construction, so the
            // decomposition holds exactly, not just to rounding.
            const double to = -over_confidence_loss(z, y, anchor, p) + 0.0;
            const double tu = -under_confidence_loss(z, y, anchor, p) + 0.0;
            const double tt = -binary_anchored_loss(z, y, anchor, p) + 0.0;
            out.over_terms[i] = to;
            out.under_terms[i] = tu;
            out.total_terms[i] = tt;
            so += to;
            su += tu;
            st += tt;
            over_all.push_back(to);
            under_all.push_back(tu);
            total_all.push_back(tt);
        }
        const auto m = static_cast<double>(val_idx.size());
        over_folds.push_back({val_idx.size(), so / m});
        under_folds.push_back({val_idx.size(), su / m});
        total_folds.push_back({val_idx.size(), st / m});
    }
    out.over = make_report(over_metric, d, std::move(over_folds), over_all, k_folds, seed, recalibrator_name, true);
    out.under = make_report(under_metric, d, std::move(under_folds), under_all, k_folds, seed, recalibrator_name, true);
    out.total = make_report(total_metric, d, std::move(total_folds), total_all, k_folds, seed, recalibrator_name, true);
    return out;
}

OverUnderReport estimate_over_under(const LabeledDataset& d, const RecalibratorSpec& spec, int k_folds,
                                    std::uint64_t seed, double p, bool topclass, CvOptions options)
{
    return estimate_over_under(d, make_factory(spec), k_folds, seed, p, topclass, options, spec.name());
}

}  // namespace calib
