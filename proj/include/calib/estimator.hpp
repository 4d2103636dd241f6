#pragma once

// Cross-validated variational calibration-error estimator.
//
// For a proper loss l and a recalibration map g fitted on held-in data, each
// held-out sample contributes l(f(X_i), Y_i) - l(g(f(X_i)), Y_i). Fold means are
// aggregated with weights |fold| / n. Because g never sees the samples it is
// scored on, the expectation of the estimate cannot exceed the true error.

#include "calib/core.hpp"
#include "calib/recalibrate.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace calib {

struct FoldResult {
    double estimate = 0.0;
    std::vector<double> terms;
};

struct CvOptions {
    bool stratified = false;
};

/// Per-sample summands l(f, y) - l(g(f), y) for metric on `val`. The dataset must
/// already be binarized for top-class metrics.
std::vector<double> per_sample_terms(const LabeledDataset& val, const MetricSpec& metric, const Recalibrator& g);

/// Fits on `train`, scores `val`.
FoldResult per_fold_ce(const LabeledDataset& train, const LabeledDataset& val, const MetricSpec& metric,
                       const RecalibratorSpec& spec);
FoldResult per_fold_ce(const LabeledDataset& train, const LabeledDataset& val, const MetricSpec& metric,
                       const RecalibratorFactory& fit);

CEReport estimate_ce_cv(const LabeledDataset& d, const MetricSpec& metric, const RecalibratorSpec& spec,
                        int k_folds, std::uint64_t seed, CvOptions options = {});
CEReport estimate_ce_cv(const LabeledDataset& d, const MetricSpec& metric, const RecalibratorFactory& fit,
                        int k_folds, std::uint64_t seed, CvOptions options = {},
                        const std::string& recalibrator_name = "custom");

/// Fits and scores on the same data (no cross-validation); one pseudo-fold.
CEReport estimate_ce_insample(const LabeledDataset& d, const MetricSpec& metric, const RecalibratorSpec& spec);
CEReport estimate_ce_insample(const LabeledDataset& d, const MetricSpec& metric, const RecalibratorFactory& fit,
                              const std::string& recalibrator_name = "custom");

struct OverUnderReport {
    CEReport over;
    CEReport under;
    CEReport total;
    /// Per-sample terms in dataset order; over_terms[i] + under_terms[i] == total_terms[i]
    /// whenever the anchor is not exactly 1/2.
    std::vector<double> over_terms;
    std::vector<double> under_terms;
    std::vector<double> total_terms;
};

/// Over-, under-confidence and plain anchored L_p estimates from one shared fit per
/// fold. Multiclass data requires `topclass`.
OverUnderReport estimate_over_under(const LabeledDataset& d, const RecalibratorSpec& spec, int k_folds,
                                    std::uint64_t seed, double p = 1.0, bool topclass = false,
                                    CvOptions options = {});
OverUnderReport estimate_over_under(const LabeledDataset& d, const RecalibratorFactory& fit, int k_folds,
                                    std::uint64_t seed, double p = 1.0, bool topclass = false,
                                    CvOptions options = {}, const std::string& recalibrator_name = "custom");

/// Throws for metric/data combinations that have no defined meaning.
void check_metric_applicable(const MetricSpec& metric, int k);

/// Sample standard deviation of terms divided by sqrt(n); 0 for fewer than 2 terms.
double standard_error(const std::vector<double>& terms);

}  // namespace calib
