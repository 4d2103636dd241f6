#pragma once

// Binning estimators kept as comparators for the variational estimator.

#include "calib/core.hpp"

#include <cstdint>

namespace calib {

enum class BinningScheme { equal_width, equal_count };

/// Binary ECE on the positive-class probability:
/// sum_b (n_b / n) |mean(label == positive) - mean(p_pos)| over non-empty bins.
double binned_ece_binary(const LabeledDataset& d, int n_bins = 15, BinningScheme scheme = BinningScheme::equal_width);

/// Multiclass binning by k-means on the prediction vectors:
/// sum_i (|B_i| / n) ||acc_i - conf_i||_p with acc_i the mean one-hot label and
/// conf_i the mean prediction within cluster i (p = 2 by default).
double clustered_ece_multiclass(const LabeledDataset& d, int n_clusters = 30, std::uint64_t seed = 0,
                                double p = 2.0);

}  // namespace calib
