#pragma once

// Synthetic prediction/label generators with a known recalibration function g*,
// and a Monte Carlo oracle for the true calibration error E||U - g*(U)||_p.
//
// Binary predictions are U ~ Beta(0.5, 0.5) stored as rows (U, 1 - U);
// multiclass predictions are U ~ Dirichlet(0.5 * 1_d). All sampling uses the
// counter-based Rng in fixed blocks of kSampleBlock rows, each with its own
// derived seed, so results do not depend on the thread count.

#include "calib/core.hpp"

#include <cstddef>
#include <cstdint>
#include <string>

namespace calib {

inline constexpr std::size_t kSampleBlock = 4096;

enum class ScenarioKind {
    calibrated,
    binary_overconfident,     // g*(u) = sigmoid(slope * logit(u) + bias)
    binary_shifted,           // g*(u) = min(1, u + epsilon)
    multiclass_overconfident, // g*(u)_j ~ sigmoid(alpha * log u_j), alpha = 0.3
    multiclass_underconfident // same map with alpha = 2
};

struct Scenario {
    ScenarioKind kind = ScenarioKind::calibrated;
    int classes = 2;
    double epsilon = 0.02;
    /// 0 selects the kind's default (0.3 over-confident, 2 under-confident).
    double alpha = 0.0;
    double slope = 0.4;
    double bias = 0.3;
    std::uint64_t seed = 0;

    double effective_alpha() const noexcept;
    std::string name() const;
    void validate() const;
};

ScenarioKind parse_scenario_kind(const std::string& name);
std::string scenario_kind_name(ScenarioKind kind);

PredictionMatrix sample_predictions(const Scenario& s, std::size_t n);
PredictionMatrix sample_predictions(const Scenario& s, std::size_t n, std::uint64_t seed);

/// The true recalibration map of the scenario.
SimplexVector apply_gstar(const Scenario& s, const SimplexVector& u);
/// Row-wise g*.
PredictionMatrix apply_gstar(const Scenario& s, const PredictionMatrix& u);

/// One categorical draw per row.
std::vector<int> sample_labels(const PredictionMatrix& probs, std::uint64_t seed);

/// Predictions U plus labels Y ~ Categorical(g*(U)); seeds derived from s.seed.
LabeledDataset generate_dataset(const Scenario& s, std::size_t n);

struct MonteCarloValue {
    double value = 0.0;
    double standard_error = 0.0;
};

/// E||U - g*(U)||_p over n_samples fresh draws of U.
MonteCarloValue true_ce_monte_carlo(const Scenario& s, double p, std::size_t n_samples = 300000,
                                    std::uint64_t seed = 0);

struct TrueOverUnder {
    MonteCarloValue over;
    MonteCarloValue under;
    MonteCarloValue total;
};

/// Binary split of the true error into over-confident (prediction more extreme
/// than g*) and under-confident parts, both on the 2-vector L_p scale.
TrueOverUnder true_over_under_monte_carlo(const Scenario& s, double p, std::size_t n_samples = 300000,
                                          std::uint64_t seed = 0);

}  // namespace calib
