#pragma once

// Pointwise losses for variational calibration-error estimation.
//
// The anchored L_p loss is the proper loss whose entropy is -||z - a||_p for a
// fixed anchor a = f(X):
//
//     l_a(z, y) = <grad ||z - a||_p, a - e_y>     (z != a),    l_a(a, y) = 0,
//
// with grad ||v||_p = sign(v) |v|^(p-1) / ||v||_p^(p-1). Its expectation under
// Y ~ q is -||q - a||_p, so E[l_a(f, Y) - l_a(g*(f), Y)] = E||f - C||_p.
//
// All functions accept any Eigen dense expression and are templated on its scalar.

#include "calib/core.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <stdexcept>

namespace calib {

inline constexpr double kZeroNormTolerance = 1e-12;
inline constexpr double kProbabilityFloor = 1e-15;

namespace detail {

template <class Scalar>
Scalar sign(Scalar x)
{
    return static_cast<Scalar>((Scalar(0) < x) - (x < Scalar(0)));
}

/// |x|^e with 0^0 := 1.
template <class Scalar>
Scalar abs_pow(Scalar x, Scalar e)
{
    using std::abs;
    using std::exp;
    using std::log;
    if (e == Scalar(0)) return Scalar(1);
    const Scalar ax = abs(x);
    if (ax == Scalar(0)) return Scalar(0);
    return exp(e * log(ax));
}

inline void check_exponent(double p)
{
    if (!(p >= 1.0)) throw std::invalid_argument("L_p exponent must satisfy p >= 1");
}

}  // namespace detail

template <class Derived>
typename Derived::Scalar lp_norm(const Eigen::MatrixBase<Derived>& v, typename Derived::Scalar p)
{
    using Scalar = typename Derived::Scalar;
    using std::abs;
    using std::pow;
    if (p == Scalar(1)) return v.template lpNorm<1>();
    if (p == Scalar(2)) return v.norm();
    // Scale by the max entry so large p does not underflow.
    const Scalar m = v.cwiseAbs().maxCoeff();
    if (m == Scalar(0)) return Scalar(0);
    Scalar acc(0);
    for (Eigen::Index i = 0; i < v.size(); ++i) acc += detail::abs_pow(v[i] / m, p);
    return m * pow(acc, Scalar(1) / p);
}

/// Gradient of z -> ||z - anchor||_p; the zero vector when the norm is <= zero_norm_tol.
template <class DerivedZ, class DerivedA>
Eigen::Matrix<typename DerivedZ::Scalar, Eigen::Dynamic, 1>
lp_gradient(const Eigen::MatrixBase<DerivedZ>& z, const Eigen::MatrixBase<DerivedA>& anchor,
            typename DerivedZ::Scalar p, typename DerivedZ::Scalar zero_norm_tol = kZeroNormTolerance)
{
    using Scalar = typename DerivedZ::Scalar;
    detail::check_exponent(static_cast<double>(p));
    if (z.size() != anchor.size()) throw std::invalid_argument("lp_gradient: dimension mismatch");

    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> diff = z - anchor;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> grad = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(diff.size());
    const Scalar norm = lp_norm(diff, p);
    if (norm <= zero_norm_tol) return grad;

    if (p == Scalar(1)) {
        for (Eigen::Index i = 0; i < diff.size(); ++i) grad[i] = detail::sign(diff[i]);
        return grad;
    }
    // sign(d_i) (|d_i| / ||d||)^(p-1): dividing first keeps the ratio in [0, 1].
    for (Eigen::Index i = 0; i < diff.size(); ++i)
        grad[i] = detail::sign(diff[i]) * detail::abs_pow(diff[i] / norm, p - Scalar(1));
    return grad;
}

/// Anchored L_p loss l_anchor(z, y).
template <class DerivedZ, class DerivedA>
typename DerivedZ::Scalar lp_anchored_loss(const Eigen::MatrixBase<DerivedZ>& z, int y_label,
                                           const Eigen::MatrixBase<DerivedA>& anchor,
                                           typename DerivedZ::Scalar p,
                                           typename DerivedZ::Scalar zero_norm_tol = kZeroNormTolerance)
{
    using Scalar = typename DerivedZ::Scalar;
    const auto grad = lp_gradient(z, anchor, p, zero_norm_tol);
    // <grad, anchor - e_y> = <grad, anchor> - grad_y
    Scalar value = grad.dot(anchor.derived().template cast<Scalar>()) - grad[y_label];
    return value + Scalar(0);
}

/// Anchored L_p loss bound to a fixed anchor.
struct AnchoredLpLoss {
    Vector anchor;
    double p = 1.0;
    double zero_norm_tol = kZeroNormTolerance;

    AnchoredLpLoss(const SimplexVector& a, double exponent, double tol = kZeroNormTolerance)
        : anchor(a.values()), p(exponent), zero_norm_tol(tol)
    {
        detail::check_exponent(exponent);
    }

    template <class Derived>
    double operator()(const Eigen::MatrixBase<Derived>& z, int y_label) const
    {
        return lp_anchored_loss(z, y_label, anchor, p, zero_norm_tol);
    }
    double operator()(const SimplexVector& z, int y_label) const { return (*this)(z.values(), y_label); }
};

/// ||p - e_y||_2^2
template <class Derived>
typename Derived::Scalar brier_loss(const Eigen::MatrixBase<Derived>& p, int y_label)
{
    using Scalar = typename Derived::Scalar;
    Scalar acc = p.squaredNorm();
    acc += Scalar(1) - Scalar(2) * p[y_label];
    return std::max(acc, Scalar(0));
}

/// -log(max(p_y, floor))
template <class Derived>
typename Derived::Scalar log_loss(const Eigen::MatrixBase<Derived>& p, int y_label,
                                  typename Derived::Scalar prob_floor = kProbabilityFloor)
{
    using std::log;
    using std::max;
    return -log(max(p[y_label], prob_floor));
}

/// Proper loss built from a convex distance D_a with D_a(a) = 0 and a subgradient
/// with grad D_a(a) = 0: l_a(z, y) = -D_a(z) - <e_y - z, grad D_a(z)>.
struct GeneralDistanceLoss {
    Vector anchor;
    std::function<double(const Vector&)> distance;
    std::function<Vector(const Vector&)> subgradient;

    double operator()(const Vector& z, int y_label) const
    {
        const Vector g = subgradient(z);
        // <e_y - z, g> = g_y - <z, g>
        return -distance(z) - (g[y_label] - z.dot(g));
    }
};

template <class Derived>
double general_distance_loss(const Eigen::MatrixBase<Derived>& z, int y_label, const GeneralDistanceLoss& loss)
{
    return loss(z.derived().template cast<double>().eval(), y_label);
}

/// D_a = ||z - a||_p with its gradient (zero at a).
GeneralDistanceLoss lp_distance_loss(const SimplexVector& anchor, double p);
/// D_a = ||z - a||_p^p, gradient p sign(z - a) |z - a|^(p-1).
GeneralDistanceLoss lp_power_distance_loss(const SimplexVector& anchor, double p);

/// D_a = ||z - a||_p^p evaluated without std::function indirection.
template <class DerivedZ, class DerivedA>
typename DerivedZ::Scalar lp_power_anchored_loss(const Eigen::MatrixBase<DerivedZ>& z, int y_label,
                                                 const Eigen::MatrixBase<DerivedA>& anchor,
                                                 typename DerivedZ::Scalar p)
{
    using Scalar = typename DerivedZ::Scalar;
    detail::check_exponent(static_cast<double>(p));
    Scalar dist(0);
    Scalar inner(0);  // <e_y - z, grad D>
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        const Scalar d = z[i] - anchor[i];
        const Scalar g = p * detail::sign(d) * detail::abs_pow(d, p - Scalar(1));
        dist += detail::abs_pow(d, p);
        inner += ((i == y_label ? Scalar(1) : Scalar(0)) - z[i]) * g;
    }
    return -dist - inner + Scalar(0);
}

// Binary over/under-confidence. Arguments are positive-class probabilities; the
// prediction is clipped towards the anchor so that only corrections in one
// direction are scored, then the base anchored loss is applied to the 2-vectors.

/// Clip for the over-confidence loss: min(z, f) if f > 1/2, max(z, f) if f < 1/2, 1/2 if f = 1/2.
inline double clip_over_confidence(double z, double anchor_f)
{
    if (anchor_f > 0.5) return std::min(z, anchor_f);
    if (anchor_f < 0.5) return std::max(z, anchor_f);
    return 0.5;
}

/// Clip for the under-confidence loss: max(z, f) if f > 1/2, min(z, f) if f < 1/2, 1/2 if f = 1/2.
inline double clip_under_confidence(double z, double anchor_f)
{
    if (anchor_f > 0.5) return std::max(z, anchor_f);
    if (anchor_f < 0.5) return std::min(z, anchor_f);
    return 0.5;
}

/// Anchored L_p loss on the two-class points (z, 1 - z) and (f, 1 - f).
inline double binary_anchored_loss(double z, int y_label, double anchor_f, double p)
{
    const Eigen::Vector2d zv(z, 1.0 - z);
    const Eigen::Vector2d av(anchor_f, 1.0 - anchor_f);
    return lp_anchored_loss(zv, y_label, av, p);
}

inline double over_confidence_loss(double z, int y_label, double anchor_f, double p)
{
    return binary_anchored_loss(clip_over_confidence(z, anchor_f), y_label, anchor_f, p);
}

inline double under_confidence_loss(double z, int y_label, double anchor_f, double p)
{
    return binary_anchored_loss(clip_under_confidence(z, anchor_f), y_label, anchor_f, p);
}

/// Over-confidence variant with an arbitrary base loss `base(Eigen::Vector2d, label)`.
template <class BaseLoss>
    requires std::invocable<const BaseLoss&, const Eigen::Vector2d&, int>
double over_confidence_loss(double z, int y_label, double anchor_f, const BaseLoss& base)
{
    const double c = clip_over_confidence(z, anchor_f);
    return base(Eigen::Vector2d(c, 1.0 - c), y_label);
}

template <class BaseLoss>
    requires std::invocable<const BaseLoss&, const Eigen::Vector2d&, int>
double under_confidence_loss(double z, int y_label, double anchor_f, const BaseLoss& base)
{
    const double c = clip_under_confidence(z, anchor_f);
    return base(Eigen::Vector2d(c, 1.0 - c), y_label);
}

}  // namespace calib
