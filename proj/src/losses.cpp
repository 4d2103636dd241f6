#include "calib/losses.hpp"

namespace calib {

GeneralDistanceLoss lp_distance_loss(const SimplexVector& anchor, double p)
{
    detail::check_exponent(p);
    Vector a = anchor.values();
    return GeneralDistanceLoss{
        a,
        [a, p](const Vector& z) { return lp_norm((z - a).eval(), p); },
        [a, p](const Vector& z) -> Vector { return lp_gradient(z, a, p); },
    };
}

GeneralDistanceLoss lp_power_distance_loss(const SimplexVector& anchor, double p)
{
    detail::check_exponent(p);
    Vector a = anchor.values();
    return GeneralDistanceLoss{
        a,
        [a, p](const Vector& z) {
            double acc = 0.0;
            for (Eigen::Index i = 0; i < z.size(); ++i) acc += detail::abs_pow(z[i] - a[i], p);
            return acc;
        },
        [a, p](const Vector& z) -> Vector {
            Vector g(z.size());
            for (Eigen::Index i = 0; i < z.size(); ++i) {
                const double d = z[i] - a[i];
                g[i] = p * detail::sign(d) * detail::abs_pow(d, p - 1.0);
            }
            return g;
        },
    };
}

}  // namespace calib
