#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>

namespace phtest::geom {

/// Robust planar predicates: a static floating-point filter decides the easy
/// cases, near-degenerate ones fall back to exact rational arithmetic, so the
/// returned sign is always the true sign.
namespace detail {

using exact_t = boost::multiprecision::cpp_rational;

// Filter constants from standard forward error analysis (eps = 2^-53).
inline constexpr double kOrientErrBound = 3.3306690738754716e-16;    // (3 + 16 eps) eps
inline constexpr double kIncircleErrBound = 1.1102230246251577e-15;  // (10 + 96 eps) eps

inline int sign_of(const exact_t& v) {
    if (v > 0) return 1;
    if (v < 0) return -1;
    return 0;
}

inline int orient2d_exact(double ax, double ay, double bx, double by, double cx, double cy) {
    const exact_t acx = exact_t(ax) - exact_t(cx);
    const exact_t acy = exact_t(ay) - exact_t(cy);
    const exact_t bcx = exact_t(bx) - exact_t(cx);
    const exact_t bcy = exact_t(by) - exact_t(cy);
    return sign_of(acx * bcy - acy * bcx);
}

inline int incircle_exact(double ax, double ay, double bx, double by, double cx, double cy,
                          double dx, double dy) {
    const exact_t adx = exact_t(ax) - exact_t(dx);
    const exact_t ady = exact_t(ay) - exact_t(dy);
    const exact_t bdx = exact_t(bx) - exact_t(dx);
    const exact_t bdy = exact_t(by) - exact_t(dy);
    const exact_t cdx = exact_t(cx) - exact_t(dx);
    const exact_t cdy = exact_t(cy) - exact_t(dy);

    const exact_t alift = adx * adx + ady * ady;
    const exact_t blift = bdx * bdx + bdy * bdy;
    const exact_t clift = cdx * cdx + cdy * cdy;

    const exact_t det = alift * (bdx * cdy - bdy * cdx) - blift * (adx * cdy - ady * cdx) +
                        clift * (adx * bdy - ady * bdx);
    return sign_of(det);
}

}  // namespace detail

/// Sign of the signed area of triangle (a, b, c): +1 if counterclockwise,
/// -1 if clockwise, 0 if exactly collinear.
inline int orient2d(double ax, double ay, double bx, double by, double cx, double cy) {
    const double acx = ax - cx, acy = ay - cy;
    const double bcx = bx - cx, bcy = by - cy;
    const double detleft = acx * bcy;
    const double detright = acy * bcx;
    const double det = detleft - detright;

    double detsum;
    if (detleft > 0) {
        if (detright <= 0) return det > 0 ? 1 : (det < 0 ? -1 : 0);
        detsum = detleft + detright;
    } else if (detleft < 0) {
        if (detright >= 0) return det > 0 ? 1 : (det < 0 ? -1 : 0);
        detsum = -detleft - detright;
    } else {
        return det > 0 ? 1 : (det < 0 ? -1 : 0);
    }

    const double errbound = detail::kOrientErrBound * detsum;
    if (det > errbound || -det > errbound) return det > 0 ? 1 : -1;
    return detail::orient2d_exact(ax, ay, bx, by, cx, cy);
}

/// +1 if d lies strictly inside the circumcircle of the counterclockwise
/// triangle (a, b, c), -1 if strictly outside, 0 if cocircular.
inline int incircle(double ax, double ay, double bx, double by, double cx, double cy, double dx,
                    double dy) {
    const double adx = ax - dx, ady = ay - dy;
    const double bdx = bx - dx, bdy = by - dy;
    const double cdx = cx - dx, cdy = cy - dy;

    const double alift = adx * adx + ady * ady;
    const double blift = bdx * bdx + bdy * bdy;
    const double clift = cdx * cdx + cdy * cdy;

    const double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy;
    const double cdxady = cdx * ady, adxcdy = adx * cdy;
    const double adxbdy = adx * bdy, bdxady = bdx * ady;

    const double det =
        alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) + clift * (adxbdy - bdxady);

    const double permanent = (std::abs(bdxcdy) + std::abs(cdxbdy)) * alift +
                             (std::abs(cdxady) + std::abs(adxcdy)) * blift +
                             (std::abs(adxbdy) + std::abs(bdxady)) * clift;
    const double errbound = detail::kIncircleErrBound * permanent;
    if (det > errbound || -det > errbound) return det > 0 ? 1 : -1;
    return detail::incircle_exact(ax, ay, bx, by, cx, cy, dx, dy);
}

/// True iff p lies strictly inside segment (a, b); requires collinearity to
/// have been established by the caller.
inline bool in_open_segment(double ax, double ay, double bx, double by, double px, double py) {
    if (ax != bx) {
        const double lo = ax < bx ? ax : bx, hi = ax < bx ? bx : ax;
        return lo < px && px < hi;
    }
    const double lo = ay < by ? ay : by, hi = ay < by ? by : ay;
    return lo < py && py < hi;
}

}  // namespace phtest::geom
