#include "oodkit/error.hpp"
#include "oodkit/evaluation.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace oodkit::eval {

namespace {

double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Upper tail P(T > t) for t >= 0 without cancellation.
double upper_tail(double t, double df) {
    const boost::math::students_t_distribution<double> dist(df);
    return boost::math::cdf(boost::math::complement(dist, t));
}

}  // namespace

double student_t_cdf(double t, double df) {
    if (!(df > 0.0)) throw Error(ErrorCode::InvalidArgument, "degrees of freedom must be positive");
    if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
    return t >= 0.0 ? 1.0 - upper_tail(t, df) : upper_tail(-t, df);
}

Correlation pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error(ErrorCode::LengthMismatch, "correlation inputs differ in length");
    if (x.size() < 3) throw Error(ErrorCode::TooFewPoints, "correlation needs at least 3 points");
    const double mx = mean_of(x), my = mean_of(y);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::ZeroVariance, "correlation is undefined for a constant input");
    Correlation out;
    out.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    const double df = static_cast<double>(x.size() - 2);
    const double one_minus_r2 = 1.0 - out.r * out.r;
    if (one_minus_r2 <= 0.0) {
        out.p = 0.0;
        return out;
    }
    const double t = std::abs(out.r) * std::sqrt(df / one_minus_r2);
    out.p = std::min(1.0, 2.0 * upper_tail(t, df));
    return out;
}

TTest paired_t_test(std::span<const double> a, std::span<const double> b, Alternative alternative) {
    if (a.size() != b.size()) throw Error(ErrorCode::LengthMismatch, "paired samples differ in length");
    if (a.size() < 2) throw Error(ErrorCode::TooFewPoints, "paired t-test needs at least 2 pairs");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    const double md = mean_of(d);
    double ss = 0.0;
    for (double x : d) ss += (x - md) * (x - md);
    const double n = static_cast<double>(d.size());
    const double sd = std::sqrt(ss / (n - 1.0));
    if (sd == 0.0) throw Error(ErrorCode::ZeroVariance, "paired differences have zero variance");

    TTest out;
    out.df = d.size() - 1;
    out.t = md / (sd / std::sqrt(n));
    const double df = static_cast<double>(out.df);
    const double p_less = student_t_cdf(out.t, df);
    const double p_greater = student_t_cdf(-out.t, df);
    switch (alternative) {
        case Alternative::Less: out.p = p_less; break;
        case Alternative::Greater: out.p = p_greater; break;
        case Alternative::TwoSided: out.p = std::min(1.0, 2.0 * std::min(p_less, p_greater)); break;
    }
    return out;
}

}  // namespace oodkit::eval
