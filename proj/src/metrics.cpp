#include "normfuse/metrics.hpp"

#include <Eigen/Cholesky>
#include <cmath>

namespace normfuse {

void PairedSeries::validate() const {
    if (predictions.size() != references.size())
        throw Error("paired series must have equal lengths");
    if (predictions.size() < 2) throw Error("paired series needs n >= 2");
    if (!predictions.allFinite() || !references.allFinite())
        throw Error("paired series entries must be finite");
}

namespace {

struct Moments {
    double mean_x, mean_y, var_x, var_y, cov;  // population (1/n) estimators
};

Moments moments(const PairedSeries& s) {
    const double n = static_cast<double>(s.n());
    Moments m;
    m.mean_x = s.predictions.mean();
    m.mean_y = s.references.mean();
    const Vec dx = s.predictions.array() - m.mean_x;
    const Vec dy = s.references.array() - m.mean_y;
    m.var_x = dx.squaredNorm() / n;
    m.var_y = dy.squaredNorm() / n;
    m.cov = dx.dot(dy) / n;
    return m;
}

}  // namespace

double ccc(const PairedSeries& series) {
    series.validate();
    const Moments m = moments(series);
    const double shift = m.mean_x - m.mean_y;
    const double denom = m.var_x + m.var_y + shift * shift;
    if (denom == 0.0) throw UndefinedMetricError("ccc undefined: zero denominator");
    return 2.0 * m.cov / denom;
}

double pearson(const PairedSeries& series) {
    series.validate();
    const Moments m = moments(series);
    if (m.var_x == 0.0 || m.var_y == 0.0)
        throw UndefinedMetricError("pearson undefined: constant series");
    return m.cov / std::sqrt(m.var_x * m.var_y);
}

double mse(const PairedSeries& series) {
    if (series.n() < 1) throw Error("mse needs n >= 1");
    if (series.predictions.size() != series.references.size())
        throw Error("paired series must have equal lengths");
    return (series.predictions - series.references).squaredNorm() /
           static_cast<double>(series.n());
}

double learnability(const Mat& features, const Vec& labels, double ridge) {
    const Eigen::Index M = features.rows();
    if (M < 2 || labels.size() != M) throw Error("learnability needs M >= 2 aligned rows");

    // Center so the intercept is unpenalized and absorbed exactly.
    const Eigen::RowVectorXd mean_x = features.colwise().mean();
    const double mean_y = labels.mean();
    const Mat xc = features.rowwise() - mean_x;
    const Vec yc = labels.array() - mean_y;

    Mat normal = xc.transpose() * xc;
    normal.diagonal().array() += ridge;
    const Vec beta = Eigen::LDLT<Mat>(normal).solve(xc.transpose() * yc);

    const Vec resid = yc - xc * beta;
    return resid.squaredNorm() / static_cast<double>(M);
}

DimensionMetrics compute_dimension_metrics(const PairedSeries& series) {
    DimensionMetrics out;
    out.n = series.n();
    out.mse = mse(series);
    try {
        out.ccc = ccc(series);
    } catch (const UndefinedMetricError&) {
    }
    try {
        out.pearson = pearson(series);
    } catch (const UndefinedMetricError&) {
    }
    return out;
}

}  // namespace normfuse
