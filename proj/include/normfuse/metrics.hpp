#ifndef NORMFUSE_METRICS_HPP
#define NORMFUSE_METRICS_HPP

#include <map>
#include <optional>
#include <string>

#include "normfuse/types.hpp"

namespace normfuse {

struct PairedSeries {
    Vec predictions;
    Vec references;

    void validate() const;
    Eigen::Index n() const { return predictions.size(); }
};

/// Concordance correlation coefficient with population (1/n) variance and
/// covariance estimators:
///   2 s_xy / (s_x^2 + s_y^2 + (mean_x - mean_y)^2).
/// Throws UndefinedMetricError when the denominator is zero (both series
/// constant with equal means).
double ccc(const PairedSeries& series);

/// Pearson correlation. Throws UndefinedMetricError when either series is
/// constant.
double pearson(const PairedSeries& series);

double mse(const PairedSeries& series);

/// Training-set MSE of a ridge-regularized linear regression of labels on
/// features, with an unpenalized intercept. Low training error is the
/// learnability proxy used when no reference labels exist.
double learnability(const Mat& features, const Vec& labels, double ridge = 1e-6);

// Undefined metrics (constant series) are explicit empty optionals, never 0.
struct DimensionMetrics {
    std::optional<double> ccc;
    std::optional<double> pearson;
    double mse = 0.0;
    Eigen::Index n = 0;
};

struct MetricsReport {
    std::map<std::string, DimensionMetrics> per_dimension;
    std::optional<double> learnability_mse;
};

DimensionMetrics compute_dimension_metrics(const PairedSeries& series);

}  // namespace normfuse

#endif
