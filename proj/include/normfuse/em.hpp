#ifndef NORMFUSE_EM_HPP
#define NORMFUSE_EM_HPP

#include <cstdint>
#include <span>
#include <utility>

#include "normfuse/types.hpp"

namespace normfuse {

struct EmConfig {
    int max_iters = 500;
    double rel_tol = 1e-5;   // relative log-likelihood change, i.e. 0.001 %
    double ridge = 1e-8;     // added to diagonals before matrix inversions
    std::uint64_t seed = 0;  // reserved for degenerate tie-breaking

    void validate() const {
        if (max_iters < 1) throw UsageError("EmConfig: max_iters must be >= 1");
        if (!(rel_tol > 0)) throw UsageError("EmConfig: rel_tol must be > 0");
        if (ridge < 0) throw UsageError("EmConfig: ridge must be >= 0");
    }
};

enum class EmTermination { converged, max_iters };

struct EmTrace {
    std::vector<double> log_likelihoods;  // one entry per completed iteration, plus the initial fit
    int iterations = 0;
    EmTermination reason = EmTermination::max_iters;
};

/// Marginal log-likelihood of the annotations under the model: per instance,
/// the latent vector is integrated out analytically, leaving a joint Gaussian
/// over the stacked annotations with blocks
///   Cov(a_j, a_k) = sigma2 * F_j F_k^T + [j==k] tau_k^2 I.
/// Instances with no annotations contribute zero.
double log_likelihood(const FusionModel& model, const Dataset& dataset);

/// Posterior mean and covariance of the latent vector of one instance given
/// its (complete) annotation records. Zero records yield the prior
/// (theta^T x, sigma2 * I). `ridge` is added to the diagonal of the matrix
/// being inverted.
LatentEstimate e_step(const FusionModel& model, const Instance& instance,
                      std::span<const AnnotationRecord* const> records, double ridge = 0.0);

/// Theta = (X^T X + ridge I)^-1 X^T A*, with X the stacked features and A*
/// the stacked posterior means (one LatentEstimate per instance, in dataset
/// instance order).
Mat m_step_theta(const Dataset& dataset, const std::vector<LatentEstimate>& estimates,
                 double ridge = 0.0);

/// F_k = (sum_m a_k^m E[a*]^T) (sum_m E[a* a*^T] + ridge I)^-1 over the
/// instances annotator k rated. `ratings` and `estimates` are aligned.
Mat m_step_transform(const std::vector<Vec>& ratings, const std::vector<LatentEstimate>& estimates,
                     double ridge = 0.0, const std::string& annotator_id = "");

/// sigma2 = 1/(M D) sum_m ( E[a*^T a*] - 2 (theta^T x_m) . E[a*] + |theta^T x_m|^2 ),
/// floored at 1e-10.
double m_step_sigma2(const Dataset& dataset, const std::vector<LatentEstimate>& estimates,
                     const Mat& theta);

/// tau_k^2 = 1/(M_k D) sum_m ( a^T a - 2 a^T F E[a*] + tr(F^T F E[a* a*^T]) ),
/// floored at 1e-10.
double m_step_tau2(const std::vector<Vec>& ratings, const std::vector<LatentEstimate>& estimates,
                   const Mat& transform);

/// EM lower bound (Q function): expected complete-data log-likelihood under
/// the given per-instance posteriors. Used by stationarity checks.
double q_lower_bound(const FusionModel& model, const Dataset& dataset,
                     const std::vector<LatentEstimate>& estimates);

/// Fits the fusion model by EM. Initializes each latent estimate to the mean
/// of the instance's annotations (zero covariance), runs one M-step for the
/// initial parameters, then alternates E and M steps until the relative
/// log-likelihood change drops below rel_tol or max_iters is reached.
/// Raises NumericalError if the trace decreases beyond numerical slack.
std::pair<FusionModel, EmTrace> fit_em(const Dataset& dataset, const EmConfig& config = {});

}  // namespace normfuse

#endif
