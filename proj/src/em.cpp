#include "normfuse/em.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <cmath>
#include <numbers>

namespace normfuse {

namespace {

constexpr double kVarFloor = 1e-10;

const AnnotatorParams& params_for(const FusionModel& model, const std::string& annotator_id) {
    auto it = model.annotators.find(annotator_id);
    if (it == model.annotators.end())
        throw Error("unknown annotator id '" + annotator_id + "'");
    return it->second;
}

// Joint covariance of the stacked annotations of one instance, with the
// latent vector marginalized out.
Mat joint_annotation_cov(const FusionModel& model,
                         std::span<const AnnotationRecord* const> records) {
    const int D = model.dimensions.size();
    const int n = static_cast<int>(records.size());
    Mat cov(n * D, n * D);
    for (int j = 0; j < n; ++j) {
        const auto& pj = params_for(model, records[j]->annotator_id);
        for (int k = 0; k <= j; ++k) {
            const auto& pk = params_for(model, records[k]->annotator_id);
            Mat block = model.sigma2 * pj.transform * pk.transform.transpose();
            if (j == k) block += pk.noise_var * Mat::Identity(D, D);
            cov.block(j * D, k * D, D, D) = block;
            if (j != k) cov.block(k * D, j * D, D, D) = block.transpose();
        }
    }
    return cov;
}

double log_likelihood_instance(const FusionModel& model, const Instance& instance,
                               std::span<const AnnotationRecord* const> records) {
    if (records.empty()) return 0.0;
    const int D = model.dimensions.size();
    const int n = static_cast<int>(records.size());

    const Vec prior_mean = model.theta.transpose() * instance.features;
    Vec resid(n * D);
    for (int j = 0; j < n; ++j) {
        const auto& pj = params_for(model, records[j]->annotator_id);
        resid.segment(j * D, D) = records[j]->ratings - pj.transform * prior_mean;
    }

    const Mat cov = joint_annotation_cov(model, records);
    Eigen::LLT<Mat> llt(cov);
    if (llt.info() != Eigen::Success)
        throw NumericalError("singular joint covariance for instance '" + instance.id + "'");

    double logdet = 0.0;
    const Mat& L = llt.matrixLLT();
    for (int i = 0; i < n * D; ++i) logdet += 2.0 * std::log(L(i, i));

    const double quad = resid.dot(llt.solve(resid));
    return -0.5 * (n * D * std::log(2.0 * std::numbers::pi) + logdet + quad);
}

}  // namespace

double log_likelihood(const FusionModel& model, const Dataset& dataset) {
    const auto groups = group_by_instance(dataset);
    double total = 0.0;
    for (std::size_t i = 0; i < dataset.instances.size(); ++i)
        total += log_likelihood_instance(model, dataset.instances[i], groups[i]);
    return total;
}

LatentEstimate e_step(const FusionModel& model, const Instance& instance,
                      std::span<const AnnotationRecord* const> records, double ridge) {
    const int D = model.dimensions.size();
    const Vec prior_mean = model.theta.transpose() * instance.features;
    if (records.empty() && ridge == 0.0)
        return {prior_mean, model.sigma2 * Mat::Identity(D, D)};

    // Information form: precision = I/sigma2 + sum_k F_k^T F_k / tau_k^2.
    Mat precision = Mat::Identity(D, D) / model.sigma2;
    Vec info = prior_mean / model.sigma2;
    for (const AnnotationRecord* rec : records) {
        const auto& p = params_for(model, rec->annotator_id);
        if (!rec->ratings.allFinite())
            throw Error("e_step requires complete annotations (instance '" + instance.id + "')");
        precision.noalias() += p.transform.transpose() * p.transform / p.noise_var;
        info.noalias() += p.transform.transpose() * rec->ratings / p.noise_var;
    }
    precision.diagonal().array() += ridge;

    Eigen::LLT<Mat> llt(precision);
    if (llt.info() != Eigen::Success)
        throw NumericalError("singular posterior precision for instance '" + instance.id + "'");

    LatentEstimate est;
    est.cov = llt.solve(Mat::Identity(D, D));
    est.cov = ((est.cov + est.cov.transpose()) / 2.0).eval();
    est.mean = llt.solve(info);
    return est;
}

Mat m_step_theta(const Dataset& dataset, const std::vector<LatentEstimate>& estimates,
                 double ridge) {
    if (estimates.size() != dataset.instances.size())
        throw Error("m_step_theta: one LatentEstimate per instance required");
    const Eigen::Index M = static_cast<Eigen::Index>(dataset.instances.size());
    const Eigen::Index P = dataset.instances.front().features.size();
    const int D = dataset.dimensions.size();

    Mat xtx = Mat::Zero(P, P);
    Mat xta = Mat::Zero(P, D);
    for (Eigen::Index m = 0; m < M; ++m) {
        const Vec& x = dataset.instances[m].features;
        xtx.noalias() += x * x.transpose();
        xta.noalias() += x * estimates[m].mean.transpose();
    }
    xtx.diagonal().array() += ridge;

    Eigen::FullPivLU<Mat> lu(xtx);
    if (!lu.isInvertible())
        throw NumericalError("m_step_theta: rank-deficient feature matrix after ridge");
    return lu.solve(xta);
}

Mat m_step_transform(const std::vector<Vec>& ratings, const std::vector<LatentEstimate>& estimates,
                     double ridge, const std::string& annotator_id) {
    if (ratings.empty() || ratings.size() != estimates.size())
        throw Error("m_step_transform: annotator '" + annotator_id + "' needs aligned, nonempty inputs");
    const Eigen::Index D = ratings.front().size();

    Mat num = Mat::Zero(D, D);
    Mat second_moment = Mat::Zero(D, D);
    for (std::size_t m = 0; m < ratings.size(); ++m) {
        const auto& est = estimates[m];
        num.noalias() += ratings[m] * est.mean.transpose();
        second_moment += est.cov + est.mean * est.mean.transpose();
    }
    second_moment.diagonal().array() += ridge;

    Eigen::FullPivLU<Mat> lu(second_moment.transpose());
    if (!lu.isInvertible())
        throw NumericalError("m_step_transform: singular second-moment matrix for annotator '" +
                             annotator_id + "'");
    // F = num * S^-1  solved as  S^T F^T = num^T.
    return lu.solve(num.transpose()).transpose();
}

double m_step_sigma2(const Dataset& dataset, const std::vector<LatentEstimate>& estimates,
                     const Mat& theta) {
    const std::size_t M = dataset.instances.size();
    const int D = dataset.dimensions.size();
    double acc = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
        const auto& est = estimates[m];
        const Vec fitted = theta.transpose() * dataset.instances[m].features;
        const double e_sq = est.cov.trace() + est.mean.squaredNorm();
        acc += e_sq - 2.0 * fitted.dot(est.mean) + fitted.squaredNorm();
    }
    return std::max(acc / (static_cast<double>(M) * D), kVarFloor);
}

double m_step_tau2(const std::vector<Vec>& ratings, const std::vector<LatentEstimate>& estimates,
                   const Mat& transform) {
    if (ratings.empty() || ratings.size() != estimates.size())
        throw Error("m_step_tau2: aligned, nonempty inputs required");
    const Eigen::Index D = ratings.front().size();
    const Mat gram = transform.transpose() * transform;
    double acc = 0.0;
    for (std::size_t m = 0; m < ratings.size(); ++m) {
        const auto& est = estimates[m];
        const Mat second_moment = est.cov + est.mean * est.mean.transpose();
        acc += ratings[m].squaredNorm() - 2.0 * ratings[m].dot(transform * est.mean) +
               (gram * second_moment).trace();
    }
    return std::max(acc / (static_cast<double>(ratings.size()) * D), kVarFloor);
}

double q_lower_bound(const FusionModel& model, const Dataset& dataset,
                     const std::vector<LatentEstimate>& estimates) {
    const auto groups = group_by_instance(dataset);
    const int D = model.dimensions.size();
    const double log2pi = std::log(2.0 * std::numbers::pi);
    double q = 0.0;
    for (std::size_t m = 0; m < dataset.instances.size(); ++m) {
        const auto& est = estimates[m];
        const Mat second_moment = est.cov + est.mean * est.mean.transpose();
        const Vec fitted = model.theta.transpose() * dataset.instances[m].features;
        q += -0.5 * D * (log2pi + std::log(model.sigma2)) -
             (second_moment.trace() - 2.0 * fitted.dot(est.mean) + fitted.squaredNorm()) /
                 (2.0 * model.sigma2);
        for (const AnnotationRecord* rec : groups[m]) {
            const auto& p = params_for(model, rec->annotator_id);
            const Mat gram = p.transform.transpose() * p.transform;
            q += -0.5 * D * (log2pi + std::log(p.noise_var)) -
                 (rec->ratings.squaredNorm() - 2.0 * rec->ratings.dot(p.transform * est.mean) +
                  (gram * second_moment).trace()) /
                     (2.0 * p.noise_var);
        }
    }
    return q;
}

namespace {

// One full M-step over all parameters, update order: theta then sigma2 with
// the new theta; per annotator F_k then tau_k^2 with the new F_k.
FusionModel m_step_all(const Dataset& dataset,
                       const std::vector<std::vector<const AnnotationRecord*>>& groups,
                       const std::vector<LatentEstimate>& estimates, double ridge) {
    FusionModel model;
    model.dimensions = dataset.dimensions;
    model.theta = m_step_theta(dataset, estimates, ridge);
    model.sigma2 = m_step_sigma2(dataset, estimates, model.theta);

    std::map<std::string, std::pair<std::vector<Vec>, std::vector<LatentEstimate>>> per_annotator;
    for (std::size_t m = 0; m < groups.size(); ++m) {
        for (const AnnotationRecord* rec : groups[m]) {
            auto& [ratings, ests] = per_annotator[rec->annotator_id];
            ratings.push_back(rec->ratings);
            ests.push_back(estimates[m]);
        }
    }
    for (const auto& [id, data] : per_annotator) {
        AnnotatorParams params;
        params.transform = m_step_transform(data.first, data.second, ridge, id);
        params.noise_var = m_step_tau2(data.first, data.second, params.transform);
        model.annotators.emplace(id, std::move(params));
    }
    return model;
}

}  // namespace

std::pair<FusionModel, EmTrace> fit_em(const Dataset& dataset, const EmConfig& config) {
    config.validate();
    auto errors = validate_dataset(dataset, DatasetMode::training);
    if (!errors.empty()) throw Error("fit_em: invalid dataset: " + errors.front());

    const auto groups = group_by_instance(dataset);
    const std::size_t M = dataset.instances.size();
    for (std::size_t m = 0; m < M; ++m) {
        if (groups[m].empty())
            throw Error("fit_em: instance '" + dataset.instances[m].id + "' has no annotations");
    }
    const int D = dataset.dimensions.size();

    // Hard initialization: per-instance mean of annotations, zero covariance.
    std::vector<LatentEstimate> estimates(M);
    for (std::size_t m = 0; m < M; ++m) {
        Vec mean = Vec::Zero(D);
        for (const AnnotationRecord* rec : groups[m]) mean += rec->ratings;
        estimates[m] = {mean / static_cast<double>(groups[m].size()), Mat::Zero(D, D)};
    }

    FusionModel model = m_step_all(dataset, groups, estimates, config.ridge);

    EmTrace trace;
    double ll_prev = log_likelihood(model, dataset);
    trace.log_likelihoods.push_back(ll_prev);

    for (int iter = 1; iter <= config.max_iters; ++iter) {
        for (std::size_t m = 0; m < M; ++m)
            estimates[m] = e_step(model, dataset.instances[m], groups[m], config.ridge);
        FusionModel next = m_step_all(dataset, groups, estimates, config.ridge);

        const double ll = log_likelihood(next, dataset);
        if (ll < ll_prev) {
            // A decrease beyond numerical slack means a genuine bug; a tiny
            // one is ridge bias near a stationary point. Reject the step so
            // the returned trace stays non-decreasing and stop.
            if (ll < ll_prev - 1e-6 * std::max(1.0, std::abs(ll_prev)))
                throw NumericalError("fit_em: log-likelihood decreased from " +
                                     std::to_string(ll_prev) + " to " + std::to_string(ll));
            trace.iterations = iter;
            trace.reason = EmTermination::converged;
            return {std::move(model), std::move(trace)};
        }
        model = std::move(next);
        trace.log_likelihoods.push_back(ll);
        trace.iterations = iter;

        if (std::abs(ll - ll_prev) / std::max(std::abs(ll_prev), 1e-300) < config.rel_tol) {
            trace.reason = EmTermination::converged;
            return {std::move(model), std::move(trace)};
        }
        ll_prev = ll;
    }
    trace.reason = EmTermination::max_iters;
    return {std::move(model), std::move(trace)};
}

}  // namespace normfuse
