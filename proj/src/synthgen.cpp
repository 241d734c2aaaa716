#include "normfuse/synthgen.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <numbers>

namespace normfuse {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace

StreamRng::StreamRng(std::uint64_t seed, const std::string& stream_name)
    : state_(seed ^ fnv1a(stream_name)) {
    // burn-in decorrelates streams whose seeds differ in few bits
    for (int i = 0; i < 4; ++i) splitmix64(state_);
}

std::uint64_t StreamRng::next_u64() { return splitmix64(state_); }

double StreamRng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double StreamRng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double StreamRng::normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<int> StreamRng::subset(int n, int k) {
    std::vector<int> pool(n);
    for (int i = 0; i < n; ++i) pool[i] = i;
    for (int i = 0; i < k; ++i) {
        const int j = i + static_cast<int>(next_u64() % static_cast<std::uint64_t>(n - i));
        std::swap(pool[i], pool[j]);
    }
    std::vector<int> out(pool.begin(), pool.begin() + k);
    std::sort(out.begin(), out.end());
    return out;
}

void SimSpec::validate() const {
    if (M < 1 || P < 1 || D < 1 || K < 1) throw UsageError("SimSpec: counts must be >= 1");
    if (!(sigma > 0)) throw UsageError("SimSpec: sigma must be > 0");
    if (!(tau_lo > 0) || tau_lo > tau_hi) throw UsageError("SimSpec: need 0 < tau_lo <= tau_hi");
    if (f_style == FStyle::coupled && (off_diag_mass < 0 || off_diag_mass >= 1))
        throw UsageError("SimSpec: off_diag_mass must be in [0, 1)");
    if (f_style == FStyle::explicit_matrices &&
        explicit_transforms.size() != static_cast<std::size_t>(K))
        throw UsageError("SimSpec: explicit style needs K transform matrices");
    if (!(theta_scale > 0)) throw UsageError("SimSpec: theta_scale must be > 0");
    if (ratings_per_instance < 1 || ratings_per_instance > K)
        throw UsageError("SimSpec: ratings_per_instance must be in [1, K]");
    if (missing_pattern == MissingPattern::drop_dim && (drop_dim < 0 || drop_dim >= D))
        throw UsageError("SimSpec: drop_dim out of range");
    if (!dimension_names.empty() && dimension_names.size() != static_cast<std::size_t>(D))
        throw UsageError("SimSpec: dimension_names must have D entries");
}

namespace {

std::string annotator_name(int k) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "ann%03d", k);
    return buf;
}

std::string instance_name(int m) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "inst%05d", m);
    return buf;
}

Mat sample_transform(const SimSpec& spec, int k, StreamRng& rng) {
    const int D = spec.D;
    switch (spec.f_style) {
        case FStyle::identity:
            return Mat::Identity(D, D);
        case FStyle::diagonal: {
            Mat f = Mat::Zero(D, D);
            for (int d = 0; d < D; ++d) f(d, d) = rng.uniform(0.5, 1.5);
            return f;
        }
        case FStyle::coupled: {
            // (1 - mass) on the diagonal, mass split over off-diagonals with
            // random signs.
            Mat f = Mat::Zero(D, D);
            const double off = D > 1 ? spec.off_diag_mass / (D - 1) : 0.0;
            for (int r = 0; r < D; ++r) {
                for (int c = 0; c < D; ++c) {
                    if (r == c) f(r, c) = 1.0 - spec.off_diag_mass;
                    else f(r, c) = (rng.uniform() < 0.5 ? -1.0 : 1.0) * off;
                }
            }
            return f;
        }
        case FStyle::explicit_matrices:
            return spec.explicit_transforms[static_cast<std::size_t>(k)];
    }
    throw Error("unreachable");
}

}  // namespace

std::pair<Dataset, GroundTruth> generate(const SimSpec& spec) {
    spec.validate();
    const int M = spec.M, P = spec.P, D = spec.D, K = spec.K;

    Dataset dataset;
    if (spec.dimension_names.empty()) {
        for (int d = 1; d <= D; ++d) dataset.dimensions.names.push_back("dim" + std::to_string(d));
    } else {
        dataset.dimensions.names = spec.dimension_names;
    }

    GroundTruth truth;
    truth.model.dimensions = dataset.dimensions;

    StreamRng theta_rng(spec.seed, "theta");
    if (spec.explicit_theta) {
        if (spec.explicit_theta->rows() != P || spec.explicit_theta->cols() != D)
            throw UsageError("SimSpec: explicit_theta must be P x D");
        truth.model.theta = *spec.explicit_theta;
    } else {
        truth.model.theta = Mat::NullaryExpr(
            P, D, [&](Eigen::Index, Eigen::Index) { return theta_rng.normal(); });
        truth.model.theta *= spec.theta_scale / std::sqrt(static_cast<double>(P));
    }
    truth.model.sigma2 = spec.sigma * spec.sigma;

    StreamRng transform_rng(spec.seed, "transforms");
    StreamRng tau_rng(spec.seed, "tau");
    std::vector<Mat> transforms(K);
    std::vector<double> taus(K);
    for (int k = 0; k < K; ++k) {
        transforms[k] = sample_transform(spec, k, transform_rng);
        taus[k] = tau_rng.uniform(spec.tau_lo, spec.tau_hi);
        truth.model.annotators.emplace(annotator_name(k),
                                       AnnotatorParams{transforms[k], taus[k] * taus[k]});
    }

    StreamRng feature_rng(spec.seed, "features");
    StreamRng latent_rng(spec.seed, "latent");
    StreamRng noise_rng(spec.seed, "noise");
    StreamRng assign_rng(spec.seed, "assign");

    dataset.instances.reserve(M);
    truth.latents.reserve(M);
    for (int m = 0; m < M; ++m) {
        Instance inst;
        inst.id = instance_name(m);
        inst.features = Vec::NullaryExpr(P, [&](Eigen::Index) { return feature_rng.normal(); });

        Vec a_star = truth.model.theta.transpose() * inst.features;
        for (int d = 0; d < D; ++d) a_star[d] += spec.sigma * latent_rng.normal();

        for (int k : assign_rng.subset(K, spec.ratings_per_instance)) {
            AnnotationRecord rec;
            rec.instance_id = inst.id;
            rec.annotator_id = annotator_name(k);
            rec.ratings = transforms[k] * a_star;
            for (int d = 0; d < D; ++d) rec.ratings[d] += taus[k] * noise_rng.normal();
            if (spec.missing_pattern == MissingPattern::drop_dim)
                rec.ratings[spec.drop_dim] = missing_rating();
            dataset.annotations.push_back(std::move(rec));
        }

        dataset.instances.push_back(std::move(inst));
        truth.latents.push_back(std::move(a_star));
    }
    return {std::move(dataset), std::move(truth)};
}

LatentEstimate oracle_condition(const FusionModel& model, const Instance& instance,
                                std::span<const AnnotationRecord* const> records) {
    const int D = model.dimensions.size();
    const int n = static_cast<int>(records.size());
    const Vec prior_mean = model.theta.transpose() * instance.features;
    if (n == 0) return {prior_mean, model.sigma2 * Mat::Identity(D, D)};

    // Full joint covariance over (a*, a_1, ..., a_n).
    const int total = D + n * D;
    Mat joint = Mat::Zero(total, total);
    Vec mean(total);
    Vec observed(n * D);
    mean.head(D) = prior_mean;
    joint.topLeftCorner(D, D) = model.sigma2 * Mat::Identity(D, D);

    std::vector<const AnnotatorParams*> params(n);
    for (int j = 0; j < n; ++j) {
        auto it = model.annotators.find(records[j]->annotator_id);
        if (it == model.annotators.end())
            throw Error("unknown annotator id '" + records[j]->annotator_id + "'");
        params[j] = &it->second;
        mean.segment(D + j * D, D) = params[j]->transform * prior_mean;
        observed.segment(j * D, D) = records[j]->ratings;
        joint.block(0, D + j * D, D, D) = model.sigma2 * params[j]->transform.transpose();
        joint.block(D + j * D, 0, D, D) = model.sigma2 * params[j]->transform;
        for (int k = 0; k <= j; ++k) {
            Mat block = model.sigma2 * params[j]->transform * params[k]->transform.transpose();
            if (j == k) block += params[j]->noise_var * Mat::Identity(D, D);
            joint.block(D + j * D, D + k * D, D, D) = block;
            joint.block(D + k * D, D + j * D, D, D) = block.transpose();
        }
    }

    const Mat sigma12 = joint.topRightCorner(D, n * D);
    const Mat sigma22 = joint.bottomRightCorner(n * D, n * D);
    Eigen::FullPivLU<Mat> lu(sigma22);
    if (!lu.isInvertible())
        throw NumericalError("oracle_condition: singular joint covariance");
    const Mat sigma22_inv = lu.inverse();

    LatentEstimate est;
    est.mean = mean.head(D) + sigma12 * sigma22_inv * (observed - mean.tail(n * D));
    est.cov = joint.topLeftCorner(D, D) - sigma12 * sigma22_inv * sigma12.transpose();
    return est;
}

McEstimate oracle_loglik_mc(const FusionModel& model, const Dataset& dataset, int n_samples,
                            std::uint64_t seed) {
    const auto groups = group_by_instance(dataset);
    const int D = model.dimensions.size();
    const double log2pi = std::log(2.0 * std::numbers::pi);
    StreamRng rng(seed, "mc_latent");

    McEstimate total;
    double var_sum = 0.0;
    for (std::size_t m = 0; m < dataset.instances.size(); ++m) {
        if (groups[m].empty()) continue;
        const Vec prior_mean = model.theta.transpose() * dataset.instances[m].features;
        const double sigma = std::sqrt(model.sigma2);

        std::vector<double> log_weights(static_cast<std::size_t>(n_samples));
        for (int s = 0; s < n_samples; ++s) {
            Vec a_star(D);
            for (int d = 0; d < D; ++d) a_star[d] = prior_mean[d] + sigma * rng.normal();
            double lw = 0.0;
            for (const AnnotationRecord* rec : groups[m]) {
                const auto& p = model.annotators.at(rec->annotator_id);
                const double sq = (rec->ratings - p.transform * a_star).squaredNorm();
                lw += -0.5 * D * (log2pi + std::log(p.noise_var)) - sq / (2.0 * p.noise_var);
            }
            log_weights[static_cast<std::size_t>(s)] = lw;
        }

        const double shift = *std::max_element(log_weights.begin(), log_weights.end());
        double w_sum = 0.0, w_sq_sum = 0.0;
        for (double lw : log_weights) {
            const double w = std::exp(lw - shift);
            w_sum += w;
            w_sq_sum += w * w;
        }
        const double w_mean = w_sum / n_samples;
        total.estimate += shift + std::log(w_mean);
        // delta-method standard error of log(mean weight)
        const double w_var = std::max(0.0, w_sq_sum / n_samples - w_mean * w_mean);
        var_sum += w_var / (w_mean * w_mean * n_samples);
    }
    total.std_error = std::sqrt(var_sum);
    return total;
}

}  // namespace normfuse
