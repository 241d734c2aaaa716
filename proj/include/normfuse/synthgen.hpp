#ifndef NORMFUSE_SYNTHGEN_HPP
#define NORMFUSE_SYNTHGEN_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "normfuse/types.hpp"

namespace normfuse {

// Deterministic named-stream RNG. Every sampled quantity draws from its own
// stream derived from (seed, name), so adding a new quantity does not shift
// existing streams. Uniform/normal sampling is hand-rolled for portable
// bit-stable output.
class StreamRng {
public:
    StreamRng(std::uint64_t seed, const std::string& stream_name);

    std::uint64_t next_u64();
    double uniform();                          // [0, 1)
    double uniform(double lo, double hi);
    double normal();                           // standard normal, Box-Muller
    // Random subset of {0..n-1} of size k, in sorted order.
    std::vector<int> subset(int n, int k);

private:
    std::uint64_t state_;
};

enum class FStyle { identity, diagonal, coupled, explicit_matrices };

enum class MissingPattern { none, drop_dim };

struct SimSpec {
    int M = 200;  // instances ("200 words")
    int P = 300;  // feature dimension (embedding size)
    int D = 3;    // annotation dimensions
    int K = 20;   // annotators ("20 annotations each")
    double sigma = 0.3;
    double tau_lo = 0.1;
    double tau_hi = 0.1;
    FStyle f_style = FStyle::coupled;
    double off_diag_mass = 0.3;                 // coupled style only, in [0, 1)
    std::vector<Mat> explicit_transforms;       // explicit style only, K matrices
    std::optional<Mat> explicit_theta;          // overrides sampled theta (P x D)
    double theta_scale = 1.0;
    int ratings_per_instance = 20;              // <= K
    MissingPattern missing_pattern = MissingPattern::none;
    int drop_dim = 0;                           // dimension index blanked by drop_dim
    std::uint64_t seed = 0;
    std::vector<std::string> dimension_names;   // defaults to dim1..dimD

    void validate() const;
};

struct GroundTruth {
    FusionModel model;
    std::vector<Vec> latents;  // a*_m, aligned with dataset.instances
};

/// Samples a dataset from the generative model: features, theta and the
/// annotator transforms per spec, then a*_m = theta^T x_m + sigma * eps and
/// a_k = F_k a*_m + tau_k * eta. Deterministic given the seed.
std::pair<Dataset, GroundTruth> generate(const SimSpec& spec);

/// Brute-force E-step oracle: builds the explicit (D + nD)-dimensional joint
/// Gaussian over (a*, stacked annotations) and conditions by direct block
/// inversion. Shares no code with e_step.
LatentEstimate oracle_condition(const FusionModel& model, const Instance& instance,
                                std::span<const AnnotationRecord* const> records);

struct McEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
};

/// Monte-Carlo estimate of the marginal log-likelihood: per instance, the
/// latent is sampled from its prior and the annotation likelihood averaged.
/// Intended for small datasets (M <= 10).
McEstimate oracle_loglik_mc(const FusionModel& model, const Dataset& dataset, int n_samples,
                            std::uint64_t seed);

}  // namespace normfuse

#endif
