#ifndef NORMFUSE_PREDICTOR_HPP
#define NORMFUSE_PREDICTOR_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "normfuse/types.hpp"

namespace normfuse {

struct PredictionConfig {
    std::string target_dim;
    double ridge = 1e-6;
    bool weight_by_noise = false;  // scale each equation row by 1/tau_k
};

enum class ConditionFlag { well_posed, ridge_resolved };

inline const char* to_string(ConditionFlag f) {
    return f == ConditionFlag::well_posed ? "well-posed" : "ridge-resolved";
}

struct Prediction {
    std::string instance_id;
    Vec a_star;
    double target_value = 0.0;
    int equations_used = 0;
    ConditionFlag condition_flag = ConditionFlag::well_posed;
};

/// Recovers the latent vector of one instance from partial annotations by
/// stacking one linear equation per (record, observed non-target dimension):
///   a_k[d'] = F_k[d',:] a* ,
/// solved by ridge-regularized normal equations. Observed target-dimension
/// ratings never enter the design. Records whose annotator is unknown to the
/// model must be filtered by the caller (see predict_dataset).
Prediction predict_instance(const FusionModel& model,
                            std::span<const AnnotationRecord* const> records,
                            const PredictionConfig& config);

struct PredictionFailure {
    std::string instance_id;
    std::string reason;
};

struct PredictionReport {
    std::vector<Prediction> predictions;       // ordered by instance id
    std::vector<PredictionFailure> failures;   // instances with no usable equations
    std::vector<std::string> skipped_annotators;  // sentence-level ids absent from the model
};

/// Applies predict_instance to every instance of a prediction-mode dataset.
/// Instances that cannot be predicted are reported, not silently skipped.
PredictionReport predict_dataset(const FusionModel& model, const Dataset& dataset,
                                 const PredictionConfig& config);

}  // namespace normfuse

#endif
