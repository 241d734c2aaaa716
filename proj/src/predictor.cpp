#include "normfuse/predictor.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <set>

namespace normfuse {

Prediction predict_instance(const FusionModel& model,
                            std::span<const AnnotationRecord* const> records,
                            const PredictionConfig& config) {
    const int D = model.dimensions.size();
    const int target = model.dimensions.index_of(config.target_dim);
    if (target < 0)
        throw UsageError("unknown target dimension '" + config.target_dim + "'");
    if (config.ridge < 0) throw UsageError("ridge must be >= 0");

    std::vector<Eigen::RowVectorXd> rows;
    std::vector<double> rhs;
    std::string instance_id;
    for (const AnnotationRecord* rec : records) {
        instance_id = rec->instance_id;
        auto it = model.annotators.find(rec->annotator_id);
        if (it == model.annotators.end())
            throw Error("annotator '" + rec->annotator_id + "' not present in model");
        const auto& params = it->second;
        const double scale = config.weight_by_noise ? 1.0 / std::sqrt(params.noise_var) : 1.0;
        bool any_present = false;
        for (int d = 0; d < D; ++d) {
            const double v = rec->ratings[d];
            if (is_missing(v)) continue;
            any_present = true;
            if (d == target) continue;  // target ratings never enter the design
            rows.push_back(scale * params.transform.row(d));
            rhs.push_back(scale * v);
        }
        if (!any_present)
            throw Error("all-missing annotation record for instance '" + instance_id + "'");
    }
    if (rows.empty())
        throw Error("no usable equations for instance '" + instance_id + "'");

    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    Mat design(n, D);
    Vec y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        design.row(i) = rows[i];
        y[i] = rhs[i];
    }

    Mat normal = design.transpose() * design;
    Eigen::SelfAdjointEigenSolver<Mat> eig(normal, Eigen::EigenvaluesOnly);
    const double max_eig = eig.eigenvalues().maxCoeff();
    const bool singular = eig.eigenvalues().minCoeff() <= 1e-10 * std::max(max_eig, 0.0);

    normal.diagonal().array() += config.ridge;
    Eigen::LDLT<Mat> ldlt(normal);
    if (ldlt.info() != Eigen::Success)
        throw NumericalError("singular normal matrix for instance '" + instance_id + "'");

    Prediction pred;
    pred.instance_id = instance_id;
    pred.a_star = ldlt.solve(design.transpose() * y);
    pred.target_value = pred.a_star[target];
    pred.equations_used = static_cast<int>(n);
    pred.condition_flag = singular ? ConditionFlag::ridge_resolved : ConditionFlag::well_posed;
    return pred;
}

PredictionReport predict_dataset(const FusionModel& model, const Dataset& dataset,
                                 const PredictionConfig& config) {
    auto errors = validate_dataset(dataset, DatasetMode::prediction);
    if (!errors.empty()) throw Error("predict_dataset: invalid dataset: " + errors.front());

    const auto groups = group_by_instance(dataset);

    // Stable instance-id ordering for the output.
    std::vector<std::size_t> order(dataset.instances.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return dataset.instances[a].id < dataset.instances[b].id;
    });

    PredictionReport report;
    std::set<std::string> skipped;
    for (std::size_t idx : order) {
        const auto& instance = dataset.instances[idx];
        std::vector<const AnnotationRecord*> usable;
        for (const AnnotationRecord* rec : groups[idx]) {
            if (model.annotators.count(rec->annotator_id)) usable.push_back(rec);
            else skipped.insert(rec->annotator_id);
        }
        try {
            report.predictions.push_back(predict_instance(model, usable, config));
        } catch (const UsageError&) {
            throw;  // config problems are not per-instance failures
        } catch (const Error& e) {
            report.failures.push_back({instance.id, e.what()});
        }
    }
    report.skipped_annotators.assign(skipped.begin(), skipped.end());
    return report;
}

}  // namespace normfuse
