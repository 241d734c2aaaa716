#include "normfuse/types.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace normfuse {

int Dimensions::index_of(const std::string& name) const {
    for (int d = 0; d < size(); ++d) {
        if (names[d] == name) return d;
    }
    return -1;
}

std::vector<std::string> Dimensions::validate() const {
    std::vector<std::string> errors;
    if (names.empty()) errors.push_back("dimensions: D must be >= 1");
    std::set<std::string> seen;
    for (const auto& n : names) {
        if (n.empty()) errors.push_back("dimensions: empty dimension name");
        if (!seen.insert(n).second) errors.push_back("dimensions: duplicate name '" + n + "'");
    }
    return errors;
}

std::vector<std::string> Dataset::annotator_ids() const {
    std::set<std::string> ids;
    for (const auto& rec : annotations) ids.insert(rec.annotator_id);
    return {ids.begin(), ids.end()};
}

const Instance* Dataset::find_instance(const std::string& id) const {
    for (const auto& inst : instances) {
        if (inst.id == id) return &inst;
    }
    return nullptr;
}

std::vector<std::string> validate_dataset(const Dataset& dataset, DatasetMode mode) {
    std::vector<std::string> errors = dataset.dimensions.validate();
    const int D = dataset.dimensions.size();

    if (dataset.instances.empty()) errors.push_back("dataset: M must be >= 1");

    std::unordered_map<std::string, Eigen::Index> feature_dims;
    std::unordered_set<std::string> instance_ids;
    Eigen::Index P = -1;
    for (const auto& inst : dataset.instances) {
        if (!instance_ids.insert(inst.id).second)
            errors.push_back("instance '" + inst.id + "': duplicate id");
        if (!inst.features.allFinite())
            errors.push_back("instance '" + inst.id + "': non-finite feature entry");
        if (P < 0) P = inst.features.size();
        else if (inst.features.size() != P)
            errors.push_back("instance '" + inst.id + "': feature length " +
                             std::to_string(inst.features.size()) + " != " + std::to_string(P));
    }

    if (dataset.annotations.empty()) errors.push_back("dataset: K must be >= 1 (no annotations)");

    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto& rec : dataset.annotations) {
        const std::string where = "annotation (" + rec.instance_id + ", " + rec.annotator_id + ")";
        if (!instance_ids.count(rec.instance_id))
            errors.push_back(where + ": dangling annotation (unknown instance)");
        if (!pairs.insert({rec.instance_id, rec.annotator_id}).second)
            errors.push_back(where + ": duplicate (instance, annotator) pair");
        if (rec.ratings.size() != D)
            errors.push_back(where + ": rating length " + std::to_string(rec.ratings.size()) +
                             " != D=" + std::to_string(D));
        int present = 0;
        for (Eigen::Index d = 0; d < rec.ratings.size(); ++d) {
            const double v = rec.ratings[d];
            if (is_missing(v)) {
                if (mode == DatasetMode::training)
                    errors.push_back(where + ": partial in training (missing dimension " +
                                     std::to_string(d) + ")");
            } else if (!std::isfinite(v)) {
                errors.push_back(where + ": non-finite rating");
            } else {
                ++present;
            }
        }
        if (present == 0) errors.push_back(where + ": all entries missing");
    }
    return errors;
}

std::vector<std::vector<const AnnotationRecord*>> group_by_instance(const Dataset& dataset) {
    std::unordered_map<std::string, std::size_t> index;
    index.reserve(dataset.instances.size());
    for (std::size_t i = 0; i < dataset.instances.size(); ++i) index[dataset.instances[i].id] = i;

    std::vector<std::vector<const AnnotationRecord*>> groups(dataset.instances.size());
    for (const auto& rec : dataset.annotations) {
        auto it = index.find(rec.instance_id);
        if (it == index.end()) throw Error("dangling annotation for instance '" + rec.instance_id + "'");
        groups[it->second].push_back(&rec);
    }
    for (auto& g : groups) {
        std::sort(g.begin(), g.end(), [](const AnnotationRecord* a, const AnnotationRecord* b) {
            return a->annotator_id < b->annotator_id;
        });
    }
    return groups;
}

void FusionModel::check_consistent() const {
    auto dim_errors = dimensions.validate();
    if (!dim_errors.empty()) throw Error("model: " + dim_errors.front());
    const int D = dimensions.size();
    if (theta.cols() != D) throw Error("model: theta must have D columns");
    if (!theta.allFinite()) throw Error("model: non-finite theta entry");
    if (!(sigma2 > 0)) throw Error("model: sigma2 must be > 0");
    for (const auto& [id, params] : annotators) {
        if (params.transform.rows() != D || params.transform.cols() != D)
            throw Error("model: annotator '" + id + "' transform is not DxD");
        if (!params.transform.allFinite())
            throw Error("model: annotator '" + id + "' has non-finite transform entry");
        if (!(params.noise_var > 0))
            throw Error("model: annotator '" + id + "' noise_var must be > 0");
    }
}

}  // namespace normfuse
