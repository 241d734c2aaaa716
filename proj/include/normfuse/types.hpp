#ifndef NORMFUSE_TYPES_HPP
#define NORMFUSE_TYPES_HPP

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace normfuse {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Error taxonomy shared by library and CLI. Exit-code mapping lives in io.hpp.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UsageError : Error {
    using Error::Error;
};
struct ParseError : Error {
    using Error::Error;
};
struct NumericalError : Error {
    using Error::Error;
};
struct UndefinedMetricError : Error {
    using Error::Error;
};

// A rating entry that was not provided. Only legal in prediction-mode datasets.
inline double missing_rating() { return std::numeric_limits<double>::quiet_NaN(); }
inline bool is_missing(double v) { return std::isnan(v); }

// Ordered list of annotation dimension labels. The order is canonical for
// every vector and matrix downstream; files carry the names so a mismatch
// is detected rather than silently misaligned.
struct Dimensions {
    std::vector<std::string> names;

    int size() const { return static_cast<int>(names.size()); }

    // Index of a named dimension, -1 when absent.
    int index_of(const std::string& name) const;

    std::vector<std::string> validate() const;

    bool operator==(const Dimensions&) const = default;
};

struct Instance {
    std::string id;
    Vec features;
};

// One annotator's rating vector for one instance. Entries are finite reals
// or missing_rating().
struct AnnotationRecord {
    std::string instance_id;
    std::string annotator_id;
    Vec ratings;
};

enum class DatasetMode { training, prediction };

struct Dataset {
    Dimensions dimensions;
    std::vector<Instance> instances;  // canonical instance order
    std::vector<AnnotationRecord> annotations;

    // Sorted unique annotator ids present in the annotations.
    std::vector<std::string> annotator_ids() const;

    const Instance* find_instance(const std::string& id) const;
};

// Returns all invariant violations; empty means the dataset is valid.
// Training mode additionally rejects missing entries. Idempotent and
// order-independent over annotation records.
std::vector<std::string> validate_dataset(const Dataset& dataset, DatasetMode mode);

// Annotation records of each instance, aligned with dataset.instances and
// sorted by annotator id within an instance. Used as the fixed reduction
// order everywhere so record permutations cannot change results.
std::vector<std::vector<const AnnotationRecord*>> group_by_instance(const Dataset& dataset);

// Per-annotator linear transform F_k (D x D) and isotropic noise variance.
struct AnnotatorParams {
    Mat transform;
    double noise_var = 1.0;
};

struct FusionModel {
    Dimensions dimensions;
    Mat theta;  // P x D
    double sigma2 = 1.0;
    std::map<std::string, AnnotatorParams> annotators;

    // Throws Error on any shape or positivity violation.
    void check_consistent() const;
};

// Posterior mean and covariance of a latent label vector given annotations.
struct LatentEstimate {
    Vec mean;
    Mat cov;
};

}  // namespace normfuse

#endif
