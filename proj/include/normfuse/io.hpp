#ifndef NORMFUSE_IO_HPP
#define NORMFUSE_IO_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "normfuse/baselines.hpp"
#include "normfuse/predictor.hpp"
#include "normfuse/synthgen.hpp"
#include "normfuse/types.hpp"

namespace normfuse {

// Stable process exit codes, shared by all subcommands.
namespace exit_codes {
inline constexpr int ok = 0;
inline constexpr int usage = 2;
inline constexpr int parse = 3;
inline constexpr int numerical = 4;
inline constexpr int not_converged = 5;
}  // namespace exit_codes

namespace io {

// 17 significant digits; round-trips any double through decimal text.
std::string format_double(double v);

// Comma-separated list -> tokens (used for --dims and --metrics flags).
std::vector<std::string> split_dims(const std::string& csv);

struct AnnotationData {
    Dimensions dimensions;
    std::vector<AnnotationRecord> records;
};

// CSV `instance_id,annotator_id,<dim1>,...,<dimD>`; empty cell = missing.
AnnotationData read_annotation_csv(const std::string& path);
void write_annotation_csv(const std::string& path, const Dimensions& dims,
                          const std::vector<AnnotationRecord>& records);

// CSV `instance_id,<f1>,...,<fP>`.
std::vector<std::pair<std::string, Vec>> read_feature_csv(const std::string& path);
void write_feature_csv(const std::string& path, const std::vector<Instance>& instances);

// JSON model document with a format-version field.
FusionModel read_model(const std::string& path);
void write_model(const std::string& path, const FusionModel& model);

// `instance_id<TAB>sentence text` per line.
std::vector<std::pair<std::string, std::string>> read_sentence_file(const std::string& path);

// CSV `word,<dim1>,...,<dimD>`.
NormLexicon read_lexicon_csv(const std::string& path);

// One line per word: word then P decimals, whitespace-delimited.
EmbeddingTable read_embeddings(const std::string& path);

// One word per line.
StopList read_stoplist(const std::string& path);

// Generic `instance_id,<col>,...` table; non-numeric cells become nullopt.
struct ValueTable {
    std::vector<std::string> columns;
    std::vector<std::pair<std::string, std::vector<std::optional<double>>>> rows;
};
ValueTable read_value_csv(const std::string& path);

void write_predictions_csv(const std::string& path, const std::string& target_dim,
                           const std::vector<Prediction>& predictions);

void write_latents_csv(const std::string& path, const Dimensions& dims,
                       const std::vector<Instance>& instances, const std::vector<Vec>& latents);

// SimSpec as a JSON config with the same key names as the fields.
SimSpec read_simspec(const std::string& path);

// Joins annotation records with features; instances ordered by id. Every
// record's instance must have features (throws ParseError naming the id).
Dataset build_dataset(const AnnotationData& data,
                      const std::vector<std::pair<std::string, Vec>>& features);

}  // namespace io

struct TrainOptions {
    std::string annotations;
    std::string features_csv;  // precomputed features, or
    std::string embeddings;    // embedding table (+ optional text file)
    std::string text;
    std::string dims;  // optional comma-separated check against the header
    double tol = 1e-5;
    int max_iters = 500;
    double ridge = 1e-8;
    std::string out;
};
int cmd_train(const TrainOptions& opts, std::ostream& out, std::ostream& err);

struct PredictOptions {
    std::string model;
    std::string annotations;
    std::string target_dim;
    double ridge = 1e-6;
    bool weight_by_noise = false;
    std::string out;
};
int cmd_predict(const PredictOptions& opts, std::ostream& out, std::ostream& err);

struct BaselineOptions {
    std::string lexicon;
    std::string sentences;
    std::string stoplist;
    std::string agg = "mean";
    bool pretokenized = false;
    std::string out;
};
int cmd_baseline(const BaselineOptions& opts, std::ostream& out, std::ostream& err);

struct EvalOptions {
    std::string pred;
    std::string ref;
    std::string metrics = "ccc,pearson,mse";
    std::string out;  // optional machine-readable JSON
};
int cmd_eval(const EvalOptions& opts, std::ostream& out, std::ostream& err);

struct SimulateOptions {
    std::string spec;
    std::optional<std::uint64_t> seed;  // overrides the spec's seed
    std::string out_dir;
};
int cmd_simulate(const SimulateOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace normfuse

#endif
