#include "normfuse/io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "normfuse/em.hpp"
#include "normfuse/metrics.hpp"

namespace normfuse {
namespace io {

using nlohmann::json;

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split_dims(const std::string& csv) {
    std::vector<std::string> out;
    std::string token;
    for (char c : csv) {
        if (c == ',') {
            if (!token.empty()) out.push_back(token);
            token.clear();
        } else {
            token.push_back(c);
        }
    }
    if (!token.empty()) out.push_back(token);
    return out;
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> fields;
    std::string field;
    for (char c : line) {
        if (c == sep) {
            fields.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    fields.push_back(field);
    return fields;
}

double parse_double(const std::string& s, const std::string& path, int line_no) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0' || !std::isfinite(v))
        throw ParseError(path + ":" + std::to_string(line_no) + ": expected a finite number, got '" +
                         s + "'");
    return v;
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    return in;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    return out;
}

}  // namespace

AnnotationData read_annotation_csv(const std::string& path) {
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    auto header = split(line, ',');
    if (header.size() < 3 || header[0] != "instance_id" || header[1] != "annotator_id")
        throw ParseError(path + ":1: header must be instance_id,annotator_id,<dims>");

    AnnotationData data;
    data.dimensions.names.assign(header.begin() + 2, header.end());
    const std::size_t D = data.dimensions.names.size();

    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split(line, ',');
        if (fields.size() != D + 2)
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(D + 2) + " fields, got " + std::to_string(fields.size()));
        AnnotationRecord rec;
        rec.instance_id = fields[0];
        rec.annotator_id = fields[1];
        rec.ratings.resize(static_cast<Eigen::Index>(D));
        for (std::size_t d = 0; d < D; ++d) {
            const std::string& cell = fields[d + 2];
            rec.ratings[static_cast<Eigen::Index>(d)] =
                cell.empty() ? missing_rating() : parse_double(cell, path, line_no);
        }
        data.records.push_back(std::move(rec));
    }
    return data;
}

void write_annotation_csv(const std::string& path, const Dimensions& dims,
                          const std::vector<AnnotationRecord>& records) {
    auto out = open_output(path);
    out << "instance_id,annotator_id";
    for (const auto& n : dims.names) out << ',' << n;
    out << '\n';
    for (const auto& rec : records) {
        out << rec.instance_id << ',' << rec.annotator_id;
        for (Eigen::Index d = 0; d < rec.ratings.size(); ++d) {
            out << ',';
            if (!is_missing(rec.ratings[d])) out << format_double(rec.ratings[d]);
        }
        out << '\n';
    }
}

std::vector<std::pair<std::string, Vec>> read_feature_csv(const std::string& path) {
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    auto header = split(line, ',');
    if (header.size() < 2 || header[0] != "instance_id")
        throw ParseError(path + ":1: header must be instance_id,<feature columns>");
    const std::size_t P = header.size() - 1;

    std::vector<std::pair<std::string, Vec>> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split(line, ',');
        if (fields.size() != P + 1)
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(P + 1) + " fields");
        Vec v(static_cast<Eigen::Index>(P));
        for (std::size_t j = 0; j < P; ++j)
            v[static_cast<Eigen::Index>(j)] = parse_double(fields[j + 1], path, line_no);
        rows.emplace_back(fields[0], std::move(v));
    }
    return rows;
}

void write_feature_csv(const std::string& path, const std::vector<Instance>& instances) {
    auto out = open_output(path);
    const Eigen::Index P = instances.empty() ? 0 : instances.front().features.size();
    out << "instance_id";
    for (Eigen::Index j = 0; j < P; ++j) out << ",x" << j;
    out << '\n';
    for (const auto& inst : instances) {
        out << inst.id;
        for (Eigen::Index j = 0; j < P; ++j) out << ',' << format_double(inst.features[j]);
        out << '\n';
    }
}

namespace {

constexpr int kModelFormatVersion = 1;

json matrix_to_json(const Mat& m) {
    json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    j["data"] = std::move(data);  // row-major
    return j;
}

Mat matrix_from_json(const json& j, const std::string& what) {
    const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw ParseError(what + ": matrix shape/data mismatch");
    Mat m(rows, cols);
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[i++];
    return m;
}

}  // namespace

FusionModel read_model(const std::string& path) {
    auto in = open_input(path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    try {
        const int version = j.at("format_version").get<int>();
        if (version != kModelFormatVersion)
            throw ParseError(path + ": unrecognized format_version " + std::to_string(version));
        FusionModel model;
        model.dimensions.names = j.at("dimensions").get<std::vector<std::string>>();
        model.theta = matrix_from_json(j.at("theta"), path + ": theta");
        model.sigma2 = j.at("sigma2").get<double>();
        for (const auto& [id, aj] : j.at("annotators").items()) {
            AnnotatorParams params;
            params.transform = matrix_from_json(aj.at("F"), path + ": annotator " + id);
            params.noise_var = aj.at("tau2").get<double>();
            model.annotators.emplace(id, std::move(params));
        }
        model.check_consistent();
        return model;
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

void write_model(const std::string& path, const FusionModel& model) {
    json j;
    j["format_version"] = kModelFormatVersion;
    j["dimensions"] = model.dimensions.names;
    j["theta"] = matrix_to_json(model.theta);
    j["sigma2"] = model.sigma2;
    json annotators = json::object();
    for (const auto& [id, params] : model.annotators) {
        annotators[id] = {{"F", matrix_to_json(params.transform)}, {"tau2", params.noise_var}};
    }
    j["annotators"] = std::move(annotators);
    auto out = open_output(path);
    out << j.dump(2) << '\n';
}

std::vector<std::pair<std::string, std::string>> read_sentence_file(const std::string& path) {
    auto in = open_input(path);
    std::vector<std::pair<std::string, std::string>> sentences;
    std::set<std::string> seen;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw ParseError(path + ":" + std::to_string(line_no) +
                             ": expected instance_id<TAB>text");
        std::string id = line.substr(0, tab);
        if (!seen.insert(id).second)
            throw ParseError(path + ":" + std::to_string(line_no) + ": duplicate instance id '" +
                             id + "'");
        sentences.emplace_back(std::move(id), line.substr(tab + 1));
    }
    return sentences;
}

NormLexicon read_lexicon_csv(const std::string& path) {
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    auto header = split(line, ',');
    if (header.size() < 2 || header[0] != "word")
        throw ParseError(path + ":1: header must be word,<dims>");
    NormLexicon lexicon;
    lexicon.dimensions.names.assign(header.begin() + 1, header.end());
    const std::size_t D = lexicon.dimensions.names.size();

    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split(line, ',');
        if (fields.size() != D + 1)
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(D + 1) + " fields");
        Vec v(static_cast<Eigen::Index>(D));
        for (std::size_t d = 0; d < D; ++d)
            v[static_cast<Eigen::Index>(d)] = parse_double(fields[d + 1], path, line_no);
        std::string word = fields[0];
        std::transform(word.begin(), word.end(), word.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        lexicon.scores[word] = std::move(v);
    }
    return lexicon;
}

EmbeddingTable read_embeddings(const std::string& path) {
    auto in = open_input(path);
    EmbeddingTable table;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream iss(line);
        std::string word;
        iss >> word;
        std::vector<double> values;
        double v;
        while (iss >> v) values.push_back(v);
        if (word.empty() || values.empty())
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected word then numbers");
        if (table.dim == 0) table.dim = static_cast<Eigen::Index>(values.size());
        else if (table.dim != static_cast<Eigen::Index>(values.size()))
            throw ParseError(path + ":" + std::to_string(line_no) + ": embedding length " +
                             std::to_string(values.size()) + " != " + std::to_string(table.dim));
        table.vectors[word] = Eigen::Map<Vec>(values.data(), table.dim);
    }
    return table;
}

StopList read_stoplist(const std::string& path) {
    auto in = open_input(path);
    StopList stoplist;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::transform(line.begin(), line.end(), line.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        stoplist.words.insert(line);
    }
    return stoplist;
}

ValueTable read_value_csv(const std::string& path) {
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    auto header = split(line, ',');
    if (header.size() < 2 || header[0] != "instance_id")
        throw ParseError(path + ":1: header must be instance_id,<columns>");
    ValueTable table;
    table.columns.assign(header.begin() + 1, header.end());

    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split(line, ',');
        if (fields.size() != header.size())
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " fields");
        std::vector<std::optional<double>> values;
        for (std::size_t j = 1; j < fields.size(); ++j) {
            char* end = nullptr;
            const double v = std::strtod(fields[j].c_str(), &end);
            if (fields[j].empty() || end == fields[j].c_str() || *end != '\0' ||
                !std::isfinite(v)) {
                values.emplace_back(std::nullopt);
            } else {
                values.emplace_back(v);
            }
        }
        table.rows.emplace_back(fields[0], std::move(values));
    }
    return table;
}

void write_predictions_csv(const std::string& path, const std::string& target_dim,
                           const std::vector<Prediction>& predictions) {
    auto out = open_output(path);
    out << "instance_id," << target_dim << ",condition_flag\n";
    for (const auto& p : predictions)
        out << p.instance_id << ',' << format_double(p.target_value) << ','
            << to_string(p.condition_flag) << '\n';
}

void write_latents_csv(const std::string& path, const Dimensions& dims,
                       const std::vector<Instance>& instances, const std::vector<Vec>& latents) {
    auto out = open_output(path);
    out << "instance_id";
    for (const auto& n : dims.names) out << ',' << n;
    out << '\n';
    for (std::size_t m = 0; m < instances.size(); ++m) {
        out << instances[m].id;
        for (Eigen::Index d = 0; d < latents[m].size(); ++d)
            out << ',' << format_double(latents[m][d]);
        out << '\n';
    }
}

SimSpec read_simspec(const std::string& path) {
    auto in = open_input(path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    SimSpec spec;
    try {
        if (j.contains("M")) spec.M = j["M"].get<int>();
        if (j.contains("P")) spec.P = j["P"].get<int>();
        if (j.contains("D")) spec.D = j["D"].get<int>();
        if (j.contains("K")) spec.K = j["K"].get<int>();
        if (j.contains("sigma")) spec.sigma = j["sigma"].get<double>();
        if (j.contains("tau_range")) {
            auto r = j["tau_range"].get<std::vector<double>>();
            if (r.size() != 2) throw UsageError(path + ": tau_range must be [lo, hi]");
            spec.tau_lo = r[0];
            spec.tau_hi = r[1];
        }
        if (j.contains("F_style")) {
            const auto s = j["F_style"].get<std::string>();
            if (s == "identity") spec.f_style = FStyle::identity;
            else if (s == "diagonal") spec.f_style = FStyle::diagonal;
            else if (s == "coupled") spec.f_style = FStyle::coupled;
            else throw UsageError(path + ": unknown F_style '" + s + "'");
        }
        if (j.contains("off_diag_mass")) spec.off_diag_mass = j["off_diag_mass"].get<double>();
        if (j.contains("theta_scale")) spec.theta_scale = j["theta_scale"].get<double>();
        if (j.contains("ratings_per_instance"))
            spec.ratings_per_instance = j["ratings_per_instance"].get<int>();
        else spec.ratings_per_instance = spec.K;
        if (j.contains("missing_pattern")) {
            const auto s = j["missing_pattern"].get<std::string>();
            if (s == "none") spec.missing_pattern = MissingPattern::none;
            else if (s == "drop_dim") spec.missing_pattern = MissingPattern::drop_dim;
            else throw UsageError(path + ": unknown missing_pattern '" + s + "'");
        }
        if (j.contains("drop_dim")) spec.drop_dim = j["drop_dim"].get<int>();
        if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("dimension_names"))
            spec.dimension_names = j["dimension_names"].get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return spec;
}

Dataset build_dataset(const AnnotationData& data,
                      const std::vector<std::pair<std::string, Vec>>& features) {
    std::unordered_map<std::string, const Vec*> by_id;
    for (const auto& [id, v] : features) by_id[id] = &v;

    std::set<std::string> ids;
    for (const auto& rec : data.records) ids.insert(rec.instance_id);

    Dataset dataset;
    dataset.dimensions = data.dimensions;
    for (const auto& id : ids) {
        auto it = by_id.find(id);
        if (it == by_id.end())
            throw ParseError("instance '" + id + "' has annotations but no features");
        dataset.instances.push_back({id, *it->second});
    }
    dataset.annotations = data.records;
    return dataset;
}

}  // namespace io

namespace {

std::vector<std::pair<std::string, Vec>> features_for(const TrainOptions& opts,
                                                      const io::AnnotationData& data,
                                                      std::ostream& err) {
    if (!opts.features_csv.empty()) return io::read_feature_csv(opts.features_csv);
    if (opts.embeddings.empty())
        throw UsageError("train: provide --features or --embeddings");
    const EmbeddingTable table = io::read_embeddings(opts.embeddings);

    std::set<std::string> ids;
    for (const auto& rec : data.records) ids.insert(rec.instance_id);

    std::vector<std::pair<std::string, Vec>> features;
    if (!opts.text.empty()) {
        std::unordered_map<std::string, std::string> texts;
        for (auto& [id, text] : io::read_sentence_file(opts.text)) texts[id] = text;
        for (const auto& id : ids) {
            auto it = texts.find(id);
            if (it == texts.end())
                throw ParseError("instance '" + id + "' not found in text file '" + opts.text + "'");
            const auto feats = sentence_features(tokenize(it->second), table);
            if (!feats.any_found)
                err << "warning: no embedded token in instance '" << id << "', zero features\n";
            features.emplace_back(id, feats.features);
        }
    } else {
        // word-level: the instance id is the word itself
        for (const auto& id : ids) {
            auto it = table.vectors.find(id);
            if (it == table.vectors.end())
                throw ParseError("word '" + id + "' missing from embedding file '" +
                                 opts.embeddings + "'");
            features.emplace_back(id, it->second);
        }
    }
    return features;
}

}  // namespace

int cmd_train(const TrainOptions& opts, std::ostream& out, std::ostream& err) {
    EmConfig config;
    config.max_iters = opts.max_iters;
    config.rel_tol = opts.tol;
    config.ridge = opts.ridge;
    config.validate();
    if (opts.annotations.empty() || opts.out.empty())
        throw UsageError("train: --annotations and --out are required");

    const auto data = io::read_annotation_csv(opts.annotations);
    if (!opts.dims.empty()) {
        const auto expected = io::split_dims(opts.dims);
        if (expected != data.dimensions.names)
            throw ParseError("dimension names in '" + opts.annotations +
                             "' do not match --dims");
    }

    const auto features = features_for(opts, data, err);
    const Dataset dataset = io::build_dataset(data, features);
    const auto errors = validate_dataset(dataset, DatasetMode::training);
    if (!errors.empty()) {
        for (const auto& e : errors) err << "error: " << e << '\n';
        throw ParseError("invalid training dataset (" + std::to_string(errors.size()) +
                         " problems)");
    }

    auto [model, trace] = fit_em(dataset, config);
    for (std::size_t i = 0; i < trace.log_likelihoods.size(); ++i)
        out << "iter " << i << " log-likelihood " << io::format_double(trace.log_likelihoods[i])
            << '\n';
    io::write_model(opts.out, model);
    out << "wrote model to " << opts.out << " ("
        << (trace.reason == EmTermination::converged ? "converged" : "max_iters") << " after "
        << trace.iterations << " iterations)\n";
    return trace.reason == EmTermination::converged ? exit_codes::ok : exit_codes::not_converged;
}

int cmd_predict(const PredictOptions& opts, std::ostream& out, std::ostream& err) {
    if (opts.model.empty() || opts.annotations.empty() || opts.out.empty())
        throw UsageError("predict: --model, --annotations and --out are required");
    const FusionModel model = io::read_model(opts.model);
    if (model.dimensions.index_of(opts.target_dim) < 0)
        throw UsageError("predict: target dimension '" + opts.target_dim +
                         "' not in model dimensions");

    const auto data = io::read_annotation_csv(opts.annotations);
    if (data.dimensions.names != model.dimensions.names)
        throw ParseError("annotation dimensions do not match model dimensions");

    Dataset dataset;
    dataset.dimensions = data.dimensions;
    std::set<std::string> ids;
    for (const auto& rec : data.records) ids.insert(rec.instance_id);
    for (const auto& id : ids) dataset.instances.push_back({id, Vec()});
    dataset.annotations = data.records;

    PredictionConfig config;
    config.target_dim = opts.target_dim;
    config.ridge = opts.ridge;
    config.weight_by_noise = opts.weight_by_noise;

    const PredictionReport report = predict_dataset(model, dataset, config);
    for (const auto& a : report.skipped_annotators)
        err << "warning: annotator '" << a << "' not in model, records skipped\n";
    for (const auto& f : report.failures)
        err << "failed: " << f.instance_id << ": " << f.reason << '\n';
    if (report.predictions.empty())
        throw NumericalError("predict: no instance had usable equations");

    io::write_predictions_csv(opts.out, opts.target_dim, report.predictions);
    out << "wrote " << report.predictions.size() << " predictions to " << opts.out;
    if (!report.failures.empty()) out << " (" << report.failures.size() << " failures)";
    out << '\n';
    return exit_codes::ok;
}

int cmd_baseline(const BaselineOptions& opts, std::ostream& out, std::ostream& err) {
    if (opts.lexicon.empty() || opts.sentences.empty() || opts.out.empty())
        throw UsageError("baseline: --lexicon, --sentences and --out are required");
    const auto agg = parse_aggregator(opts.agg);
    if (!agg) throw UsageError("baseline: unknown aggregator '" + opts.agg + "'");

    const NormLexicon lexicon = io::read_lexicon_csv(opts.lexicon);
    const StopList stoplist =
        opts.stoplist.empty() ? StopList{} : io::read_stoplist(opts.stoplist);
    const auto sentences = io::read_sentence_file(opts.sentences);

    std::ofstream csv(opts.out);
    if (!csv) throw Error("cannot write '" + opts.out + "'");
    csv << "instance_id";
    for (const auto& n : lexicon.dimensions.names) csv << ',' << n;
    csv << ",status\n";
    int empty_count = 0;
    for (const auto& [id, text] : sentences) {
        const auto norms = aggregate_norms(tokenize(text), lexicon, stoplist, *agg);
        csv << id;
        if (norms) {
            for (Eigen::Index d = 0; d < norms->size(); ++d)
                csv << ',' << io::format_double((*norms)[d]);
            csv << ",ok\n";
        } else {
            for (int d = 0; d < lexicon.dimensions.size(); ++d) csv << ',';
            csv << ",empty\n";
            ++empty_count;
        }
    }
    if (empty_count > 0)
        err << "warning: " << empty_count << " sentence(s) had no scored content word\n";
    out << "wrote " << sentences.size() << " rows to " << opts.out << '\n';
    return exit_codes::ok;
}

int cmd_eval(const EvalOptions& opts, std::ostream& out, std::ostream& err) {
    if (opts.pred.empty() || opts.ref.empty())
        throw UsageError("eval: --pred and --ref are required");
    std::set<std::string> selected;
    for (const auto& m : io::split_dims(opts.metrics)) {
        if (m != "ccc" && m != "pearson" && m != "mse")
            throw UsageError("eval: unknown metric '" + m + "'");
        selected.insert(m);
    }

    const io::ValueTable pred = io::read_value_csv(opts.pred);
    const io::ValueTable ref = io::read_value_csv(opts.ref);

    std::vector<std::string> shared;
    for (const auto& c : pred.columns)
        if (std::find(ref.columns.begin(), ref.columns.end(), c) != ref.columns.end())
            shared.push_back(c);
    if (shared.empty()) throw ParseError("eval: no shared dimension columns");

    std::unordered_map<std::string, const std::vector<std::optional<double>>*> ref_rows;
    for (const auto& [id, values] : ref.rows) ref_rows[id] = &values;

    int unmatched = 0;
    MetricsReport report;
    for (const auto& dim : shared) {
        const auto pi = static_cast<std::size_t>(
            std::find(pred.columns.begin(), pred.columns.end(), dim) - pred.columns.begin());
        const auto ri = static_cast<std::size_t>(
            std::find(ref.columns.begin(), ref.columns.end(), dim) - ref.columns.begin());
        std::vector<double> xs, ys;
        for (const auto& [id, values] : pred.rows) {
            auto it = ref_rows.find(id);
            if (it == ref_rows.end()) continue;
            const auto& pv = values[pi];
            const auto& rv = (*it->second)[ri];
            if (pv && rv) {
                xs.push_back(*pv);
                ys.push_back(*rv);
            }
        }
        if (xs.size() < 2) continue;
        PairedSeries series{Eigen::Map<Vec>(xs.data(), static_cast<Eigen::Index>(xs.size())),
                            Eigen::Map<Vec>(ys.data(), static_cast<Eigen::Index>(ys.size()))};
        report.per_dimension[dim] = compute_dimension_metrics(series);
    }
    for (const auto& [id, values] : pred.rows)
        if (!ref_rows.count(id)) ++unmatched;
    if (report.per_dimension.empty()) throw ParseError("eval: empty join between pred and ref");
    if (unmatched > 0)
        err << "warning: " << unmatched << " prediction id(s) missing from the reference\n";

    out << "dimension";
    if (selected.count("ccc")) out << "\tccc";
    if (selected.count("pearson")) out << "\tpearson";
    if (selected.count("mse")) out << "\tmse";
    out << "\tn\n";
    nlohmann::json jreport;
    for (const auto& [dim, m] : report.per_dimension) {
        out << dim;
        auto emit = [&](const std::optional<double>& v) {
            if (v) out << '\t' << io::format_double(*v);
            else out << "\tundefined";
        };
        if (selected.count("ccc")) emit(m.ccc);
        if (selected.count("pearson")) emit(m.pearson);
        if (selected.count("mse")) out << '\t' << io::format_double(m.mse);
        out << '\t' << m.n << '\n';
        nlohmann::json jm;
        jm["n"] = m.n;
        if (selected.count("ccc")) jm["ccc"] = m.ccc ? nlohmann::json(*m.ccc) : nlohmann::json();
        if (selected.count("pearson"))
            jm["pearson"] = m.pearson ? nlohmann::json(*m.pearson) : nlohmann::json();
        if (selected.count("mse")) jm["mse"] = m.mse;
        jreport["per_dimension"][dim] = std::move(jm);
    }
    if (!opts.out.empty()) {
        std::ofstream jf(opts.out);
        if (!jf) throw Error("cannot write '" + opts.out + "'");
        jf << jreport.dump(2) << '\n';
    }
    return exit_codes::ok;
}

int cmd_simulate(const SimulateOptions& opts, std::ostream& out, std::ostream& err) {
    (void)err;
    if (opts.spec.empty() || opts.out_dir.empty())
        throw UsageError("simulate: --spec and --out-dir are required");
    SimSpec spec = io::read_simspec(opts.spec);
    if (opts.seed) spec.seed = *opts.seed;
    spec.validate();

    auto [dataset, truth] = generate(spec);

    namespace fs = std::filesystem;
    fs::create_directories(opts.out_dir);
    const auto path = [&](const char* name) { return (fs::path(opts.out_dir) / name).string(); };

    io::write_annotation_csv(path("annotations.csv"), dataset.dimensions, dataset.annotations);
    io::write_feature_csv(path("features.csv"), dataset.instances);
    io::write_model(path("ground_truth_model.json"), truth.model);
    io::write_latents_csv(path("latents.csv"), dataset.dimensions, dataset.instances,
                          truth.latents);
    out << "wrote " << dataset.annotations.size() << " annotation records for "
        << dataset.instances.size() << " instances to " << opts.out_dir << '\n';
    return exit_codes::ok;
}

}  // namespace normfuse
