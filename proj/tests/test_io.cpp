#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "normfuse/io.hpp"
#include "test_util.hpp"

using namespace normfuse;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("normfuse_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const char* name) const { return (path / name).string(); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

}  // namespace

TEST_CASE("model files round-trip bit-exactly") {
    TempDir tmp;
    StreamRng rng(3, "model_rt");
    const auto model = testutil::random_model(rng, 3, 5, 4);
    io::write_model(tmp.file("m.json"), model);
    const auto loaded = io::read_model(tmp.file("m.json"));
    CHECK(loaded.dimensions.names == model.dimensions.names);
    CHECK((loaded.theta - model.theta).cwiseAbs().maxCoeff() == 0.0);
    CHECK(loaded.sigma2 == model.sigma2);
    REQUIRE(loaded.annotators.size() == model.annotators.size());
    for (const auto& [id, params] : model.annotators) {
        CHECK((loaded.annotators.at(id).transform - params.transform).cwiseAbs().maxCoeff() ==
              0.0);
        CHECK(loaded.annotators.at(id).noise_var == params.noise_var);
    }
}

TEST_CASE("unrecognized model version is rejected") {
    TempDir tmp;
    write_file(tmp.file("bad.json"), R"({"format_version": 99})");
    CHECK_THROWS_AS(io::read_model(tmp.file("bad.json")), ParseError);
}

TEST_CASE("annotation csv round-trips values and missing cells") {
    TempDir tmp;
    Dimensions dims{{"valence", "arousal"}};
    std::vector<AnnotationRecord> records;
    records.push_back({"s1", "a1", (Vec(2) << 0.1234567890123456789, -2.5).finished()});
    records.push_back({"s2", "a1", (Vec(2) << missing_rating(), 3.0).finished()});
    io::write_annotation_csv(tmp.file("ann.csv"), dims, records);

    const auto data = io::read_annotation_csv(tmp.file("ann.csv"));
    CHECK(data.dimensions.names == dims.names);
    REQUIRE(data.records.size() == 2);
    CHECK(data.records[0].ratings[0] == records[0].ratings[0]);
    CHECK(data.records[0].ratings[1] == -2.5);
    CHECK(is_missing(data.records[1].ratings[0]));
    CHECK(data.records[1].ratings[1] == 3.0);
}

TEST_CASE("annotation csv parse errors carry line numbers") {
    TempDir tmp;
    write_file(tmp.file("bad.csv"), "instance_id,annotator_id,v\ns1,a1,notanumber\n");
    try {
        io::read_annotation_csv(tmp.file("bad.csv"));
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
    write_file(tmp.file("hdr.csv"), "foo,bar,v\n");
    CHECK_THROWS_AS(io::read_annotation_csv(tmp.file("hdr.csv")), ParseError);
}

TEST_CASE("feature csv round-trips") {
    TempDir tmp;
    std::vector<Instance> instances{{"w1", (Vec(2) << 1.5, -0.25).finished()},
                                    {"w2", (Vec(2) << 0.0, 1e-17).finished()}};
    io::write_feature_csv(tmp.file("f.csv"), instances);
    const auto rows = io::read_feature_csv(tmp.file("f.csv"));
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].first == "w1");
    CHECK(rows[1].second[1] == 1e-17);
}

TEST_CASE("lexicon, stoplist, embeddings and sentence files parse") {
    TempDir tmp;
    write_file(tmp.file("lex.csv"), "word,valence,arousal\nGood,4.0,2.0\nbad,2.0,3.0\n");
    const auto lex = io::read_lexicon_csv(tmp.file("lex.csv"));
    CHECK(lex.dimensions.names == std::vector<std::string>{"valence", "arousal"});
    CHECK(lex.scores.at("good")[0] == 4.0);  // lowercased on read

    write_file(tmp.file("stop.txt"), "The\na\n\n");
    const auto stop = io::read_stoplist(tmp.file("stop.txt"));
    CHECK(stop.contains("the"));
    CHECK_FALSE(stop.contains("good"));

    write_file(tmp.file("emb.txt"), "good 0.5 1.5\nbad -1 0\n");
    const auto table = io::read_embeddings(tmp.file("emb.txt"));
    CHECK(table.dim == 2);
    CHECK(table.vectors.at("bad")[0] == -1.0);
    write_file(tmp.file("emb_bad.txt"), "good 0.5 1.5\nbad -1\n");
    CHECK_THROWS_AS(io::read_embeddings(tmp.file("emb_bad.txt")), ParseError);

    write_file(tmp.file("sent.tsv"), "s1\tA good day.\ns2\tbad\n");
    const auto sentences = io::read_sentence_file(tmp.file("sent.tsv"));
    REQUIRE(sentences.size() == 2);
    CHECK(sentences[0].second == "A good day.");
    write_file(tmp.file("dup.tsv"), "s1\ta\ns1\tb\n");
    CHECK_THROWS_AS(io::read_sentence_file(tmp.file("dup.tsv")), ParseError);
}

TEST_CASE("value csv keeps non-numeric cells as undefined") {
    TempDir tmp;
    write_file(tmp.file("v.csv"), "instance_id,dim1,condition_flag\ns1,0.5,well-posed\n");
    const auto table = io::read_value_csv(tmp.file("v.csv"));
    REQUIRE(table.rows.size() == 1);
    CHECK(table.rows[0].second[0] == 0.5);
    CHECK_FALSE(table.rows[0].second[1].has_value());
}

TEST_CASE("build_dataset joins annotations with features and names missing instances") {
    io::AnnotationData data;
    data.dimensions.names = {"v"};
    data.records.push_back({"w1", "a1", Vec::Constant(1, 2.0)});
    std::vector<std::pair<std::string, Vec>> features{{"w1", Vec::Ones(3)},
                                                      {"unused", Vec::Ones(3)}};
    const auto ds = io::build_dataset(data, features);
    CHECK(ds.instances.size() == 1);  // only annotated instances are kept

    data.records.push_back({"w2", "a1", Vec::Constant(1, 3.0)});
    try {
        io::build_dataset(data, features);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("w2") != std::string::npos);
    }
}

TEST_CASE("simspec config parses and validates") {
    TempDir tmp;
    write_file(tmp.file("spec.json"),
               R"({"M": 10, "P": 4, "D": 2, "K": 3, "sigma": 0.5, "tau_range": [0.1, 0.2],
                   "F_style": "coupled", "off_diag_mass": 0.25, "ratings_per_instance": 2,
                   "missing_pattern": "drop_dim", "drop_dim": 1, "seed": 12})");
    const auto spec = io::read_simspec(tmp.file("spec.json"));
    CHECK(spec.M == 10);
    CHECK(spec.tau_hi == 0.2);
    CHECK(spec.f_style == FStyle::coupled);
    CHECK(spec.missing_pattern == MissingPattern::drop_dim);
    CHECK(spec.drop_dim == 1);
    spec.validate();

    write_file(tmp.file("bad.json"), R"({"off_diag_mass": 1.0})");
    CHECK_THROWS_AS(io::read_simspec(tmp.file("bad.json")).validate(), UsageError);
    write_file(tmp.file("junk.json"), "{nope");
    CHECK_THROWS_AS(io::read_simspec(tmp.file("junk.json")), ParseError);
}

TEST_CASE("simulate then train then predict then eval compose through files") {
    TempDir tmp;
    write_file(tmp.file("spec.json"),
               R"({"M": 30, "P": 4, "D": 3, "K": 6, "sigma": 0.3, "tau_range": [0.1, 0.1],
                   "F_style": "coupled", "off_diag_mass": 0.4, "ratings_per_instance": 6,
                   "seed": 77})");
    std::ostringstream out, err;

    SimulateOptions sim;
    sim.spec = tmp.file("spec.json");
    sim.out_dir = tmp.file("sim");
    CHECK(cmd_simulate(sim, out, err) == exit_codes::ok);

    TrainOptions train;
    train.annotations = (fs::path(sim.out_dir) / "annotations.csv").string();
    train.features_csv = (fs::path(sim.out_dir) / "features.csv").string();
    train.out = tmp.file("model.json");
    CHECK(cmd_train(train, out, err) == exit_codes::ok);

    PredictOptions predict;
    predict.model = train.out;
    predict.annotations = train.annotations;
    predict.target_dim = "dim2";
    predict.out = tmp.file("pred.csv");
    CHECK(cmd_predict(predict, out, err) == exit_codes::ok);

    EvalOptions eval;
    eval.pred = predict.out;
    eval.ref = (fs::path(sim.out_dir) / "latents.csv").string();
    eval.out = tmp.file("report.json");
    CHECK(cmd_eval(eval, out, err) == exit_codes::ok);
    CHECK(out.str().find("dim2") != std::string::npos);
    CHECK(fs::exists(eval.out));
}

TEST_CASE("simulate is byte-identical for the same seed") {
    TempDir tmp;
    write_file(tmp.file("spec.json"), R"({"M": 8, "P": 3, "D": 2, "K": 3, "seed": 4,
                                          "ratings_per_instance": 3})");
    std::ostringstream out, err;
    for (const char* dir : {"one", "two"}) {
        SimulateOptions sim;
        sim.spec = tmp.file("spec.json");
        sim.out_dir = tmp.file(dir);
        REQUIRE(cmd_simulate(sim, out, err) == exit_codes::ok);
    }
    for (const char* name : {"annotations.csv", "features.csv", "ground_truth_model.json",
                             "latents.csv"}) {
        std::ifstream a(fs::path(tmp.file("one")) / name), b(fs::path(tmp.file("two")) / name);
        std::stringstream sa, sb;
        sa << a.rdbuf();
        sb << b.rdbuf();
        CHECK(sa.str() == sb.str());
    }
}

TEST_CASE("train rejects a bad iteration budget before writing anything") {
    TempDir tmp;
    TrainOptions train;
    train.annotations = tmp.file("whatever.csv");
    train.out = tmp.file("model.json");
    train.max_iters = 0;
    std::ostringstream out, err;
    CHECK_THROWS_AS(cmd_train(train, out, err), UsageError);
    CHECK_FALSE(fs::exists(train.out));
}

TEST_CASE("train names a word missing from the embedding file") {
    TempDir tmp;
    write_file(tmp.file("ann.csv"), "instance_id,annotator_id,v\nhello,a1,3.0\n");
    write_file(tmp.file("emb.txt"), "goodbye 1.0 2.0\n");
    TrainOptions train;
    train.annotations = tmp.file("ann.csv");
    train.embeddings = tmp.file("emb.txt");
    train.out = tmp.file("model.json");
    std::ostringstream out, err;
    try {
        cmd_train(train, out, err);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("hello") != std::string::npos);
    }
}

TEST_CASE("predict rejects an unknown target dimension before any computation") {
    TempDir tmp;
    StreamRng rng(8, "predict_cli");
    const auto model = testutil::random_model(rng, 2, 3, 2);
    io::write_model(tmp.file("model.json"), model);
    PredictOptions predict;
    predict.model = tmp.file("model.json");
    predict.annotations = tmp.file("nonexistent.csv");
    predict.target_dim = "nope";
    predict.out = tmp.file("pred.csv");
    std::ostringstream out, err;
    CHECK_THROWS_AS(cmd_predict(predict, out, err), UsageError);
}

TEST_CASE("eval with disjoint ids fails with an empty-join error") {
    TempDir tmp;
    write_file(tmp.file("pred.csv"), "instance_id,v\ns1,1.0\ns2,2.0\n");
    write_file(tmp.file("ref.csv"), "instance_id,v\nz1,1.0\nz2,2.0\n");
    EvalOptions eval;
    eval.pred = tmp.file("pred.csv");
    eval.ref = tmp.file("ref.csv");
    std::ostringstream out, err;
    CHECK_THROWS_AS(cmd_eval(eval, out, err), ParseError);
}

TEST_CASE("eval golden values on identical and shifted files") {
    TempDir tmp;
    write_file(tmp.file("pred.csv"), "instance_id,v\ns1,1\ns2,2\ns3,3\n");
    write_file(tmp.file("same.csv"), "instance_id,v\ns1,1\ns2,2\ns3,3\n");
    write_file(tmp.file("shift.csv"), "instance_id,v\ns1,2\ns2,3\ns3,4\n");
    std::ostringstream err;

    std::ostringstream out1;
    EvalOptions eval;
    eval.pred = tmp.file("pred.csv");
    eval.ref = tmp.file("same.csv");
    eval.out = tmp.file("r1.json");
    CHECK(cmd_eval(eval, out1, err) == exit_codes::ok);
    std::ifstream r1(eval.out);
    std::stringstream j1;
    j1 << r1.rdbuf();
    CHECK(j1.str().find("\"ccc\": 1.0") != std::string::npos);
    CHECK(j1.str().find("\"mse\": 0.0") != std::string::npos);

    std::ostringstream out2;
    eval.ref = tmp.file("shift.csv");
    eval.out = tmp.file("r2.json");
    CHECK(cmd_eval(eval, out2, err) == exit_codes::ok);
    std::ifstream r2(eval.out);
    const auto j2 = nlohmann::json::parse(r2);
    CHECK(j2["per_dimension"]["v"]["ccc"].get<double>() ==
          doctest::Approx(4.0 / 7.0).epsilon(1e-12));
    CHECK(j2["per_dimension"]["v"]["pearson"].get<double>() == doctest::Approx(1.0));
}

TEST_CASE("baseline command mirrors the module examples end to end") {
    TempDir tmp;
    write_file(tmp.file("lex.csv"), "word,valence\ngood,4.0\nbad,2.0\n");
    write_file(tmp.file("sent.tsv"), "s1\tgood bad\ns2\tthe the\n");
    write_file(tmp.file("stop.txt"), "the\n");
    BaselineOptions opts;
    opts.lexicon = tmp.file("lex.csv");
    opts.sentences = tmp.file("sent.tsv");
    opts.stoplist = tmp.file("stop.txt");
    opts.agg = "mean";
    opts.out = tmp.file("norms.csv");
    std::ostringstream out, err;
    CHECK(cmd_baseline(opts, out, err) == exit_codes::ok);

    std::ifstream result(opts.out);
    std::string header, row1, row2;
    std::getline(result, header);
    std::getline(result, row1);
    std::getline(result, row2);
    CHECK(header == "instance_id,valence,status");
    CHECK(row1 == "s1,3,ok");
    CHECK(row2 == "s2,,empty");

    opts.agg = "median";
    CHECK_THROWS_AS(cmd_baseline(opts, out, err), UsageError);
}

TEST_CASE("format_double survives a text round trip") {
    StreamRng rng(15, "fmt");
    for (int i = 0; i < 200; ++i) {
        const double v = rng.normal() * std::pow(10.0, rng.uniform(-12, 12));
        CHECK(std::stod(io::format_double(v)) == v);
    }
}
