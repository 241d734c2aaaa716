#include <cmath>

#include "doctest.h"
#include "normfuse/metrics.hpp"
#include "normfuse/predictor.hpp"
#include "normfuse/synthgen.hpp"
#include "test_util.hpp"

using namespace normfuse;
using testutil::make_dims;
using testutil::ptrs;

namespace {

FusionModel two_dim_model(const Mat& transform) {
    FusionModel model;
    model.dimensions = make_dims(2);
    model.theta = Mat::Zero(1, 2);
    model.sigma2 = 1.0;
    model.annotators["a"] = {transform, 0.01};
    return model;
}

}  // namespace

TEST_CASE("identity transforms carry no cross-dimension information") {
    const auto model = two_dim_model(Mat::Identity(2, 2));
    AnnotationRecord rec{"s1", "a", (Vec(2) << 3.0, missing_rating()).finished()};
    const AnnotationRecord* recs[] = {&rec};
    PredictionConfig config;
    config.target_dim = "dim2";
    const auto pred = predict_instance(model, recs, config);
    CHECK(pred.condition_flag == ConditionFlag::ridge_resolved);
    CHECK(pred.target_value == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(pred.equations_used == 1);
}

TEST_CASE("single coupled equation yields the minimum-norm solution") {
    Mat f(2, 2);
    f << 1, 1, 0, 1;
    const auto model = two_dim_model(f);
    AnnotationRecord rec{"s1", "a", (Vec(2) << 3.0, missing_rating()).finished()};
    const AnnotationRecord* recs[] = {&rec};
    PredictionConfig config;
    config.target_dim = "dim2";
    const auto pred = predict_instance(model, recs, config);
    // one equation a1 + a2 = 3; minimum-norm solution (1.5, 1.5)
    CHECK(pred.a_star[0] == doctest::Approx(1.5).epsilon(1e-4));
    CHECK(pred.a_star[1] == doctest::Approx(1.5).epsilon(1e-4));
    CHECK(pred.target_value == doctest::Approx(1.5).epsilon(1e-4));
    CHECK(pred.condition_flag == ConditionFlag::ridge_resolved);
}

TEST_CASE("noiseless full-rank records are recovered exactly") {
    StreamRng rng(61, "exact_recovery");
    for (int trial = 0; trial < 50; ++trial) {
        const int d = 2 + static_cast<int>(rng.next_u64() % 2);
        FusionModel model;
        model.dimensions = make_dims(d);
        model.theta = Mat::Zero(1, d);
        model.sigma2 = 1.0;
        for (int k = 0; k < 3; ++k) {
            Mat f = Mat::NullaryExpr(d, d, [&](Eigen::Index, Eigen::Index) { return rng.normal(); });
            model.annotators["a" + std::to_string(k)] = {f, 0.01};
        }
        Vec a_star = Vec::NullaryExpr(d, [&](Eigen::Index) { return rng.normal(); });
        std::vector<AnnotationRecord> records;
        for (const auto& [id, params] : model.annotators) {
            AnnotationRecord rec{"s", id, params.transform * a_star};
            rec.ratings[0] = missing_rating();  // target observed nowhere
            records.push_back(rec);
        }
        PredictionConfig config;
        config.target_dim = "dim1";
        config.ridge = 1e-10;
        const auto rec_ptrs = ptrs(records);
        const auto pred = predict_instance(model, rec_ptrs, config);
        CHECK((pred.a_star - a_star).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("rescaling rows and ratings together leaves the solution unchanged") {
    StreamRng rng(67, "row_scale");
    FusionModel model;
    model.dimensions = make_dims(3);
    model.theta = Mat::Zero(1, 3);
    model.sigma2 = 1.0;
    Mat f = Mat::NullaryExpr(3, 3, [&](Eigen::Index, Eigen::Index) { return rng.normal(); });
    model.annotators["a"] = {f, 0.5};
    model.annotators["b"] = {2.0 * f, 0.5};
    Vec a_star = (Vec(3) << 0.4, -1.1, 2.0).finished();

    AnnotationRecord rec_a{"s", "a", f * a_star};
    AnnotationRecord rec_b{"s", "b", 2.0 * (f * a_star)};
    rec_a.ratings[2] = missing_rating();
    rec_b.ratings[2] = missing_rating();
    PredictionConfig config;
    config.target_dim = "dim3";
    config.ridge = 0.0;
    const AnnotationRecord* only_a[] = {&rec_a};
    const AnnotationRecord* only_b[] = {&rec_b};
    const auto pred_a = predict_instance(model, only_a, config);
    const auto pred_b = predict_instance(model, only_b, config);
    CHECK((pred_a.a_star - pred_b.a_star).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("observed target ratings never enter the design") {
    const auto model = two_dim_model((Mat(2, 2) << 1, 1, 0, 1).finished());
    AnnotationRecord with_target{"s", "a", (Vec(2) << 3.0, 9.9).finished()};
    AnnotationRecord without_target{"s", "a", (Vec(2) << 3.0, missing_rating()).finished()};
    PredictionConfig config;
    config.target_dim = "dim2";
    const AnnotationRecord* w[] = {&with_target};
    const AnnotationRecord* wo[] = {&without_target};
    const auto pred_w = predict_instance(model, w, config);
    const auto pred_wo = predict_instance(model, wo, config);
    CHECK(pred_w.target_value == pred_wo.target_value);
    CHECK(pred_w.equations_used == pred_wo.equations_used);
}

TEST_CASE("predict_instance error paths") {
    const auto model = two_dim_model(Mat::Identity(2, 2));
    PredictionConfig config;
    config.target_dim = "dim2";

    CHECK_THROWS_AS(predict_instance(model, {}, config), Error);

    PredictionConfig bad = config;
    bad.target_dim = "nope";
    AnnotationRecord rec{"s", "a", (Vec(2) << 1.0, 2.0).finished()};
    const AnnotationRecord* recs[] = {&rec};
    CHECK_THROWS_AS(predict_instance(model, recs, bad), UsageError);

    AnnotationRecord stranger{"s", "zz", (Vec(2) << 1.0, 2.0).finished()};
    const AnnotationRecord* srecs[] = {&stranger};
    CHECK_THROWS_AS(predict_instance(model, srecs, config), Error);

    // only the target dimension observed: no usable equations
    AnnotationRecord target_only{"s", "a", (Vec(2) << missing_rating(), 2.0).finished()};
    const AnnotationRecord* trecs[] = {&target_only};
    CHECK_THROWS_AS(predict_instance(model, trecs, config), Error);
}

TEST_CASE("predict_dataset reports unpredictable instances instead of skipping them") {
    Mat f(2, 2);
    f << 1, 1, 0, 1;
    auto model = two_dim_model(f);
    Dataset ds;
    ds.dimensions = model.dimensions;
    ds.instances.push_back({"s1", Vec()});
    ds.instances.push_back({"s2", Vec()});
    ds.annotations.push_back({"s1", "a", (Vec(2) << 3.0, missing_rating()).finished()});
    // s2 carries only target-dimension ratings
    ds.annotations.push_back({"s2", "a", (Vec(2) << missing_rating(), 1.0).finished()});

    PredictionConfig config;
    config.target_dim = "dim2";
    const auto report = predict_dataset(model, ds, config);
    REQUIRE(report.predictions.size() == 1);
    CHECK(report.predictions[0].instance_id == "s1");
    REQUIRE(report.failures.size() == 1);
    CHECK(report.failures[0].instance_id == "s2");
}

TEST_CASE("predict_dataset skips annotators missing from the model, with a warning") {
    auto model = two_dim_model((Mat(2, 2) << 1, 1, 0, 1).finished());
    Dataset ds;
    ds.dimensions = model.dimensions;
    ds.instances.push_back({"s1", Vec()});
    ds.annotations.push_back({"s1", "a", (Vec(2) << 3.0, missing_rating()).finished()});
    ds.annotations.push_back({"s1", "newcomer", (Vec(2) << 5.0, missing_rating()).finished()});

    PredictionConfig config;
    config.target_dim = "dim2";
    const auto report = predict_dataset(model, ds, config);
    CHECK(report.predictions.size() == 1);
    CHECK(report.skipped_annotators == std::vector<std::string>{"newcomer"});
    CHECK(report.predictions[0].equations_used == 1);
}

TEST_CASE("predict_dataset output is ordered by instance id and deterministic") {
    auto model = two_dim_model((Mat(2, 2) << 1, 1, 0, 1).finished());
    Dataset ds;
    ds.dimensions = model.dimensions;
    for (const char* id : {"s3", "s1", "s2"}) {
        ds.instances.push_back({id, Vec()});
        ds.annotations.push_back({id, "a", (Vec(2) << 1.0, missing_rating()).finished()});
    }
    PredictionConfig config;
    config.target_dim = "dim2";
    const auto r1 = predict_dataset(model, ds, config);
    const auto r2 = predict_dataset(model, ds, config);
    REQUIRE(r1.predictions.size() == 3);
    CHECK(r1.predictions[0].instance_id == "s1");
    CHECK(r1.predictions[2].instance_id == "s3");
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(r1.predictions[i].target_value == r2.predictions[i].target_value);
}

TEST_CASE("held-out dimension is recovered on synthetic data with coupled transforms") {
    SimSpec spec;
    spec.M = 100;
    spec.P = 6;
    spec.D = 3;
    spec.K = 21;
    spec.ratings_per_instance = 21;
    spec.sigma = 0.3;
    spec.tau_lo = spec.tau_hi = 0.1;
    spec.f_style = FStyle::coupled;
    spec.off_diag_mass = 0.4;
    spec.missing_pattern = MissingPattern::drop_dim;
    spec.drop_dim = 2;
    spec.seed = 11;
    auto [ds, truth] = generate(spec);

    PredictionConfig config;
    config.target_dim = "dim3";
    const auto report = predict_dataset(truth.model, ds, config);
    REQUIRE(report.predictions.size() == 100);

    Vec predicted(100), actual(100);
    for (Eigen::Index i = 0; i < 100; ++i) {
        predicted[i] = report.predictions[static_cast<std::size_t>(i)].target_value;
        const auto* inst =
            ds.find_instance(report.predictions[static_cast<std::size_t>(i)].instance_id);
        const auto it = std::find_if(ds.instances.begin(), ds.instances.end(),
                                     [&](const Instance& x) { return &x == inst; });
        actual[i] = truth.latents[static_cast<std::size_t>(it - ds.instances.begin())][2];
    }
    CHECK(pearson({predicted, actual}) > 0.9);
}
