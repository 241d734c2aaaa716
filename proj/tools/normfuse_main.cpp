#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "normfuse/io.hpp"

using namespace normfuse;

int main(int argc, char** argv) {
    CLI::App app{"Multidimensional annotation fusion: train / predict / baseline / eval / simulate"};
    app.require_subcommand(1);

    TrainOptions train;
    auto* train_cmd = app.add_subcommand("train", "Fit the fusion model by EM");
    train_cmd->add_option("--annotations", train.annotations, "Annotation CSV")->required();
    train_cmd->add_option("--features", train.features_csv, "Precomputed feature CSV");
    train_cmd->add_option("--embeddings", train.embeddings, "Embedding text file");
    train_cmd->add_option("--text", train.text, "Sentence file (id<TAB>text)");
    train_cmd->add_option("--dims", train.dims, "Expected dimension names, comma-separated");
    train_cmd->add_option("--tol", train.tol, "Relative log-likelihood tolerance");
    train_cmd->add_option("--max-iters", train.max_iters, "Maximum EM iterations");
    train_cmd->add_option("--ridge", train.ridge, "Ridge added before inversions");
    train_cmd->add_option("--out", train.out, "Output model file")->required();

    PredictOptions predict;
    auto* predict_cmd = app.add_subcommand("predict", "Predict a held-out dimension");
    predict_cmd->add_option("--model", predict.model, "Model file")->required();
    predict_cmd->add_option("--annotations", predict.annotations, "Partial annotation CSV")
        ->required();
    predict_cmd->add_option("--target-dim", predict.target_dim, "Dimension to predict")
        ->required();
    predict_cmd->add_option("--ridge", predict.ridge, "Tikhonov regularization");
    predict_cmd->add_flag("--weight-by-noise", predict.weight_by_noise,
                          "Scale equations by 1/tau_k");
    predict_cmd->add_option("--out", predict.out, "Prediction CSV")->required();

    BaselineOptions baseline;
    auto* baseline_cmd = app.add_subcommand("baseline", "Word-aggregation baseline norms");
    baseline_cmd->add_option("--lexicon", baseline.lexicon, "Norm lexicon CSV")->required();
    baseline_cmd->add_option("--sentences", baseline.sentences, "Sentence file")->required();
    baseline_cmd->add_option("--stoplist", baseline.stoplist, "Stoplist file");
    baseline_cmd->add_option("--agg", baseline.agg, "Aggregator: mean|max|min|sum");
    baseline_cmd->add_option("--out", baseline.out, "Output CSV")->required();

    EvalOptions eval;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate predictions against references");
    eval_cmd->add_option("--pred", eval.pred, "Prediction CSV")->required();
    eval_cmd->add_option("--ref", eval.ref, "Reference CSV")->required();
    eval_cmd->add_option("--metrics", eval.metrics, "Comma-separated: ccc,pearson,mse");
    eval_cmd->add_option("--out", eval.out, "Machine-readable JSON report");

    SimulateOptions simulate;
    std::uint64_t seed_override = 0;
    auto* simulate_cmd = app.add_subcommand("simulate", "Generate a synthetic dataset");
    simulate_cmd->add_option("--spec", simulate.spec, "SimSpec JSON config")->required();
    auto* seed_opt = simulate_cmd->add_option("--seed", seed_override, "Seed override");
    simulate_cmd->add_option("--out-dir", simulate.out_dir, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_codes::usage;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(train, std::cout, std::cerr);
        if (predict_cmd->parsed()) return cmd_predict(predict, std::cout, std::cerr);
        if (baseline_cmd->parsed()) return cmd_baseline(baseline, std::cout, std::cerr);
        if (eval_cmd->parsed()) return cmd_eval(eval, std::cout, std::cerr);
        if (simulate_cmd->parsed()) {
            if (seed_opt->count() > 0) simulate.seed = seed_override;
            return cmd_simulate(simulate, std::cout, std::cerr);
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return exit_codes::usage;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return exit_codes::parse;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return exit_codes::numerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return exit_codes::usage;
}
