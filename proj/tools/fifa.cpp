// fifa: batch pipeline driver. Stages read the previous stage's JSON
// artifacts from the output directory and write their own, so any stage can
// be re-run in isolation.

#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fifa/pipeline.hpp"

namespace {

struct CommonOpts {
    std::string config;
    std::string out = "out";
    std::string data;  // dataset manifest path
    int jobs = 0;      // 0 = take from config
    uint64_t seed = 0;
    bool seed_set = false;
    std::string backend;
};

fifa::PipelineConfig effective_config(const CommonOpts& opts) {
    fifa::PipelineConfig cfg;
    if (!opts.config.empty())
        cfg = fifa::PipelineConfig::from_json(
            nlohmann::json::parse(fifa::read_text_file(opts.config)));
    if (opts.jobs > 0) cfg.jobs = opts.jobs;
    if (opts.seed_set) cfg.seed = opts.seed;
    if (!opts.backend.empty())
        cfg.backend.mode = fifa::chat_mode_from_string(opts.backend);
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool needs_data = true) {
    cmd->add_option("--config", opts.config, "pipeline config JSON");
    cmd->add_option("--out", opts.out, "output directory");
    if (needs_data)
        cmd->add_option("--data", opts.data, "dataset manifest JSON")
            ->required();
    cmd->add_option("--jobs", opts.jobs, "worker threads");
    cmd->add_option("--seed", opts.seed, "run seed")
        ->each([&](const std::string&) { opts.seed_set = true; });
    cmd->add_option("--backend", opts.backend, "chat backend: live|mock|replay")
        ->check(CLI::IsMember({"live", "mock", "replay"}));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deepfake-explanation dataset pipeline"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string task, pred_path, gt_path;
    std::vector<std::string> stats_files;

    auto* derive = app.add_subcommand("derive-masks",
                                      "compute per-concept region masks");
    add_common(derive, opts);
    auto* extract = app.add_subcommand("extract-artifacts",
                                       "diff real/fake pairs into artifact masks");
    add_common(extract, opts);
    auto* select = app.add_subcommand("select-concepts",
                                      "rank and select artifact-existing concepts");
    add_common(select, opts);
    auto* annotate = app.add_subcommand("annotate",
                                        "generate explanations via the chat backend");
    add_common(annotate, opts);
    auto* augment = app.add_subcommand("augment-bage",
                                       "random-box augmentation for box-level tasks");
    add_common(augment, opts);
    auto* assemble = app.add_subcommand("assemble",
                                        "build the task corpus JSONL files");
    add_common(assemble, opts);
    auto* render = app.add_subcommand("render", "write inspection overlays");
    add_common(render, opts);

    auto* stats = app.add_subcommand("stats", "count samples per task/split");
    stats->add_option("files", stats_files, "corpus JSONL files")->required();

    auto* eval = app.add_subcommand("eval", "score predictions for one task");
    eval->add_option("--task", task, "task tag (DET, CLS, I_LOC, ...)")
        ->required();
    eval->add_option("--pred", pred_path, "predictions JSONL")->required();
    eval->add_option("--gt", gt_path, "ground-truth JSONL")->required();

    auto* selftest = app.add_subcommand("kernels-selftest",
                                        "run the model-math reference checks");

    CLI11_PARSE(app, argc, argv);

    try {
        if (stats->parsed()) {
            fifa::CorpusStats s = fifa::corpus_stats(stats_files);
            std::cout << fifa::render_stats_table(s);
            std::cout << fifa::stats_to_json(s).dump(2) << "\n";
            return 0;
        }
        if (eval->parsed()) {
            fifa::EvalReport report = fifa::evaluate_task(
                fifa::task_tag_from_string(task),
                fifa::load_jsonl_samples(pred_path),
                fifa::load_jsonl_samples(gt_path));
            std::cout << report.table;
            std::cout << report.metrics.dump(2) << "\n";
            return 0;
        }
        if (selftest->parsed()) {
            nlohmann::json result = fifa::kernels_selftest();
            std::cout << result.dump(2) << "\n";
            return result.at("ok").get<bool>() ? 0 : 1;
        }

        fifa::PipelineConfig cfg = effective_config(opts);
        fifa::Pipeline pipeline(cfg, opts.out);
        fifa::DatasetManifest data = fifa::DatasetManifest::load(opts.data);
        if (derive->parsed()) pipeline.derive_masks(data);
        if (extract->parsed()) pipeline.extract_artifacts(data);
        if (select->parsed()) pipeline.select_concepts(data);
        if (annotate->parsed()) pipeline.annotate(data);
        if (augment->parsed()) pipeline.augment_bage(data);
        if (assemble->parsed()) {
            fifa::AssembleResult result = pipeline.assemble(data);
            std::cout << fifa::render_stats_table(result.stats);
        }
        if (render->parsed()) pipeline.render(data);
        return 0;
    } catch (const fifa::Error& e) {
        nlohmann::json err = {{"error", e.code()}, {"message", e.what()}};
        std::cerr << err.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        nlohmann::json err = {{"error", "Unhandled"}, {"message", e.what()}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
}
