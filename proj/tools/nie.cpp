// Command-line entry point wiring the pipeline together: synth, train,
// eval, infer, quantize, bench. Exit codes: 0 success, 1 runtime failure,
// 2 usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nie/eval.hpp"
#include "nie/log.hpp"
#include "nie/manifest.hpp"
#include "nie/model.hpp"
#include "nie/pipeline.hpp"
#include "nie/quantize.hpp"
#include "nie/rng.hpp"
#include "nie/synth.hpp"
#include "nie/train.hpp"

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void ensure_parent_dir(const std::string& path) {
    fs::path p(path);
    if (p.has_parent_path() && !p.parent_path().empty()) fs::create_directories(p.parent_path());
}

std::string join_span_text(const nie::VisualDocument& doc, const nie::EntitySpan& span) {
    const nie::TextBlock* block = doc.block_by_id(span.block_id);
    if (block == nullptr) return "";
    std::string out;
    for (int t = span.token_start; t < span.token_end && t < static_cast<int>(block->tokens.size()); ++t) {
        if (!out.empty()) out += " ";
        out += block->tokens[static_cast<std::size_t>(t)].text;
    }
    return out;
}

nlohmann::json spans_to_json(const nie::VisualDocument& prepared, const std::vector<nie::EntitySpan>& spans) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& s : spans) {
        out.push_back({{"class", s.cls},
                       {"block", s.block_id},
                       {"start", s.token_start},
                       {"end", s.token_end},
                       {"text", join_span_text(prepared, s)}});
    }
    return out;
}

// ---- synth ------------------------------------------------------------------

struct SynthArgs {
    std::string domain = "event";
    std::size_t count = 100;
    std::uint64_t seed = 1;
    std::string out;
    double distractor_rate = 0.5;
    double over_split_rate = 0.25;
    double font_jitter = 0.1;
};

int cmd_synth(const SynthArgs& a) {
    nie::WallTimer timer;
    nie::GeneratorConfig cfg;
    cfg.domain = nie::domain_from_string(a.domain);
    cfg.count = a.count;
    cfg.seed = a.seed;
    cfg.distractor_rate = a.distractor_rate;
    cfg.over_split_rate = a.over_split_rate;
    cfg.font_jitter = a.font_jitter;
    cfg.validate();

    nie::Corpus corpus = nie::generate(cfg);
    nie::write_corpus(corpus, cfg, a.out);

    nie::RunManifest manifest;
    manifest.command = "synth";
    manifest.seed = cfg.seed;
    manifest.resolved_config = {{"domain", a.domain},
                                {"count", cfg.count},
                                {"seed", cfg.seed},
                                {"distractor_rate", cfg.distractor_rate},
                                {"over_split_rate", cfg.over_split_rate},
                                {"font_jitter", cfg.font_jitter}};
    manifest.outputs = {a.out};
    auto record = [&manifest, &a](const std::vector<nie::VisualDocument>& docs) {
        for (const auto& d : docs)
            manifest.hash_artifact((fs::path(a.out) / "docs" / (d.doc_id + ".json")).string());
    };
    record(corpus.train);
    record(corpus.dev);
    record(corpus.test);
    manifest.wall_ms = timer.elapsed_ms();
    manifest.write((fs::path(a.out) / "run_manifest.json").string());

    std::printf("wrote %zu documents (%zu train / %zu dev / %zu test) to %s\n",
                corpus.train.size() + corpus.dev.size() + corpus.test.size(), corpus.train.size(),
                corpus.dev.size(), corpus.test.size(), a.out.c_str());
    return 0;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
    std::string corpus;
    std::string out;
    std::string preset = "tiny";
    std::string context = "bottom";
    std::size_t n = 4;
    std::string features = "on";
    std::string baseline = "nie";
    std::size_t epochs = 8;
    std::size_t batch = 16;
    double lr = 3e-4;
    std::uint64_t seed = 42;
    double alpha = 0.5;
    std::size_t d1 = 0, layers = 0, heads = 0, d3 = 0, max_len = 0;
    std::size_t target_budget = 64, neighbor_budget = 127;
    bool context_given = false;
};

nie::EncoderConfig resolve_encoder_config(const TrainArgs& a) {
    nie::EncoderConfig cfg = nie::EncoderConfig::preset(a.preset);
    if (a.d1) cfg.d1 = a.d1;
    if (a.layers) cfg.layers = a.layers;
    if (a.heads) cfg.heads = a.heads;
    if (a.d3) cfg.d3 = a.d3;
    if (a.max_len) cfg.max_len = a.max_len;
    return cfg;
}

int cmd_train(const TrainArgs& a) {
    nie::WallTimer timer;
    nie::Baseline baseline = nie::baseline_from_string(a.baseline);
    if (baseline == nie::Baseline::NoContext && a.context_given && a.context != "none")
        throw UsageError("--baseline no_context conflicts with --context " + a.context +
                         "; drop one of the flags");
    if (baseline == nie::Baseline::GlobalContext && a.context_given)
        throw UsageError("--baseline global_context conflicts with --context; the global arm ignores "
                         "neighborhood windows");

    nie::TrainConfig cfg;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch;
    cfg.learning_rate = a.lr;
    cfg.seed = a.seed;
    cfg.baseline = baseline;
    cfg.use_visual_features = a.features == "on";
    cfg.merge_alpha = a.alpha;
    cfg.target_budget = a.target_budget;
    cfg.neighbor_budget = a.neighbor_budget;
    cfg.neighborhood = baseline == nie::Baseline::Nie
                           ? nie::NeighborhoodSpec(nie::context_mode_from_string(a.context), a.n)
                           : nie::NeighborhoodSpec(nie::ContextMode::None, 0);

    nie::EncoderConfig enc_cfg = resolve_encoder_config(a);
    nie::Corpus corpus = nie::load_corpus(a.corpus);

    nie::TrainResult result = nie::train(corpus, enc_cfg, cfg);

    ensure_parent_dir(a.out);
    nie::save_model(result.model, a.out);

    const std::string log_path = a.out + ".trainlog.jsonl";
    {
        std::ofstream log(log_path, std::ios::trunc);
        for (const auto& rec : result.log) {
            nlohmann::json j = {{"epoch", rec.epoch},
                                {"train_loss", rec.train_loss},
                                {"dev_micro_f1", rec.dev_micro_f1}};
            log << j.dump() << "\n";
        }
    }

    nie::RunManifest manifest;
    manifest.command = "train";
    manifest.seed = cfg.seed;
    manifest.resolved_config = {{"corpus", a.corpus},
                                {"preset", a.preset},
                                {"context", nie::to_string(result.model.pipe.neighborhood.mode)},
                                {"n", result.model.pipe.neighborhood.n},
                                {"features", result.model.pipe.use_visual_features ? "on" : "off"},
                                {"baseline", nie::to_string(result.model.pipe.baseline)},
                                {"epochs", cfg.epochs},
                                {"batch", cfg.batch_size},
                                {"lr", cfg.learning_rate},
                                {"alpha", cfg.merge_alpha},
                                {"d1", result.model.enc_cfg.d1},
                                {"layers", result.model.enc_cfg.layers},
                                {"heads", result.model.enc_cfg.heads},
                                {"d3", result.model.enc_cfg.d3},
                                {"max_len", result.model.enc_cfg.max_len},
                                {"best_epoch", result.best_epoch}};
    manifest.inputs = {a.corpus};
    manifest.outputs = {a.out, log_path};
    manifest.hash_artifact(a.out);
    manifest.hash_artifact(log_path);
    manifest.wall_ms = timer.elapsed_ms();
    manifest.write(a.out + ".manifest.json");

    std::printf("model written to %s (best epoch %zu, dev micro-F1 %.4f)\n", a.out.c_str(),
                result.best_epoch,
                result.log.empty() ? 0.0 : result.log[result.best_epoch - 1].dev_micro_f1);
    return 0;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
    std::string model;
    std::string corpus;
    std::string split = "test";
    std::string out = "eval_report.json";
};

int cmd_eval(const EvalArgs& a) {
    nie::WallTimer timer;
    nie::ModelBundle model = nie::load_model(a.model);
    nie::Corpus corpus = nie::load_corpus(a.corpus);

    const std::vector<nie::VisualDocument>* docs = nullptr;
    if (a.split == "test") docs = &corpus.test;
    else if (a.split == "dev") docs = &corpus.dev;
    else if (a.split == "train") docs = &corpus.train;
    else throw UsageError("--split must be one of train, dev, test");

    std::vector<std::vector<nie::EntitySpan>> gold, pred;
    for (const auto& raw : *docs) {
        nie::VisualDocument prepared = nie::prepare_document(model, raw);
        gold.push_back(prepared.gold_spans.value_or(std::vector<nie::EntitySpan>{}));
        pred.push_back(nie::predict_prepared(model, prepared));
    }
    nie::EvalReport report = nie::score(gold, pred, model.classes);

    std::fputs(report.format_table().c_str(), stdout);

    ensure_parent_dir(a.out);
    {
        std::ofstream out(a.out, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write report: " + a.out);
        out << report.to_json().dump(2) << "\n";
    }

    nie::RunManifest manifest;
    manifest.command = "eval";
    manifest.seed = model.seed;
    manifest.resolved_config = {{"model", a.model}, {"corpus", a.corpus}, {"split", a.split}};
    manifest.inputs = {a.model, a.corpus};
    manifest.outputs = {a.out};
    manifest.hash_artifact(a.out);
    manifest.wall_ms = timer.elapsed_ms();
    manifest.write(a.out + ".manifest.json");
    return 0;
}

// ---- infer ------------------------------------------------------------------

struct InferArgs {
    std::string model;
    std::string in;
    std::string out;
};

int cmd_infer(const InferArgs& a) {
    nie::WallTimer timer;
    nie::ModelBundle model = nie::load_model(a.model);

    std::vector<std::pair<std::string, std::string>> jobs;  // input path -> output path
    if (fs::is_directory(a.in)) {
        std::vector<std::string> names;
        for (const auto& entry : fs::directory_iterator(a.in))
            if (entry.is_regular_file() && entry.path().extension() == ".json")
                names.push_back(entry.path().filename().string());
        std::sort(names.begin(), names.end());
        fs::create_directories(a.out);
        for (const auto& name : names)
            jobs.emplace_back((fs::path(a.in) / name).string(), (fs::path(a.out) / name).string());
    } else {
        ensure_parent_dir(a.out);
        jobs.emplace_back(a.in, a.out);
    }
    if (jobs.empty()) throw UsageError("no .json documents found in " + a.in);

    nie::RunManifest manifest;
    manifest.command = "infer";
    manifest.seed = model.seed;
    manifest.resolved_config = {{"model", a.model}, {"in", a.in}, {"out", a.out}};
    manifest.inputs = {a.model, a.in};

    std::size_t ok = 0;
    for (const auto& [in_path, out_path] : jobs) {
        try {
            nie::VisualDocument doc = nie::ingest_ocr_json(nie::modelio::read_file(in_path));
            nie::VisualDocument prepared = nie::prepare_document(model, doc);
            std::vector<nie::EntitySpan> spans = nie::predict_prepared(model, prepared);
            nlohmann::json j = {{"doc_id", prepared.doc_id}, {"spans", spans_to_json(prepared, spans)}};
            std::ofstream out(out_path, std::ios::trunc);
            if (!out) throw std::runtime_error("cannot write " + out_path);
            out << j.dump(2) << "\n";
            manifest.outputs.push_back(out_path);
            manifest.hash_artifact(out_path);
            ++ok;
        } catch (const std::exception& e) {
            nie::log_warn("infer: skipping " + in_path + ": " + e.what());
            manifest.errors.push_back({{"input", in_path}, {"message", e.what()}});
        }
    }
    manifest.wall_ms = timer.elapsed_ms();
    const std::string manifest_path = fs::is_directory(a.out)
                                          ? (fs::path(a.out) / "run_manifest.json").string()
                                          : a.out + ".manifest.json";
    manifest.write(manifest_path);

    std::printf("processed %zu/%zu documents (%zu failed)\n", ok, jobs.size(), jobs.size() - ok);
    return ok == 0 ? 1 : 0;
}

// ---- quantize ---------------------------------------------------------------

struct QuantizeArgs {
    std::string model;
    std::string out;
    bool qat = false;
    std::string corpus;
    std::size_t qat_batch = 16;
    double qat_lr = 1e-4;
};

int cmd_quantize(const QuantizeArgs& a) {
    nie::WallTimer timer;
    if (a.qat && a.corpus.empty()) throw UsageError("--qat requires --corpus for the fine-tuning pass");

    nie::ModelBundle model = nie::load_model(a.model);
    if (a.qat) {
        nie::Corpus corpus = nie::load_corpus(a.corpus);
        nie::qat_finetune(model, corpus.train, a.qat_batch, a.qat_lr);
    }

    ensure_parent_dir(a.out);
    nie::save_model_quantized(model, a.out);

    const auto original_size = fs::file_size(a.model);
    const auto quantized_size = fs::file_size(a.out);

    nie::RunManifest manifest;
    manifest.command = "quantize";
    manifest.seed = model.seed;
    manifest.resolved_config = {{"model", a.model},
                                {"qat", a.qat},
                                {"scheme", "per-tensor symmetric int8, power-of-two scale"},
                                {"original_bytes", original_size},
                                {"quantized_bytes", quantized_size}};
    manifest.inputs = {a.model};
    manifest.outputs = {a.out};
    manifest.hash_artifact(a.out);
    manifest.wall_ms = timer.elapsed_ms();
    manifest.write(a.out + ".manifest.json");

    std::printf("quantized %s (%zu bytes) -> %s (%zu bytes, ratio %.3f)\n", a.model.c_str(),
                static_cast<std::size_t>(original_size), a.out.c_str(),
                static_cast<std::size_t>(quantized_size),
                static_cast<double>(quantized_size) / static_cast<double>(original_size));
    return 0;
}

// ---- bench ------------------------------------------------------------------

struct BenchArgs {
    std::string model;
    std::string corpus;
    std::size_t docs = 5;
    std::size_t reps = 3;
    std::uint64_t seed = 7;
    std::string out = "bench_report.json";
};

int cmd_bench(const BenchArgs& a) {
    nie::WallTimer timer;
    if (a.docs == 0 || a.reps == 0) throw UsageError("--docs and --reps must be positive");
    nie::ModelBundle model = nie::load_model(a.model);
    nie::Corpus corpus = nie::load_corpus(a.corpus);

    std::vector<const nie::VisualDocument*> pool;
    for (const auto& d : corpus.train) pool.push_back(&d);
    for (const auto& d : corpus.dev) pool.push_back(&d);
    for (const auto& d : corpus.test) pool.push_back(&d);
    if (pool.empty()) throw UsageError("corpus has no documents to benchmark");

    nie::DetRng rng(a.seed);
    rng.shuffle(pool);
    std::vector<const nie::VisualDocument*> sample(pool.begin(),
                                                   pool.begin() + static_cast<long>(std::min(a.docs, pool.size())));

    nlohmann::json per_doc = nlohmann::json::array();
    double total_mean = 0.0;
    std::printf("%-24s %10s %10s %10s\n", "doc", "mean_ms", "min_ms", "max_ms");
    for (const auto* doc : sample) {
        double min_ms = 1e300, max_ms = 0.0, sum_ms = 0.0;
        for (std::size_t r = 0; r < a.reps; ++r) {
            nie::WallTimer t;
            auto spans = nie::predict_document(model, *doc);
            double ms = t.elapsed_ms();
            (void)spans;
            min_ms = std::min(min_ms, ms);
            max_ms = std::max(max_ms, ms);
            sum_ms += ms;
        }
        double mean_ms = sum_ms / static_cast<double>(a.reps);
        total_mean += mean_ms;
        std::printf("%-24s %10.2f %10.2f %10.2f\n", doc->doc_id.c_str(), mean_ms, min_ms, max_ms);
        per_doc.push_back({{"doc_id", doc->doc_id}, {"mean_ms", mean_ms}, {"min_ms", min_ms},
                           {"max_ms", max_ms}, {"reps", a.reps}});
    }
    double overall = total_mean / static_cast<double>(sample.size());
    std::printf("average over %zu documents: %.2f ms\n", sample.size(), overall);

    ensure_parent_dir(a.out);
    {
        nlohmann::json j = {{"model", a.model},
                            {"quantized", model.container_version == nie::modelio::kVersionQuantized},
                            {"docs", per_doc},
                            {"average_ms", overall}};
        std::ofstream out(a.out, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write report: " + a.out);
        out << j.dump(2) << "\n";
    }

    nie::RunManifest manifest;
    manifest.command = "bench";
    manifest.seed = a.seed;
    manifest.resolved_config = {{"model", a.model}, {"corpus", a.corpus}, {"docs", a.docs},
                                {"reps", a.reps}};
    manifest.inputs = {a.model, a.corpus};
    manifest.outputs = {a.out};
    manifest.wall_ms = timer.elapsed_ms();
    manifest.write(a.out + ".manifest.json");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neighborhood-based information extraction over OCR block output"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from an INI/TOML config file; flags win");

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "Generate an annotated synthetic corpus");
    synth->add_option("--domain", synth_args.domain, "Document domain")
        ->check(CLI::IsMember({"event", "product"}));
    synth->add_option("--count", synth_args.count, "Number of documents (minimum 10)")
        ->check(CLI::Range(std::size_t{10}, std::size_t{1000000}).description("minimum 10"));
    synth->add_option("--seed", synth_args.seed, "Generator seed");
    synth->add_option("--out", synth_args.out, "Output corpus directory")->required();
    synth->add_option("--distractor-rate", synth_args.distractor_rate, "Distractor block rate")
        ->check(CLI::Range(0.0, 1.0));
    synth->add_option("--split-rate", synth_args.over_split_rate, "OCR over-splitting rate")
        ->check(CLI::Range(0.0, 1.0));
    synth->add_option("--font-jitter", synth_args.font_jitter, "Per-token font size jitter")
        ->check(CLI::Range(0.0, 0.5));

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Train a tagging model on a corpus");
    train->add_option("--corpus", train_args.corpus, "Corpus directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    train->add_option("--out", train_args.out, "Output model file")->required();
    train->add_option("--preset", train_args.preset, "Encoder size preset")
        ->check(CLI::IsMember({"micro", "tiny", "small"}));
    auto* context_opt = train->add_option("--context", train_args.context, "Neighborhood mode")
                            ->check(CLI::IsMember({"none", "top", "bottom", "overlap"}));
    train->add_option("--n", train_args.n, "Neighborhood window size");
    train->add_option("--features", train_args.features, "Visual features on/off")
        ->check(CLI::IsMember({"on", "off"}));
    train->add_option("--baseline", train_args.baseline, "Experiment arm")
        ->check(CLI::IsMember({"nie", "no_context", "global_context"}));
    train->add_option("--epochs", train_args.epochs, "Training epochs")->check(CLI::Range(1, 1000));
    train->add_option("--batch", train_args.batch, "Batch size in blocks")
        ->check(CLI::Range(std::size_t{1}, std::size_t{100000}));
    train->add_option("--lr", train_args.lr, "Learning rate")->check(CLI::PositiveNumber);
    train->add_option("--seed", train_args.seed, "Training seed");
    train->add_option("--alpha", train_args.alpha, "Block merge threshold ratio");
    train->add_option("--d1", train_args.d1, "Override hidden width");
    train->add_option("--layers", train_args.layers, "Override layer count");
    train->add_option("--heads", train_args.heads, "Override head count");
    train->add_option("--d3", train_args.d3, "Override visual feature dimension");
    train->add_option("--max-len", train_args.max_len, "Override encoder context budget");
    train->add_option("--target-budget", train_args.target_budget, "Target block token budget");
    train->add_option("--neighbor-budget", train_args.neighbor_budget, "Neighborhood token budget");

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "Score a model on a corpus split");
    eval->add_option("--model", eval_args.model, "Model file")->required()->check(CLI::ExistingFile);
    eval->add_option("--corpus", eval_args.corpus, "Corpus directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    eval->add_option("--split", eval_args.split, "Corpus split")
        ->check(CLI::IsMember({"train", "dev", "test"}));
    eval->add_option("--out", eval_args.out, "Report JSON path");

    InferArgs infer_args;
    auto* infer = app.add_subcommand("infer", "Predict entity spans for OCR-JSON input");
    infer->add_option("--model", infer_args.model, "Model file")->required()->check(CLI::ExistingFile);
    infer->add_option("--in", infer_args.in, "Input OCR-JSON file or directory")
        ->required()
        ->check(CLI::ExistingPath);
    infer->add_option("--out", infer_args.out, "Output file or directory")->required();

    QuantizeArgs quant_args;
    auto* quantize = app.add_subcommand("quantize", "Write an 8-bit quantized model");
    quantize->add_option("--model", quant_args.model, "Model file")->required()->check(CLI::ExistingFile);
    quantize->add_option("--out", quant_args.out, "Output quantized model file")->required();
    quantize->add_flag("--qat", quant_args.qat, "Run one quantization-aware fine-tuning epoch first");
    quantize->add_option("--corpus", quant_args.corpus, "Corpus for --qat")->check(CLI::ExistingDirectory);
    quantize->add_option("--qat-batch", quant_args.qat_batch, "QAT batch size");
    quantize->add_option("--qat-lr", quant_args.qat_lr, "QAT learning rate");

    BenchArgs bench_args;
    auto* bench = app.add_subcommand("bench", "Measure inference latency");
    bench->add_option("--model", bench_args.model, "Model file")->required()->check(CLI::ExistingFile);
    bench->add_option("--corpus", bench_args.corpus, "Corpus directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    bench->add_option("--docs", bench_args.docs, "Number of sampled documents");
    bench->add_option("--reps", bench_args.reps, "Repetitions per document");
    bench->add_option("--seed", bench_args.seed, "Sampling seed");
    bench->add_option("--out", bench_args.out, "Report JSON path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    train_args.context_given = context_opt->count() > 0;

    try {
        if (synth->parsed()) return cmd_synth(synth_args);
        if (train->parsed()) return cmd_train(train_args);
        if (eval->parsed()) return cmd_eval(eval_args);
        if (infer->parsed()) return cmd_infer(infer_args);
        if (quantize->parsed()) return cmd_quantize(quant_args);
        if (bench->parsed()) return cmd_bench(bench_args);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
