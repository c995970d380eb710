#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "nie/model.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using nie_test::run_cli;
using nie_test::TempDir;

namespace {

/// Shared tiny corpus + model so the CLI tests don't retrain repeatedly.
class CliFixture : public ::testing::Test {
protected:
    static TempDir* dir;
    static std::string corpus_dir;
    static std::string model_path;

    static void SetUpTestSuite() {
        dir = new TempDir("cli");
        corpus_dir = dir->str("corpus");
        model_path = dir->str("model.nie");
        auto synth = run_cli("synth --domain event --count 40 --seed 5 --out " + corpus_dir);
        ASSERT_EQ(synth.exit_code, 0) << synth.err;
        auto train = run_cli("train --corpus " + corpus_dir + " --out " + model_path +
                             " --preset micro --epochs 2 --lr 1e-3 --seed 3 --target-budget 24 "
                             "--neighbor-budget 48");
        ASSERT_EQ(train.exit_code, 0) << train.err;
    }

    static void TearDownTestSuite() {
        delete dir;
        dir = nullptr;
    }
};

TempDir* CliFixture::dir = nullptr;
std::string CliFixture::corpus_dir;
std::string CliFixture::model_path;

std::size_t count_json_files(const std::string& directory) {
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(directory))
        if (e.path().extension() == ".json") ++n;
    return n;
}

}  // namespace

TEST(CliSynth, WritesDocumentsAndManifest) {
    TempDir dir("synthcmd");
    auto r = run_cli("synth --domain event --count 25 --seed 7 --out " + dir.str("c"));
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_EQ(count_json_files(dir.str("c/docs")), 25u);
    EXPECT_TRUE(fs::exists(dir.str("c/manifest.json")));
    EXPECT_TRUE(fs::exists(dir.str("c/run_manifest.json")));

    auto manifest = nlohmann::json::parse(nie_test::read_all(dir.str("c/run_manifest.json")));
    EXPECT_EQ(manifest["command"], "synth");
    EXPECT_EQ(manifest["seed"], 7);
    EXPECT_EQ(manifest["artifact_hashes"].size(), 25u);
}

TEST(CliSynth, RerunProducesIdenticalHashes) {
    TempDir dir("synthdet");
    ASSERT_EQ(run_cli("synth --domain product --count 20 --seed 9 --out " + dir.str("a")).exit_code, 0);
    ASSERT_EQ(run_cli("synth --domain product --count 20 --seed 9 --out " + dir.str("b")).exit_code, 0);
    auto ma = nlohmann::json::parse(nie_test::read_all(dir.str("a/run_manifest.json")));
    auto mb = nlohmann::json::parse(nie_test::read_all(dir.str("b/run_manifest.json")));
    std::set<std::string> ha, hb;
    for (auto& [k, v] : ma["artifact_hashes"].items()) ha.insert(v.get<std::string>());
    for (auto& [k, v] : mb["artifact_hashes"].items()) hb.insert(v.get<std::string>());
    EXPECT_EQ(ha, hb);
}

TEST(CliSynth, CountBelowMinimumIsUsageError) {
    TempDir dir("synthmin");
    auto r = run_cli("synth --domain event --count 5 --seed 1 --out " + dir.str("c"));
    EXPECT_EQ(r.exit_code, 2);
}

TEST_F(CliFixture, TrainConflictingFlagsNameBothFlags) {
    auto r = run_cli("train --corpus " + corpus_dir + " --out /tmp/unused.nie --baseline no_context "
                     "--context bottom");
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_NE(r.err.find("--baseline"), std::string::npos);
    EXPECT_NE(r.err.find("--context"), std::string::npos);
}

TEST_F(CliFixture, TrainWritesModelLogAndManifest) {
    EXPECT_TRUE(fs::exists(model_path));
    EXPECT_TRUE(fs::exists(model_path + ".trainlog.jsonl"));
    EXPECT_TRUE(fs::exists(model_path + ".manifest.json"));

    std::ifstream log(model_path + ".trainlog.jsonl");
    std::string line;
    std::size_t lines = 0;
    while (std::getline(log, line)) {
        auto j = nlohmann::json::parse(line);
        EXPECT_TRUE(j.contains("epoch"));
        EXPECT_TRUE(j.contains("train_loss"));
        EXPECT_TRUE(j.contains("dev_micro_f1"));
        ++lines;
    }
    EXPECT_EQ(lines, 2u);

    nie::ModelBundle m = nie::load_model(model_path);
    EXPECT_EQ(m.seed, 3u);
    EXPECT_EQ(m.pipe.neighborhood.mode, nie::ContextMode::Bottom);
    EXPECT_EQ(m.pipe.neighborhood.n, 4u);
}

TEST_F(CliFixture, TrainRerunIsByteIdentical) {
    std::string again = dir->str("model_again.nie");
    auto r = run_cli("train --corpus " + corpus_dir + " --out " + again +
                     " --preset micro --epochs 2 --lr 1e-3 --seed 3 --target-budget 24 "
                     "--neighbor-budget 48");
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_EQ(nie_test::read_all(model_path), nie_test::read_all(again));
}

TEST_F(CliFixture, EvalPrintsMetricColumnsAndWritesReport) {
    std::string report = dir->str("report.json");
    auto r = run_cli("eval --model " + model_path + " --corpus " + corpus_dir + " --split dev --out " +
                     report);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    std::size_t f1 = r.out.find("F1"), prec = r.out.find("Prec"), rec = r.out.find("Rec");
    ASSERT_NE(f1, std::string::npos);
    ASSERT_NE(prec, std::string::npos);
    ASSERT_NE(rec, std::string::npos);
    EXPECT_LT(f1, prec);
    EXPECT_LT(prec, rec);

    auto j = nlohmann::json::parse(nie_test::read_all(report));
    for (const char* key : {"micro_precision", "micro_recall", "micro_f1", "macro_f1", "per_class"})
        EXPECT_TRUE(j.contains(key)) << key;
    EXPECT_TRUE(fs::exists(report + ".manifest.json"));
}

TEST(CliEval, MissingModelFileIsExitCode2) {
    auto r = run_cli("eval --model /nonexistent/model.nie --corpus /tmp --split test");
    EXPECT_EQ(r.exit_code, 2);
}

TEST_F(CliFixture, InferSingleDocument) {
    // Use one of the corpus documents as input.
    std::string input;
    for (const auto& e : fs::directory_iterator(corpus_dir + "/docs")) {
        input = e.path().string();
        break;
    }
    ASSERT_FALSE(input.empty());
    std::string out = dir->str("pred.json");
    auto r = run_cli("infer --model " + model_path + " --in " + input + " --out " + out);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    auto j = nlohmann::json::parse(nie_test::read_all(out));
    EXPECT_TRUE(j.contains("doc_id"));
    EXPECT_TRUE(j.contains("spans"));
    for (const auto& s : j["spans"])
        for (const char* key : {"class", "block", "start", "end", "text"}) EXPECT_TRUE(s.contains(key));
}

TEST_F(CliFixture, InferDirectoryOneToOneWithCorruptFileReported) {
    TempDir in_dir("infer_in");
    std::size_t copied = 0;
    for (const auto& e : fs::directory_iterator(corpus_dir + "/docs")) {
        if (copied >= 4) break;
        fs::copy_file(e.path(), fs::path(in_dir.str()) / e.path().filename());
        ++copied;
    }
    {
        std::ofstream bad(fs::path(in_dir.str()) / "corrupt.json");
        bad << "{ not json";
    }
    std::string out_dir = in_dir.str("out");
    auto r = run_cli("infer --model " + model_path + " --in " + in_dir.str() + " --out " + out_dir);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_EQ(count_json_files(out_dir), copied + 1);  // predictions + run_manifest.json

    auto manifest = nlohmann::json::parse(nie_test::read_all(out_dir + "/run_manifest.json"));
    ASSERT_EQ(manifest["errors"].size(), 1u);
    std::string failed = manifest["errors"][0]["input"].get<std::string>();
    EXPECT_NE(failed.find("corrupt.json"), std::string::npos);
    EXPECT_EQ(manifest["outputs"].size(), copied);
}

TEST_F(CliFixture, QuantizeShrinksAndSecondPassIsIdentical) {
    std::string q1 = dir->str("model.qnie");
    std::string q2 = dir->str("model2.qnie");
    auto r1 = run_cli("quantize --model " + model_path + " --out " + q1);
    ASSERT_EQ(r1.exit_code, 0) << r1.err;
    EXPECT_LE(static_cast<double>(fs::file_size(q1)), 0.35 * static_cast<double>(fs::file_size(model_path)));

    // Quantizing the quantized model reproduces it byte for byte.
    auto r2 = run_cli("quantize --model " + q1 + " --out " + q2);
    ASSERT_EQ(r2.exit_code, 0) << r2.err;
    EXPECT_EQ(nie_test::read_all(q1), nie_test::read_all(q2));
}

TEST_F(CliFixture, QuantizeWithQatPass) {
    std::string out = dir->str("model_qat.qnie");
    auto r = run_cli("quantize --model " + model_path + " --out " + out + " --qat --corpus " +
                     corpus_dir + " --qat-batch 16 --qat-lr 1e-4");
    ASSERT_EQ(r.exit_code, 0) << r.err;
    nie::ModelBundle q = nie::load_model(out);
    EXPECT_EQ(q.container_version, 2u);
    auto manifest = nlohmann::json::parse(nie_test::read_all(out + ".manifest.json"));
    EXPECT_EQ(manifest["resolved_config"]["qat"], true);
}

TEST_F(CliFixture, QuantizedModelIsBenchable) {
    std::string qpath = dir->str("bench_target.qnie");
    ASSERT_EQ(run_cli("quantize --model " + model_path + " --out " + qpath).exit_code, 0);
    std::string report = dir->str("bench_q.json");
    auto r = run_cli("bench --model " + qpath + " --corpus " + corpus_dir +
                     " --docs 2 --reps 1 --out " + report);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    auto j = nlohmann::json::parse(nie_test::read_all(report));
    EXPECT_EQ(j["quantized"], true);
}

TEST_F(CliFixture, QuantizeQatRequiresCorpus) {
    auto r = run_cli("quantize --model " + model_path + " --out /tmp/q.nie --qat");
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_NE(r.err.find("--corpus"), std::string::npos);
}

TEST(CliQuantize, NonModelInputIsLoadError) {
    TempDir dir("qbad");
    std::ofstream junk(dir.str("junk.bin"));
    junk << "garbage";
    junk.close();
    auto r = run_cli("quantize --model " + dir.str("junk.bin") + " --out " + dir.str("q.nie"));
    EXPECT_EQ(r.exit_code, 1);
}

TEST_F(CliFixture, BenchReportsPerDocLatency) {
    std::string report = dir->str("bench.json");
    auto r = run_cli("bench --model " + model_path + " --corpus " + corpus_dir +
                     " --docs 3 --reps 2 --out " + report);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_NE(r.out.find("mean_ms"), std::string::npos);
    auto j = nlohmann::json::parse(nie_test::read_all(report));
    EXPECT_EQ(j["docs"].size(), 3u);
    for (const auto& d : j["docs"])
        for (const char* key : {"doc_id", "mean_ms", "min_ms", "max_ms"}) EXPECT_TRUE(d.contains(key));
    EXPECT_TRUE(j.contains("average_ms"));
}

TEST_F(CliFixture, BenchOnEmptyCorpusIsUsageError) {
    TempDir empty("bench_empty");
    nlohmann::json manifest;
    manifest["splits"] = {{"train", nlohmann::json::array()},
                          {"dev", nlohmann::json::array()},
                          {"test", nlohmann::json::array()}};
    manifest["files"] = nlohmann::json::object();
    std::ofstream out(empty.str("manifest.json"));
    out << manifest.dump();
    out.close();
    auto r = run_cli("bench --model " + model_path + " --corpus " + empty.str());
    EXPECT_EQ(r.exit_code, 2);
}

TEST(CliGeneral, UnknownSubcommandIsUsageError) {
    EXPECT_EQ(run_cli("frobnicate").exit_code, 2);
    EXPECT_EQ(run_cli("").exit_code, 2);
}

TEST_F(CliFixture, ConfigFileProvidesDefaultsAndFlagsWin) {
    std::string cfg_path = dir->str("train.ini");
    {
        std::ofstream cfg(cfg_path);
        cfg << "[train]\n"
            << "corpus=" << corpus_dir << "\n"
            << "preset=micro\n"
            << "epochs=1\n"
            << "lr=1e-3\n"
            << "seed=21\n"
            << "target-budget=16\n"
            << "neighbor-budget=32\n"
            << "context=top\n";
    }
    std::string out = dir->str("cfgmodel.nie");
    // --context bottom on the command line overrides context=top in the file.
    auto r = run_cli("--config " + cfg_path + " train --out " + out + " --context bottom");
    ASSERT_EQ(r.exit_code, 0) << r.err;
    nie::ModelBundle m = nie::load_model(out);
    EXPECT_EQ(m.pipe.neighborhood.mode, nie::ContextMode::Bottom);
    EXPECT_EQ(m.seed, 21u);
}
