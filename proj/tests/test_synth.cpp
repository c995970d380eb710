#include <gtest/gtest.h>

#include <map>
#include <set>

#include "nie/synth.hpp"
#include "test_util.hpp"

using nie::Corpus;
using nie::Domain;
using nie::GeneratorConfig;
using nie::VisualDocument;

namespace {

std::vector<const VisualDocument*> all_docs(const Corpus& c) {
    std::vector<const VisualDocument*> out;
    for (const auto& d : c.train) out.push_back(&d);
    for (const auto& d : c.dev) out.push_back(&d);
    for (const auto& d : c.test) out.push_back(&d);
    return out;
}

GeneratorConfig config(Domain domain, std::size_t count, std::uint64_t seed, double split_rate = 0.25) {
    GeneratorConfig cfg;
    cfg.domain = domain;
    cfg.count = count;
    cfg.seed = seed;
    cfg.over_split_rate = split_rate;
    return cfg;
}

/// Structure modulo block id numbering: per-block text/bbox/token fonts in
/// order, plus gold spans expressed against block positions.
nlohmann::json normalized(const VisualDocument& doc) {
    return nlohmann::json::parse(nie::serialize_ocr_json(doc));
}

}  // namespace

TEST(Synth, CountBelowMinimumRejected) {
    GeneratorConfig cfg = config(Domain::Event, 5, 1);
    EXPECT_THROW(nie::generate(cfg), std::invalid_argument);
}

TEST(Synth, DeterministicAcrossRuns) {
    GeneratorConfig cfg = config(Domain::Event, 40, 7);
    Corpus a = nie::generate(cfg);
    Corpus b = nie::generate(cfg);
    auto da = all_docs(a), db = all_docs(b);
    ASSERT_EQ(da.size(), db.size());
    for (std::size_t i = 0; i < da.size(); ++i)
        EXPECT_EQ(nie::serialize_ocr_json(*da[i]), nie::serialize_ocr_json(*db[i]));
}

TEST(Synth, GoldSpansSatisfyInvariants) {
    for (Domain domain : {Domain::Event, Domain::Product}) {
        Corpus c = nie::generate(config(domain, 60, 11));
        nie::EntityClassSet classes =
            domain == Domain::Event ? nie::EntityClassSet::event() : nie::EntityClassSet::product();
        for (const auto* doc : all_docs(c)) {
            ASSERT_TRUE(doc->gold_spans.has_value());
            for (const auto& span : *doc->gold_spans) {
                EXPECT_TRUE(classes.has_class(span.cls));
                const nie::TextBlock* block = doc->block_by_id(span.block_id);
                ASSERT_NE(block, nullptr);
                EXPECT_GE(span.token_start, 0);
                EXPECT_LT(span.token_start, span.token_end);
                EXPECT_LE(span.token_end, static_cast<int>(block->tokens.size()));
            }
        }
    }
}

TEST(Synth, DocumentsPassDocumentModuleInvariants) {
    Corpus c = nie::generate(config(Domain::Product, 50, 3));
    for (const auto* doc : all_docs(c)) {
        // Serialization round trip through the ingester.
        std::string first = nie::serialize_ocr_json(*doc);
        VisualDocument re = nie::ingest_ocr_json(first);
        EXPECT_EQ(first, nie::serialize_ocr_json(re));

        for (std::size_t i = 0; i < doc->blocks.size(); ++i) {
            const auto& b = doc->blocks[i];
            EXPECT_EQ(b.order_index, static_cast<int>(i));
            EXPECT_GT(b.bbox.width, 0);
            EXPECT_GT(b.bbox.height, 0);
            EXPECT_GE(b.bbox.x, 0);
            EXPECT_GE(b.bbox.y, 0);
            EXPECT_LE(b.bbox.right(), doc->page_width);
            EXPECT_LE(b.bbox.bottom(), doc->page_height);
            EXPECT_FALSE(b.tokens.empty());
            for (const auto& t : b.tokens) EXPECT_GT(t.font_size, 0.0);
            if (i > 0) EXPECT_GE(b.bbox.y, doc->blocks[i - 1].bbox.y);
        }
    }
}

TEST(Synth, ClassSupportCoversMostDocuments) {
    for (Domain domain : {Domain::Event, Domain::Product}) {
        Corpus c = nie::generate(config(domain, 200, 13));
        auto docs = all_docs(c);
        nie::EntityClassSet classes =
            domain == Domain::Event ? nie::EntityClassSet::event() : nie::EntityClassSet::product();
        for (const auto& cls : classes.classes()) {
            std::size_t have = 0;
            for (const auto* doc : docs) {
                bool found = false;
                for (const auto& s : *doc->gold_spans)
                    if (s.cls == cls) found = true;
                if (found) ++have;
            }
            EXPECT_GE(static_cast<double>(have) / static_cast<double>(docs.size()), 0.8)
                << nie::to_string(domain) << " class " << cls;
        }
    }
}

TEST(Synth, TitlesAreLargeAndHigh) {
    Corpus c = nie::generate(config(Domain::Event, 150, 17));
    double rel_font_sum = 0.0, rel_y_sum = 0.0;
    std::size_t n = 0;
    for (const auto* doc : all_docs(c)) {
        double median = nie::median_token_font(*doc);
        for (const auto& s : *doc->gold_spans) {
            if (s.cls != "title") continue;
            const nie::TextBlock* b = doc->block_by_id(s.block_id);
            rel_font_sum += b->tokens[static_cast<std::size_t>(s.token_start)].font_size / median;
            rel_y_sum += static_cast<double>(b->bbox.y) / doc->page_height;
            ++n;
        }
    }
    ASSERT_GT(n, 0u);
    EXPECT_GT(rel_font_sum / n, 1.2);  // above-median font on average
    EXPECT_LT(rel_y_sum / n, 0.45);    // upper part of the page on average
}

TEST(Synth, SplitRateMatchesKnob) {
    // Counted against the rate-1.0 corpus: the split stream is isolated, so
    // the same blocks are eligible under every rate.
    const std::size_t count = 500;
    Corpus none = nie::generate(config(Domain::Event, count, 23, 0.0));
    Corpus some = nie::generate(config(Domain::Event, count, 23, 0.3));
    Corpus all = nie::generate(config(Domain::Event, count, 23, 1.0));
    auto blocks_of = [](const Corpus& c) {
        std::size_t n = 0;
        for (const auto& d : c.train) n += d.blocks.size();
        for (const auto& d : c.dev) n += d.blocks.size();
        for (const auto& d : c.test) n += d.blocks.size();
        return n;
    };
    const double base = static_cast<double>(blocks_of(none));
    const double splittable = static_cast<double>(blocks_of(all)) - base;
    ASSERT_GT(splittable, 100.0);
    const double measured = (static_cast<double>(blocks_of(some)) - base) / splittable;
    EXPECT_NEAR(measured, 0.3, 0.05);
}

TEST(Synth, MergeRejoinsExactlyTheOversplitBlocks) {
    const std::size_t count = 80;
    Corpus clean = nie::generate(config(Domain::Event, count, 29, 0.0));
    Corpus split = nie::generate(config(Domain::Event, count, 29, 0.4));
    auto dc = all_docs(clean), ds = all_docs(split);
    ASSERT_EQ(dc.size(), ds.size());
    std::size_t split_docs = 0;
    for (std::size_t i = 0; i < dc.size(); ++i) {
        if (ds[i]->blocks.size() != dc[i]->blocks.size()) ++split_docs;
        VisualDocument merged = nie::merge_blocks(*ds[i], 0.5);
        EXPECT_EQ(normalized(merged), normalized(*dc[i])) << dc[i]->doc_id;
        // And the clean documents are a merge fixed point.
        EXPECT_EQ(normalized(nie::merge_blocks(*dc[i], 0.5)), normalized(*dc[i]));
    }
    EXPECT_GT(split_docs, 10u);
}

TEST(Synth, SplitAssignmentIsStableAndRoughly70_15_15) {
    GeneratorConfig cfg = config(Domain::Product, 400, 31);
    Corpus c = nie::generate(cfg);
    const double total = static_cast<double>(cfg.count);
    EXPECT_NEAR(c.train.size() / total, 0.70, 0.08);
    EXPECT_NEAR(c.dev.size() / total, 0.15, 0.06);
    EXPECT_NEAR(c.test.size() / total, 0.15, 0.06);
    // Membership is a pure function of the doc id.
    for (const auto& d : c.train) EXPECT_STREQ(nie::split_of(d.doc_id), "train");
    for (const auto& d : c.dev) EXPECT_STREQ(nie::split_of(d.doc_id), "dev");
    for (const auto& d : c.test) EXPECT_STREQ(nie::split_of(d.doc_id), "test");
}

TEST(Synth, WriteAndLoadRoundTrip) {
    nie_test::TempDir dir("synth_io");
    GeneratorConfig cfg = config(Domain::Event, 30, 37);
    Corpus c = nie::generate(cfg);
    nie::write_corpus(c, cfg, dir.str());
    Corpus loaded = nie::load_corpus(dir.str());
    ASSERT_EQ(loaded.train.size(), c.train.size());
    ASSERT_EQ(loaded.dev.size(), c.dev.size());
    ASSERT_EQ(loaded.test.size(), c.test.size());
    for (std::size_t i = 0; i < c.train.size(); ++i)
        EXPECT_EQ(nie::serialize_ocr_json(loaded.train[i]), nie::serialize_ocr_json(c.train[i]));
}

TEST(Synth, NonDisjointSplitsRejectedOnLoad) {
    nie_test::TempDir dir("synth_dupe");
    GeneratorConfig cfg = config(Domain::Event, 20, 41);
    Corpus c = nie::generate(cfg);
    nie::write_corpus(c, cfg, dir.str());
    auto manifest = nlohmann::json::parse(nie_test::read_all(dir.str("manifest.json")));
    // Duplicate a train id into dev.
    manifest["splits"]["dev"].push_back(manifest["splits"]["train"][0]);
    std::ofstream out(dir.str("manifest.json"), std::ios::trunc);
    out << manifest.dump();
    out.close();
    EXPECT_THROW(nie::load_corpus(dir.str()), std::runtime_error);
}
