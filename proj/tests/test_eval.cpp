#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <functional>
#include <map>

#include "nie/eval.hpp"
#include "nie/rng.hpp"

using nie::EntityClassSet;
using nie::EntitySpan;
using nie::EvalReport;

namespace {

using Docs = std::vector<std::vector<EntitySpan>>;

/// Brute-force one-to-one matcher: tries every injective assignment of
/// predictions to gold spans (match requires identical class/block/range)
/// and returns the maximum number of matches.
std::size_t brute_force_matches(const std::vector<EntitySpan>& gold, const std::vector<EntitySpan>& pred) {
    std::vector<bool> used(gold.size(), false);
    std::function<std::size_t(std::size_t)> rec = [&](std::size_t pi) -> std::size_t {
        if (pi == pred.size()) return 0;
        std::size_t best = rec(pi + 1);  // leave pred[pi] unmatched
        for (std::size_t gi = 0; gi < gold.size(); ++gi) {
            if (used[gi]) continue;
            if (gold[gi] == pred[pi]) {
                used[gi] = true;
                best = std::max(best, 1 + rec(pi + 1));
                used[gi] = false;
            }
        }
        return best;
    };
    return rec(0);
}

EvalReport brute_force_report(const Docs& gold, const Docs& pred, const EntityClassSet& classes) {
    EvalReport r;
    std::map<std::string, std::array<std::size_t, 3>> counts;  // tp, fp, fn
    for (const auto& name : classes.classes()) counts[name] = {0, 0, 0};
    for (std::size_t d = 0; d < gold.size(); ++d) {
        for (const auto& name : classes.classes()) {
            std::vector<EntitySpan> g, p;
            for (const auto& s : gold[d])
                if (s.cls == name) g.push_back(s);
            for (const auto& s : pred[d])
                if (s.cls == name) p.push_back(s);
            std::size_t tp = brute_force_matches(g, p);
            counts[name][0] += tp;
            counts[name][1] += p.size() - tp;
            counts[name][2] += g.size() - tp;
        }
    }
    double macro = 0.0;
    for (const auto& name : classes.classes()) {
        auto [tp, fp, fn] = counts[name];
        r.tp += tp;
        r.fp += fp;
        r.fn += fn;
        double prec = tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp);
        double rec = tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn);
        double f1 = prec + rec == 0 ? 0.0 : 2 * prec * rec / (prec + rec);
        macro += f1;
    }
    r.micro_precision = r.tp + r.fp == 0 ? 0.0 : double(r.tp) / double(r.tp + r.fp);
    r.micro_recall = r.tp + r.fn == 0 ? 0.0 : double(r.tp) / double(r.tp + r.fn);
    r.micro_f1 = r.micro_precision + r.micro_recall == 0
                     ? 0.0
                     : 2 * r.micro_precision * r.micro_recall / (r.micro_precision + r.micro_recall);
    r.macro_f1 = macro / double(classes.classes().size());
    return r;
}

}  // namespace

TEST(Score, HandCountedHalfFixture) {
    EntityClassSet classes({"price", "title"});
    Docs gold = {{{"title", 0, 0, 2}, {"price", 1, 0, 1}}};
    Docs pred = {{{"title", 0, 0, 2}, {"price", 1, 1, 2}}};
    EvalReport r = nie::score(gold, pred, classes);
    EXPECT_DOUBLE_EQ(r.micro_precision, 0.5);
    EXPECT_DOUBLE_EQ(r.micro_recall, 0.5);
    EXPECT_DOUBLE_EQ(r.micro_f1, 0.5);
    EXPECT_EQ(r.tp, 1u);
    EXPECT_EQ(r.fp, 1u);
    EXPECT_EQ(r.fn, 1u);
}

TEST(Score, ExactMatchIsPerfect) {
    EntityClassSet classes({"price", "title"});
    Docs gold = {{{"title", 0, 0, 2}}, {{"price", 1, 3, 5}, {"title", 0, 0, 1}}};
    EvalReport r = nie::score(gold, gold, classes);
    EXPECT_DOUBLE_EQ(r.micro_precision, 1.0);
    EXPECT_DOUBLE_EQ(r.micro_recall, 1.0);
    EXPECT_DOUBLE_EQ(r.micro_f1, 1.0);
    EXPECT_DOUBLE_EQ(r.macro_f1, 1.0);
}

TEST(Score, EmptyPredictionsDegenerateToZero) {
    EntityClassSet classes({"price", "title"});
    Docs gold = {{{"title", 0, 0, 2}}};
    Docs pred = {{}};
    EvalReport r = nie::score(gold, pred, classes);
    EXPECT_DOUBLE_EQ(r.micro_precision, 0.0);
    EXPECT_DOUBLE_EQ(r.micro_recall, 0.0);
    EXPECT_DOUBLE_EQ(r.micro_f1, 0.0);
}

TEST(Score, BoundaryOrTypeMismatchIsNoCredit) {
    EntityClassSet classes({"location", "title"});
    Docs gold = {{{"title", 0, 0, 3}, {"location", 2, 1, 3}}};
    // One boundary error, one type error: zero TP.
    Docs pred = {{{"title", 0, 0, 2}, {"title", 2, 1, 3}}};
    EvalReport r = nie::score(gold, pred, classes);
    EXPECT_EQ(r.tp, 0u);
    EXPECT_EQ(r.fp, 2u);
    EXPECT_EQ(r.fn, 2u);
    EXPECT_DOUBLE_EQ(r.micro_f1, 0.0);
}

TEST(Score, DuplicatePredictionCountsAsFalsePositive) {
    EntityClassSet classes({"title"});
    Docs gold = {{{"title", 0, 0, 2}}};
    Docs pred = {{{"title", 0, 0, 2}, {"title", 0, 0, 2}}};
    EvalReport r = nie::score(gold, pred, classes);
    EXPECT_EQ(r.tp, 1u);
    EXPECT_EQ(r.fp, 1u);
    EXPECT_DOUBLE_EQ(r.micro_recall, 1.0);
    EXPECT_DOUBLE_EQ(r.micro_precision, 0.5);
}

TEST(Score, PerClassBreakdownAndZeroSupportMacro) {
    EntityClassSet classes({"location", "price", "title"});
    Docs gold = {{{"title", 0, 0, 2}, {"price", 1, 0, 1}}};
    Docs pred = {{{"title", 0, 0, 2}}};
    EvalReport r = nie::score(gold, pred, classes);
    EXPECT_DOUBLE_EQ(r.per_class.at("title").f1, 1.0);
    EXPECT_DOUBLE_EQ(r.per_class.at("price").f1, 0.0);
    EXPECT_EQ(r.per_class.at("price").support, 1u);
    EXPECT_EQ(r.per_class.at("location").support, 0u);
    EXPECT_DOUBLE_EQ(r.per_class.at("location").f1, 0.0);  // zero-support convention
    EXPECT_DOUBLE_EQ(r.macro_f1, 1.0 / 3.0);
}

TEST(Score, CrossDocumentSpansNeverMatch) {
    EntityClassSet classes({"title"});
    Docs gold = {{{"title", 0, 0, 2}}, {}};
    Docs pred = {{}, {{"title", 0, 0, 2}}};
    EvalReport r = nie::score(gold, pred, classes);
    EXPECT_EQ(r.tp, 0u);
    EXPECT_EQ(r.fp, 1u);
    EXPECT_EQ(r.fn, 1u);
}

TEST(Score, PermutationInvariance) {
    EntityClassSet classes = EntityClassSet::event();
    nie::DetRng rng(31);
    Docs gold(4), pred(4);
    for (std::size_t d = 0; d < 4; ++d)
        for (int s = 0; s < 5; ++s) {
            EntitySpan span{classes.classes()[rng.uniform_int(4)],
                            static_cast<int>(rng.uniform_int(3)), 0, 0};
            span.token_start = static_cast<int>(rng.uniform_int(6));
            span.token_end = span.token_start + 1 + static_cast<int>(rng.uniform_int(3));
            if (rng.bernoulli(0.5)) gold[d].push_back(span);
            if (rng.bernoulli(0.5)) pred[d].push_back(span);
        }
    EvalReport base = nie::score(gold, pred, classes);

    Docs gold_p = {gold[2], gold[0], gold[3], gold[1]};
    Docs pred_p = {pred[2], pred[0], pred[3], pred[1]};
    for (auto& docs : {&gold_p, &pred_p})
        for (auto& spans : *docs) std::reverse(spans.begin(), spans.end());
    EvalReport permuted = nie::score(gold_p, pred_p, classes);
    EXPECT_DOUBLE_EQ(base.micro_f1, permuted.micro_f1);
    EXPECT_DOUBLE_EQ(base.macro_f1, permuted.macro_f1);
    EXPECT_EQ(base.tp, permuted.tp);
}

TEST(Score, MatchesBruteForceMatcherOnRandomInstances) {
    EntityClassSet classes({"a", "b"});
    nie::DetRng rng(77);
    for (int iter = 0; iter < 200; ++iter) {
        Docs gold(2), pred(2);
        for (std::size_t d = 0; d < 2; ++d) {
            std::size_t ng = rng.uniform_int(6), np = rng.uniform_int(6);
            auto random_span = [&]() {
                EntitySpan s;
                s.cls = classes.classes()[rng.uniform_int(2)];
                s.block_id = static_cast<int>(rng.uniform_int(2));
                s.token_start = static_cast<int>(rng.uniform_int(3));
                s.token_end = s.token_start + 1 + static_cast<int>(rng.uniform_int(2));
                return s;
            };
            for (std::size_t i = 0; i < ng; ++i) gold[d].push_back(random_span());
            for (std::size_t i = 0; i < np; ++i) pred[d].push_back(random_span());
        }
        EvalReport fast = nie::score(gold, pred, classes);
        EvalReport slow = brute_force_report(gold, pred, classes);
        EXPECT_NEAR(fast.micro_f1, slow.micro_f1, 1e-9);
        EXPECT_NEAR(fast.micro_precision, slow.micro_precision, 1e-9);
        EXPECT_NEAR(fast.micro_recall, slow.micro_recall, 1e-9);
        EXPECT_NEAR(fast.macro_f1, slow.macro_f1, 1e-9);
        EXPECT_EQ(fast.tp, slow.tp);
    }
}

TEST(Score, UnknownClassIsArgumentError) {
    EntityClassSet classes({"title"});
    Docs gold = {{{"bogus", 0, 0, 1}}};
    EXPECT_THROW(nie::score(gold, {{}}, classes), std::invalid_argument);
}

TEST(ReportFormat, FixedWidthColumnsAndValues) {
    // Formatting fixture only; these are not reproduction targets.
    EvalReport r;
    r.micro_f1 = 0.7708;
    r.micro_precision = 0.7459;
    r.micro_recall = 0.7976;
    r.per_class["title"] = {0.7459, 0.7976, 0.7708, 123};
    r.macro_f1 = 0.7920;
    r.tp = 100;
    r.fn = 23;
    std::string table = r.format_table();
    std::size_t f1_pos = table.find("F1");
    std::size_t prec_pos = table.find("Prec");
    std::size_t rec_pos = table.find("Rec");
    ASSERT_NE(f1_pos, std::string::npos);
    ASSERT_NE(prec_pos, std::string::npos);
    ASSERT_NE(rec_pos, std::string::npos);
    EXPECT_LT(f1_pos, prec_pos);
    EXPECT_LT(prec_pos, rec_pos);
    EXPECT_NE(table.find("0.7708"), std::string::npos);
    EXPECT_NE(table.find("0.7459"), std::string::npos);
    EXPECT_NE(table.find("0.7976"), std::string::npos);
}
