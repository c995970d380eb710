#pragma once

#include <cstdio>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nie/labels.hpp"

namespace nie {

struct ClassScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;  // gold span count
};

struct EvalReport {
    double micro_precision = 0.0;
    double micro_recall = 0.0;
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;
    std::map<std::string, ClassScore> per_class;
    std::size_t tp = 0, fp = 0, fn = 0;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["micro_precision"] = micro_precision;
        j["micro_recall"] = micro_recall;
        j["micro_f1"] = micro_f1;
        j["macro_f1"] = macro_f1;
        j["tp"] = tp;
        j["fp"] = fp;
        j["fn"] = fn;
        nlohmann::json jc;
        for (const auto& [name, s] : per_class) {
            jc[name] = {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}};
        }
        j["per_class"] = std::move(jc);
        return j;
    }

    /// Fixed-width table, columns ordered F1, Prec, Rec.
    std::string format_table() const {
        char line[160];
        std::string out;
        std::snprintf(line, sizeof(line), "%-12s %8s %8s %8s %8s\n", "class", "F1", "Prec", "Rec", "support");
        out += line;
        for (const auto& [name, s] : per_class) {
            std::snprintf(line, sizeof(line), "%-12s %8.4f %8.4f %8.4f %8zu\n", name.c_str(), s.f1,
                          s.precision, s.recall, s.support);
            out += line;
        }
        std::snprintf(line, sizeof(line), "%-12s %8.4f %8.4f %8.4f %8zu\n", "micro", micro_f1,
                      micro_precision, micro_recall, tp + fn);
        out += line;
        std::snprintf(line, sizeof(line), "%-12s %8.4f\n", "macro", macro_f1);
        out += line;
        return out;
    }
};

namespace detail {

inline double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

inline double f1_of(double p, double r) { return (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

struct SpanKey {
    std::string cls;
    int block = 0;
    int start = 0;
    int end = 0;
    friend auto operator<=>(const SpanKey&, const SpanKey&) = default;
};

}  // namespace detail

/// Span-level scoring with exact boundary+type matching, one-to-one within
/// identical keys. Micro scores pool TP/FP/FN over all documents and
/// classes; per-class restricts to that class; macro F1 is the unweighted
/// mean over all classes in K (zero-support classes contribute 0).
/// gold[i] and pred[i] refer to the same document.
inline EvalReport score(const std::vector<std::vector<EntitySpan>>& gold,
                        const std::vector<std::vector<EntitySpan>>& pred, const EntityClassSet& classes) {
    if (gold.size() != pred.size())
        throw std::invalid_argument("score: gold and pred document counts differ");

    auto validate = [&classes](const EntitySpan& s) {
        if (!classes.has_class(s.cls)) throw std::invalid_argument("score: unknown class " + s.cls);
        if (s.block_id < 0 || s.token_start < 0 || s.token_end <= s.token_start)
            throw std::invalid_argument("score: invalid span reference");
    };

    std::map<std::string, std::size_t> tp_by_class, fp_by_class, fn_by_class;
    for (const auto& name : classes.classes()) {
        tp_by_class[name] = 0;
        fp_by_class[name] = 0;
        fn_by_class[name] = 0;
    }

    for (std::size_t d = 0; d < gold.size(); ++d) {
        std::map<detail::SpanKey, std::size_t> gold_counts, pred_counts;
        for (const auto& s : gold[d]) {
            validate(s);
            gold_counts[{s.cls, s.block_id, s.token_start, s.token_end}]++;
        }
        for (const auto& s : pred[d]) {
            validate(s);
            pred_counts[{s.cls, s.block_id, s.token_start, s.token_end}]++;
        }
        for (const auto& [key, gc] : gold_counts) {
            auto it = pred_counts.find(key);
            std::size_t pc = it == pred_counts.end() ? 0 : it->second;
            std::size_t matched = std::min(gc, pc);
            tp_by_class[key.cls] += matched;
            fn_by_class[key.cls] += gc - matched;
        }
        for (const auto& [key, pc] : pred_counts) {
            auto it = gold_counts.find(key);
            std::size_t gc = it == gold_counts.end() ? 0 : it->second;
            fp_by_class[key.cls] += pc - std::min(gc, pc);
        }
    }

    EvalReport report;
    double macro_sum = 0.0;
    for (const auto& name : classes.classes()) {
        ClassScore s;
        std::size_t tp = tp_by_class[name], fp = fp_by_class[name], fn = fn_by_class[name];
        s.support = tp + fn;
        s.precision = detail::safe_div(static_cast<double>(tp), static_cast<double>(tp + fp));
        s.recall = detail::safe_div(static_cast<double>(tp), static_cast<double>(tp + fn));
        s.f1 = detail::f1_of(s.precision, s.recall);
        macro_sum += s.f1;
        report.per_class[name] = s;
        report.tp += tp;
        report.fp += fp;
        report.fn += fn;
    }
    report.micro_precision =
        detail::safe_div(static_cast<double>(report.tp), static_cast<double>(report.tp + report.fp));
    report.micro_recall =
        detail::safe_div(static_cast<double>(report.tp), static_cast<double>(report.tp + report.fn));
    report.micro_f1 = detail::f1_of(report.micro_precision, report.micro_recall);
    report.macro_f1 = macro_sum / static_cast<double>(classes.classes().size());
    return report;
}

}  // namespace nie
