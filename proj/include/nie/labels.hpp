#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace nie {

/// A typed, contiguous token range inside one block. token_end is exclusive.
struct EntitySpan {
    std::string cls;
    int block_id = 0;
    int token_start = 0;
    int token_end = 0;

    friend bool operator==(const EntitySpan&, const EntitySpan&) = default;
};

/// The entity classes K and the derived IOB label space of size 2*|K|+1,
/// laid out as [O, B-k1, I-k1, ..., B-kn, I-kn].
class EntityClassSet {
public:
    EntityClassSet() = default;
    explicit EntityClassSet(std::vector<std::string> classes) : classes_(std::move(classes)) {
        if (classes_.empty()) throw std::invalid_argument("EntityClassSet: needs at least one class");
    }

    static EntityClassSet event() { return EntityClassSet({"title", "location", "time", "price"}); }
    static EntityClassSet product() { return EntityClassSet({"title", "price"}); }

    const std::vector<std::string>& classes() const { return classes_; }
    std::size_t eta() const { return classes_.size(); }
    std::size_t label_count() const { return 2 * classes_.size() + 1; }

    static constexpr int kOutside = 0;

    int begin_label(std::size_t class_index) const { return 1 + 2 * static_cast<int>(class_index); }
    int inside_label(std::size_t class_index) const { return 2 + 2 * static_cast<int>(class_index); }

    bool is_begin(int label) const { return label > 0 && label % 2 == 1; }
    bool is_inside(int label) const { return label > 0 && label % 2 == 0; }

    /// Class index for a non-O label.
    std::size_t class_of(int label) const {
        if (label <= 0 || static_cast<std::size_t>(label) >= label_count())
            throw std::invalid_argument("class_of: label out of range");
        return static_cast<std::size_t>((label - 1) / 2);
    }

    std::size_t class_index(const std::string& name) const {
        for (std::size_t i = 0; i < classes_.size(); ++i)
            if (classes_[i] == name) return i;
        throw std::invalid_argument("unknown entity class: " + name);
    }

    bool has_class(const std::string& name) const {
        return std::find(classes_.begin(), classes_.end(), name) != classes_.end();
    }

    std::string label_name(int label) const {
        if (label == kOutside) return "O";
        return (is_begin(label) ? "B-" : "I-") + classes_[class_of(label)];
    }

private:
    std::vector<std::string> classes_;
};

/// Gold-label construction: spans to per-token IOB labels. Uncovered tokens
/// are O. Overlapping spans are a corpus error.
inline std::vector<int> encode_iob(const std::vector<EntitySpan>& spans, std::size_t block_len,
                                   const EntityClassSet& classes) {
    std::vector<int> labels(block_len, EntityClassSet::kOutside);
    std::vector<bool> covered(block_len, false);
    for (const auto& span : spans) {
        if (span.token_start < 0 || span.token_end <= span.token_start ||
            static_cast<std::size_t>(span.token_end) > block_len)
            throw std::invalid_argument("encode_iob: span outside block bounds");
        std::size_t ci = classes.class_index(span.cls);
        for (int t = span.token_start; t < span.token_end; ++t) {
            if (covered[static_cast<std::size_t>(t)])
                throw std::invalid_argument("encode_iob: overlapping spans");
            covered[static_cast<std::size_t>(t)] = true;
            labels[static_cast<std::size_t>(t)] =
                t == span.token_start ? classes.begin_label(ci) : classes.inside_label(ci);
        }
    }
    return labels;
}

/// Maximal-run span decoding with orphan-I repair: a stray I-k (not preceded
/// by B-k/I-k of the same class) starts a new span. A span ends before O,
/// before any B-, or before an I- of a different class.
inline std::vector<EntitySpan> decode_iob(const std::vector<int>& labels, const EntityClassSet& classes,
                                          int block_id = 0) {
    std::vector<EntitySpan> spans;
    bool open = false;
    std::size_t open_class = 0;
    int open_start = 0;

    auto close = [&](int end) {
        if (open) {
            spans.push_back({classes.classes()[open_class], block_id, open_start, end});
            open = false;
        }
    };

    for (std::size_t t = 0; t < labels.size(); ++t) {
        int label = labels[t];
        if (label == EntityClassSet::kOutside) {
            close(static_cast<int>(t));
        } else if (classes.is_begin(label)) {
            close(static_cast<int>(t));
            open = true;
            open_class = classes.class_of(label);
            open_start = static_cast<int>(t);
        } else {  // inside
            std::size_t ci = classes.class_of(label);
            if (!open || open_class != ci) {
                close(static_cast<int>(t));
                open = true;
                open_class = ci;
                open_start = static_cast<int>(t);
            }
        }
    }
    close(static_cast<int>(labels.size()));
    return spans;
}

}  // namespace nie
