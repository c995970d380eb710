#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "nie/labels.hpp"

namespace nie {

/// Schema violation during OCR-JSON ingestion. Carries the offending field.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string field, const std::string& message)
        : std::runtime_error("parse error [" + field + "]: " + message), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

class EmptyDocumentError : public std::runtime_error {
public:
    explicit EmptyDocumentError(const std::string& doc_id)
        : std::runtime_error("document '" + doc_id + "' has no non-empty blocks") {}
};

struct BoundingBox {
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;

    int right() const { return x + width; }
    int bottom() const { return y + height; }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct Token {
    std::string text;       // original casing, no whitespace
    double font_size = 0;   // pixels
    int char_offset = 0;    // index into the owning block's text

    friend bool operator==(const Token&, const Token&) = default;
};

struct TextBlock {
    int id = 0;             // unique within document, stable across reordering
    std::string text;       // raw block text as emitted by OCR
    std::vector<Token> tokens;
    BoundingBox bbox;
    int order_index = 0;    // reading-order position
};

struct VisualDocument {
    std::string doc_id;
    int page_width = 0;
    int page_height = 0;
    std::vector<TextBlock> blocks;  // sorted by order_index
    std::optional<std::vector<EntitySpan>> gold_spans;

    const TextBlock* block_by_id(int id) const {
        for (const auto& b : blocks)
            if (b.id == id) return &b;
        return nullptr;
    }
};

namespace detail {
inline bool ascii_punct(char c) {
    auto u = static_cast<unsigned char>(c);
    return u < 128 && std::ispunct(u) != 0;
}
}  // namespace detail

/// Whitespace split, then leading/trailing punctuation characters are split
/// off as single-character tokens. Inner punctuation is kept ("12.99",
/// "8:00"). Offsets index the input string.
inline std::vector<Token> tokenize(const std::string& text, double font_size = 0.0) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i == start) continue;

        std::size_t lo = start, hi = i;  // [lo, hi) is the word
        while (lo < hi && detail::ascii_punct(text[lo])) {
            out.push_back({std::string(1, text[lo]), font_size, static_cast<int>(lo)});
            ++lo;
        }
        std::size_t tail = hi;
        while (tail > lo && detail::ascii_punct(text[tail - 1])) --tail;
        if (tail > lo) out.push_back({text.substr(lo, tail - lo), font_size, static_cast<int>(lo)});
        for (std::size_t t = tail; t < hi; ++t)
            out.push_back({std::string(1, text[t]), font_size, static_cast<int>(t)});
    }
    return out;
}

inline std::string lowercase(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

/// Reading order: stable sort by (bbox.y, bbox.x). Ties keep input order.
/// Reassigns order_index and sorts the block array accordingly; ids stay.
inline VisualDocument assign_reading_order(VisualDocument doc) {
    std::stable_sort(doc.blocks.begin(), doc.blocks.end(), [](const TextBlock& a, const TextBlock& b) {
        if (a.bbox.y != b.bbox.y) return a.bbox.y < b.bbox.y;
        return a.bbox.x < b.bbox.x;
    });
    for (std::size_t i = 0; i < doc.blocks.size(); ++i)
        doc.blocks[i].order_index = static_cast<int>(i);
    return doc;
}

namespace detail {

inline double median_block_height(const VisualDocument& doc) {
    std::vector<double> heights;
    heights.reserve(doc.blocks.size());
    for (const auto& b : doc.blocks) heights.push_back(static_cast<double>(b.bbox.height));
    std::sort(heights.begin(), heights.end());
    std::size_t n = heights.size();
    if (n == 0) return 0.0;
    return n % 2 == 1 ? heights[n / 2] : 0.5 * (heights[n / 2 - 1] + heights[n / 2]);
}

inline const nlohmann::json& require_field(const nlohmann::json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(key, "missing required field");
    return *it;
}

}  // namespace detail

/// Merge reading-order-consecutive blocks whose vertical gap is below
/// alpha * median block height (median of the input document, fixed for the
/// whole pass). Single left-to-right pass; a merged block can merge again
/// with its successor. Keeps the earlier block's id, unions the boxes, and
/// remaps gold spans. Token multiset is unchanged.
inline VisualDocument merge_blocks(VisualDocument doc, double alpha = 0.5) {
    if (alpha <= 0.0) throw std::invalid_argument("merge_blocks: alpha must be > 0");
    if (doc.blocks.size() <= 1) return doc;

    const double threshold = alpha * detail::median_block_height(doc);

    // old block id -> (surviving id, token offset within the merged block)
    std::unordered_map<int, std::pair<int, int>> remap;

    std::vector<TextBlock> merged;
    merged.reserve(doc.blocks.size());
    TextBlock acc = doc.blocks.front();
    remap[acc.id] = {acc.id, 0};

    for (std::size_t i = 1; i < doc.blocks.size(); ++i) {
        const TextBlock& next = doc.blocks[i];
        double gap = static_cast<double>(next.bbox.y) - static_cast<double>(acc.bbox.bottom());
        if (gap < threshold) {
            remap[next.id] = {acc.id, static_cast<int>(acc.tokens.size())};
            int offset_shift = static_cast<int>(acc.text.size()) + 1;
            acc.text += " " + next.text;
            for (const Token& tok : next.tokens) {
                Token moved = tok;
                moved.char_offset += offset_shift;
                acc.tokens.push_back(std::move(moved));
            }
            BoundingBox u;
            u.x = std::min(acc.bbox.x, next.bbox.x);
            u.y = std::min(acc.bbox.y, next.bbox.y);
            u.width = std::max(acc.bbox.right(), next.bbox.right()) - u.x;
            u.height = std::max(acc.bbox.bottom(), next.bbox.bottom()) - u.y;
            acc.bbox = u;
        } else {
            merged.push_back(std::move(acc));
            acc = next;
            remap[acc.id] = {acc.id, 0};
        }
    }
    merged.push_back(std::move(acc));
    for (std::size_t i = 0; i < merged.size(); ++i)
        merged[i].order_index = static_cast<int>(i);
    doc.blocks = std::move(merged);

    if (doc.gold_spans) {
        for (EntitySpan& span : *doc.gold_spans) {
            auto it = remap.find(span.block_id);
            if (it == remap.end()) throw std::runtime_error("merge_blocks: gold span references unknown block");
            span.block_id = it->second.first;
            span.token_start += it->second.second;
            span.token_end += it->second.second;
        }
    }
    return doc;
}

/// Parse the OCR-JSON schema. Blocks that tokenize to nothing are dropped
/// and surviving blocks are re-indexed; gold span block refs (which index
/// the input array) are remapped. Reading order is assigned before return.
inline VisualDocument ingest_ocr_json(const std::string& bytes) {
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(bytes);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("document", std::string("invalid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ParseError("document", "top level must be an object");

    VisualDocument doc;
    const auto& jid = detail::require_field(root, "doc_id");
    if (!jid.is_string()) throw ParseError("doc_id", "must be a string");
    doc.doc_id = jid.get<std::string>();

    const auto& jpw = detail::require_field(root, "page_width");
    const auto& jph = detail::require_field(root, "page_height");
    if (!jpw.is_number_integer() || jpw.get<int>() <= 0) throw ParseError("page_width", "must be a positive integer");
    if (!jph.is_number_integer() || jph.get<int>() <= 0) throw ParseError("page_height", "must be a positive integer");
    doc.page_width = jpw.get<int>();
    doc.page_height = jph.get<int>();

    const auto& jblocks = detail::require_field(root, "blocks");
    if (!jblocks.is_array()) throw ParseError("blocks", "must be an array");

    // input array index -> post-filter block id (-1 if dropped)
    std::vector<int> kept_id(jblocks.size(), -1);

    for (std::size_t bi = 0; bi < jblocks.size(); ++bi) {
        const auto& jb = jblocks[bi];
        if (!jb.is_object()) throw ParseError("blocks", "block entries must be objects");

        const auto& jtext = detail::require_field(jb, "text");
        if (!jtext.is_string()) throw ParseError("text", "must be a string");

        const auto& jbbox = detail::require_field(jb, "bbox");
        if (!jbbox.is_array() || jbbox.size() != 4) throw ParseError("bbox", "must be [x, y, w, h]");
        for (const auto& v : jbbox)
            if (!v.is_number_integer()) throw ParseError("bbox", "coordinates must be integers");
        BoundingBox box{jbbox[0].get<int>(), jbbox[1].get<int>(), jbbox[2].get<int>(), jbbox[3].get<int>()};
        if (box.width <= 0) throw ParseError("width", "must be > 0");
        if (box.height <= 0) throw ParseError("height", "must be > 0");
        if (box.x < 0) throw ParseError("x", "must be >= 0");
        if (box.y < 0) throw ParseError("y", "must be >= 0");
        if (box.right() > doc.page_width || box.bottom() > doc.page_height)
            throw ParseError("bbox", "box exceeds page bounds");

        const auto& jfont = detail::require_field(jb, "font_size");
        if (!jfont.is_number() || jfont.get<double>() <= 0.0) throw ParseError("font_size", "must be > 0");
        double block_font = jfont.get<double>();

        TextBlock block;
        block.text = jtext.get<std::string>();
        block.bbox = box;
        block.tokens = tokenize(block.text, block_font);
        if (block.tokens.empty()) continue;  // whitespace-only block: dropped

        if (auto it = jb.find("token_font_sizes"); it != jb.end()) {
            if (!it->is_array() || it->size() != block.tokens.size())
                throw ParseError("token_font_sizes", "length must match token count");
            for (std::size_t t = 0; t < block.tokens.size(); ++t) {
                if (!(*it)[t].is_number() || (*it)[t].get<double>() <= 0.0)
                    throw ParseError("token_font_sizes", "entries must be > 0");
                block.tokens[t].font_size = (*it)[t].get<double>();
            }
        }

        block.id = static_cast<int>(doc.blocks.size());
        kept_id[bi] = block.id;
        doc.blocks.push_back(std::move(block));
    }

    if (doc.blocks.empty()) throw EmptyDocumentError(doc.doc_id);

    if (auto it = root.find("gold_spans"); it != root.end()) {
        if (!it->is_array()) throw ParseError("gold_spans", "must be an array");
        std::vector<EntitySpan> spans;
        for (const auto& js : *it) {
            if (!js.is_object()) throw ParseError("gold_spans", "entries must be objects");
            EntitySpan span;
            const auto& jcls = detail::require_field(js, "class");
            if (!jcls.is_string()) throw ParseError("class", "must be a string");
            span.cls = jcls.get<std::string>();
            const auto& jblk = detail::require_field(js, "block");
            const auto& jstart = detail::require_field(js, "start");
            const auto& jend = detail::require_field(js, "end");
            if (!jblk.is_number_integer() || !jstart.is_number_integer() || !jend.is_number_integer())
                throw ParseError("gold_spans", "block/start/end must be integers");
            int input_index = jblk.get<int>();
            if (input_index < 0 || static_cast<std::size_t>(input_index) >= kept_id.size() ||
                kept_id[static_cast<std::size_t>(input_index)] < 0)
                throw ParseError("gold_spans", "span references a missing or dropped block");
            span.block_id = kept_id[static_cast<std::size_t>(input_index)];
            span.token_start = jstart.get<int>();
            span.token_end = jend.get<int>();
            const TextBlock* blk = nullptr;
            for (const auto& b : doc.blocks)
                if (b.id == span.block_id) blk = &b;
            if (span.token_start < 0 || span.token_end <= span.token_start ||
                static_cast<std::size_t>(span.token_end) > blk->tokens.size())
                throw ParseError("gold_spans", "token range outside block");
            spans.push_back(std::move(span));
        }
        doc.gold_spans = std::move(spans);
    }

    return assign_reading_order(std::move(doc));
}

/// Canonical OCR-JSON form: blocks in current array order, span block refs
/// as array positions, token_font_sizes emitted only when they vary within
/// a block. ingest(serialize(doc)) reproduces doc field-for-field.
inline std::string serialize_ocr_json(const VisualDocument& doc) {
    nlohmann::json root;
    root["doc_id"] = doc.doc_id;
    root["page_width"] = doc.page_width;
    root["page_height"] = doc.page_height;

    std::unordered_map<int, int> id_to_pos;
    nlohmann::json jblocks = nlohmann::json::array();
    for (std::size_t i = 0; i < doc.blocks.size(); ++i) {
        const TextBlock& b = doc.blocks[i];
        id_to_pos[b.id] = static_cast<int>(i);
        nlohmann::json jb;
        jb["text"] = b.text;
        jb["bbox"] = {b.bbox.x, b.bbox.y, b.bbox.width, b.bbox.height};
        double first_font = b.tokens.empty() ? 1.0 : b.tokens.front().font_size;
        jb["font_size"] = first_font;
        bool uniform = true;
        for (const Token& t : b.tokens)
            if (t.font_size != first_font) uniform = false;
        if (!uniform) {
            nlohmann::json fonts = nlohmann::json::array();
            for (const Token& t : b.tokens) fonts.push_back(t.font_size);
            jb["token_font_sizes"] = std::move(fonts);
        }
        jblocks.push_back(std::move(jb));
    }
    root["blocks"] = std::move(jblocks);

    if (doc.gold_spans) {
        nlohmann::json jspans = nlohmann::json::array();
        for (const EntitySpan& s : *doc.gold_spans) {
            nlohmann::json js;
            js["class"] = s.cls;
            js["block"] = id_to_pos.at(s.block_id);
            js["start"] = s.token_start;
            js["end"] = s.token_end;
            jspans.push_back(std::move(js));
        }
        root["gold_spans"] = std::move(jspans);
    }
    return root.dump(2) + "\n";
}

}  // namespace nie
