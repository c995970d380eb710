#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "nie/document.hpp"
#include "nie/rng.hpp"
#include "nie/train.hpp"

namespace nie {

enum class Domain { Event, Product };

inline const char* to_string(Domain d) { return d == Domain::Event ? "event" : "product"; }

inline Domain domain_from_string(const std::string& s) {
    if (s == "event") return Domain::Event;
    if (s == "product") return Domain::Product;
    throw std::invalid_argument("unknown domain: " + s);
}

/// Generator knobs. Identical (config, seed) pairs produce byte-identical
/// corpora; per-document RNG streams derive from (seed, doc index), and the
/// over-splitting stream is isolated so corpora generated at different
/// split rates share all other content.
struct GeneratorConfig {
    Domain domain = Domain::Event;
    std::size_t count = 100;
    std::uint64_t seed = 1;
    double distractor_rate = 0.5;   // probability of each optional distractor element
    double over_split_rate = 0.25;  // per multi-line block
    double font_jitter = 0.1;       // relative per-token font size jitter

    void validate() const {
        if (count < 10) throw std::invalid_argument("GeneratorConfig: count must be >= 10");
        if (distractor_rate < 0 || distractor_rate > 1 || over_split_rate < 0 || over_split_rate > 1)
            throw std::invalid_argument("GeneratorConfig: rates must be in [0, 1]");
        if (font_jitter < 0 || font_jitter > 0.5)
            throw std::invalid_argument("GeneratorConfig: font_jitter must be in [0, 0.5]");
    }

    EntityClassSet classes() const {
        return domain == Domain::Event ? EntityClassSet::event() : EntityClassSet::product();
    }
};

namespace synth_detail {

// ---- lexicons -------------------------------------------------------------

inline const std::vector<std::string>& name_adjectives() {
    static const std::vector<std::string> v = {"Midnight", "Summer",  "Electric", "Golden", "Velvet",
                                               "Neon",     "Silver",  "Crimson",  "Wild",   "Cosmic",
                                               "Lunar",    "Acoustic", "Roaring", "Emerald", "Winter"};
    return v;
}
inline const std::vector<std::string>& name_nouns() {
    static const std::vector<std::string> v = {"Jazz",  "Blues",   "Indie",  "Folk",  "Soul",
                                               "Funk",  "Tango",   "Swing",  "Harvest", "Lantern",
                                               "Echo",  "Horizon", "Sunset", "River", "Ember"};
    return v;
}
inline const std::vector<std::string>& event_types() {
    static const std::vector<std::string> v = {"Festival", "Night",   "Gala", "Showcase", "Jam",
                                               "Fair",     "Concert", "Session", "Revue", "Carnival"};
    return v;
}
inline const std::vector<std::string>& venue_names() {
    static const std::vector<std::string> v = {"Riverside", "Oakwood",  "Harbor",  "Maple",
                                               "Granite",   "Willow",   "Crescent", "Summit",
                                               "Lakeside",  "Birchwood", "Copper",  "Fairmont"};
    return v;
}
inline const std::vector<std::string>& venue_types() {
    static const std::vector<std::string> v = {"Hall",    "Arena",  "Theater", "Pavilion", "Ballroom",
                                               "Gardens", "Center", "Lounge",  "Club",     "Tavern"};
    return v;
}
inline const std::vector<std::string>& cities() {
    static const std::vector<std::string> v = {"Springfield", "Riverton", "Fairview", "Brookside",
                                               "Milton",      "Ashland",  "Georgetown", "Clayton"};
    return v;
}
inline const std::vector<std::string>& weekdays() {
    static const std::vector<std::string> v = {"Monday", "Tuesday", "Wednesday", "Thursday",
                                               "Friday", "Saturday", "Sunday"};
    return v;
}
inline const std::vector<std::string>& months() {
    static const std::vector<std::string> v = {"January", "February", "March",     "April",   "May",
                                               "June",    "July",     "August",    "September", "October",
                                               "November", "December"};
    return v;
}
inline const std::vector<std::string>& org_types() {
    static const std::vector<std::string> v = {"Collective", "Society", "Productions", "Council"};
    return v;
}
inline const std::vector<std::string>& brands() {
    static const std::vector<std::string> v = {"Acme",  "Nordica", "Zenith", "Apex",  "Orbit",
                                               "Lumen", "Vertex",  "Polar",  "Atlas", "Nimbus"};
    return v;
}
inline const std::vector<std::string>& product_adjectives() {
    static const std::vector<std::string> v = {"Wireless", "Portable",  "Compact",  "Ergonomic",
                                               "Smart",    "Classic",   "Premium",  "Foldable",
                                               "Waterproof", "Everyday"};
    return v;
}
inline const std::vector<std::string>& product_materials() {
    static const std::vector<std::string> v = {"Carbon", "Bamboo", "Leather", "Steel",
                                               "Ceramic", "Walnut", "Canvas", "Titanium"};
    return v;
}
inline const std::vector<std::string>& product_nouns() {
    static const std::vector<std::string> v = {"Headphones", "Backpack", "Kettle",  "Lamp",
                                               "Speaker",    "Notebook", "Blender", "Monitor",
                                               "Chair",      "Watch",    "Charger", "Tumbler"};
    return v;
}
inline const std::vector<std::string>& product_models() {
    static const std::vector<std::string> v = {"X200", "Pro", "Mini", "V2", "Max", "S7", "Go"};
    return v;
}
inline const std::vector<std::string>& categories() {
    static const std::vector<std::string> v = {"Electronics", "Kitchen", "Outdoors", "Office", "Home"};
    return v;
}

// ---- intermediate block form ----------------------------------------------

struct ProtoFragment {
    std::vector<std::string> tokens;
    std::string gold_cls;  // empty = not annotated
};

struct ProtoLine {
    std::vector<ProtoFragment> frags;
    std::size_t token_count() const {
        std::size_t n = 0;
        for (const auto& f : frags) n += f.tokens.size();
        return n;
    }
};

struct ProtoBlock {
    std::vector<ProtoLine> lines;
    double base_font = 24.0;
};

class BlockBuilder {
public:
    explicit BlockBuilder(double font) { block_.base_font = font; }

    BlockBuilder& line() {
        block_.lines.emplace_back();
        return *this;
    }

    BlockBuilder& add(const std::string& words) { return frag(words, ""); }

    BlockBuilder& gold(const std::string& cls, const std::string& words) { return frag(words, cls); }

    ProtoBlock take() {
        // Drop empty trailing lines defensively.
        while (!block_.lines.empty() && block_.lines.back().frags.empty()) block_.lines.pop_back();
        return std::move(block_);
    }

private:
    BlockBuilder& frag(const std::string& words, const std::string& cls) {
        if (block_.lines.empty()) block_.lines.emplace_back();
        ProtoFragment f;
        for (const Token& t : tokenize(words)) f.tokens.push_back(t.text);
        if (f.tokens.empty()) return *this;
        f.gold_cls = cls;
        block_.lines.back().frags.push_back(std::move(f));
        return *this;
    }

    ProtoBlock block_;
};

// ---- shared phrase generators ----------------------------------------------

/// Name phrases are shared between event titles and lineup artists (and
/// between product titles and related-item names); the surface form alone
/// cannot tell the roles apart, only position and neighbors can.
inline std::string event_name_phrase(DetRng& rng) {
    double r = rng.uniform();
    if (r < 0.45)
        return rng.pick(name_adjectives()) + " " + rng.pick(name_nouns()) + " " + rng.pick(event_types());
    if (r < 0.65) return "The " + rng.pick(name_nouns()) + " " + rng.pick(event_types());
    if (r < 0.85) return rng.pick(name_adjectives()) + " " + rng.pick(name_nouns());
    return rng.pick(name_nouns()) + " & " + rng.pick(name_nouns()) + " " + rng.pick(event_types());
}

inline std::string product_name_phrase(DetRng& rng) {
    std::string s = rng.pick(brands()) + " " + rng.pick(product_adjectives());
    if (rng.bernoulli(0.5)) s += " " + rng.pick(product_materials());
    s += " " + rng.pick(product_nouns());
    if (rng.bernoulli(0.45)) s += " " + rng.pick(product_models());
    return s;
}

inline std::string venue_phrase(DetRng& rng) {
    return rng.pick(venue_names()) + " " + rng.pick(venue_types());
}

inline std::string time_phrase(DetRng& rng) {
    int hour = static_cast<int>(rng.uniform_between(1, 12));
    static const std::vector<std::string> mins = {"00", "15", "30", "45"};
    std::string ampm = rng.bernoulli(0.75) ? "PM" : "AM";
    if (rng.bernoulli(0.4)) return std::to_string(hour) + " " + ampm;
    return std::to_string(hour) + ":" + rng.pick(mins) + " " + ampm;
}

inline std::string price_phrase(DetRng& rng, bool cents_likely) {
    int dollars = static_cast<int>(rng.uniform_between(4, 149));
    double r = rng.uniform();
    if (cents_likely && r < 0.55) return "$" + std::to_string(dollars) + ".99";
    if (r < 0.75) return "$" + std::to_string(dollars);
    return "$" + std::to_string(dollars) + ".50";
}

// ---- document assembly -----------------------------------------------------

/// Extra vertical whitespace inserted before these blocks ("below the
/// fold" sections); keyed by block index within the proto sequence.
struct LayoutHints {
    std::map<std::size_t, int> extra_gap_before;
};

inline std::vector<ProtoBlock> build_event_blocks(DetRng& rng, double d, LayoutHints& hints) {
    std::vector<ProtoBlock> blocks;
    (void)hints;

    if (rng.bernoulli(d)) {
        BlockBuilder b(rng.uniform(20, 28));
        if (rng.bernoulli(0.5))
            b.add(rng.pick(venue_names()) + " " + rng.pick(org_types()) + " presents");
        else
            b.add("Live this " + rng.pick(weekdays()));
        blocks.push_back(b.take());
    }

    {
        BlockBuilder b(rng.uniform(28, 52));
        b.gold("title", event_name_phrase(rng));
        double r = rng.uniform();
        if (r < 0.10)
            b.add("!");
        else if (r < 0.18)
            b.add("2025");
        blocks.push_back(b.take());
    }

    if (rng.bernoulli(d * 0.7)) {
        BlockBuilder b(rng.uniform(20, 28));
        b.add("An evening of " + lowercase(rng.pick(name_nouns())) + " and " +
              lowercase(rng.pick(name_nouns())));
        if (rng.bernoulli(0.5)) b.line().add("with friends and neighbors");
        blocks.push_back(b.take());
    }

    if (rng.bernoulli(0.93)) {  // date / time
        BlockBuilder b(rng.uniform(22, 30));
        double r = rng.uniform();
        std::string tp = time_phrase(rng);
        if (r < 0.45) {
            b.add(rng.pick(weekdays()) + " , " + rng.pick(months()) + " " +
                  std::to_string(rng.uniform_between(1, 28)));
            b.line().add("Doors open at").gold("time", tp);
        } else if (r < 0.75) {
            b.add(rng.pick(months()) + " " + std::to_string(rng.uniform_between(1, 28)) + " at")
                .gold("time", tp);
        } else {
            b.add(rng.pick(weekdays())).gold("time", tp);
            if (rng.bernoulli(0.4)) b.line().add("doors " + time_phrase(rng));
        }
        blocks.push_back(b.take());
    }

    if (rng.bernoulli(0.93)) {  // location
        BlockBuilder b(rng.uniform(22, 30));
        double r = rng.uniform();
        std::string venue = venue_phrase(rng);
        if (r < 0.3) {
            b.gold("location", venue);
        } else if (r < 0.55) {
            b.add("at").gold("location", venue);
        } else if (r < 0.8) {
            b.gold("location", venue).add(", " + rng.pick(cities()));
        } else {
            b.add("Join us at").gold("location", venue);
        }
        blocks.push_back(b.take());
    }

    if (rng.bernoulli(0.93)) {  // price
        BlockBuilder b(rng.uniform(20, 28));
        double r = rng.uniform();
        std::string pp = price_phrase(rng, false);
        if (r < 0.08) {
            b.add("Free admission");
        } else if (r < 0.42) {
            b.add("Tickets").gold("price", pp);
        } else if (r < 0.68) {
            b.add("Admission :").gold("price", pp);
        } else {
            b.gold("price", pp).add("at the door");
        }
        blocks.push_back(b.take());
    }

    if (rng.bernoulli(std::min(0.9, 0.35 + d))) {  // lineup section
        {
            BlockBuilder b(rng.uniform(20, 26));
            static const std::vector<std::string> markers = {"Featuring", "Lineup", "With special guests",
                                                             "Also appearing"};
            b.add(rng.pick(markers));
            blocks.push_back(b.take());
        }
        int artists = static_cast<int>(rng.uniform_between(1, 3));
        for (int a = 0; a < artists; ++a) {
            BlockBuilder b(rng.uniform(24, 48));
            b.add(event_name_phrase(rng));
            blocks.push_back(b.take());
        }
    }

    if (rng.bernoulli(d * 0.6)) {
        BlockBuilder b(rng.uniform(20, 26));
        b.add("All ages welcome");
        blocks.push_back(b.take());
    }
    if (rng.bernoulli(d * 0.4)) {  // non-gold time mention
        BlockBuilder b(rng.uniform(20, 26));
        b.add("Box office opens " + time_phrase(rng));
        blocks.push_back(b.take());
    }
    if (rng.bernoulli(d * 0.4)) {  // non-gold venue mention
        BlockBuilder b(rng.uniform(20, 26));
        b.add("Parking available behind " + venue_phrase(rng));
        blocks.push_back(b.take());
    }
    if (rng.bernoulli(d * 0.5)) {
        BlockBuilder b(rng.uniform(20, 26));
        b.add("Rain or shine");
        b.line().add("No refunds or exchanges");
        blocks.push_back(b.take());
    }
    if (rng.bernoulli(d * 0.5)) {
        BlockBuilder b(rng.uniform(20, 26));
        b.add("Visit " + lowercase(rng.pick(venue_names())) + ".com for details");
        blocks.push_back(b.take());
    }
    return blocks;
}

inline std::vector<ProtoBlock> build_product_blocks(DetRng& rng, double d, LayoutHints& hints) {
    std::vector<ProtoBlock> blocks;

    if (rng.bernoulli(d)) {
        BlockBuilder b(rng.uniform(20, 24));
        b.add("Home / " + rng.pick(categories()) + " / " + rng.pick(product_nouns()));
        blocks.push_back(b.take());
    }

    std::string title = product_name_phrase(rng);
    {
        BlockBuilder b(rng.uniform(30, 52));
        b.gold("title", title);
        blocks.push_back(b.take());
    }
    auto title_tokens = tokenize(title);

    if (rng.bernoulli(d)) {
        BlockBuilder b(rng.uniform(20, 26));
        int ratings = static_cast<int>(rng.uniform_between(40, 4000));
        b.add("Rated 4." + std::to_string(rng.uniform_between(0, 9)) + " by " + std::to_string(ratings) +
              " customers");
        blocks.push_back(b.take());
    }

    // Half the pages put the description above the price. In that layout
    // the price block's bottom neighborhood looks like a related item's
    // (names and bare prices), and block position is what tells them apart.
    const bool description_first = rng.bernoulli(0.5);

    auto emit_descriptions = [&rng, &title, &title_tokens, &blocks]() {
        int desc_blocks = static_cast<int>(rng.uniform_between(1, 2));
        for (int i = 0; i < desc_blocks; ++i) {
            BlockBuilder b(rng.uniform(20, 26));
            // Descriptions reuse the title's own wording.
            std::string brand = title_tokens[0].text;
            std::string noun;
            for (const auto& t : title_tokens) noun = t.text;  // last token or model id
            double r = rng.uniform();
            if (r < 0.34) {
                b.add("Meet the " + lowercase(title));
                b.line().add("designed for everyday carry and travel");
            } else if (r < 0.67) {
                b.add("The " + brand + " " + noun + " combines comfort");
                b.line().add("with a lightweight build you can rely on");
            } else {
                b.add("Experience the " + lowercase(title) + " at home");
                b.line().add("backed by a two year warranty");
            }
            if (rng.bernoulli(0.5)) b.line().add("ships in recyclable packaging");
            blocks.push_back(b.take());
        }
    };

    if (description_first) emit_descriptions();

    if (rng.bernoulli(0.95)) {  // price
        BlockBuilder b(rng.uniform(24, 30));
        double r = rng.uniform();
        std::string pp = price_phrase(rng, true);
        if (r < 0.55) {
            b.gold("price", pp);
        } else if (r < 0.8) {
            b.add("Now").gold("price", pp);
        } else {
            b.add("Now").gold("price", pp).add("was " + price_phrase(rng, true));
        }
        blocks.push_back(b.take());
    }

    if (!description_first) emit_descriptions();

    if (rng.bernoulli(std::min(0.9, 0.4 + d * 0.8))) {  // related items
        hints.extra_gap_before[blocks.size()] =
            static_cast<int>(rng.uniform_between(260, 620));  // below the fold
        {
            BlockBuilder b(rng.uniform(20, 26));
            static const std::vector<std::string> markers = {"Customers also viewed", "Similar items",
                                                             "You may also like"};
            b.add(rng.pick(markers));
            blocks.push_back(b.take());
        }
        int items = static_cast<int>(rng.uniform_between(1, 3));
        for (int i = 0; i < items; ++i) {
            BlockBuilder name(rng.uniform(20, 36));
            name.add(product_name_phrase(rng));
            blocks.push_back(name.take());
            BlockBuilder price(rng.uniform(20, 26));
            price.add(price_phrase(rng, true));  // not the product's price: unannotated
            blocks.push_back(price.take());
        }
    }

    if (rng.bernoulli(d * 0.6)) {
        BlockBuilder b(rng.uniform(20, 24));
        b.add("Free shipping on orders over $ 50");
        blocks.push_back(b.take());
    }
    if (rng.bernoulli(d * 0.6)) {
        BlockBuilder b(rng.uniform(20, 24));
        b.add("In stock ships tomorrow");
        if (rng.bernoulli(0.4)) b.line().add("30 day returns on all orders");
        blocks.push_back(b.take());
    }
    return blocks;
}

// ---- emission ---------------------------------------------------------------

struct EmittedBlock {
    std::vector<ProtoLine> lines;
    double base_font = 24.0;
    int x = 0, y = 0, width = 0, height = 0;
};

inline int line_height(double font) { return static_cast<int>(std::lround(font * 1.3)); }

inline std::size_t line_char_width(const ProtoLine& line) {
    std::size_t chars = 0;
    for (const auto& f : line.frags)
        for (const auto& t : f.tokens) chars += t.size() + 1;
    return chars;
}

/// Deterministic document construction. Streams: content (structure, text,
/// fonts, layout), jitter (per-token font noise), split (over-splitting
/// decisions only, so different split rates keep all other content equal).
inline VisualDocument generate_document(const GeneratorConfig& cfg, std::size_t index) {
    DetRng content(cfg.seed, index * 16 + 0);
    DetRng jitter(cfg.seed, index * 16 + 1);
    DetRng split(cfg.seed, index * 16 + 2);

    const double d = cfg.distractor_rate;
    LayoutHints hints;
    std::vector<ProtoBlock> protos = cfg.domain == Domain::Event
                                         ? build_event_blocks(content, d, hints)
                                         : build_product_blocks(content, d, hints);

    const int page_width = 1080;
    const int margin = 60;
    int cursor = 40 + static_cast<int>(content.uniform_between(0, 100));
    if (content.bernoulli(0.55)) cursor += static_cast<int>(content.uniform_between(100, 900));

    std::vector<EmittedBlock> emitted;
    for (std::size_t pi = 0; pi < protos.size(); ++pi) {
        ProtoBlock& proto = protos[pi];
        const int lh = line_height(proto.base_font);
        const int total_height = lh * static_cast<int>(proto.lines.size());

        std::size_t max_chars = 1;
        for (const auto& line : proto.lines) max_chars = std::max(max_chars, line_char_width(line));
        int width = static_cast<int>(std::lround(static_cast<double>(max_chars) * proto.base_font * 0.55));
        width = std::clamp(width, 60, page_width - 2 * margin);
        int x = margin + static_cast<int>(content.uniform_int(
                             static_cast<std::uint64_t>(page_width - 2 * margin - width + 1)));

        if (pi > 0) cursor += static_cast<int>(content.uniform_between(80, 140));
        if (auto it = hints.extra_gap_before.find(pi); it != hints.extra_gap_before.end())
            cursor += it->second;

        // Over-splitting: always consume the same number of draws so split
        // streams align across rates.
        double u = split.uniform();
        std::uint64_t boundary_draw = split.next_u64();
        std::uint64_t gap_draw = split.next_u64();
        bool do_split = proto.lines.size() >= 2 && u < cfg.over_split_rate;

        if (do_split) {
            std::size_t cut = 1 + boundary_draw % (proto.lines.size() - 1);
            int gap = 2 + static_cast<int>(gap_draw % 4);  // always below the merge threshold
            EmittedBlock a, b;
            a.base_font = b.base_font = proto.base_font;
            a.lines.assign(proto.lines.begin(), proto.lines.begin() + static_cast<long>(cut));
            b.lines.assign(proto.lines.begin() + static_cast<long>(cut), proto.lines.end());
            a.x = b.x = x;
            a.width = b.width = width;
            a.y = cursor;
            a.height = lh * static_cast<int>(cut) - gap;
            b.y = cursor + a.height + gap;  // = cursor + lh*cut
            b.height = total_height - lh * static_cast<int>(cut);
            emitted.push_back(std::move(a));
            emitted.push_back(std::move(b));
        } else {
            EmittedBlock e;
            e.base_font = proto.base_font;
            e.lines = std::move(proto.lines);
            e.x = x;
            e.width = width;
            e.y = cursor;
            e.height = total_height;
            emitted.push_back(std::move(e));
        }
        cursor += total_height;
    }

    VisualDocument doc;
    char idbuf[64];
    std::snprintf(idbuf, sizeof(idbuf), "%s-s%llu-%05zu", to_string(cfg.domain),
                  static_cast<unsigned long long>(cfg.seed), index);
    doc.doc_id = idbuf;
    doc.page_width = page_width;
    doc.page_height = std::max(1600, cursor + static_cast<int>(content.uniform_between(40, 120)));
    doc.gold_spans.emplace();

    for (std::size_t bi = 0; bi < emitted.size(); ++bi) {
        const EmittedBlock& e = emitted[bi];
        TextBlock block;
        block.id = static_cast<int>(bi);
        block.order_index = static_cast<int>(bi);
        block.bbox = {e.x, e.y, e.width, e.height};

        int token_index = 0;
        for (const auto& line : e.lines) {
            for (const auto& frag : line.frags) {
                if (!frag.gold_cls.empty()) {
                    EntitySpan span;
                    span.cls = frag.gold_cls;
                    span.block_id = block.id;
                    span.token_start = token_index;
                    span.token_end = token_index + static_cast<int>(frag.tokens.size());
                    doc.gold_spans->push_back(std::move(span));
                }
                for (const auto& text : frag.tokens) {
                    Token tok;
                    tok.text = text;
                    double f = e.base_font;
                    if (cfg.font_jitter > 0)
                        f *= 1.0 + cfg.font_jitter * (2.0 * jitter.uniform() - 1.0);
                    tok.font_size = std::round(f * 100.0) / 100.0;
                    tok.char_offset = block.text.empty() ? 0 : static_cast<int>(block.text.size()) + 1;
                    if (!block.text.empty()) block.text += " ";
                    block.text += tok.text;
                    block.tokens.push_back(std::move(tok));
                    ++token_index;
                }
            }
        }
        doc.blocks.push_back(std::move(block));
    }
    return doc;
}

}  // namespace synth_detail

/// Split assignment by stable hash of doc_id: 70/15/15 train/dev/test.
inline const char* split_of(const std::string& doc_id) {
    std::uint64_t h = fnv1a64(doc_id) % 100;
    if (h < 70) return "train";
    if (h < 85) return "dev";
    return "test";
}

/// Generate the full corpus in memory, already split.
inline Corpus generate(const GeneratorConfig& cfg) {
    cfg.validate();
    Corpus corpus;
    for (std::size_t i = 0; i < cfg.count; ++i) {
        VisualDocument doc = synth_detail::generate_document(cfg, i);
        const char* split = split_of(doc.doc_id);
        if (std::string_view(split) == "train")
            corpus.train.push_back(std::move(doc));
        else if (std::string_view(split) == "dev")
            corpus.dev.push_back(std::move(doc));
        else
            corpus.test.push_back(std::move(doc));
    }
    return corpus;
}

/// Write a corpus directory: docs/<doc_id>.json plus manifest.json with the
/// split lists.
inline void write_corpus(const Corpus& corpus, const GeneratorConfig& cfg, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "docs");

    nlohmann::json manifest;
    manifest["domain"] = to_string(cfg.domain);
    manifest["count"] = cfg.count;
    manifest["seed"] = cfg.seed;
    manifest["distractor_rate"] = cfg.distractor_rate;
    manifest["over_split_rate"] = cfg.over_split_rate;
    manifest["font_jitter"] = cfg.font_jitter;

    nlohmann::json files = nlohmann::json::object();
    nlohmann::json splits;
    for (const char* split : {"train", "dev", "test"}) splits[split] = nlohmann::json::array();

    auto dump_split = [&](const std::vector<VisualDocument>& docs, const char* split) {
        for (const auto& doc : docs) {
            std::string rel = "docs/" + doc.doc_id + ".json";
            std::ofstream out(fs::path(dir) / rel, std::ios::binary | std::ios::trunc);
            if (!out) throw std::runtime_error("cannot write " + rel);
            out << serialize_ocr_json(doc);
            splits[split].push_back(doc.doc_id);
            files[doc.doc_id] = rel;
        }
    };
    dump_split(corpus.train, "train");
    dump_split(corpus.dev, "dev");
    dump_split(corpus.test, "test");

    manifest["splits"] = std::move(splits);
    manifest["files"] = std::move(files);
    std::ofstream out(fs::path(dir) / "manifest.json", std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write corpus manifest");
    out << manifest.dump(2) << "\n";
}

/// Load a corpus directory written by write_corpus. Splits must be
/// disjoint by doc_id.
inline Corpus load_corpus(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream in(fs::path(dir) / "manifest.json");
    if (!in) throw std::runtime_error("corpus manifest not found in " + dir);
    nlohmann::json manifest = nlohmann::json::parse(in);

    Corpus corpus;
    std::set<std::string> seen_ids;
    auto load_split = [&](const char* split, std::vector<VisualDocument>& out) {
        for (const auto& jid : manifest.at("splits").at(split)) {
            std::string id = jid.get<std::string>();
            if (!seen_ids.insert(id).second)
                throw std::runtime_error("corpus splits are not disjoint: " + id);
            std::string rel = manifest.at("files").at(id).get<std::string>();
            std::ifstream doc_in(fs::path(dir) / rel, std::ios::binary);
            if (!doc_in) throw std::runtime_error("missing corpus file " + rel);
            std::string bytes((std::istreambuf_iterator<char>(doc_in)), std::istreambuf_iterator<char>());
            out.push_back(ingest_ocr_json(bytes));
        }
    };
    load_split("train", corpus.train);
    load_split("dev", corpus.dev);
    load_split("test", corpus.test);
    return corpus;
}

}  // namespace nie
