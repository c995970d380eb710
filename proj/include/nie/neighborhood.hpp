#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "nie/document.hpp"

namespace nie {

/// Context capture mode. None realizes the vanilla no-context baseline.
enum class ContextMode { None, Top, Bottom, Overlap };

inline const char* to_string(ContextMode mode) {
    switch (mode) {
        case ContextMode::None: return "none";
        case ContextMode::Top: return "top";
        case ContextMode::Bottom: return "bottom";
        case ContextMode::Overlap: return "overlap";
    }
    return "none";
}

inline ContextMode context_mode_from_string(const std::string& s) {
    if (s == "none") return ContextMode::None;
    if (s == "top") return ContextMode::Top;
    if (s == "bottom") return ContextMode::Bottom;
    if (s == "overlap") return ContextMode::Overlap;
    throw std::invalid_argument("unknown context mode: " + s);
}

struct NeighborhoodSpec {
    ContextMode mode = ContextMode::Bottom;
    std::size_t n = 4;  // window size; mode None forces n = 0

    NeighborhoodSpec() = default;
    NeighborhoodSpec(ContextMode m, std::size_t window) : mode(m), n(m == ContextMode::None ? 0 : window) {}

    friend bool operator==(const NeighborhoodSpec&, const NeighborhoodSpec&) = default;
};

/// Neighbor block positions for target i out of N blocks, ascending, never
/// containing i. Top takes up to n blocks before, Bottom up to n after.
/// Overlap splits n across both sides; odd n puts (n+1)/2 above. Windows
/// truncate at document edges with no compensation from the other side.
inline std::vector<std::size_t> neighbor_indices(std::size_t i, std::size_t block_count,
                                                 const NeighborhoodSpec& spec) {
    if (i >= block_count) throw std::invalid_argument("neighbor_indices: block index out of range");

    std::size_t before = 0, after = 0;
    switch (spec.mode) {
        case ContextMode::None: break;
        case ContextMode::Top: before = spec.n; break;
        case ContextMode::Bottom: after = spec.n; break;
        case ContextMode::Overlap:
            before = (spec.n + 1) / 2;
            after = spec.n - before;
            break;
    }

    std::vector<std::size_t> out;
    out.reserve(before + after);
    std::size_t lo = i > before ? i - before : 0;
    for (std::size_t j = lo; j < i; ++j) out.push_back(j);
    std::size_t hi = std::min(block_count, i + after + 1);
    for (std::size_t j = i + 1; j < hi; ++j) out.push_back(j);
    return out;
}

/// Concatenate the indexed blocks' token texts in document order and keep
/// the first max_tokens.
inline std::vector<std::string> build_neighborhood_text(const VisualDocument& doc,
                                                        const std::vector<std::size_t>& indices,
                                                        std::size_t max_tokens) {
    std::vector<std::string> out;
    for (std::size_t idx : indices) {
        if (idx >= doc.blocks.size()) throw std::invalid_argument("build_neighborhood_text: index out of range");
        for (const Token& tok : doc.blocks[idx].tokens) {
            if (out.size() >= max_tokens) return out;
            out.push_back(tok.text);
        }
    }
    return out;
}

}  // namespace nie
