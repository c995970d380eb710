#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "nie/document.hpp"

namespace nie {

/// Word-level vocabulary with fixed special ids. Lookup lowercases; built
/// from training-split text only.
class Vocabulary {
public:
    static constexpr int kCls = 0;
    static constexpr int kSep = 1;
    static constexpr int kPad = 2;
    static constexpr int kUnk = 3;

    Vocabulary() { words_ = {"[CLS]", "[SEP]", "[PAD]", "[UNK]"}; rebuild_index(); }

    static Vocabulary build(const std::vector<VisualDocument>& train_docs) {
        // Sorted-unique insertion keeps ids independent of document order.
        std::map<std::string, std::size_t> counts;
        for (const auto& doc : train_docs)
            for (const auto& block : doc.blocks)
                for (const auto& tok : block.tokens) counts[lowercase(tok.text)]++;
        Vocabulary v;
        for (const auto& [word, n] : counts) {
            (void)n;
            v.words_.push_back(word);
        }
        v.rebuild_index();
        return v;
    }

    int id_of(const std::string& token_text) const {
        auto it = index_.find(lowercase(token_text));
        return it == index_.end() ? kUnk : it->second;
    }

    std::vector<int> encode(const std::vector<std::string>& tokens) const {
        std::vector<int> ids;
        ids.reserve(tokens.size());
        for (const auto& t : tokens) ids.push_back(id_of(t));
        return ids;
    }

    std::size_t size() const { return words_.size(); }
    const std::vector<std::string>& words() const { return words_; }

    bool contains(const std::string& token_text) const {
        return index_.find(lowercase(token_text)) != index_.end();
    }

    /// Reconstruct from a stored word list (model file load path).
    static Vocabulary from_words(std::vector<std::string> words) {
        if (words.size() < 4 || words[0] != "[CLS]" || words[1] != "[SEP]" || words[2] != "[PAD]" ||
            words[3] != "[UNK]")
            throw std::runtime_error("Vocabulary: malformed special tokens");
        Vocabulary v;
        v.words_ = std::move(words);
        v.rebuild_index();
        return v;
    }

private:
    void rebuild_index() {
        index_.clear();
        for (std::size_t i = 0; i < words_.size(); ++i) index_[words_[i]] = static_cast<int>(i);
    }

    std::vector<std::string> words_;
    std::map<std::string, int> index_;
};

}  // namespace nie
