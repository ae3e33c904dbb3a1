#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "afa/errors.hpp"

namespace afa {

/// Lowercase whitespace tokenization with ASCII punctuation stripped inside
/// tokens. Bytes outside ASCII are kept verbatim.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            out.push_back(current);
            current.clear();
        }
    };
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            flush();
        } else if (std::isalnum(c) || c == '_' || c >= 128) {
            current.push_back(static_cast<char>(std::tolower(c)));
        }
        // ASCII punctuation is dropped without splitting the token
    }
    flush();
    return out;
}

/// Token <-> id mapping with fixed reserved ids. Stored ids are dense:
/// reserved 0..2, then real tokens from 3 upward ordered by descending
/// frequency with lexicographic tie-break.
class Vocab {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kMask = 2;
    static constexpr int kReserved = 3;

    Vocab() : tokens_{"<pad>", "<unk>", "<mask>"} {}

    static Vocab build(const std::vector<std::string>& corpus, int min_count = 1) {
        if (corpus.empty()) throw ContractError("Vocab::build: empty corpus");
        std::unordered_map<std::string, long> counts;
        for (const std::string& text : corpus) {
            for (std::string& tok : tokenize(text)) counts[std::move(tok)] += 1;
        }
        std::vector<std::pair<std::string, long>> ordered(counts.begin(), counts.end());
        std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        Vocab v;
        for (auto& [tok, count] : ordered) {
            if (count < min_count) continue;
            v.ids_.emplace(tok, static_cast<int>(v.tokens_.size()));
            v.tokens_.push_back(tok);
        }
        return v;
    }

    /// Rebuild from an ordered token list (ids kReserved..); used by loaders.
    static Vocab from_tokens(const std::vector<std::string>& tokens) {
        Vocab v;
        for (const std::string& tok : tokens) {
            v.ids_.emplace(tok, static_cast<int>(v.tokens_.size()));
            v.tokens_.push_back(tok);
        }
        return v;
    }

    std::size_t size() const { return tokens_.size(); }

    int id(std::string_view token) const {
        auto it = ids_.find(std::string(token));
        return it == ids_.end() ? kUnk : it->second;
    }

    bool contains(std::string_view token) const { return ids_.count(std::string(token)) > 0; }

    const std::string& token(int id) const {
        if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
            throw IndexError("Vocab::token: id " + std::to_string(id) + " out of range");
        }
        return tokens_[static_cast<std::size_t>(id)];
    }

    std::vector<int> encode(std::string_view text, std::size_t max_len = 0) const {
        std::vector<int> ids;
        for (const std::string& tok : tokenize(text)) {
            if (max_len > 0 && ids.size() >= max_len) break;
            ids.push_back(id(tok));
        }
        return ids;
    }

    std::vector<std::string> decode(const std::vector<int>& ids) const {
        std::vector<std::string> out;
        out.reserve(ids.size());
        for (int i : ids) out.push_back(token(i));
        return out;
    }

    /// Real tokens in id order (excludes the reserved entries).
    std::vector<std::string> stored_tokens() const {
        return {tokens_.begin() + kReserved, tokens_.end()};
    }

private:
    std::unordered_map<std::string, int> ids_;
    std::vector<std::string> tokens_;
};

} // namespace afa
