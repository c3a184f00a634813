#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace negascope {

using TokenId = std::int32_t;

inline constexpr std::size_t kGpt2VocabSize = 50257;

/// Byte-level BPE vocabulary in the GPT-2 layout: a token map, ranked merge
/// rules and the byte <-> printable-codepoint bijection. Immutable once loaded.
class Vocabulary {
public:
    std::size_t size() const noexcept { return id_to_token_.size(); }
    std::size_t merge_count() const noexcept { return merge_count_; }

    const std::string& token(TokenId id) const;
    TokenId id(std::string_view token) const;  // throws RangeError when absent
    bool contains(std::string_view token) const;

    /// Rank of the merge "left right", or -1 when there is no such rule.
    int merge_rank(std::string_view left, std::string_view right) const;

    /// UTF-8 encoding of the printable surrogate for a raw byte.
    const std::string& byte_symbol(std::uint8_t byte) const { return byte_encoder_[byte]; }

    /// Inverse of byte_symbol for one surrogate codepoint; -1 if not a surrogate.
    int symbol_byte(char32_t codepoint) const;

private:
    friend Vocabulary load_vocab(const std::filesystem::path&, const std::filesystem::path&,
                                 std::size_t);
    friend Vocabulary make_vocabulary(const std::unordered_map<std::string, TokenId>&,
                                      const std::vector<std::pair<std::string, std::string>>&,
                                      std::size_t);

    std::unordered_map<std::string, TokenId> token_to_id_;
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> merge_ranks_;
    std::size_t merge_count_ = 0;
    std::array<std::string, 256> byte_encoder_;
    std::unordered_map<char32_t, std::uint8_t> byte_decoder_;
};

struct TokenSequence {
    std::vector<TokenId> ids;
    std::string source_text;

    std::size_t size() const noexcept { return ids.size(); }
    bool empty() const noexcept { return ids.empty(); }
};

/// Loads a `vocab.json` token map and a `merges.txt` merge list.
/// Throws ParseError (with line numbers) on malformed input and IntegrityError
/// when the vocabulary is not a bijection onto 0..expected_size-1.
Vocabulary load_vocab(const std::filesystem::path& vocab_file,
                      const std::filesystem::path& merges_file,
                      std::size_t expected_size = kGpt2VocabSize);

/// Builds a vocabulary from in-memory tables with the same validation as load_vocab.
Vocabulary make_vocabulary(const std::unordered_map<std::string, TokenId>& token_to_id,
                           const std::vector<std::pair<std::string, std::string>>& merges,
                           std::size_t expected_size = kGpt2VocabSize);

/// Splits text into the pre-tokenization chunks of GPT-2's reference regex
/// (contractions, letter runs, number runs, punctuation runs, whitespace).
std::vector<std::string_view> pretokenize(std::string_view text);

TokenSequence encode(const Vocabulary& vocab, std::string_view text);
std::string decode(const Vocabulary& vocab, std::span<const TokenId> ids);

} // namespace negascope
