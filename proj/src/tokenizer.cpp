#include "negascope/tokenizer.hpp"

#include "negascope/errors.hpp"
#include "unicode_tables.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

namespace negascope {

namespace {

struct Codepoint {
    char32_t value;
    std::size_t offset;  // byte offset into the source
    std::size_t length;  // UTF-8 byte length
};

std::string utf8_encode(char32_t cp) {
    std::string out;
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
    return out;
}

std::vector<Codepoint> utf8_decode(std::string_view text) {
    std::vector<Codepoint> out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        const auto lead = static_cast<unsigned char>(text[i]);
        std::size_t len = 0;
        char32_t cp = 0;
        if (lead < 0x80) {
            len = 1;
            cp = lead;
        } else if ((lead & 0xE0) == 0xC0) {
            len = 2;
            cp = lead & 0x1F;
        } else if ((lead & 0xF0) == 0xE0) {
            len = 3;
            cp = lead & 0x0F;
        } else if ((lead & 0xF8) == 0xF0) {
            len = 4;
            cp = lead & 0x07;
        } else {
            throw ArgumentError("invalid UTF-8 lead byte at offset " + std::to_string(i));
        }
        if (i + len > text.size()) {
            throw ArgumentError("truncated UTF-8 sequence at offset " + std::to_string(i));
        }
        for (std::size_t k = 1; k < len; ++k) {
            const auto cont = static_cast<unsigned char>(text[i + k]);
            if ((cont & 0xC0) != 0x80) {
                throw ArgumentError("invalid UTF-8 continuation at offset " +
                                    std::to_string(i + k));
            }
            cp = (cp << 6) | (cont & 0x3F);
        }
        static constexpr char32_t kMinForLength[] = {0, 0, 0x80, 0x800, 0x10000};
        if (cp < kMinForLength[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
            throw ArgumentError("invalid UTF-8 code point at offset " + std::to_string(i));
        }
        out.push_back({cp, i, len});
        i += len;
    }
    return out;
}

template <std::size_t N>
bool in_ranges(const detail::CodepointRange (&table)[N], char32_t cp) {
    const auto* it = std::upper_bound(std::begin(table), std::end(table), cp,
                                      [](char32_t v, const detail::CodepointRange& r) {
                                          return v < r.first;
                                      });
    if (it == std::begin(table)) {
        return false;
    }
    --it;
    return cp <= it->last;
}

bool is_letter(char32_t cp) { return in_ranges(detail::kLetterRanges, cp); }
bool is_number(char32_t cp) { return in_ranges(detail::kNumberRanges, cp); }

// Unicode White_Space property.
bool is_space(char32_t cp) {
    return (cp >= 0x09 && cp <= 0x0D) || cp == 0x20 || cp == 0x85 || cp == 0xA0 ||
           cp == 0x1680 || (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 || cp == 0x2029 ||
           cp == 0x202F || cp == 0x205F || cp == 0x3000;
}

bool is_other(char32_t cp) { return !is_space(cp) && !is_letter(cp) && !is_number(cp); }

// Length (in code points) of the GPT-2 pre-token starting at `i`.
std::size_t match_chunk(const std::vector<Codepoint>& cps, std::size_t i) {
    const std::size_t n = cps.size();
    auto at = [&](std::size_t k) -> char32_t { return k < n ? cps[k].value : 0; };

    // 's|'t|'re|'ve|'m|'ll|'d
    if (at(i) == U'\'') {
        const char32_t a = at(i + 1);
        const char32_t b = at(i + 2);
        if (a == U's' || a == U't') return 2;
        if ((a == U'r' || a == U'v') && b == U'e') return 3;
        if (a == U'm') return 2;
        if (a == U'l' && b == U'l') return 3;
        if (a == U'd') return 2;
    }

    // ` ?\p{L}+`, ` ?\p{N}+`, ` ?[^\s\p{L}\p{N}]+`
    const std::size_t start = at(i) == U' ' ? i + 1 : i;
    for (auto pred : {is_letter, is_number, is_other}) {
        if (start < n && pred(cps[start].value)) {
            std::size_t j = start;
            while (j < n && pred(cps[j].value)) ++j;
            return j - i;
        }
    }

    // `\s+(?!\S)` then `\s+`
    std::size_t j = i;
    while (j < n && is_space(cps[j].value)) ++j;
    const std::size_t run = j - i;
    if (j == n || run == 1) return run;
    return run - 1;
}

std::array<char32_t, 256> byte_to_codepoint_table() {
    std::array<char32_t, 256> table{};
    std::array<bool, 256> printable{};
    for (int b = '!'; b <= '~'; ++b) printable[b] = true;
    for (int b = 0xA1; b <= 0xAC; ++b) printable[b] = true;
    for (int b = 0xAE; b <= 0xFF; ++b) printable[b] = true;
    char32_t next = 256;
    for (int b = 0; b < 256; ++b) {
        table[b] = printable[b] ? static_cast<char32_t>(b) : next++;
    }
    return table;
}

std::string merge_key(std::string_view left, std::string_view right) {
    std::string key;
    key.reserve(left.size() + right.size() + 1);
    key.append(left);
    key.push_back(' ');
    key.append(right);
    return key;
}

void init_bytes(std::array<std::string, 256>& encoder,
                std::unordered_map<char32_t, std::uint8_t>& decoder) {
    const auto table = byte_to_codepoint_table();
    for (int b = 0; b < 256; ++b) {
        encoder[b] = utf8_encode(table[b]);
        decoder[table[b]] = static_cast<std::uint8_t>(b);
    }
}

std::vector<std::string> bpe(const Vocabulary& vocab, std::string_view chunk) {
    std::vector<std::string> word;
    word.reserve(chunk.size());
    for (char c : chunk) {
        word.push_back(vocab.byte_symbol(static_cast<std::uint8_t>(c)));
    }
    while (word.size() > 1) {
        int best_rank = std::numeric_limits<int>::max();
        std::size_t best = word.size();
        for (std::size_t k = 0; k + 1 < word.size(); ++k) {
            const int r = vocab.merge_rank(word[k], word[k + 1]);
            if (r >= 0 && r < best_rank) {
                best_rank = r;
                best = k;
            }
        }
        if (best == word.size()) break;
        const std::string left = word[best];
        const std::string right = word[best + 1];
        std::vector<std::string> merged;
        merged.reserve(word.size());
        for (std::size_t k = 0; k < word.size();) {
            if (k + 1 < word.size() && word[k] == left && word[k + 1] == right) {
                merged.push_back(left + right);
                k += 2;
            } else {
                merged.push_back(std::move(word[k]));
                ++k;
            }
        }
        word = std::move(merged);
    }
    return word;
}

} // namespace

const std::string& Vocabulary::token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
        throw RangeError("token id " + std::to_string(id) + " outside 0.." +
                         std::to_string(id_to_token_.size() - 1));
    }
    return id_to_token_[static_cast<std::size_t>(id)];
}

TokenId Vocabulary::id(std::string_view token) const {
    auto it = token_to_id_.find(std::string(token));
    if (it == token_to_id_.end()) {
        throw RangeError("token not in vocabulary");
    }
    return it->second;
}

bool Vocabulary::contains(std::string_view token) const {
    return token_to_id_.contains(std::string(token));
}

int Vocabulary::merge_rank(std::string_view left, std::string_view right) const {
    auto it = merge_ranks_.find(merge_key(left, right));
    return it == merge_ranks_.end() ? -1 : it->second;
}

int Vocabulary::symbol_byte(char32_t codepoint) const {
    auto it = byte_decoder_.find(codepoint);
    return it == byte_decoder_.end() ? -1 : it->second;
}

Vocabulary make_vocabulary(const std::unordered_map<std::string, TokenId>& token_to_id,
                           const std::vector<std::pair<std::string, std::string>>& merges,
                           std::size_t expected_size) {
    Vocabulary v;
    init_bytes(v.byte_encoder_, v.byte_decoder_);

    if (token_to_id.size() != expected_size) {
        throw IntegrityError("vocabulary has " + std::to_string(token_to_id.size()) +
                             " entries, expected " + std::to_string(expected_size));
    }
    v.id_to_token_.assign(expected_size, std::string());
    std::vector<bool> seen(expected_size, false);
    for (const auto& [tok, id] : token_to_id) {
        if (id < 0 || static_cast<std::size_t>(id) >= expected_size) {
            throw IntegrityError("token id " + std::to_string(id) + " outside 0.." +
                                 std::to_string(expected_size - 1));
        }
        if (seen[static_cast<std::size_t>(id)]) {
            throw IntegrityError("duplicate token id " + std::to_string(id));
        }
        seen[static_cast<std::size_t>(id)] = true;
        v.id_to_token_[static_cast<std::size_t>(id)] = tok;
    }
    v.token_to_id_ = token_to_id;

    for (const auto& sym : v.byte_encoder_) {
        if (!v.token_to_id_.contains(sym)) {
            throw IntegrityError("vocabulary lacks byte symbol '" + sym + "'");
        }
    }

    if (merges.empty()) {
        throw IntegrityError("merge list is empty");
    }
    std::unordered_set<std::string> constructible(v.byte_encoder_.begin(), v.byte_encoder_.end());
    v.merge_ranks_.reserve(merges.size());
    for (std::size_t r = 0; r < merges.size(); ++r) {
        const auto& [left, right] = merges[r];
        if (!constructible.contains(left) || !constructible.contains(right)) {
            throw IntegrityError("merge rule " + std::to_string(r) + " ('" + left + " " + right +
                                 "') references a symbol not built by earlier rules");
        }
        std::string joined = left + right;
        if (!v.token_to_id_.contains(joined)) {
            throw IntegrityError("merge rule " + std::to_string(r) + " produces '" + joined +
                                 "' which is not in the vocabulary");
        }
        v.merge_ranks_.emplace(merge_key(left, right), static_cast<int>(r));
        constructible.insert(std::move(joined));
    }
    v.merge_count_ = merges.size();
    return v;
}

Vocabulary load_vocab(const std::filesystem::path& vocab_file,
                      const std::filesystem::path& merges_file, std::size_t expected_size) {
    std::ifstream vin(vocab_file, std::ios::binary);
    if (!vin) {
        throw IoError("cannot open vocabulary file " + vocab_file.string());
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(vin);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(vocab_file.string() + ": " + e.what());
    }
    if (!j.is_object()) {
        throw ParseError(vocab_file.string() + ": top-level value must be an object");
    }
    std::unordered_map<std::string, TokenId> token_to_id;
    token_to_id.reserve(j.size());
    for (const auto& [tok, val] : j.items()) {
        if (!val.is_number_integer()) {
            throw ParseError(vocab_file.string() + ": id of token '" + tok + "' is not an integer");
        }
        token_to_id.emplace(tok, val.get<TokenId>());
    }

    std::ifstream min(merges_file, std::ios::binary);
    if (!min) {
        throw IoError("cannot open merges file " + merges_file.string());
    }
    std::vector<std::pair<std::string, std::string>> merges;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(min, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1 && line.starts_with("#")) continue;
        if (line.empty()) continue;
        const auto sp = line.find(' ');
        if (sp == std::string::npos || sp == 0 || sp + 1 == line.size() ||
            line.find(' ', sp + 1) != std::string::npos) {
            throw ParseError(merges_file.string() + ":" + std::to_string(lineno) +
                             ": expected two space-separated symbols");
        }
        merges.emplace_back(line.substr(0, sp), line.substr(sp + 1));
    }
    return make_vocabulary(token_to_id, merges, expected_size);
}

std::vector<std::string_view> pretokenize(std::string_view text) {
    const auto cps = utf8_decode(text);
    std::vector<std::string_view> chunks;
    std::size_t i = 0;
    while (i < cps.size()) {
        const std::size_t len = match_chunk(cps, i);
        const std::size_t begin = cps[i].offset;
        const auto& last = cps[i + len - 1];
        chunks.push_back(text.substr(begin, last.offset + last.length - begin));
        i += len;
    }
    return chunks;
}

TokenSequence encode(const Vocabulary& vocab, std::string_view text) {
    TokenSequence seq;
    seq.source_text = std::string(text);
    for (auto chunk : pretokenize(text)) {
        for (const auto& sym : bpe(vocab, chunk)) {
            seq.ids.push_back(vocab.id(sym));
        }
    }
    return seq;
}

std::string decode(const Vocabulary& vocab, std::span<const TokenId> ids) {
    std::string out;
    for (TokenId id : ids) {
        const std::string& tok = vocab.token(id);
        for (const auto& cp : utf8_decode(tok)) {
            const int b = vocab.symbol_byte(cp.value);
            if (b < 0) {
                throw IntegrityError("token " + std::to_string(id) +
                                     " contains a non-byte symbol");
            }
            out.push_back(static_cast<char>(b));
        }
    }
    return out;
}

} // namespace negascope
