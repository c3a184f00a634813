#pragma once

#include "negascope/tokenizer.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace negascope {

enum class NegationForm { not_, never, no, does_not, doesnt, cant, cannot };

inline constexpr std::array<NegationForm, 7> kAllForms = {
    NegationForm::not_,   NegationForm::never, NegationForm::no,    NegationForm::does_not,
    NegationForm::doesnt, NegationForm::cant,  NegationForm::cannot};

/// Forms present in the can_ability analysis slice, in reporting order.
inline constexpr std::array<NegationForm, 5> kCanAbilityForms = {
    NegationForm::never, NegationForm::does_not, NegationForm::doesnt, NegationForm::cannot,
    NegationForm::cant};

std::string_view form_name(NegationForm form);
NegationForm parse_form(std::string_view name);  // throws ParseError

enum class Split { none, dev, test };

std::string_view split_name(Split split);
Split parse_split(std::string_view name);

/// Text placed into a frame's `{lead}` and `{cue}` slots for one polarity.
struct CueText {
    std::string lead;
    std::string cue;
};

/// A sentence template. Each frame is a prefix pattern with `{lead}`, `{x}`
/// and `{cue}` slots; the scored target is " " + an object word. Affirmative
/// and negated prefixes differ only in the lead/cue slot text.
struct Template {
    std::string name;
    std::vector<std::string> frames;
    std::vector<std::string> subjects;
    std::vector<std::string> objects;
    bool paired = false;  // objects[i] is the only target for subjects[i]
    CueText affirmative;
    std::vector<std::pair<NegationForm, CueText>> negated;

    std::vector<NegationForm> forms() const;
    std::size_t capacity() const;  // distinct (frame, subject, object) fillers
};

/// The eight built-in templates, in reporting order.
const std::vector<Template>& builtin_templates();
const Template& builtin_template(std::string_view name);

struct SentencePair {
    std::string id;
    std::string template_name;
    std::optional<NegationForm> form;  // absent for external pairs
    std::string affirmative_prefix;
    std::string negated_prefix;
    std::string target;
    Split split = Split::none;

    bool operator==(const SentencePair&) const = default;
};

/// Stratified corpus: `total` pairs spread over every (template, form)
/// stratum with counts differing by at most one. Throws CapacityError when a
/// stratum has fewer distinct fillers than it must supply.
std::vector<SentencePair> generate_corpus(const std::vector<Template>& templates,
                                          std::size_t total, std::uint64_t seed);

inline constexpr std::size_t kDefaultCorpusSize = 12000;

struct CanAbilitySlice {
    std::vector<SentencePair> dev;
    std::vector<SentencePair> test;
};

struct SliceConfig {
    std::size_t per_form = 268;
    std::size_t dev_size = 938;
    std::size_t test_size = 402;
};

/// Equalises the can_ability pairs to `per_form` per form and splits each form
/// into dev/test so the totals equal dev_size/test_size.
CanAbilitySlice build_can_ability_slice(const std::vector<SentencePair>& corpus,
                                        const SliceConfig& config, std::uint64_t seed);

/// Copies `slice` split labels onto the matching corpus rows (by id).
void mark_splits(std::vector<SentencePair>& corpus, const CanAbilitySlice& slice);

// Corpus CSV: id,template,form,affirmative_prefix,negated_prefix,target,split
void write_pairs_csv(const std::filesystem::path& path, const std::vector<SentencePair>& pairs);
std::string pairs_csv(const std::vector<SentencePair>& pairs);
std::vector<SentencePair> read_pairs_csv(const std::filesystem::path& path);

struct ExternalRecord {
    std::size_t row = 0;  // 1-based data row number (header excluded)
    std::string affirmative;
    std::string negated;
    std::string label;
};

struct ExternalColumns {
    std::string affirmative = "sentence1";
    std::string negated = "sentence2";
    std::string label = "label";  // optional column
};

/// Reads an external affirmative/negated sentence-pair CSV.
std::vector<ExternalRecord> load_external_pairs(const std::filesystem::path& file,
                                                const ExternalColumns& columns = {});

/// Converts a sentence pair to prefix/target form by the longest common token
/// suffix. The boundary is moved left when needed so that encoding each piece
/// separately reproduces the original token split.
SentencePair align_pair(const Vocabulary& vocab, std::string_view affirmative,
                        std::string_view negated);

struct AlignedExternal {
    std::vector<SentencePair> pairs;
    std::vector<std::pair<std::size_t, std::string>> skipped;  // (row, reason)
};

AlignedExternal align_external(const Vocabulary& vocab, const std::vector<ExternalRecord>& records);

/// Per-(template, form) counts, keyed "template/form".
std::map<std::string, std::size_t> stratum_counts(const std::vector<SentencePair>& pairs);

} // namespace negascope
