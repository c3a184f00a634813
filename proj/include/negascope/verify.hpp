#pragma once

#include "negascope/dataset.hpp"
#include "negascope/model.hpp"
#include "negascope/tokenizer.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace negascope {

/// Outcome of one property check. `measured` is the worst observed error.
struct CheckResult {
    std::string name;
    bool passed = false;
    double measured = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

/// Every string in the parity file encodes to its recorded ids and decodes
/// back to itself. File format: {"strings": [{"text": ..., "ids": [...]}, ...]}.
CheckResult check_tokenizer_parity(const Vocabulary& vocab, const std::filesystem::path& parity_file);

/// Writing a run's own activations at every last-position site back into it
/// changes NES by less than `tolerance` on every pair.
CheckResult check_null_patch(const ModelWeights& w, const Vocabulary& vocab,
                             const std::vector<SentencePair>& pairs, double tolerance = 1e-5);

/// For every layer and position, sum_h z_h W_O[h] + b_O reproduces attn_out.
CheckResult check_head_decomposition(const ModelWeights& w,
                                     const std::vector<std::vector<TokenId>>& inputs,
                                     double tolerance = 1e-4);

/// Patching all head slices from `source` into `dest` at the last position
/// gives the same last-row logits as patching all attn_out sites.
CheckResult check_patch_equivalence(const ModelWeights& w,
                                    const std::vector<std::vector<TokenId>>& sources,
                                    const std::vector<std::vector<TokenId>>& dests,
                                    double tolerance = 1e-4);

/// Repeated passes, incremental recomputation and threaded scoring are
/// bitwise identical to a plain single-threaded pass.
CheckResult check_determinism(const ModelWeights& w, const Vocabulary& vocab,
                              const std::vector<SentencePair>& pairs);

/// Top-1 ids and final-position logits against recorded reference outputs.
/// `expected_file` holds {"checkpoint_sha256", "prompts": [{"text", "ids",
/// "top1"}]}; `logits_file` is a safetensors file with "logits" [n x vocab].
CheckResult check_reference_outputs(const ModelWeights& w, const Vocabulary& vocab,
                                    const std::filesystem::path& expected_file,
                                    const std::filesystem::path& logits_file,
                                    double tolerance = 1e-3);

/// Token-level diff of every pair touches only the negation cue: the
/// affirmative and negated prefixes share a token prefix and a token suffix
/// whose removal leaves only cue text in each.
CheckResult check_cue_only_diffs(const Vocabulary& vocab, const std::vector<SentencePair>& pairs);

} // namespace negascope
