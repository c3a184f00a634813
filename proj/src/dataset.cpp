#include "negascope/dataset.hpp"

#include "negascope/csv.hpp"
#include "negascope/errors.hpp"
#include "negascope/rng.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace negascope {

std::string_view form_name(NegationForm form) {
    switch (form) {
    case NegationForm::not_: return "not";
    case NegationForm::never: return "never";
    case NegationForm::no: return "no";
    case NegationForm::does_not: return "does_not";
    case NegationForm::doesnt: return "doesnt";
    case NegationForm::cant: return "cant";
    case NegationForm::cannot: return "cannot";
    }
    return "?";
}

NegationForm parse_form(std::string_view name) {
    for (auto f : kAllForms) {
        if (form_name(f) == name) return f;
    }
    throw ParseError("unknown negation form '" + std::string(name) + "'");
}

std::string_view split_name(Split split) {
    switch (split) {
    case Split::none: return "none";
    case Split::dev: return "dev";
    case Split::test: return "test";
    }
    return "?";
}

Split parse_split(std::string_view name) {
    if (name == "dev") return Split::dev;
    if (name == "test") return Split::test;
    if (name == "none" || name.empty()) return Split::none;
    throw ParseError("unknown split '" + std::string(name) + "'");
}

std::vector<NegationForm> Template::forms() const {
    std::vector<NegationForm> out;
    for (const auto& [f, _] : negated) out.push_back(f);
    return out;
}

std::size_t Template::capacity() const {
    const std::size_t fillers = paired ? std::min(subjects.size(), objects.size())
                                       : subjects.size() * objects.size();
    return frames.size() * fillers;
}

namespace {

std::string fill(std::string_view pattern, const CueText& cue, std::string_view subject) {
    std::string out;
    for (std::size_t i = 0; i < pattern.size();) {
        if (pattern.substr(i).starts_with("{lead}")) {
            out += cue.lead;
            i += 6;
        } else if (pattern.substr(i).starts_with("{cue}")) {
            out += cue.cue;
            i += 5;
        } else if (pattern.substr(i).starts_with("{x}")) {
            out += subject;
            i += 3;
        } else {
            out.push_back(pattern[i]);
            ++i;
        }
    }
    // A lead slot that is empty leaves no dangling space.
    if (cue.lead.empty() && !out.empty() && out.front() == ' ') out.erase(0, 1);
    return out;
}

std::string zero_pad(std::size_t v, int width) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%0*zu", width, v);
    return buf;
}

} // namespace

std::vector<SentencePair> generate_corpus(const std::vector<Template>& templates,
                                          std::size_t total, std::uint64_t seed) {
    struct Stratum {
        const Template* tmpl;
        NegationForm form;
        const CueText* cue;
    };
    std::vector<Stratum> strata;
    for (const auto& t : templates) {
        for (const auto& [form, cue] : t.negated) strata.push_back({&t, form, &cue});
    }
    std::vector<SentencePair> out;
    if (total == 0) return out;
    if (strata.empty()) {
        throw CapacityError("no (template, form) strata to draw from");
    }

    const std::size_t base = total / strata.size();
    const std::size_t extra = total % strata.size();
    out.reserve(total);
    for (std::size_t s = 0; s < strata.size(); ++s) {
        const auto& st = strata[s];
        const Template& t = *st.tmpl;
        const std::size_t need = base + (s < extra ? 1 : 0);
        const std::size_t cap = t.capacity();
        if (need > cap) {
            throw CapacityError("stratum " + t.name + "/" + std::string(form_name(st.form)) +
                                " needs " + std::to_string(need) + " distinct pairs but only " +
                                std::to_string(cap) + " exist (short by " +
                                std::to_string(need - cap) + ")");
        }
        std::vector<std::size_t> combos(cap);
        std::iota(combos.begin(), combos.end(), std::size_t{0});
        Rng rng(mix_seed(seed, s));
        rng.shuffle(std::span<std::size_t>(combos));

        const std::size_t per_frame = cap / t.frames.size();
        for (std::size_t i = 0; i < need; ++i) {
            const std::size_t c = combos[i];
            const std::size_t frame = c / per_frame;
            const std::size_t rest = c % per_frame;
            std::size_t subj = rest;
            std::size_t obj = rest;
            if (!t.paired) {
                subj = rest / t.objects.size();
                obj = rest % t.objects.size();
            }
            SentencePair p;
            p.id = t.name + "-" + std::string(form_name(st.form)) + "-" + zero_pad(i, 4);
            p.template_name = t.name;
            p.form = st.form;
            p.affirmative_prefix = fill(t.frames[frame], t.affirmative, t.subjects[subj]);
            p.negated_prefix = fill(t.frames[frame], *st.cue, t.subjects[subj]);
            p.target = " " + t.objects[obj];
            out.push_back(std::move(p));
        }
    }
    return out;
}

CanAbilitySlice build_can_ability_slice(const std::vector<SentencePair>& corpus,
                                        const SliceConfig& config, std::uint64_t seed) {
    const std::size_t n_forms = kCanAbilityForms.size();
    if (config.dev_size + config.test_size != n_forms * config.per_form) {
        throw ArgumentError("dev_size + test_size must equal " + std::to_string(n_forms) +
                            " * per_form");
    }
    CanAbilitySlice slice;
    for (std::size_t fi = 0; fi < n_forms; ++fi) {
        const NegationForm form = kCanAbilityForms[fi];
        std::vector<const SentencePair*> pool;
        for (const auto& p : corpus) {
            if (p.template_name == "can_ability" && p.form == form) pool.push_back(&p);
        }
        if (pool.size() < config.per_form) {
            throw CapacityError("can_ability/" + std::string(form_name(form)) + " has " +
                                std::to_string(pool.size()) + " pairs, " +
                                std::to_string(config.per_form) + " required");
        }
        Rng rng(mix_seed(seed, 1000 + fi));
        rng.shuffle(std::span<const SentencePair*>(pool));
        const std::size_t dev_n =
            config.dev_size / n_forms + (fi < config.dev_size % n_forms ? 1 : 0);
        for (std::size_t i = 0; i < config.per_form; ++i) {
            SentencePair p = *pool[i];
            if (i < dev_n) {
                p.split = Split::dev;
                slice.dev.push_back(std::move(p));
            } else {
                p.split = Split::test;
                slice.test.push_back(std::move(p));
            }
        }
    }
    return slice;
}

void mark_splits(std::vector<SentencePair>& corpus, const CanAbilitySlice& slice) {
    std::unordered_map<std::string, Split> by_id;
    for (const auto& p : slice.dev) by_id[p.id] = Split::dev;
    for (const auto& p : slice.test) by_id[p.id] = Split::test;
    for (auto& p : corpus) {
        auto it = by_id.find(p.id);
        p.split = it == by_id.end() ? Split::none : it->second;
    }
}

namespace {

const std::vector<std::string> kPairColumns = {
    "id", "template", "form", "affirmative_prefix", "negated_prefix", "target", "split"};

} // namespace

std::string pairs_csv(const std::vector<SentencePair>& pairs) {
    std::ostringstream out;
    write_csv_row(out, kPairColumns);
    for (const auto& p : pairs) {
        write_csv_row(out, {p.id, p.template_name,
                            p.form ? std::string(form_name(*p.form)) : std::string(),
                            p.affirmative_prefix, p.negated_prefix, p.target,
                            std::string(split_name(p.split))});
    }
    return out.str();
}

void write_pairs_csv(const std::filesystem::path& path, const std::vector<SentencePair>& pairs) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << pairs_csv(pairs);
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

std::vector<SentencePair> read_pairs_csv(const std::filesystem::path& path) {
    const auto rows = read_csv(path);
    if (rows.empty() || rows.front().fields != kPairColumns) {
        throw ParseError(path.string() + ": expected header " +
                         "id,template,form,affirmative_prefix,negated_prefix,target,split");
    }
    std::vector<SentencePair> out;
    out.reserve(rows.size() - 1);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& f = rows[r].fields;
        if (f.size() != kPairColumns.size()) {
            throw ParseError(path.string() + ":" + std::to_string(rows[r].line) + ": expected " +
                             std::to_string(kPairColumns.size()) + " fields, got " +
                             std::to_string(f.size()));
        }
        SentencePair p;
        p.id = f[0];
        p.template_name = f[1];
        if (!f[2].empty()) p.form = parse_form(f[2]);
        p.affirmative_prefix = f[3];
        p.negated_prefix = f[4];
        p.target = f[5];
        p.split = parse_split(f[6]);
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<ExternalRecord> load_external_pairs(const std::filesystem::path& file,
                                                const ExternalColumns& columns) {
    const auto rows = read_csv(file);
    if (rows.empty()) {
        throw EmptyInputError(file.string() + ": file is empty");
    }
    const auto& header = rows.front().fields;
    auto column = [&](const std::string& name) -> std::ptrdiff_t {
        auto it = std::find(header.begin(), header.end(), name);
        return it == header.end() ? -1 : it - header.begin();
    };
    const auto ca = column(columns.affirmative);
    const auto cn = column(columns.negated);
    const auto cl = column(columns.label);
    if (ca < 0 || cn < 0) {
        throw ParseError(file.string() + ": header lacks columns '" + columns.affirmative +
                         "' and/or '" + columns.negated + "'");
    }
    if (rows.size() == 1) {
        throw EmptyInputError(file.string() + ": no data rows after the header");
    }
    std::vector<ExternalRecord> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& f = rows[r].fields;
        if (f.size() != header.size()) {
            throw ParseError(file.string() + ": row " + std::to_string(r) + " (line " +
                             std::to_string(rows[r].line) + ") has " + std::to_string(f.size()) +
                             " fields, expected " + std::to_string(header.size()));
        }
        ExternalRecord rec;
        rec.row = r;
        rec.affirmative = f[static_cast<std::size_t>(ca)];
        rec.negated = f[static_cast<std::size_t>(cn)];
        if (cl >= 0) rec.label = f[static_cast<std::size_t>(cl)];
        out.push_back(std::move(rec));
    }
    return out;
}

SentencePair align_pair(const Vocabulary& vocab, std::string_view affirmative,
                        std::string_view negated) {
    if (affirmative.empty() || negated.empty()) {
        throw AlignmentError("both sentences must be non-empty");
    }
    const auto a = encode(vocab, affirmative).ids;
    const auto n = encode(vocab, negated).ids;
    std::size_t common = 0;
    while (common < a.size() && common < n.size() &&
           a[a.size() - 1 - common] == n[n.size() - 1 - common]) {
        ++common;
    }
    if (common == 0) {
        throw AlignmentError("sentences share no final token");
    }
    if (common >= std::min(a.size(), n.size())) {
        throw AlignmentError("common suffix covers a whole sentence; prefix would be empty");
    }
    std::size_t s = common;
    for (; s > 0; --s) {
        const std::span<const TokenId> ap(a.data(), a.size() - s);
        const std::span<const TokenId> np(n.data(), n.size() - s);
        const std::span<const TokenId> tt(a.data() + a.size() - s, s);
        SentencePair p;
        p.template_name = "external";
        p.affirmative_prefix = decode(vocab, ap);
        p.negated_prefix = decode(vocab, np);
        p.target = decode(vocab, tt);
        const auto re_a = encode(vocab, p.affirmative_prefix).ids;
        const auto re_n = encode(vocab, p.negated_prefix).ids;
        const auto re_t = encode(vocab, p.target).ids;
        if (std::equal(re_a.begin(), re_a.end(), ap.begin(), ap.end()) &&
            std::equal(re_n.begin(), re_n.end(), np.begin(), np.end()) &&
            std::equal(re_t.begin(), re_t.end(), tt.begin(), tt.end())) {
            return p;
        }
    }
    throw AlignmentError("no token boundary re-encodes consistently");
}

AlignedExternal align_external(const Vocabulary& vocab,
                               const std::vector<ExternalRecord>& records) {
    AlignedExternal out;
    for (const auto& rec : records) {
        try {
            SentencePair p = align_pair(vocab, rec.affirmative, rec.negated);
            p.id = "external-" + zero_pad(rec.row, 4);
            out.pairs.push_back(std::move(p));
        } catch (const AlignmentError& e) {
            out.skipped.emplace_back(rec.row, e.what());
        } catch (const ArgumentError& e) {
            out.skipped.emplace_back(rec.row, e.what());
        }
    }
    return out;
}

std::map<std::string, std::size_t> stratum_counts(const std::vector<SentencePair>& pairs) {
    std::map<std::string, std::size_t> counts;
    for (const auto& p : pairs) {
        ++counts[p.template_name + "/" + (p.form ? std::string(form_name(*p.form)) : "-")];
    }
    return counts;
}

} // namespace negascope
