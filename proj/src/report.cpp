#include "negascope/report.hpp"

#include "negascope/csv.hpp"
#include "negascope/errors.hpp"
#include "negascope/hash.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace negascope {

namespace {

std::string ci_field(const std::optional<double>& ci) {
    return ci ? format_number(*ci) : std::string();
}

std::string render(const std::vector<std::vector<std::string>>& rows) {
    std::ostringstream out;
    for (const auto& r : rows) write_csv_row(out, r);
    return out.str();
}

std::string num(std::size_t v) { return std::to_string(v); }

} // namespace

std::string baseline_csv(const std::vector<TemplateRow>& rows) {
    std::vector<std::vector<std::string>> t{{"template", "n", "mean", "median", "failure_rate", "ci"}};
    for (const auto& r : rows) {
        t.push_back({r.template_name, num(r.stats.n), format_number(r.stats.mean),
                     format_number(r.stats.median), format_number(r.stats.failure_rate),
                     ci_field(r.stats.ci_half_width)});
    }
    return render(t);
}

std::string layers_csv(const std::vector<LayerRow>& rows) {
    std::vector<std::vector<std::string>> t{{"layer", "n", "mean_delta", "ci"}};
    for (const auto& r : rows) {
        t.push_back({std::to_string(r.layer), num(r.stats.n), format_number(r.stats.mean),
                     ci_field(r.stats.ci_half_width)});
    }
    return render(t);
}

std::string heads_csv(const HeadRanking& ranking) {
    std::vector<std::vector<std::string>> t{{"layer", "head", "rank", "mean_delta", "ci"}};
    for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
        const auto& e = ranking.entries[i];
        t.push_back({std::to_string(e.head.layer), std::to_string(e.head.head), num(i + 1),
                     format_number(e.mean_delta_nes), ci_field(e.ci_half_width)});
    }
    return render(t);
}

std::string curves_csv(const std::vector<CurvePoint>& points) {
    std::vector<std::vector<std::string>> t{{"k", "condition", "seed", "n", "mean_nes", "ci"}};
    for (const auto& p : points) {
        t.push_back({num(p.k), std::string(curve_condition_name(p.condition)),
                     p.seed ? std::to_string(*p.seed) : std::string(), num(p.n),
                     format_number(p.mean_nes), ci_field(p.ci_half_width)});
    }
    return render(t);
}

std::string crossform_csv(const std::vector<FormRow>& rows) {
    std::vector<std::vector<std::string>> t{{"form", "n", "delta_mean", "ci"}};
    for (const auto& r : rows) {
        t.push_back({std::string(form_name(r.form)), num(r.stats.n), format_number(r.stats.mean),
                     ci_field(r.stats.ci_half_width)});
    }
    return render(t);
}

std::string jaccard_csv(const JaccardMatrix& matrix) {
    std::vector<std::vector<std::string>> t{{"form_a", "form_b", "value"}};
    for (std::size_t a = 0; a < matrix.forms.size(); ++a) {
        for (std::size_t b = 0; b < matrix.forms.size(); ++b) {
            t.push_back({std::string(form_name(matrix.forms[a])),
                         std::string(form_name(matrix.forms[b])),
                         format_number(matrix.values[a][b])});
        }
    }
    return render(t);
}

std::string external_csv(const ExternalResult& result) {
    std::vector<std::vector<std::string>> t{{"condition", "n", "mean_nes", "ci"}};
    auto add = [&](const char* name, const AggregateStats& s) {
        t.push_back({name, num(s.n), format_number(s.mean), ci_field(s.ci_half_width)});
    };
    add("baseline", result.baseline);
    add("ablated", result.ablated);
    add("rescued", result.rescued);
    return render(t);
}

std::string headset_csv(const HeadSet& set, const HeadRanking& ranking) {
    std::vector<std::vector<std::string>> t{{"layer", "head", "rank", "mean_delta_nes"}};
    for (const auto& h : set.heads()) {
        const auto it = std::find_if(ranking.entries.begin(), ranking.entries.end(),
                                     [&](const HeadRankingEntry& e) { return e.head == h; });
        if (it == ranking.entries.end()) {
            throw CompletenessError("head " + to_string(h) + " is missing from the ranking");
        }
        t.push_back({std::to_string(h.layer), std::to_string(h.head),
                     num(static_cast<std::size_t>(it - ranking.entries.begin()) + 1),
                     format_number(it->mean_delta_nes)});
    }
    return render(t);
}

std::string nes_records_csv(const std::vector<NesRecord>& records) {
    std::vector<std::vector<std::string>> t{{"pair_id", "condition", "nes", "delta_nes"}};
    for (const auto& r : records) {
        t.push_back({r.pair_id, r.condition.key(), format_number(r.nes),
                     r.delta_nes ? format_number(*r.delta_nes) : std::string()});
    }
    return render(t);
}

HeadRanking read_heads_csv(const std::filesystem::path& path) {
    const auto rows = read_csv(path);
    const std::vector<std::string> header{"layer", "head", "rank", "mean_delta", "ci"};
    if (rows.empty() || rows.front().fields != header) {
        throw ParseError(path.string() + ": expected header layer,head,rank,mean_delta,ci");
    }
    auto integer = [&](const CsvRow& row, const std::string& s) {
        try {
            std::size_t used = 0;
            const long v = std::stol(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::logic_error&) {
            throw ParseError(path.string() + ":" + std::to_string(row.line) + ": bad integer '" +
                             s + "'");
        }
    };
    auto real = [&](const CsvRow& row, const std::string& s) {
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::logic_error&) {
            throw ParseError(path.string() + ":" + std::to_string(row.line) + ": bad number '" +
                             s + "'");
        }
    };
    std::vector<std::pair<long, HeadRankingEntry>> ranked;
    std::set<HeadId> seen;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row.fields.size() != header.size()) {
            throw ParseError(path.string() + ":" + std::to_string(row.line) + ": expected 5 fields");
        }
        HeadRankingEntry e;
        e.head = {static_cast<int>(integer(row, row.fields[0])),
                  static_cast<int>(integer(row, row.fields[1]))};
        validate(e.head);
        e.mean_delta_nes = real(row, row.fields[3]);
        if (!row.fields[4].empty()) e.ci_half_width = real(row, row.fields[4]);
        if (!seen.insert(e.head).second) {
            throw CompletenessError(path.string() + " lists " + to_string(e.head) + " twice");
        }
        ranked.emplace_back(integer(row, row.fields[2]), e);
    }
    if (ranked.size() != static_cast<std::size_t>(kHeadCount)) {
        throw CompletenessError(path.string() + " ranks " + std::to_string(ranked.size()) +
                                " heads, expected 144");
    }
    std::sort(ranked.begin(), ranked.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    HeadRanking out;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        if (ranked[i].first != static_cast<long>(i + 1)) {
            throw CompletenessError(path.string() + ": ranks must run 1..144");
        }
        out.entries.push_back(ranked[i].second);
    }
    return out;
}

// --- SVG -------------------------------------------------------------------

namespace {

constexpr double kWidth = 720, kHeight = 420;
constexpr double kLeft = 70, kRight = 170, kTop = 40, kBottom = 70;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    if (std::fabs(v) < 1e-12) v = 0.0;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

struct Axis {
    double lo = 0, hi = 1;

    void include(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void pad() {
        if (hi - lo < 1e-12) {
            lo -= 0.5;
            hi += 0.5;
        }
        const double m = (hi - lo) * 0.05;
        lo -= m;
        hi += m;
    }
};

class Canvas {
public:
    Canvas(const std::string& title, Axis y) : y_(y) {
        out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
             << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight
             << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
             << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
             << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" "
             << "font-size=\"14\">" << escape(title) << "</text>\n";
    }

    double py(double v) const {
        const double h = kHeight - kTop - kBottom;
        return kTop + h * (1.0 - (v - y_.lo) / (y_.hi - y_.lo));
    }

    void y_axis(const std::string& label) {
        const double x0 = kLeft, x1 = kWidth - kRight;
        for (int i = 0; i <= 5; ++i) {
            const double v = y_.lo + (y_.hi - y_.lo) * i / 5.0;
            line(x0 - 4, py(v), x0, py(v), "black");
            text(x0 - 7, py(v) + 4, tick_label(v), "end");
        }
        if (y_.lo < 0 && y_.hi > 0) line(x0, py(0), x1, py(0), "#999", true);
        line(x0, kTop, x0, kHeight - kBottom, "black");
        line(x0, kHeight - kBottom, x1, kHeight - kBottom, "black");
        out_ << "<text transform=\"translate(16," << fmt((kTop + kHeight - kBottom) / 2)
             << ") rotate(-90)\" text-anchor=\"middle\">" << escape(label) << "</text>\n";
    }

    void line(double x0, double y0, double x1, double y1, const char* color, bool dashed = false) {
        out_ << "<line x1=\"" << fmt(x0) << "\" y1=\"" << fmt(y0) << "\" x2=\"" << fmt(x1)
             << "\" y2=\"" << fmt(y1) << "\" stroke=\"" << color << "\""
             << (dashed ? " stroke-dasharray=\"4 3\"" : "") << "/>\n";
    }

    void text(double x, double y, const std::string& s, const char* anchor = "start",
              int rotate = 0) {
        out_ << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" text-anchor=\"" << anchor
             << "\"";
        if (rotate != 0) {
            out_ << " transform=\"rotate(" << rotate << " " << fmt(x) << " " << fmt(y) << ")\"";
        }
        out_ << ">" << escape(s) << "</text>\n";
    }

    std::ostringstream& raw() { return out_; }

    std::string finish() {
        out_ << "</svg>\n";
        return out_.str();
    }

private:
    Axis y_;
    std::ostringstream out_;
};

} // namespace

std::string bar_chart_svg(const std::string& title, const std::string& y_label,
                          const std::vector<Bar>& bars) {
    Axis y{0, 0};
    for (const auto& b : bars) {
        y.include(b.value + b.error.value_or(0.0));
        y.include(b.value - b.error.value_or(0.0));
    }
    y.pad();
    Canvas c(title, y);
    c.y_axis(y_label);
    const double plot_w = kWidth - kRight - kLeft;
    const double slot = bars.empty() ? plot_w : plot_w / static_cast<double>(bars.size());
    for (std::size_t i = 0; i < bars.size(); ++i) {
        const auto& b = bars[i];
        const double cx = kLeft + slot * (static_cast<double>(i) + 0.5);
        const double w = slot * 0.7;
        const double top = c.py(std::max(b.value, 0.0)), bottom = c.py(std::min(b.value, 0.0));
        c.raw() << "<rect x=\"" << fmt(cx - w / 2) << "\" y=\"" << fmt(top) << "\" width=\""
                << fmt(w) << "\" height=\"" << fmt(bottom - top) << "\" fill=\"" << kPalette[0]
                << "\"/>\n";
        if (b.error) {
            c.line(cx, c.py(b.value - *b.error), cx, c.py(b.value + *b.error), "black");
        }
        c.text(cx, kHeight - kBottom + 14, b.label, "end", -45);
    }
    return c.finish();
}

std::string line_chart_svg(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<Series>& series) {
    Axis y{0, 0};
    Axis x{0, 0};
    bool first_x = true;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.y.size(); ++i) {
            const double e = s.error.empty() ? 0.0 : s.error[i];
            y.include(s.y[i] + e);
            y.include(s.y[i] - e);
            if (first_x) {
                x = {s.x[i], s.x[i]};
                first_x = false;
            }
            x.include(s.x[i]);
        }
    }
    y.pad();
    if (x.hi - x.lo < 1e-12) x.hi = x.lo + 1;
    Canvas c(title, y);
    c.y_axis(y_label);
    const double plot_w = kWidth - kRight - kLeft;
    auto px = [&](double v) { return kLeft + plot_w * (v - x.lo) / (x.hi - x.lo); };

    std::set<double> xs;
    for (const auto& s : series) xs.insert(s.x.begin(), s.x.end());
    for (double v : xs) {
        c.line(px(v), kHeight - kBottom, px(v), kHeight - kBottom + 4, "black");
        c.text(px(v), kHeight - kBottom + 16, tick_label(v), "middle");
    }
    c.text(kLeft + plot_w / 2, kHeight - kBottom + 40, x_label, "middle");

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kPalette[si % std::size(kPalette)];
        c.raw() << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\""
                << (s.dashed ? " stroke-dasharray=\"5 3\"" : "") << " points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            c.raw() << (i ? " " : "") << fmt(px(s.x[i])) << "," << fmt(c.py(s.y[i]));
        }
        c.raw() << "\"/>\n";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            c.raw() << "<circle cx=\"" << fmt(px(s.x[i])) << "\" cy=\"" << fmt(c.py(s.y[i]))
                    << "\" r=\"3\" fill=\"" << color << "\"/>\n";
            if (!s.error.empty()) {
                c.line(px(s.x[i]), c.py(s.y[i] - s.error[i]), px(s.x[i]),
                       c.py(s.y[i] + s.error[i]), color);
            }
        }
        const double ly = kTop + 14 + 18 * static_cast<double>(si);
        c.line(kWidth - kRight + 12, ly - 4, kWidth - kRight + 34, ly - 4, color, s.dashed);
        c.text(kWidth - kRight + 40, ly, s.label);
    }
    return c.finish();
}

std::string baseline_svg(const std::vector<TemplateRow>& rows) {
    std::vector<Bar> bars;
    for (const auto& r : rows) bars.push_back({r.template_name, r.stats.mean, r.stats.ci_half_width});
    return bar_chart_svg("Baseline NES per template", "mean NES (nats)", bars);
}

std::string layers_svg(const std::vector<LayerRow>& rows) {
    Series s{"mean delta NES", {}, {}, {}, false};
    for (const auto& r : rows) {
        s.x.push_back(r.layer);
        s.y.push_back(r.stats.mean);
        s.error.push_back(r.stats.ci_half_width.value_or(0.0));
    }
    return line_chart_svg("Layer-wise attention-output patching", "layer", "mean delta NES (nats)",
                          {s});
}

std::string heads_svg(const HeadRanking& ranking, std::size_t shown) {
    std::vector<Bar> bars;
    for (std::size_t i = 0; i < std::min(shown, ranking.entries.size()); ++i) {
        const auto& e = ranking.entries[i];
        bars.push_back({to_string(e.head), e.mean_delta_nes, e.ci_half_width});
    }
    return bar_chart_svg("Top heads by patching effect", "mean delta NES (nats)", bars);
}

std::string curves_svg(const std::vector<CurvePoint>& points) {
    const CurvePoint* base = nullptr;
    for (const auto& p : points) {
        if (p.condition == CurveCondition::baseline) base = &p;
    }
    Series ablated{"ablated top-k", {}, {}, {}, false};
    Series rescued{"rescued top-k", {}, {}, {}, false};
    Series control{"random control", {}, {}, {}, true};
    if (base) {
        for (auto* s : {&ablated, &rescued, &control}) {
            s->x.push_back(0);
            s->y.push_back(base->mean_nes);
            s->error.push_back(base->ci_half_width.value_or(0.0));
        }
    }
    // Control points are averaged over seeds for the plot; curves.csv keeps each seed.
    std::map<std::size_t, std::pair<double, std::size_t>> control_mean;
    for (const auto& p : points) {
        switch (p.condition) {
        case CurveCondition::ablated:
            ablated.x.push_back(static_cast<double>(p.k));
            ablated.y.push_back(p.mean_nes);
            ablated.error.push_back(p.ci_half_width.value_or(0.0));
            break;
        case CurveCondition::rescued:
            rescued.x.push_back(static_cast<double>(p.k));
            rescued.y.push_back(p.mean_nes);
            rescued.error.push_back(p.ci_half_width.value_or(0.0));
            break;
        case CurveCondition::random_control: {
            auto& [sum, count] = control_mean[p.k];
            sum += p.mean_nes;
            ++count;
            break;
        }
        case CurveCondition::baseline: break;
        }
    }
    for (const auto& [k, sc] : control_mean) {
        control.x.push_back(static_cast<double>(k));
        control.y.push_back(sc.first / static_cast<double>(sc.second));
        control.error.push_back(0.0);
    }
    return line_chart_svg("Ablation and rescue of top-k heads", "k (heads)", "mean NES (nats)",
                          {ablated, rescued, control});
}

std::string crossform_svg(const std::vector<FormRow>& rows) {
    std::vector<Bar> bars;
    for (const auto& r : rows) {
        bars.push_back({std::string(form_name(r.form)), r.stats.mean, r.stats.ci_half_width});
    }
    return bar_chart_svg("Ablation effect per negation form", "mean NES change (nats)", bars);
}

std::string external_svg(const ExternalResult& result) {
    return bar_chart_svg("External pairs", "mean NES (nats)",
                         {{"baseline", result.baseline.mean, result.baseline.ci_half_width},
                          {"ablated", result.ablated.mean, result.ablated.ci_half_width},
                          {"rescued", result.rescued.mean, result.rescued.ci_half_width}});
}

// --- files and manifest ------------------------------------------------------

void write_text_file(const std::filesystem::path& path, std::string_view content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + path.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw IoError("failed writing " + path.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

FileEntry hashed_entry(const std::filesystem::path& dir, const std::string& file) {
    return {file, sha256_file(dir / file)};
}

namespace {

nlohmann::ordered_json entries_json(const std::vector<FileEntry>& entries) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& e : entries) arr.push_back({{"path", e.path}, {"sha256", e.sha256}});
    return arr;
}

std::vector<FileEntry> entries_from(const nlohmann::ordered_json& j) {
    std::vector<FileEntry> out;
    for (const auto& e : j) out.push_back({e.at("path").get<std::string>(), e.at("sha256").get<std::string>()});
    return out;
}

} // namespace

nlohmann::ordered_json RunManifest::to_json() const {
    nlohmann::ordered_json j;
    j["tool_version"] = tool_version;
    j["checkpoint"] = {{"path", checkpoint_path}, {"sha256", checkpoint_sha256}};
    j["inputs"] = entries_json(inputs);
    j["seeds"] = seeds;
    j["config"] = config;
    j["outputs"] = entries_json(outputs);
    auto stages = nlohmann::ordered_json::object();
    for (const auto& [name, secs] : stage_seconds) stages[name] = secs;
    j["wall_clock_seconds"] = stages;
    return j;
}

RunManifest RunManifest::from_json(const nlohmann::ordered_json& j) {
    try {
        RunManifest m;
        m.tool_version = j.at("tool_version").get<std::string>();
        m.checkpoint_path = j.at("checkpoint").at("path").get<std::string>();
        m.checkpoint_sha256 = j.at("checkpoint").at("sha256").get<std::string>();
        m.inputs = entries_from(j.at("inputs"));
        m.seeds = j.at("seeds");
        m.config = j.at("config");
        m.outputs = entries_from(j.at("outputs"));
        for (const auto& [name, secs] : j.at("wall_clock_seconds").items()) {
            m.stage_seconds.emplace_back(name, secs.get<double>());
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed run manifest: ") + e.what());
    }
}

std::filesystem::path create_run_dir(const std::filesystem::path& root) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
    std::error_code ec;
    std::filesystem::create_directories(root / "runs", ec);
    if (ec) throw IoError("cannot create " + (root / "runs").string() + ": " + ec.message());
    for (int n = 1;; ++n) {
        auto dir = root / "runs" / (n == 1 ? std::string(stamp) : std::string(stamp) + "-" + std::to_string(n));
        if (std::filesystem::create_directory(dir, ec)) return dir;
        if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    }
}

void write_latest_pointer(const std::filesystem::path& root, const std::filesystem::path& run_dir) {
    write_text_file(root / "latest",
                    std::filesystem::relative(run_dir, root).generic_string() + "\n");
}

std::optional<std::filesystem::path> latest_run(const std::filesystem::path& root) {
    std::ifstream in(root / "latest");
    if (!in) return std::nullopt;
    std::string rel;
    std::getline(in, rel);
    if (rel.empty()) return std::nullopt;
    auto dir = root / rel;
    if (!std::filesystem::is_directory(dir)) return std::nullopt;
    return dir;
}

} // namespace negascope
