#pragma once

#include "negascope/experiments.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace negascope {

// CSV renderings. Headers are fixed; numbers use format_number and an absent
// confidence interval is an empty field.
std::string baseline_csv(const std::vector<TemplateRow>& rows);
std::string layers_csv(const std::vector<LayerRow>& rows);
std::string heads_csv(const HeadRanking& ranking);
std::string curves_csv(const std::vector<CurvePoint>& points);
std::string crossform_csv(const std::vector<FormRow>& rows);
std::string jaccard_csv(const JaccardMatrix& matrix);
std::string external_csv(const ExternalResult& result);
/// One row per head of `set`: layer, head, rank, mean_delta_nes, with rank
/// and score looked up in `ranking`.
std::string headset_csv(const HeadSet& set, const HeadRanking& ranking);
std::string nes_records_csv(const std::vector<NesRecord>& records);

/// Reads heads.csv back in rank order. Throws ParseError on a malformed file
/// and CompletenessError unless it ranks all 144 heads exactly once.
HeadRanking read_heads_csv(const std::filesystem::path& path);

// Static SVG charts built from the same rows as the CSVs.
std::string baseline_svg(const std::vector<TemplateRow>& rows);
std::string layers_svg(const std::vector<LayerRow>& rows);
std::string heads_svg(const HeadRanking& ranking, std::size_t shown = 20);
std::string curves_svg(const std::vector<CurvePoint>& points);
std::string crossform_svg(const std::vector<FormRow>& rows);
std::string external_svg(const ExternalResult& result);

struct Bar {
    std::string label;
    double value = 0.0;
    std::optional<double> error;
};

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> error;  // empty or one per point
    bool dashed = false;
};

std::string bar_chart_svg(const std::string& title, const std::string& y_label,
                          const std::vector<Bar>& bars);
std::string line_chart_svg(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<Series>& series);

/// Writes `content` via a temporary file and rename. Throws IoError.
void write_text_file(const std::filesystem::path& path, std::string_view content);

struct FileEntry {
    std::string path;
    std::string sha256;
};

struct RunManifest {
    std::string tool_version;
    std::string checkpoint_path;
    std::string checkpoint_sha256;
    std::vector<FileEntry> inputs;
    nlohmann::ordered_json seeds = nlohmann::ordered_json::object();
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    std::vector<FileEntry> outputs;
    std::vector<std::pair<std::string, double>> stage_seconds;

    nlohmann::ordered_json to_json() const;
    static RunManifest from_json(const nlohmann::ordered_json& j);
};

/// Records `file` (relative to `dir`) with its hash.
FileEntry hashed_entry(const std::filesystem::path& dir, const std::string& file);

/// Creates <root>/runs/<UTC timestamp>[-N] and returns it.
std::filesystem::path create_run_dir(const std::filesystem::path& root);

/// Points <root>/latest at `run_dir` (a one-line text file holding its path
/// relative to root).
void write_latest_pointer(const std::filesystem::path& root, const std::filesystem::path& run_dir);

/// The run directory named by <root>/latest, if any.
std::optional<std::filesystem::path> latest_run(const std::filesystem::path& root);

} // namespace negascope
