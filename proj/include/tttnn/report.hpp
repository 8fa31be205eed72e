#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "tttnn/ttt_engine.hpp"

namespace tttnn {

// Flat per-(instance, n) record; the CSV mirror of an EvalCurve point. The
// n=0 row has no training fields.
struct CsvCurveRow {
    std::uint64_t instance_id = 0;
    std::uint64_t n_neighbors = 0;
    double bits_per_byte = 0.0;
    double byte_perplexity = 0.0;
    double word_perplexity = 0.0;
    bool has_train = false;
    double train_loss = 0.0;
    double neighbor_distance = 0.0;
    double seconds = 0.0;
};

struct TimingTable {
    std::uint64_t iterations = 0;        // rows with n >= 1, one update each
    double total_seconds = 0.0;          // sum of the seconds column
    double seconds_per_iteration = 0.0;  // total / iterations, 0 if none
};

// Skipped curves contribute no rows.
std::vector<CsvCurveRow> rows_from_curves(const std::vector<EvalCurve>& curves);

// Doubles are written with shortest round-trip formatting, so a write/read
// cycle reproduces the values bit for bit and regenerated charts come out
// byte-identical.
void write_curve_rows_csv(const std::vector<CsvCurveRow>& rows,
                          const std::string& path);
// Throws ParseError (with the 1-based CSV line) for a wrong header or a row
// that does not parse.
std::vector<CsvCurveRow> read_curve_rows_csv(const std::string& path);

nlohmann::json summary_to_json(const RunSummary& summary);
void write_summary_json(const RunSummary& summary, const std::string& path);

TimingTable timing_from_rows(const std::vector<CsvCurveRow>& rows);
void write_timing_csv(const TimingTable& t, const std::string& path);

// Line chart of mean bits per byte after n neighbor updates.
std::string render_curve_chart_svg(const std::vector<CsvCurveRow>& rows);
// Two bars: mean bits per byte before (n=0) and after (each instance's last
// point).
std::string render_before_after_svg(const std::vector<CsvCurveRow>& rows);

// Writes bpb_vs_neighbors.svg, before_after.svg and timing.csv into dir
// (created if needed).
void write_report_files(const std::vector<CsvCurveRow>& rows,
                        const std::string& dir);

}  // namespace tttnn
