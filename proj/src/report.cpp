#include "tttnn/report.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string_view>

#include "tttnn/errors.hpp"

namespace tttnn {

namespace {

constexpr std::string_view kCsvHeader =
    "instance_id,n_neighbors,bits_per_byte,byte_perplexity,word_perplexity,"
    "train_loss,neighbor_distance,seconds";

std::string fmt_double(double v) {
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

std::string fmt_fixed(double v, int precision) {
    char buf[64];
    const auto [p, ec] =
        std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, precision);
    return std::string(buf, p);
}

std::string fmt_u64(std::uint64_t v) {
    char buf[24];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

std::uint64_t parse_u64_field(std::string_view s, std::uint64_t line) {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw ParseError("csv: bad unsigned integer \"" + std::string(s) + "\"",
                         line);
    return v;
}

double parse_f64_field(std::string_view s, std::uint64_t line) {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw ParseError("csv: bad number \"" + std::string(s) + "\"", line);
    return v;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

void write_text_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("short write to " + path);
}

nlohmann::json triple_to_json(const MetricsTriple& m) {
    return {{"bits_per_byte", m.bits_per_byte},
            {"byte_perplexity", m.byte_perplexity},
            {"word_perplexity", m.word_perplexity},
            {"total_nll_nats", m.total_nll_nats},
            {"n_bytes", m.n_bytes},
            {"n_words", m.n_words}};
}

}  // namespace

std::vector<CsvCurveRow> rows_from_curves(const std::vector<EvalCurve>& curves) {
    std::vector<CsvCurveRow> rows;
    for (const EvalCurve& c : curves) {
        if (c.skipped || c.metrics_at.empty()) continue;
        for (std::size_t n = 0; n < c.metrics_at.size(); ++n) {
            CsvCurveRow row;
            row.instance_id = c.instance_id;
            row.n_neighbors = n;
            row.bits_per_byte = c.metrics_at[n].bits_per_byte;
            row.byte_perplexity = c.metrics_at[n].byte_perplexity;
            row.word_perplexity = c.metrics_at[n].word_perplexity;
            if (n > 0) {
                row.has_train = true;
                row.train_loss = c.train_loss_per_neighbor[n - 1];
                row.neighbor_distance = c.neighbor_distances[n - 1];
            }
            row.seconds = n < c.step_seconds.size() ? c.step_seconds[n] : 0.0;
            rows.push_back(row);
        }
    }
    return rows;
}

void write_curve_rows_csv(const std::vector<CsvCurveRow>& rows,
                          const std::string& path) {
    std::string out(kCsvHeader);
    out += '\n';
    for (const CsvCurveRow& r : rows) {
        out += fmt_u64(r.instance_id);
        out += ',';
        out += fmt_u64(r.n_neighbors);
        out += ',';
        out += fmt_double(r.bits_per_byte);
        out += ',';
        out += fmt_double(r.byte_perplexity);
        out += ',';
        out += fmt_double(r.word_perplexity);
        out += ',';
        if (r.has_train) out += fmt_double(r.train_loss);
        out += ',';
        if (r.has_train) out += fmt_double(r.neighbor_distance);
        out += ',';
        out += fmt_double(r.seconds);
        out += '\n';
    }
    write_text_file(path, out);
}

std::vector<CsvCurveRow> read_curve_rows_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("csv: cannot open " + path, 0);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("csv: empty file", 0);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader)
        throw ParseError("csv: header mismatch, expected \"" +
                             std::string(kCsvHeader) + "\"",
                         1);
    std::vector<CsvCurveRow> rows;
    std::uint64_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != 8)
            throw ParseError("csv: expected 8 fields, got " +
                                 std::to_string(fields.size()),
                             lineno);
        CsvCurveRow row;
        row.instance_id = parse_u64_field(fields[0], lineno);
        row.n_neighbors = parse_u64_field(fields[1], lineno);
        row.bits_per_byte = parse_f64_field(fields[2], lineno);
        row.byte_perplexity = parse_f64_field(fields[3], lineno);
        row.word_perplexity = parse_f64_field(fields[4], lineno);
        const bool loss_empty = fields[5].empty();
        const bool dist_empty = fields[6].empty();
        if (loss_empty != dist_empty)
            throw ParseError("csv: train_loss and neighbor_distance must be "
                             "empty together",
                             lineno);
        row.has_train = !loss_empty;
        if (row.has_train) {
            row.train_loss = parse_f64_field(fields[5], lineno);
            row.neighbor_distance = parse_f64_field(fields[6], lineno);
        }
        row.seconds = parse_f64_field(fields[7], lineno);
        rows.push_back(row);
    }
    return rows;
}

nlohmann::json summary_to_json(const RunSummary& summary) {
    return {{"dataset", summary.dataset},
            {"n_instances", summary.n_instances},
            {"n_skipped", summary.n_skipped},
            {"before", triple_to_json(summary.before)},
            {"after", triple_to_json(summary.after)},
            {"bpb_ratio", summary.bpb_ratio},
            {"total_iterations", summary.total_iterations},
            {"total_seconds", summary.total_seconds},
            {"mean_seconds_per_iteration", summary.mean_seconds_per_iteration}};
}

void write_summary_json(const RunSummary& summary, const std::string& path) {
    write_text_file(path, summary_to_json(summary).dump(2) + "\n");
}

TimingTable timing_from_rows(const std::vector<CsvCurveRow>& rows) {
    TimingTable t;
    for (const CsvCurveRow& r : rows) {
        if (r.n_neighbors >= 1) ++t.iterations;
        t.total_seconds += r.seconds;
    }
    t.seconds_per_iteration =
        t.iterations > 0
            ? t.total_seconds / static_cast<double>(t.iterations)
            : 0.0;
    return t;
}

void write_timing_csv(const TimingTable& t, const std::string& path) {
    std::string out = "iterations,total_run_time_seconds,seconds_per_iteration\n";
    out += fmt_u64(t.iterations);
    out += ',';
    out += fmt_double(t.total_seconds);
    out += ',';
    out += fmt_double(t.seconds_per_iteration);
    out += '\n';
    write_text_file(path, out);
}

std::string render_curve_chart_svg(const std::vector<CsvCurveRow>& rows) {
    std::map<std::uint64_t, std::pair<double, std::size_t>> acc;
    for (const CsvCurveRow& r : rows) {
        acc[r.n_neighbors].first += r.bits_per_byte;
        acc[r.n_neighbors].second += 1;
    }

    std::string svg =
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" "
        "height=\"400\" viewBox=\"0 0 640 400\">\n"
        "<rect x=\"0\" y=\"0\" width=\"640\" height=\"400\" fill=\"white\"/>\n"
        "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"16\">bits per byte vs neighbors used</text>\n";
    if (acc.empty()) {
        svg += "<text x=\"320\" y=\"200\" text-anchor=\"middle\" "
               "font-family=\"sans-serif\" font-size=\"14\">no data</text>\n</svg>\n";
        return svg;
    }

    std::vector<std::pair<double, double>> points;  // (n, mean bpb)
    double ymin = 0.0, ymax = 0.0;
    bool first = true;
    for (const auto& [n, sum_count] : acc) {
        const double mean = sum_count.first / static_cast<double>(sum_count.second);
        points.emplace_back(static_cast<double>(n), mean);
        if (first || mean < ymin) ymin = mean;
        if (first || mean > ymax) ymax = mean;
        first = false;
    }
    if (ymax - ymin < 1e-12) {
        ymin -= 0.5;
        ymax += 0.5;
    }
    const double pad = (ymax - ymin) * 0.08;
    ymin -= pad;
    ymax += pad;
    const double xmin = points.front().first;
    const double xmax = std::max(points.back().first, xmin + 1.0);

    const double left = 70.0, right = 610.0, top = 44.0, bottom = 356.0;
    const auto px = [&](double x) {
        return left + (x - xmin) / (xmax - xmin) * (right - left);
    };
    const auto py = [&](double y) {
        return bottom - (y - ymin) / (ymax - ymin) * (bottom - top);
    };

    svg += "<line x1=\"" + fmt_fixed(left, 2) + "\" y1=\"" + fmt_fixed(bottom, 2) +
           "\" x2=\"" + fmt_fixed(right, 2) + "\" y2=\"" + fmt_fixed(bottom, 2) +
           "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + fmt_fixed(left, 2) + "\" y1=\"" + fmt_fixed(top, 2) +
           "\" x2=\"" + fmt_fixed(left, 2) + "\" y2=\"" + fmt_fixed(bottom, 2) +
           "\" stroke=\"black\"/>\n";

    for (int i = 0; i <= 4; ++i) {
        const double yv = ymin + (ymax - ymin) * i / 4.0;
        const double y = py(yv);
        svg += "<line x1=\"" + fmt_fixed(left - 4, 2) + "\" y1=\"" +
               fmt_fixed(y, 2) + "\" x2=\"" + fmt_fixed(left, 2) + "\" y2=\"" +
               fmt_fixed(y, 2) + "\" stroke=\"black\"/>\n";
        svg += "<text x=\"" + fmt_fixed(left - 8, 2) + "\" y=\"" +
               fmt_fixed(y + 4, 2) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" "
               "font-size=\"11\">" +
               fmt_fixed(yv, 4) + "</text>\n";
    }
    const std::uint64_t max_n = static_cast<std::uint64_t>(points.back().first);
    const std::uint64_t xstep = std::max<std::uint64_t>(1, max_n / 8);
    for (std::uint64_t n = 0; n <= max_n; n += xstep) {
        const double x = px(static_cast<double>(n));
        svg += "<line x1=\"" + fmt_fixed(x, 2) + "\" y1=\"" +
               fmt_fixed(bottom, 2) + "\" x2=\"" + fmt_fixed(x, 2) + "\" y2=\"" +
               fmt_fixed(bottom + 4, 2) + "\" stroke=\"black\"/>\n";
        svg += "<text x=\"" + fmt_fixed(x, 2) + "\" y=\"" +
               fmt_fixed(bottom + 18, 2) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
               "font-size=\"11\">" +
               fmt_u64(n) + "</text>\n";
    }

    svg += "<polyline fill=\"none\" stroke=\"#1f6feb\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (i > 0) svg += ' ';
        svg += fmt_fixed(px(points[i].first), 2) + "," +
               fmt_fixed(py(points[i].second), 2);
    }
    svg += "\"/>\n";
    for (const auto& [x, y] : points) {
        svg += "<circle cx=\"" + fmt_fixed(px(x), 2) + "\" cy=\"" +
               fmt_fixed(py(y), 2) + "\" r=\"3\" fill=\"#1f6feb\"/>\n";
    }
    svg += "</svg>\n";
    return svg;
}

std::string render_before_after_svg(const std::vector<CsvCurveRow>& rows) {
    // Before: every n=0 row. After: each instance's highest-n row.
    double before_sum = 0.0;
    std::size_t before_count = 0;
    std::map<std::uint64_t, CsvCurveRow> last_row;
    for (const CsvCurveRow& r : rows) {
        if (r.n_neighbors == 0) {
            before_sum += r.bits_per_byte;
            ++before_count;
        }
        auto it = last_row.find(r.instance_id);
        if (it == last_row.end() || r.n_neighbors > it->second.n_neighbors)
            last_row[r.instance_id] = r;
    }

    std::string svg =
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"420\" "
        "height=\"400\" viewBox=\"0 0 420 400\">\n"
        "<rect x=\"0\" y=\"0\" width=\"420\" height=\"400\" fill=\"white\"/>\n"
        "<text x=\"210\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"16\">bits per byte, before vs after</text>\n";
    if (before_count == 0) {
        svg += "<text x=\"210\" y=\"200\" text-anchor=\"middle\" "
               "font-family=\"sans-serif\" font-size=\"14\">no data</text>\n</svg>\n";
        return svg;
    }

    double after_sum = 0.0;
    for (const auto& [id, r] : last_row) after_sum += r.bits_per_byte;
    const double before = before_sum / static_cast<double>(before_count);
    const double after = after_sum / static_cast<double>(last_row.size());
    const double vmax = std::max({before, after, 1e-12});

    const double bottom = 340.0, top = 60.0;
    const auto bar = [&](double x, double v, const char* color,
                         const char* label) {
        const double h = (v / vmax) * (bottom - top);
        std::string s;
        s += "<rect x=\"" + fmt_fixed(x, 2) + "\" y=\"" +
             fmt_fixed(bottom - h, 2) +
             "\" width=\"100\" height=\"" + fmt_fixed(h, 2) + "\" fill=\"" +
             color + "\"/>\n";
        s += "<text x=\"" + fmt_fixed(x + 50, 2) + "\" y=\"" +
             fmt_fixed(bottom - h - 8, 2) +
             "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
             "font-size=\"13\">" +
             fmt_fixed(v, 4) + "</text>\n";
        s += "<text x=\"" + fmt_fixed(x + 50, 2) + "\" y=\"" +
             fmt_fixed(bottom + 20, 2) +
             "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
             "font-size=\"13\">" +
             label + "</text>\n";
        return s;
    };
    svg += bar(80.0, before, "#8957e5", "before");
    svg += bar(240.0, after, "#1f6feb", "after");
    svg += "<line x1=\"40\" y1=\"" + fmt_fixed(bottom, 2) + "\" x2=\"380\" y2=\"" +
           fmt_fixed(bottom, 2) + "\" stroke=\"black\"/>\n";
    svg += "</svg>\n";
    return svg;
}

void write_report_files(const std::vector<CsvCurveRow>& rows,
                        const std::string& dir) {
    std::filesystem::create_directories(dir);
    write_text_file(dir + "/bpb_vs_neighbors.svg", render_curve_chart_svg(rows));
    write_text_file(dir + "/before_after.svg", render_before_after_svg(rows));
    write_timing_csv(timing_from_rows(rows), dir + "/timing.csv");
}

}  // namespace tttnn
