#include "calib/io.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string_view>

namespace calib {

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line)
{
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

[[noreturn]] void fail(const std::string& source, std::size_t row, std::size_t line, const std::string& what)
{
    std::ostringstream msg;
    msg << source << ": row " << row << " (line " << line << "): " << what;
    throw DatasetParseError(msg.str());
}

}  // namespace

LabeledDataset parse_dataset(std::istream& in, const std::string& source)
{
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        have_header = true;
        break;
    }
    if (!have_header) throw DatasetParseError(source + ": missing header line");

    const auto header = split(trim(line));
    if (header.size() < 3 || header.back() != "label")
        throw DatasetParseError(source + ": header must be p_0,...,p_{k-1},label");
    const int k = static_cast<int>(header.size()) - 1;
    for (int j = 0; j < k; ++j)
        if (header[static_cast<std::size_t>(j)] != "p_" + std::to_string(j))
            throw DatasetParseError(source + ": header column " + std::to_string(j) + " must be p_" + std::to_string(j));

    std::vector<double> values;
    std::vector<int> labels;
    std::size_t row = 0;
    Vector scratch(k);
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = trim(line);
        if (t.empty()) continue;
        ++row;
        const auto cells = split(t);
        if (cells.size() != header.size())
            fail(source, row, line_no, "expected " + std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
        for (int j = 0; j < k; ++j) {
            const auto cell = cells[static_cast<std::size_t>(j)];
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc{} || ptr != cell.data() + cell.size() || cell.empty())
                fail(source, row, line_no, "non-numeric cell '" + std::string(cell) + "'");
            scratch[j] = v;
        }
        const auto lc = cells.back();
        int label = 0;
        const auto [ptr, ec] = std::from_chars(lc.data(), lc.data() + lc.size(), label);
        if (ec != std::errc{} || ptr != lc.data() + lc.size() || lc.empty())
            fail(source, row, line_no, "non-integer label '" + std::string(lc) + "'");
        if (label < 0 || label >= k)
            fail(source, row, line_no, "label " + std::to_string(label) + " outside [0, " + std::to_string(k) + ")");
        try {
            const SimplexVector sv = validate_simplex(scratch);
            values.insert(values.end(), sv.values().data(), sv.values().data() + k);
        } catch (const SimplexError& e) {
            fail(source, row, line_no, e.what());
        }
        labels.push_back(label);
    }
    if (labels.empty()) throw DatasetParseError(source + ": no data rows");

    PredictionMatrix p = Eigen::Map<const PredictionMatrix>(values.data(), static_cast<Eigen::Index>(labels.size()), k);
    return LabeledDataset(std::move(p), std::move(labels));
}

LabeledDataset parse_dataset(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw DatasetParseError(path + ": cannot open file");
    return parse_dataset(in, path);
}

std::string format_double(double x)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, ptr);
}

void write_dataset(std::ostream& out, const LabeledDataset& d, const std::vector<std::string>& comments)
{
    for (const auto& c : comments) out << "# " << c << '\n';
    for (int j = 0; j < d.k(); ++j) out << "p_" << j << ',';
    out << "label\n";
    for (std::size_t i = 0; i < d.n(); ++i) {
        for (int j = 0; j < d.k(); ++j) out << format_double(d.predictions()(static_cast<Eigen::Index>(i), j)) << ',';
        out << d.label(i) << '\n';
    }
}

void write_dataset(const std::string& path, const LabeledDataset& d, const std::vector<std::string>& comments)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    write_dataset(out, d, comments);
    if (!out) throw std::runtime_error(path + ": write failed");
}

namespace {

nlohmann::ordered_json report_json(const CEReport& r)
{
    nlohmann::ordered_json j;
    j["metric"] = r.metric.name();
    j["p"] = r.metric.p;
    j["estimate"] = r.estimate;
    j["estimate_clipped"] = r.estimate_clipped;
    // Binary L1-type metrics are computed on 2-vectors, i.e. twice the scalar |f - C|.
    const bool binary_l1 = r.metric.p == 1.0 && r.metric.is_anchored() && (r.k == 2 || r.metric.is_topclass());
    if (binary_l1) {
        j["l1_vector"] = r.estimate;
        j["l1_binary"] = 0.5 * r.estimate;
    }
    nlohmann::ordered_json folds = nlohmann::ordered_json::array();
    for (const auto& f : r.per_fold) {
        nlohmann::ordered_json e;
        e["size"] = f.size;
        e["value"] = f.value;
        folds.push_back(std::move(e));
    }
    j["per_fold"] = std::move(folds);
    j["stderr"] = r.standard_error;
    j["n"] = r.n;
    j["k"] = r.k;
    j["folds"] = r.k_folds;
    j["seed"] = r.seed;
    j["recalibrator"] = r.recalibrator;
    j["cross_validated"] = r.cross_validated;
    j["tool_version"] = kToolVersion;
    return j;
}

}  // namespace

std::string reports_to_json(const std::vector<CEReport>& reports)
{
    nlohmann::ordered_json doc;
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : reports) arr.push_back(report_json(r));
    doc["reports"] = std::move(arr);
    return doc.dump(2) + "\n";
}

void emit_report(const std::vector<CEReport>& reports, const std::string& path)
{
    if (reports.empty()) throw std::invalid_argument("emit_report: no reports");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << reports_to_json(reports);
    if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace calib
