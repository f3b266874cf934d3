#include "senet/report.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "senet/configfile.hpp"
#include "senet/error.hpp"

namespace senet {

namespace {

using nlohmann::json;

json mean_block(const MetricsReport& r) {
    json j;
    j["s_alpha"] = r.s_alpha;
    j["e_phi"] = r.e_phi;
    j["f_beta_w"] = r.f_beta_w;
    j["f_beta_m"] = r.f_beta_m;
    j["f_beta"] = r.f_beta();
    j["mae"] = r.mae;
    j["score"] = r.score_value;
    j["degenerate_count"] = r.degenerate_count;
    return j;
}

}  // namespace

std::string metrics_csv(const MetricsReport& report) {
    std::ostringstream out;
    out << "id,s_alpha,e_phi,f_beta_w,f_beta_m,mae,score,degenerate\n";
    for (std::size_t i = 0; i < report.per_image.size(); ++i) {
        const auto& im = report.per_image[i];
        const double f = report.task == Task::Cod ? im.f_beta_w : im.f_beta_m;
        out << report.ids[i] << ',' << format_double(im.s_alpha) << ',' << format_double(im.e_phi) << ','
            << format_double(im.f_beta_w) << ',' << format_double(im.f_beta_m) << ',' << format_double(im.mae) << ','
            << format_double(im.degenerate_gt ? std::numeric_limits<double>::quiet_NaN()
                                              : score(im.s_alpha, im.e_phi, f, im.mae))
            << ',' << (im.degenerate_gt ? 1 : 0) << "\n";
    }
    out << "MEAN," << format_double(report.s_alpha) << ',' << format_double(report.e_phi) << ','
        << format_double(report.f_beta_w) << ',' << format_double(report.f_beta_m) << ','
        << format_double(report.mae) << ',' << format_double(report.score_value) << ','
        << report.degenerate_count << "\n";
    return out.str();
}

std::string report_csv(const std::vector<DatasetReport>& reports) {
    if (reports.empty()) throw ContractError("emit_report on an empty report list");
    std::ostringstream out;
    out << "dataset,s_alpha,e_phi,f_beta,mae,score\n";
    for (const auto& dr : reports) {
        const auto& r = dr.report;
        out << dr.dataset << ',' << format_double(r.s_alpha) << ',' << format_double(r.e_phi) << ','
            << format_double(r.f_beta()) << ',' << format_double(r.mae) << ',' << format_double(r.score_value)
            << "\n";
    }
    return out.str();
}

std::string report_json(const DatasetReport& dr) {
    json j;
    j["dataset"] = dr.dataset;
    j["task"] = to_string(dr.report.task);
    j["mean"] = mean_block(dr.report);
    json rows = json::array();
    for (std::size_t i = 0; i < dr.report.per_image.size(); ++i) {
        const auto& im = dr.report.per_image[i];
        json row;
        row["id"] = dr.report.ids[i];
        row["s_alpha"] = im.s_alpha;
        row["e_phi"] = im.e_phi;
        row["f_beta_w"] = im.f_beta_w;
        row["f_beta_m"] = im.f_beta_m;
        row["mae"] = im.mae;
        row["degenerate"] = im.degenerate_gt;
        rows.push_back(row);
    }
    j["per_image"] = rows;
    return j.dump(2) + "\n";
}

std::string combined_report_json(const std::vector<DatasetReport>& reports) {
    if (reports.empty()) throw ContractError("emit_report on an empty report list");
    json arr = json::array();
    for (const auto& dr : reports) {
        json j;
        j["dataset"] = dr.dataset;
        j["task"] = to_string(dr.report.task);
        j["mean"] = mean_block(dr.report);
        arr.push_back(j);
    }
    return arr.dump(2) + "\n";
}

void emit_report(const std::vector<DatasetReport>& reports, const std::string& out_dir) {
    if (reports.empty()) throw ContractError("emit_report on an empty report list");
    std::filesystem::create_directories(out_dir);
    const auto csv_path = std::filesystem::path(out_dir) / "report.csv";
    const auto json_path = std::filesystem::path(out_dir) / "report.json";
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw IoError("cannot write " + csv_path.string());
    csv << report_csv(reports);
    std::ofstream js(json_path, std::ios::binary);
    if (!js) throw IoError("cannot write " + json_path.string());
    js << combined_report_json(reports);
}

DatasetReport parse_report_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open report " + path);
    json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    DatasetReport dr;
    try {
        dr.dataset = j.at("dataset").get<std::string>();
        dr.report.task = parse_task(j.at("task").get<std::string>());
        const auto& m = j.at("mean");
        dr.report.s_alpha = m.at("s_alpha").get<double>();
        dr.report.e_phi = m.at("e_phi").get<double>();
        dr.report.f_beta_w = m.value("f_beta_w", 0.0);
        dr.report.f_beta_m = m.value("f_beta_m", 0.0);
        dr.report.mae = m.at("mae").get<double>();
        dr.report.score_value = m.at("score").get<double>();
        dr.report.degenerate_count = m.value("degenerate_count", 0);
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return dr;
}

}  // namespace senet
