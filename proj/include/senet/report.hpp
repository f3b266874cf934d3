#pragma once

#include <string>
#include <vector>

#include "senet/metrics.hpp"

namespace senet {

struct DatasetReport {
    std::string dataset;
    MetricsReport report;
};

/// Per-image metrics plus a MEAN row, one CSV line per image.
std::string metrics_csv(const MetricsReport& report);

/// Dataset-level table: dataset, s_alpha, e_phi, f_beta, mae, score. The
/// f_beta column carries the task-appropriate F value.
std::string report_csv(const std::vector<DatasetReport>& reports);

/// JSON mirror of one dataset report (means + per-image rows).
std::string report_json(const DatasetReport& report);

/// Combined JSON mirror of report_csv with identical values.
std::string combined_report_json(const std::vector<DatasetReport>& reports);

/// Writes report.csv and report.json next to each other.
void emit_report(const std::vector<DatasetReport>& reports, const std::string& out_dir);

/// Reads back a report.json produced by report_json.
DatasetReport parse_report_json(const std::string& path);

}  // namespace senet
