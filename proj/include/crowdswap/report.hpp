#pragma once

#include <span>
#include <string>
#include <vector>

#include "crowdswap/sim.hpp"

namespace crowdswap::report {

/// RunResult document; the event log is written separately.
std::string to_json(const sim::RunResult& r, int indent = 2);
std::string to_json(const sim::Report& r, int indent = 2);

/// Event lines joined with '\n'.
std::string events_jsonl(const sim::RunResult& r);

/// `n_seen,precision,recall,f1` rows with header.
std::string stream_log_csv(const sim::RunResult& r);

/// One row per report: scenario,strategy,predictor,runs,delay_pct,...
std::string comparison_csv(std::span<const sim::Report> reports);

struct BarSeries {
    std::string label;
    std::vector<double> values; ///< one per group
};

/// Grouped vertical bars: groups along x, one bar per series.
std::string bar_chart_svg(const std::string& title, const std::string& y_label,
                          const std::vector<std::string>& groups,
                          const std::vector<BarSeries>& series);

struct CdfSeries {
    std::string label;
    std::vector<double> sorted; ///< ascending
};

/// Step plots of empirical cumulative distributions.
std::string cdf_chart_svg(const std::string& title, const std::string& x_label,
                          const std::vector<CdfSeries>& series);

} // namespace crowdswap::report
