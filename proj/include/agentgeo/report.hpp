#pragma once

#include <optional>
#include <string>
#include <vector>

#include "agentgeo/corpus.hpp"
#include "agentgeo/metrics.hpp"

namespace agentgeo::report {

// "12.34" for a fraction rendered as a percentage, "-" when absent.
std::string format_percent(const std::optional<double>& value);

struct MetricRow {
    std::string label;
    metrics::MetricReport values;
};

// Fixed column layout: Run | CR | Word | Pos | Wordpos | TF-IDF | Embed |
// Jaccard, values as percentages, "-" for metrics that do not apply.
std::string metric_table(const std::vector<MetricRow>& rows);

// Headline numbers for one run: query and page counts, citation rate before
// and after, repairs, failures, applied edits.
std::string summary(const corpus::RunRecord& record);

// Citation rate before/after per page topic and per page length bucket.
std::string topic_breakdown(const corpus::RunRecord& record);
std::string length_breakdown(const corpus::RunRecord& record);

// Root-cause distribution of every diagnosis the run made, with category
// labels and percentage shares.
std::string taxonomy_breakdown(const corpus::RunRecord& record);

// All sections that have content, separated by blank lines.
std::string full_report(const corpus::RunRecord& record);

} // namespace agentgeo::report
