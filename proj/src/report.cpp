#include "agentgeo/report.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "agentgeo/diagnosis.hpp"

namespace agentgeo::report {

namespace {

std::string percent(double fraction) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.2f", fraction * 100.0);
    return buffer;
}

// Right-pads every cell to its column width; columns joined with " | ".
std::string render_table(const std::vector<std::vector<std::string>>& rows) {
    if (rows.empty()) {
        return "";
    }
    std::vector<std::size_t> widths;
    for (const auto& row : rows) {
        if (widths.size() < row.size()) {
            widths.resize(row.size(), 0);
        }
        for (std::size_t i = 0; i < row.size(); ++i) {
            widths[i] = std::max(widths[i], row[i].size());
        }
    }
    std::string out;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::string line;
        for (std::size_t i = 0; i < rows[r].size(); ++i) {
            std::string cell = rows[r][i];
            cell.resize(widths[i], ' ');
            if (!line.empty()) {
                line += " | ";
            }
            line += cell;
        }
        while (!line.empty() && line.back() == ' ') {
            line.pop_back();
        }
        out += line + "\n";
        if (r == 0) {
            std::string divider;
            for (std::size_t i = 0; i < widths.size(); ++i) {
                if (!divider.empty()) {
                    divider += "-+-";
                }
                divider += std::string(widths[i], '-');
            }
            out += divider + "\n";
        }
    }
    return out;
}

struct RateBucket {
    int total = 0;
    int cited_before = 0;
    int cited_after = 0;
};

std::vector<std::vector<std::string>> rate_rows(
    const std::string& key_header,
    const std::vector<std::pair<std::string, RateBucket>>& buckets) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({key_header, "Queries", "CR before", "CR after", "Delta"});
    for (const auto& [key, bucket] : buckets) {
        if (bucket.total == 0) {
            continue;
        }
        double before = static_cast<double>(bucket.cited_before) / bucket.total;
        double after = static_cast<double>(bucket.cited_after) / bucket.total;
        rows.push_back({key, std::to_string(bucket.total), percent(before),
                        percent(after), percent(after - before)});
    }
    return rows;
}

} // namespace

std::string format_percent(const std::optional<double>& value) {
    if (!value) {
        return "-";
    }
    return percent(*value);
}

std::string metric_table(const std::vector<MetricRow>& rows) {
    std::vector<std::vector<std::string>> cells;
    cells.push_back({"Run", "CR", "Word", "Pos", "Wordpos", "TF-IDF", "Embed",
                     "Jaccard"});
    for (const auto& row : rows) {
        cells.push_back({row.label, format_percent(row.values.cr),
                         format_percent(row.values.word),
                         format_percent(row.values.pos),
                         format_percent(row.values.wordpos),
                         format_percent(row.values.tfidf),
                         format_percent(row.values.embed),
                         format_percent(row.values.jaccard)});
    }
    return render_table(cells);
}

std::string summary(const corpus::RunRecord& record) {
    int total = static_cast<int>(record.outcomes.size());
    int before = 0;
    int after = 0;
    int repaired = 0;
    int failures = 0;
    for (const auto& outcome : record.outcomes) {
        before += outcome.cited_before ? 1 : 0;
        after += outcome.cited_after ? 1 : 0;
        repaired += (!outcome.cited_before && outcome.cited_after) ? 1 : 0;
        failures += outcome.failure.empty() ? 0 : 1;
    }
    std::string out;
    out += "Run: " + record.run_id + (record.partial ? " (partial)" : "") + "\n";
    out += "Pages: " + std::to_string(record.pages.size()) +
           ", queries: " + std::to_string(total) + "\n";
    if (total > 0) {
        out += "Citation rate before: " +
               percent(static_cast<double>(before) / total) + "%\n";
        out += "Citation rate after:  " +
               percent(static_cast<double>(after) / total) + "%\n";
    }
    out += "Repaired queries: " + std::to_string(repaired) +
           ", failed repair loops: " + std::to_string(failures) + "\n";
    out += "Applied edits: " + std::to_string(record.edits.size()) + "\n";
    return out;
}

std::string topic_breakdown(const corpus::RunRecord& record) {
    std::map<std::string, std::string> topic_of;
    for (const auto& page : record.pages) {
        topic_of[page.page_id] = page.topic;
    }
    std::map<std::string, RateBucket> buckets;
    for (const auto& outcome : record.outcomes) {
        auto it = topic_of.find(outcome.page_id);
        std::string topic = it == topic_of.end() ? "?" : it->second;
        RateBucket& bucket = buckets[topic];
        ++bucket.total;
        bucket.cited_before += outcome.cited_before ? 1 : 0;
        bucket.cited_after += outcome.cited_after ? 1 : 0;
    }
    std::vector<std::pair<std::string, RateBucket>> ordered(buckets.begin(),
                                                            buckets.end());
    return render_table(rate_rows("Topic", ordered));
}

std::string length_breakdown(const corpus::RunRecord& record) {
    std::map<std::string, corpus::LengthCategory> length_of_page;
    for (const auto& page : record.pages) {
        length_of_page[page.page_id] = page.length;
    }
    const corpus::LengthCategory order[] = {
        corpus::LengthCategory::Short,
        corpus::LengthCategory::Medium,
        corpus::LengthCategory::Long,
        corpus::LengthCategory::VeryLong,
    };
    std::map<std::string, RateBucket> buckets;
    for (const auto& outcome : record.outcomes) {
        auto it = length_of_page.find(outcome.page_id);
        if (it == length_of_page.end()) {
            continue;
        }
        RateBucket& bucket = buckets[corpus::to_string(it->second)];
        ++bucket.total;
        bucket.cited_before += outcome.cited_before ? 1 : 0;
        bucket.cited_after += outcome.cited_after ? 1 : 0;
    }
    std::vector<std::pair<std::string, RateBucket>> ordered;
    for (corpus::LengthCategory length : order) {
        auto it = buckets.find(corpus::to_string(length));
        if (it != buckets.end()) {
            ordered.push_back(*it);
        }
    }
    return render_table(rate_rows("Length", ordered));
}

std::string taxonomy_breakdown(const corpus::RunRecord& record) {
    int total = 0;
    for (const auto& [cause, count] : record.diagnosis_histogram) {
        total += count;
    }
    if (total == 0) {
        return "";
    }
    std::vector<std::pair<std::string, int>> ordered(
        record.diagnosis_histogram.begin(), record.diagnosis_histogram.end());
    std::sort(ordered.begin(), ordered.end(),
              [](const auto& a, const auto& b) {
                  if (a.second != b.second) {
                      return a.second > b.second;
                  }
                  return a.first < b.first;
              });
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"Root cause", "Category", "Count", "Share"});
    for (const auto& [cause, count] : ordered) {
        std::string category = "?";
        if (auto parsed = diagnosis::parse_root_cause(cause)) {
            category = diagnosis::to_string(diagnosis::category_of(*parsed));
        }
        rows.push_back({cause, category, std::to_string(count),
                        percent(static_cast<double>(count) / total) + "%"});
    }
    return render_table(rows);
}

std::string full_report(const corpus::RunRecord& record) {
    std::string out = summary(record);
    if (std::string topics = topic_breakdown(record); !topics.empty()) {
        out += "\nBy topic:\n" + topics;
    }
    if (std::string lengths = length_breakdown(record); !lengths.empty()) {
        out += "\nBy page length:\n" + lengths;
    }
    if (std::string taxonomy = taxonomy_breakdown(record); !taxonomy.empty()) {
        out += "\nDiagnosis taxonomy:\n" + taxonomy;
    }
    return out;
}

} // namespace agentgeo::report
