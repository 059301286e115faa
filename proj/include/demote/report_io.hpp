#pragma once

#include <string>

#include "demote/metrics.hpp"

namespace demote {

// Structured form: one JSON object. Undefined cells carry "value": null.
std::string report_to_json(const AuditReport& report);
AuditReport report_from_json(const std::string& text);

// Flat form, header "metric,class,group,value,support,defined", one row per
// (metric, class, group) cell.
std::string report_to_csv(const AuditReport& report);

inline constexpr const char* kReportCsvHeader = "metric,class,group,value,support,defined";
inline constexpr const char* kCompareCsvHeader = "metric,class,group,base,ours,delta";

// Per-cell deltas, ours minus base. Throws ValidationError when the two
// reports disagree on class counts, none class, or toxic classes.
std::string compare_reports(const AuditReport& base, const AuditReport& ours);

}  // namespace demote
