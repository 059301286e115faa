#include "demote/report_io.hpp"

#include <sstream>

#include <json.hpp>

#include "demote/errors.hpp"
#include "demote/kv_config.hpp"

namespace demote {

using nlohmann::ordered_json;

namespace {

ordered_json rates_to_json(const std::map<ClassGroup, Rate>& rates) {
  ordered_json arr = ordered_json::array();
  for (const auto& [key, r] : rates) {
    ordered_json cell;
    cell["class"] = key.first;
    cell["group"] = key.second;
    cell["value"] = r.defined() ? ordered_json(r.value) : ordered_json(nullptr);
    cell["hits"] = r.hits;
    cell["support"] = r.support;
    arr.push_back(cell);
  }
  return arr;
}

std::map<ClassGroup, Rate> rates_from_json(const nlohmann::json& arr) {
  std::map<ClassGroup, Rate> out;
  for (const auto& cell : arr) {
    Rate r;
    r.hits = cell.at("hits").get<long>();
    r.support = cell.at("support").get<long>();
    r.value = cell.at("value").is_null() ? 0.0 : cell.at("value").get<double>();
    out[{cell.at("class").get<int>(), cell.at("group").get<int>()}] = r;
  }
  return out;
}

ordered_json gaps_to_json(const std::map<int, std::optional<double>>& gaps) {
  ordered_json arr = ordered_json::array();
  for (const auto& [c, v] : gaps) {
    ordered_json cell;
    cell["class"] = c;
    cell["value"] = v ? ordered_json(*v) : ordered_json(nullptr);
    arr.push_back(cell);
  }
  return arr;
}

std::map<int, std::optional<double>> gaps_from_json(const nlohmann::json& arr) {
  std::map<int, std::optional<double>> out;
  for (const auto& cell : arr) {
    const auto& v = cell.at("value");
    out[cell.at("class").get<int>()] = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
  }
  return out;
}

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

}  // namespace

std::string report_to_json(const AuditReport& r) {
  ordered_json j;
  j["format"] = "demote-audit-report";
  j["version"] = 1;
  j["num_target_classes"] = r.num_target_classes;
  j["num_protected_classes"] = r.num_protected_classes;
  j["toxic_classes"] = r.toxic_classes;
  j["none_class"] = r.none_class;
  j["n"] = r.n;
  j["accuracy"] = r.accuracy;
  j["macro_f1"] = r.macro_f1;
  j["per_class_f1"] = r.per_class_f1;
  j["absent_classes"] = r.absent_classes;
  j["fpr"] = rates_to_json(r.fpr);
  j["tpr"] = rates_to_json(r.tpr);
  j["fpr_gap"] = gaps_to_json(r.fpr_gap);
  j["eoo_gap"] = gaps_to_json(r.eoo_gap);
  ordered_json support = ordered_json::array();
  for (const auto& [key, count] : r.support) {
    support.push_back({{"class", key.first}, {"group", key.second}, {"count", count}});
  }
  j["support"] = support;
  j["adversary_accuracy"] =
      r.adversary_accuracy ? ordered_json(*r.adversary_accuracy) : ordered_json(nullptr);
  j["adversary_accuracies"] = r.adversary_accuracies;
  return j.dump(2) + "\n";
}

AuditReport report_from_json(const std::string& text) {
  AuditReport r;
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (j.value("format", "") != "demote-audit-report") {
      throw ValidationError("not an audit report");
    }
    r.num_target_classes = j.at("num_target_classes").get<int>();
    r.num_protected_classes = j.at("num_protected_classes").get<int>();
    r.toxic_classes = j.at("toxic_classes").get<std::vector<int>>();
    r.none_class = j.at("none_class").get<int>();
    r.n = j.at("n").get<long>();
    r.accuracy = j.at("accuracy").get<double>();
    r.macro_f1 = j.at("macro_f1").get<double>();
    r.per_class_f1 = j.at("per_class_f1").get<std::vector<double>>();
    r.absent_classes = j.at("absent_classes").get<std::vector<int>>();
    r.fpr = rates_from_json(j.at("fpr"));
    r.tpr = rates_from_json(j.at("tpr"));
    r.fpr_gap = gaps_from_json(j.at("fpr_gap"));
    r.eoo_gap = gaps_from_json(j.at("eoo_gap"));
    for (const auto& cell : j.at("support")) {
      r.support[{cell.at("class").get<int>(), cell.at("group").get<int>()}] = cell.at("count").get<long>();
    }
    if (!j.at("adversary_accuracy").is_null()) r.adversary_accuracy = j.at("adversary_accuracy").get<double>();
    r.adversary_accuracies = j.at("adversary_accuracies").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed audit report: ") + e.what());
  }
  return r;
}

std::string report_to_csv(const AuditReport& r) {
  std::ostringstream out;
  out << kReportCsvHeader << "\n";
  out << "accuracy,,," << format_double(r.accuracy) << "," << r.n << ",1\n";
  out << "macro_f1,,," << format_double(r.macro_f1) << "," << r.n << ",1\n";
  for (std::size_t c = 0; c < r.per_class_f1.size(); ++c) {
    const bool absent = std::find(r.absent_classes.begin(), r.absent_classes.end(),
                                  static_cast<int>(c)) != r.absent_classes.end();
    out << "f1," << c << ",," << format_double(r.per_class_f1[c]) << ",," << (absent ? 0 : 1) << "\n";
  }
  auto rates = [&](const char* name, const std::map<ClassGroup, Rate>& cells) {
    for (const auto& [key, rate] : cells) {
      out << name << "," << key.first << "," << key.second << ","
          << (rate.defined() ? format_double(rate.value) : "") << "," << rate.support << ","
          << (rate.defined() ? 1 : 0) << "\n";
    }
  };
  rates("fpr", r.fpr);
  rates("tpr", r.tpr);
  auto gap_rows = [&](const char* name, const std::map<int, std::optional<double>>& cells) {
    for (const auto& [c, v] : cells) out << name << "," << c << ",," << opt(v) << ",," << (v ? 1 : 0) << "\n";
  };
  gap_rows("fpr_gap", r.fpr_gap);
  gap_rows("eoo_gap", r.eoo_gap);
  for (const auto& [key, count] : r.support) {
    out << "support," << key.first << "," << key.second << "," << count << ",,1\n";
  }
  if (r.adversary_accuracy) {
    out << "adversary_accuracy,,," << format_double(*r.adversary_accuracy) << ",,1\n";
    for (std::size_t k = 0; k < r.adversary_accuracies.size(); ++k) {
      out << "adversary" << k << "_accuracy,,," << format_double(r.adversary_accuracies[k]) << ",,1\n";
    }
  }
  return out.str();
}

std::string compare_reports(const AuditReport& base, const AuditReport& ours) {
  if (base.num_target_classes != ours.num_target_classes ||
      base.num_protected_classes != ours.num_protected_classes ||
      base.none_class != ours.none_class || base.toxic_classes != ours.toxic_classes) {
    throw ValidationError("reports differ in class counts, none class, or toxic classes");
  }
  std::ostringstream out;
  out << kCompareCsvHeader << "\n";
  auto row = [&](const std::string& metric, const std::string& c, const std::string& g,
                 std::optional<double> b, std::optional<double> o) {
    out << metric << "," << c << "," << g << "," << opt(b) << "," << opt(o) << ","
        << (b && o ? format_double(*o - *b) : "") << "\n";
  };
  row("accuracy", "", "", base.accuracy, ours.accuracy);
  row("macro_f1", "", "", base.macro_f1, ours.macro_f1);
  auto rates = [&](const char* name, const std::map<ClassGroup, Rate>& b,
                   const std::map<ClassGroup, Rate>& o) {
    for (const auto& [key, rb] : b) {
      const Rate& ro = o.at(key);
      row(name, std::to_string(key.first), std::to_string(key.second),
          rb.defined() ? std::optional<double>(rb.value) : std::nullopt,
          ro.defined() ? std::optional<double>(ro.value) : std::nullopt);
    }
  };
  rates("fpr", base.fpr, ours.fpr);
  rates("tpr", base.tpr, ours.tpr);
  for (const auto& [c, v] : base.fpr_gap) row("fpr_gap", std::to_string(c), "", v, ours.fpr_gap.at(c));
  for (const auto& [c, v] : base.eoo_gap) row("eoo_gap", std::to_string(c), "", v, ours.eoo_gap.at(c));
  if (base.adversary_accuracy || ours.adversary_accuracy) {
    row("adversary_accuracy", "", "", base.adversary_accuracy, ours.adversary_accuracy);
  }
  return out.str();
}

}  // namespace demote
