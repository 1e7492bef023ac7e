#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "flowcast/csv.hpp"
#include "flowcast/errors.hpp"
#include "flowcast/timestamp.hpp"

namespace flowcast {

// Names that are carried as dedicated Event fields and never as attributes.
inline constexpr std::string_view kCaseIdColumn = "caseid";
inline constexpr std::string_view kActivityColumn = "activity";
inline constexpr std::string_view kTimeColumn = "time";

inline bool is_standard_attribute(std::string_view name) {
  return name == kCaseIdColumn || name == kActivityColumn || name == kTimeColumn;
}

using AttributeMap = std::map<std::string, std::string>;

struct Event {
  std::string caseid;
  std::string activity;
  Timestamp time{};
  AttributeMap attrs;

  bool operator==(const Event&) const = default;
};

struct Case {
  std::string id;
  std::vector<Event> events;

  std::size_t size() const { return events.size(); }
  bool operator==(const Case&) const = default;
};

struct EventLog {
  std::vector<Case> cases;
  std::set<std::string> attribute_names;

  std::size_t event_count() const {
    std::size_t n = 0;
    for (const auto& c : cases) n += c.size();
    return n;
  }
  bool operator==(const EventLog&) const = default;
};

// The ordered vocabularies the encoders work against. `activities` and each
// vocab list define the codify bijection by position.
struct AttributeSchema {
  std::vector<std::string> activities;
  std::vector<std::string> attributes;
  std::map<std::string, std::vector<std::string>> vocab;

  bool operator==(const AttributeSchema&) const = default;
};

enum class LogFormat { Csv, Xes };

namespace detail {

struct RawEvent {
  Event event;
  std::size_t source_index;
};

// Groups events by case id in first-appearance order, then stable-sorts each
// case by time so ties keep source order.
inline EventLog assemble_log(std::vector<Event> events) {
  EventLog log;
  std::unordered_map<std::string, std::size_t> case_index;
  for (auto& e : events) {
    for (const auto& [name, _] : e.attrs) log.attribute_names.insert(name);
    auto [it, inserted] = case_index.try_emplace(e.caseid, log.cases.size());
    if (inserted) log.cases.push_back(Case{e.caseid, {}});
    log.cases[it->second].events.push_back(std::move(e));
  }
  for (auto& c : log.cases)
    std::stable_sort(c.events.begin(), c.events.end(),
                     [](const Event& a, const Event& b) { return a.time < b.time; });
  return log;
}

inline EventLog parse_csv(std::istream& in) {
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header) throw SchemaError("csv: missing header row");
  if (!header->empty() && header->front().rfind("\xEF\xBB\xBF", 0) == 0)
    header->front().erase(0, 3);

  std::ptrdiff_t case_col = -1, activity_col = -1, time_col = -1;
  for (std::size_t i = 0; i < header->size(); ++i) {
    const auto& name = (*header)[i];
    if (name == kCaseIdColumn) case_col = static_cast<std::ptrdiff_t>(i);
    else if (name == kActivityColumn) activity_col = static_cast<std::ptrdiff_t>(i);
    else if (name == kTimeColumn) time_col = static_cast<std::ptrdiff_t>(i);
  }
  for (auto [col, name] : {std::pair{case_col, kCaseIdColumn}, std::pair{activity_col, kActivityColumn},
                           std::pair{time_col, kTimeColumn}})
    if (col < 0) throw SchemaError("csv: missing mandatory column '" + std::string(name) + "'");

  std::vector<Event> events;
  while (auto row = reader.next()) {
    if (row->size() == 1 && row->front().empty()) continue;
    const auto line = reader.line();
    if (row->size() != header->size())
      throw ParseError("csv: row " + std::to_string(line) + " has " + std::to_string(row->size()) +
                       " fields, header has " + std::to_string(header->size()));
    Event e;
    e.caseid = (*row)[case_col];
    e.activity = (*row)[activity_col];
    if (e.activity.empty()) throw ParseError("csv: empty activity at row " + std::to_string(line));
    auto t = parse_timestamp((*row)[time_col]);
    if (!t)
      throw ParseError("csv: malformed timestamp '" + (*row)[time_col] + "' at row " + std::to_string(line));
    e.time = *t;
    for (std::size_t i = 0; i < row->size(); ++i) {
      if (static_cast<std::ptrdiff_t>(i) == case_col || static_cast<std::ptrdiff_t>(i) == activity_col ||
          static_cast<std::ptrdiff_t>(i) == time_col || (*row)[i].empty())
        continue;
      e.attrs.emplace((*header)[i], std::move((*row)[i]));
    }
    events.push_back(std::move(e));
  }
  return assemble_log(std::move(events));
}

// Minimal XES: <trace> elements holding a concept:name attribute and <event>
// children. Every typed attribute (string/int/float/boolean/date/id) is read as
// text; only the event-level `time:timestamp` date is interpreted.
inline EventLog parse_xes(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_xml(in, tree, pt::xml_parser::trim_whitespace);
  } catch (const pt::xml_parser_error& err) {
    throw ParseError(std::string("xes: ") + err.what());
  }
  auto root = tree.get_child_optional("log");
  if (!root) throw SchemaError("xes: missing <log> root element");

  auto attr_of = [](const pt::ptree& node, const char* name) -> std::string {
    return node.get<std::string>(std::string("<xmlattr>.") + name, "");
  };
  auto is_attribute_tag = [](const std::string& tag) {
    return tag == "string" || tag == "date" || tag == "int" || tag == "float" || tag == "boolean" ||
           tag == "id";
  };

  std::vector<Event> events;
  std::size_t trace_no = 0;
  for (const auto& [tag, trace] : *root) {
    if (tag != "trace") continue;
    ++trace_no;
    std::string caseid;
    for (const auto& [child_tag, child] : trace)
      if (is_attribute_tag(child_tag) && attr_of(child, "key") == "concept:name")
        caseid = attr_of(child, "value");
    if (caseid.empty()) caseid = "trace" + std::to_string(trace_no);

    std::size_t event_no = 0;
    for (const auto& [child_tag, ev] : trace) {
      if (child_tag != "event") continue;
      ++event_no;
      Event e;
      e.caseid = caseid;
      bool has_time = false;
      for (const auto& [attr_tag, attr] : ev) {
        if (!is_attribute_tag(attr_tag)) continue;
        std::string key = attr_of(attr, "key");
        std::string value = attr_of(attr, "value");
        if (key == "concept:name") {
          e.activity = value;
        } else if (key == "time:timestamp") {
          auto t = parse_timestamp(value);
          if (!t)
            throw ParseError("xes: malformed timestamp '" + value + "' in trace '" + caseid + "' event " +
                             std::to_string(event_no));
          e.time = *t;
          has_time = true;
        } else if (!key.empty() && !value.empty() && !is_standard_attribute(key)) {
          e.attrs.emplace(std::move(key), std::move(value));
        }
      }
      if (e.activity.empty())
        throw SchemaError("xes: event " + std::to_string(event_no) + " in trace '" + caseid +
                          "' has no concept:name");
      if (!has_time)
        throw SchemaError("xes: event " + std::to_string(event_no) + " in trace '" + caseid +
                          "' has no time:timestamp");
      events.push_back(std::move(e));
    }
  }
  return assemble_log(std::move(events));
}

}  // namespace detail

inline EventLog parse_log(std::istream& in, LogFormat format) {
  return format == LogFormat::Csv ? detail::parse_csv(in) : detail::parse_xes(in);
}

// Picks the format from the extension (`.xes` → XES, anything else → CSV).
inline LogFormat format_from_path(const std::string& path) {
  auto dot = path.rfind('.');
  if (dot != std::string::npos) {
    std::string ext = path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == "xes") return LogFormat::Xes;
  }
  return LogFormat::Csv;
}

inline EventLog load_log(const std::string& path, LogFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open event log '" + path + "'");
  return parse_log(in, format);
}

// Writes the CSV form read by parse_log: caseid, activity, time, then every
// attribute name in sorted order.
inline void write_csv(std::ostream& out, const EventLog& log) {
  csv::Row header{std::string(kCaseIdColumn), std::string(kActivityColumn), std::string(kTimeColumn)};
  header.insert(header.end(), log.attribute_names.begin(), log.attribute_names.end());
  csv::write_row(out, header);
  for (const auto& c : log.cases)
    for (const auto& e : c.events) {
      csv::Row row{e.caseid, e.activity, format_timestamp(e.time)};
      for (const auto& name : log.attribute_names) {
        auto it = e.attrs.find(name);
        row.push_back(it == e.attrs.end() ? std::string{} : it->second);
      }
      csv::write_row(out, row);
    }
}

inline EventLog filter_long_cases(const EventLog& log, std::size_t max_len = 100) {
  EventLog out;
  for (const auto& c : log.cases)
    if (c.size() <= max_len) {
      out.cases.push_back(c);
      for (const auto& e : c.events)
        for (const auto& [name, _] : e.attrs) out.attribute_names.insert(name);
    }
  return out;
}

// Keeps attributes whose most frequent value occurs in strictly more than
// `usage_threshold` of all events and that take at least two distinct values.
inline std::vector<std::string> select_attributes(const EventLog& log, double usage_threshold = 0.04) {
  std::map<std::string, std::map<std::string, std::size_t>> counts;
  std::size_t total = 0;
  for (const auto& c : log.cases)
    for (const auto& e : c.events) {
      ++total;
      for (const auto& [name, value] : e.attrs) ++counts[name][value];
    }
  std::vector<std::string> selected;
  for (const auto& [name, values] : counts) {
    if (values.size() < 2) continue;
    std::size_t top = 0;
    for (const auto& [_, n] : values) top = std::max(top, n);
    if (static_cast<double>(top) > usage_threshold * static_cast<double>(total)) selected.push_back(name);
  }
  return selected;  // std::map iteration is already lexicographic
}

inline AttributeSchema build_schema(const std::vector<Case>& training_cases,
                                    const std::vector<std::string>& selected) {
  std::set<std::string> activities;
  std::map<std::string, std::set<std::string>> values;
  for (const auto& name : selected) values[name];
  bool any_event = false;
  for (const auto& c : training_cases)
    for (const auto& e : c.events) {
      any_event = true;
      activities.insert(e.activity);
      for (auto& [name, vocab] : values)
        if (auto it = e.attrs.find(name); it != e.attrs.end()) vocab.insert(it->second);
    }
  if (!any_event) throw SchemaError("build_schema: empty training set");

  AttributeSchema schema;
  schema.activities.assign(activities.begin(), activities.end());
  for (auto& [name, vocab] : values) {
    schema.attributes.push_back(name);
    schema.vocab[name].assign(vocab.begin(), vocab.end());
  }
  return schema;
}

}  // namespace flowcast
