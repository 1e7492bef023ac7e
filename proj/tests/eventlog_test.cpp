#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "flowcast/eventlog.hpp"

using namespace flowcast;

namespace {

EventLog parse_csv_text(const std::string& text) {
  std::istringstream in(text);
  return parse_log(in, LogFormat::Csv);
}

Event make_event(std::string caseid, std::string activity, std::int64_t ms, AttributeMap attrs = {}) {
  return Event{std::move(caseid), std::move(activity), Timestamp{std::chrono::milliseconds{ms}}, std::move(attrs)};
}

// Log whose cases have the given lengths, all events carrying attribute `a`.
EventLog log_with_lengths(std::initializer_list<std::size_t> lengths) {
  EventLog log;
  std::size_t id = 0;
  for (auto len : lengths) {
    Case c{"c" + std::to_string(id++), {}};
    for (std::size_t i = 0; i < len; ++i) c.events.push_back(make_event(c.id, "x", static_cast<std::int64_t>(i)));
    log.cases.push_back(std::move(c));
  }
  return log;
}

}  // namespace

TEST(Timestamp, ParsesIsoVariants) {
  auto base = parse_timestamp("2020-03-01T10:00:00");
  ASSERT_TRUE(base);
  EXPECT_EQ(parse_timestamp("2020-03-01T10:00:00Z"), base);
  EXPECT_EQ(parse_timestamp("2020-03-01 10:00:00"), base);
  EXPECT_EQ(parse_timestamp("2020-03-01T12:00:00+02:00"), base);
  EXPECT_EQ(parse_timestamp("2020-03-01T09:30:00-00:30"), base);
  EXPECT_EQ(*parse_timestamp("2020-03-01T10:00:00.5") - *base, std::chrono::milliseconds(500));
  EXPECT_EQ(*parse_timestamp("2020-03-01T10:00:00.123456") - *base, std::chrono::milliseconds(123));
  EXPECT_EQ(format_timestamp(*parse_timestamp("2020-03-01T10:00:00.042Z")), "2020-03-01T10:00:00.042Z");
}

TEST(Timestamp, RejectsMalformed) {
  for (const char* bad : {"not-a-date", "2020-02-30T00:00:00", "2020-03-01", "2020-03-01T25:00:00",
                          "2020-03-01T10:00:00.", "2020-03-01T10:00:00+0200", "2020-03-01T10:00:00Zjunk"})
    EXPECT_FALSE(parse_timestamp(bad)) << bad;
}

TEST(ParseLog, GroupsRowsByCase) {
  auto log = parse_csv_text(
      "caseid,activity,time\n"
      "1,a,2020-01-01T00:00:00\n"
      "2,b,2020-01-01T00:00:01\n"
      "1,c,2020-01-01T00:00:02\n");
  ASSERT_EQ(log.cases.size(), 2u);
  EXPECT_EQ(log.event_count(), 3u);
  EXPECT_EQ(log.cases[0].id, "1");
  EXPECT_EQ(log.cases[0].size(), 2u);
  EXPECT_TRUE(log.attribute_names.empty());
}

TEST(ParseLog, SortsEventsByTimeKeepingSourceOrderOnTies) {
  auto log = parse_csv_text(
      "caseid,activity,time\n"
      "1,late,2020-01-01T00:00:05\n"
      "1,tie1,2020-01-01T00:00:01\n"
      "1,tie2,2020-01-01T00:00:01\n"
      "1,early,2020-01-01T00:00:00\n");
  std::vector<std::string> order;
  for (const auto& e : log.cases[0].events) order.push_back(e.activity);
  EXPECT_EQ(order, (std::vector<std::string>{"early", "tie1", "tie2", "late"}));
}

TEST(ParseLog, AttributesAndQuoting) {
  auto log = parse_csv_text(
      "activity,caseid,time,food,\"note, quoted\"\r\n"
      "eat,7,2020-01-01T00:00:00,\"salad, green\",\r\n"
      "drink,7,2020-01-01T00:00:01,,\"he said \"\"hi\"\"\"\r\n");
  ASSERT_EQ(log.cases.size(), 1u);
  const auto& ev = log.cases[0].events;
  EXPECT_EQ(ev[0].attrs.at("food"), "salad, green");
  EXPECT_EQ(ev[0].attrs.count("note, quoted"), 0u);  // empty cell omitted
  EXPECT_EQ(ev[1].attrs.count("food"), 0u);
  EXPECT_EQ(ev[1].attrs.at("note, quoted"), "he said \"hi\"");
  EXPECT_EQ(log.attribute_names, (std::set<std::string>{"food", "note, quoted"}));
}

TEST(ParseLog, MalformedTimestampNamesRow) {
  try {
    parse_csv_text("caseid,activity,time\n1,a,2020-01-01T00:00:00\n1,b,not-a-date\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
  }
}

TEST(ParseLog, MissingMandatoryColumnIsSchemaError) {
  EXPECT_THROW(parse_csv_text("caseid,activity\n1,a\n"), SchemaError);
  EXPECT_THROW(parse_csv_text(""), SchemaError);
}

TEST(ParseLog, RaggedRowIsParseError) {
  EXPECT_THROW(parse_csv_text("caseid,activity,time\n1,a\n"), ParseError);
}

TEST(ParseLog, XesSubset) {
  std::istringstream in(R"(<?xml version="1.0" encoding="UTF-8"?>
<log xes.version="1.0">
  <string key="concept:name" value="log name"/>
  <trace>
    <string key="concept:name" value="case-1"/>
    <event>
      <string key="concept:name" value="drink"/>
      <date key="time:timestamp" value="2020-01-01T00:00:02.000+00:00"/>
      <string key="food" value="water"/>
    </event>
    <event>
      <string key="concept:name" value="eat"/>
      <date key="time:timestamp" value="2020-01-01T00:00:01.000+00:00"/>
      <string key="food" value="salad"/>
      <int key="amount" value="3"/>
    </event>
  </trace>
  <trace>
    <string key="concept:name" value="case-2"/>
    <event>
      <string key="concept:name" value="eat"/>
      <date key="time:timestamp" value="2020-01-02T00:00:00Z"/>
    </event>
  </trace>
</log>)");
  auto log = parse_log(in, LogFormat::Xes);
  ASSERT_EQ(log.cases.size(), 2u);
  EXPECT_EQ(log.cases[0].id, "case-1");
  EXPECT_EQ(log.cases[0].events[0].activity, "eat");
  EXPECT_EQ(log.cases[0].events[0].attrs.at("amount"), "3");
  EXPECT_EQ(log.cases[0].events[1].attrs.at("food"), "water");
  EXPECT_EQ(log.attribute_names, (std::set<std::string>{"amount", "food"}));
}

TEST(ParseLog, XesBadTimestamp) {
  std::istringstream in(R"(<log><trace><event><string key="concept:name" value="a"/>
    <date key="time:timestamp" value="yesterday"/></event></trace></log>)");
  EXPECT_THROW(parse_log(in, LogFormat::Xes), ParseError);
}

TEST(ParseLog, CsvRoundTripProperty) {
  std::mt19937 gen(7);
  const std::vector<std::string> values{"a", "b,c", "q\"uote", "line\nbreak", "plain"};
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<Event> events;
    int n_cases = 1 + static_cast<int>(gen() % 5);
    for (int c = 0; c < n_cases; ++c)
      for (int i = 0, n = 1 + static_cast<int>(gen() % 6); i < n; ++i) {
        AttributeMap attrs;
        if (gen() % 2) attrs["x"] = values[gen() % values.size()];
        if (gen() % 3 == 0) attrs["y z"] = values[gen() % values.size()];
        events.push_back(make_event("case" + std::to_string(c), "act" + std::to_string(gen() % 3),
                                    1577836800000 + i * 1000 + static_cast<std::int64_t>(gen() % 999), attrs));
      }
    EventLog log = detail::assemble_log(events);
    std::ostringstream out;
    write_csv(out, log);
    EXPECT_EQ(parse_csv_text(out.str()), log) << out.str();
  }
}

TEST(FilterLongCases, BoundaryIsInclusive) {
  auto log = log_with_lengths({99, 100, 101});
  auto kept = filter_long_cases(log, 100);
  ASSERT_EQ(kept.cases.size(), 2u);
  EXPECT_EQ(kept.cases[0].size(), 99u);
  EXPECT_EQ(kept.cases[1].size(), 100u);
}

TEST(FilterLongCases, UnchangedAndEmptyLogs) {
  auto ones = log_with_lengths({1, 1, 1});
  EXPECT_EQ(filter_long_cases(ones, 100), ones);
  EXPECT_TRUE(filter_long_cases(EventLog{}, 100).cases.empty());
}

TEST(FilterLongCases, Idempotent) {
  auto log = log_with_lengths({3, 8, 2, 9, 5});
  auto once = filter_long_cases(log, 5);
  EXPECT_EQ(filter_long_cases(once, 5), once);
}

namespace {

// 100 events in one case; attribute values assigned by count.
EventLog log_with_value_counts(const std::map<std::string, std::vector<std::pair<std::string, int>>>& spec) {
  std::vector<Event> events;
  for (int i = 0; i < 100; ++i) events.push_back(make_event("c", "x", i));
  for (const auto& [name, counts] : spec) {
    int pos = 0;
    for (const auto& [value, n] : counts)
      for (int j = 0; j < n; ++j) events[pos++].attrs[name] = value;
  }
  return detail::assemble_log(events);
}

}  // namespace

TEST(SelectAttributes, UsageRule) {
  auto log = log_with_value_counts({
      {"above", {{"p", 5}, {"q", 1}, {"r", 1}}},  // top value covers 5% → kept
      {"constant", {{"k", 100}}},                // single unique value → dropped
      {"below", {{"p", 3}, {"q", 3}, {"r", 3}}},  // 3% → dropped
      {"exactly", {{"p", 4}, {"q", 4}}},          // exactly 4% is not "more than" → dropped
  });
  EXPECT_EQ(select_attributes(log, 0.04), (std::vector<std::string>{"above"}));
}

TEST(SelectAttributes, IndependentOfCaseOrder) {
  std::mt19937 gen(3);
  std::vector<Event> events;
  for (int i = 0; i < 300; ++i)
    events.push_back(make_event("c" + std::to_string(i % 17), "x", i,
                                {{"a", std::to_string(gen() % 4)}, {"b", std::to_string(gen() % 40)}}));
  EventLog log = detail::assemble_log(events);
  auto expected = select_attributes(log, 0.04);
  for (int t = 0; t < 5; ++t) {
    std::shuffle(log.cases.begin(), log.cases.end(), gen);
    EXPECT_EQ(select_attributes(log, 0.04), expected);
  }
}

TEST(BuildSchema, OrdersAndTrainingOnlyVocabulary) {
  std::vector<Case> training{
      {"1", {make_event("1", "eat", 0, {{"food", "salad"}}), make_event("1", "drink", 1, {{"food", "water"}})}},
      {"2", {make_event("2", "eat", 0, {{"food", "pizza"}}), make_event("2", "drink", 1, {{"food", "soda"}})}}};
  auto schema = build_schema(training, {"food"});
  EXPECT_EQ(schema.activities, (std::vector<std::string>{"drink", "eat"}));
  EXPECT_EQ(schema.attributes, (std::vector<std::string>{"food"}));
  EXPECT_EQ(schema.vocab.at("food"), (std::vector<std::string>{"pizza", "salad", "soda", "water"}));
  // A value that only exists outside the training cases never enters the vocabulary.
  for (const auto& v : schema.vocab.at("food")) EXPECT_NE(v, "burger");
}

TEST(BuildSchema, EmptyTrainingSetIsError) {
  EXPECT_THROW(build_schema({}, {"food"}), SchemaError);
}
