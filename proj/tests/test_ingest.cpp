#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "bgl/csv.hpp"
#include "bgl/ingest.hpp"

using namespace bgl;

namespace {

ColumnMapping simple_mapping() {
  ColumnMapping m;
  m.date_column = "date";
  m.time_column = "time";
  m.speed_columns = {{10, "ws10"}, {80, "ws80"}};
  return m;
}

ParseResult parse(const std::string& text, const ColumnMapping& m = simple_mapping()) {
  std::istringstream in(text);
  return parse_csv(in, m);
}

RawRecord record(int year, int month, int day, int hour, double v10) {
  RawRecord r;
  r.timestamp = {year, month, day, hour, 0};
  r.speeds_by_height[10] = v10;
  return r;
}

}  // namespace

TEST(Csv, QuotedFieldsAndEmbeddedDelimiters) {
  std::istringstream in("a,\"b,c\",\"say \"\"hi\"\"\"\n\"multi\nline\",2,3\n");
  csv::Reader reader(in, ',');
  auto r1 = reader.next();
  ASSERT_TRUE(r1);
  EXPECT_EQ(r1->fields, (std::vector<std::string>{"a", "b,c", "say \"hi\""}));
  auto r2 = reader.next();
  ASSERT_TRUE(r2);
  EXPECT_EQ(r2->fields[0], "multi\nline");
  EXPECT_EQ(r2->line, 2u);
  EXPECT_FALSE(reader.next());
  EXPECT_EQ(csv::quote("b,c"), "\"b,c\"");
  EXPECT_EQ(csv::join({"x", "y\"z"}), "x,\"y\"\"z\"");
}

TEST(Csv, UnterminatedQuoteIsAnError) {
  std::istringstream in("a,\"open\n");
  csv::Reader reader(in, ',');
  EXPECT_THROW(reader.next(), bgl::io_error);
}

TEST(Timestamp, AcceptedLayouts) {
  const Timestamp want{2015, 3, 7, 13, 0};
  EXPECT_EQ(*parse_timestamp("03/07/2015", "13:00"), want);
  EXPECT_EQ(*parse_timestamp("2015-03-07", "13:00:00"), want);
  EXPECT_EQ(*parse_timestamp("2015/03/07", "13"), want);
  EXPECT_EQ(*parse_timestamp("2015-03-07 13:00"), want);
  EXPECT_FALSE(parse_timestamp("13/45/2015", "00:00"));
  EXPECT_FALSE(parse_timestamp("garbage"));
}

TEST(ParseCsv, HeaderOnlyFileIsEmpty) {
  const auto r = parse("date,time,ws10,ws80\n");
  EXPECT_TRUE(r.records.empty());
  EXPECT_EQ(r.log.rows_kept, 0u);
  EXPECT_EQ(r.log.rows_read, 0u);
}

TEST(ParseCsv, SentinelIsPassedThrough) {
  const auto r = parse("date,time,ws10,ws80\n01/01/2010,1:00,-99999,4.5\n");
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0].speeds_by_height.at(10), kSentinel);
  EXPECT_EQ(r.records[0].speeds_by_height.at(80), 4.5);
}

TEST(ParseCsv, HeadersMatchCaseInsensitively) {
  const auto r = parse("DATE, Time ,WS10,ws80\n01/01/2010,1:00,3,4\n");
  EXPECT_EQ(r.records.size(), 1u);
}

TEST(ParseCsv, MissingColumnIsAMappingError) {
  EXPECT_THROW(parse("date,time,ws10\n01/01/2010,1:00,3\n"), bgl::mapping_error);
}

TEST(ParseCsv, MalformedRowsAreSkippedWithLineNumbers) {
  const auto r = parse(
      "date,time,ws10,ws80\n"
      "01/01/2010,1:00,3,4\n"
      "not a date,1:00,3,4\n"
      "01/01/2010,2:00,abc,4\n"
      "01/01/2010,3:00,3\n"
      "01/01/2010,4:00,3,4\n");
  EXPECT_EQ(r.log.rows_read, 5u);
  EXPECT_EQ(r.log.rows_kept, 2u);
  ASSERT_EQ(r.log.malformed.size(), 3u);
  EXPECT_EQ(r.log.malformed[0].line, 3u);
  EXPECT_EQ(r.log.malformed[1].line, 4u);
  EXPECT_EQ(r.log.malformed[2].line, 5u);
}

TEST(ParseCsv, MappingFromConfigFile) {
  std::istringstream cfg(
      "# tab separated export\n"
      "delimiter = tab\n"
      "date_column = Stamp\n"
      "time_column =\n"
      "speed_column.50 = speed\n");
  ColumnMapping m;
  apply_mapping_keys(parse_key_values(cfg, "cfg"), m);
  const auto r = parse("Stamp\tspeed\n2012-06-01 05:00\t7.25\n", m);
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0].timestamp, (Timestamp{2012, 6, 1, 5, 0}));
  EXPECT_EQ(r.records[0].speeds_by_height.at(50), 7.25);
}

TEST(ParseCsv, DefaultMappingNamesTheM2Columns) {
  const auto m = ColumnMapping::m2_defaults();
  EXPECT_EQ(m.speed_columns.size(), 4u);
  EXPECT_EQ(m.speed_columns.at(80), "Avg Wind Speed @ 80m [m/s]");
}

TEST(Clean, DuplicateWithSentinelKeepsTheValidRow) {
  const std::vector<RawRecord> recs = {record(2010, 1, 1, 0, kSentinel), record(2010, 1, 1, 0, 5.0)};
  const auto r = clean(recs, 10, {2010, 2010});
  ASSERT_EQ(r.sample.n(), 1u);
  EXPECT_EQ(r.sample.values()[0], 5.0);
  EXPECT_EQ(r.log.duplicates_removed, 1u);
  EXPECT_EQ(r.log.sentinel_rows_removed, 0u);
  EXPECT_TRUE(r.log.reconciles());
}

TEST(Clean, IdentityWithoutDuplicatesOrSentinels) {
  std::vector<RawRecord> recs;
  for (int h = 0; h < 24; ++h) recs.push_back(record(2012, 5, 1, h, 1.0 + h));
  const auto r = clean(recs, 10, {2010, 2020});
  EXPECT_EQ(r.sample.n(), 24u);
  EXPECT_EQ(r.sample.values()[3], 4.0);
  EXPECT_EQ(r.log.duplicates_removed + r.log.sentinel_rows_removed + r.log.out_of_range + r.log.nonpositive_removed,
            0u);
  EXPECT_EQ(r.sample.height_m(), 10);
  EXPECT_EQ(r.sample.years(), (YearRange{2010, 2020}));
}

TEST(Clean, LogReconcilesAndCleaningIsIdempotent) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> hour(0, 23), day(1, 3), year(2009, 2011), kind(0, 9);
  std::uniform_real_distribution<double> speed(0.1, 20.0);
  std::vector<RawRecord> recs;
  for (int i = 0; i < 400; ++i) {
    const int k = kind(rng);
    double v = speed(rng);
    if (k == 0) v = kSentinel;
    if (k == 1) v = 0.0;
    auto r = record(year(rng), 1, day(rng), hour(rng), v);
    if (k == 2) r.speeds_by_height.clear();
    recs.push_back(r);
  }
  const auto first = clean_records(recs, 10, {2010, 2010});
  EXPECT_TRUE(first.log.reconciles());
  EXPECT_GT(first.log.duplicates_removed, 0u);
  EXPECT_GT(first.log.sentinel_rows_removed, 0u);
  EXPECT_GT(first.log.out_of_range, 0u);
  const auto second = clean_records(first.records, 10, {2010, 2010});
  EXPECT_EQ(second.records, first.records);
  EXPECT_EQ(second.log.rows_kept, second.log.rows_read);
}

TEST(Clean, AllSentinelGroupIsDropped) {
  const std::vector<RawRecord> recs = {record(2010, 1, 1, 0, kSentinel), record(2010, 1, 1, 0, kSentinel),
                                       record(2010, 1, 1, 1, 2.0)};
  const auto r = clean(recs, 10, {2010, 2010});
  EXPECT_EQ(r.sample.n(), 1u);
  EXPECT_EQ(r.log.duplicates_removed, 1u);
  EXPECT_EQ(r.log.sentinel_rows_removed, 1u);
  EXPECT_TRUE(r.log.reconciles());
}

TEST(Clean, EmptyResultThrows) {
  const std::vector<RawRecord> recs = {record(2010, 1, 1, 0, 2.0)};
  try {
    clean(recs, 10, {2015, 2015});
    FAIL() << "expected empty_result_error";
  } catch (const bgl::empty_result_error& e) {
    EXPECT_NE(std::string(e.what()).find("empty-result"), std::string::npos);
  }
}

TEST(Describe, ThreePointFixture) {
  const auto d = describe(Sample({1.0, 2.0, 3.0}));
  EXPECT_NEAR(d.skewness, 0.0, 1e-15);
  EXPECT_NEAR(d.kurtosis, 1.5, 1e-15);
  EXPECT_DOUBLE_EQ(d.mean, 2.0);
  EXPECT_DOUBLE_EQ(d.variance, 1.0);
  EXPECT_DOUBLE_EQ(d.median, 2.0);
  EXPECT_DOUBLE_EQ(d.min, 1.0);
  EXPECT_DOUBLE_EQ(d.max, 3.0);
}

TEST(Describe, ReflectionNegatesSkewness) {
  std::mt19937_64 rng(13);
  std::gamma_distribution<double> g(2.0, 1.5);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> v(200);
    for (double& x : v) x = g(rng) + 0.01;
    const double top = *std::max_element(v.begin(), v.end()) + 1.0;
    std::vector<double> r;
    for (double x : v) r.push_back(top - x);
    const auto a = describe(Sample(v));
    const auto b = describe(Sample(r));
    EXPECT_NEAR(a.skewness, -b.skewness, 1e-10);
    EXPECT_NEAR(a.kurtosis, b.kurtosis, 1e-10);
  }
}

TEST(Describe, PermutationInvariant) {
  std::vector<double> v;
  for (int i = 1; i <= 101; ++i) v.push_back(std::sqrt(i * 1.7));
  const auto a = describe(Sample(v));
  std::mt19937_64 rng(14);
  std::shuffle(v.begin(), v.end(), rng);
  const auto b = describe(Sample(v));
  EXPECT_EQ(a.median, b.median);
  EXPECT_EQ(a.p95, b.p95);
  EXPECT_NEAR(a.mean, b.mean, 1e-14);
  EXPECT_NEAR(a.kurtosis, b.kurtosis, 1e-12);
}

TEST(Describe, Errors) {
  EXPECT_THROW(describe(Sample({1.0})), bgl::domain_error);
  EXPECT_THROW(describe(Sample({2.0, 2.0})), bgl::degenerate_error);
}

TEST(Values, RoundTripIsExact) {
  const Sample s({0.1, 3.0000000000000004, 1e-7, 35.71});
  std::stringstream io;
  write_values(io, s);
  EXPECT_EQ(read_values(io), s);
}

TEST(Values, BadLineIsReported) {
  std::istringstream in("1.5\n# note\n-2\n");
  try {
    read_values(in, "v.txt");
    FAIL() << "expected io_error";
  } catch (const bgl::io_error& e) {
    EXPECT_NE(std::string(e.what()).find("v.txt:3"), std::string::npos);
  }
}
