#include <gtest/gtest.h>

#include <fstream>

#include "rest/errors.hpp"
#include "rest/heatmap.hpp"
#include "support/fixtures.hpp"

using namespace rest;

namespace {

void expect_one_hot(const StrategyHeatmap& h) {
  for (const auto& row : h.rows) {
    ASSERT_EQ(row.size(), static_cast<std::size_t>(h.blocks * h.categories));
    int total = 0;
    for (int b = 0; b < h.blocks; ++b) {
      int ones = 0;
      for (int c = 0; c < h.categories; ++c) ones += row[static_cast<std::size_t>(b * h.categories + c)];
      EXPECT_EQ(ones, 1);
      total += ones;
    }
    EXPECT_EQ(total, h.blocks);
  }
}

}  // namespace

TEST(Heatmap, ModalCategoryPerBlockWithTiesToSmaller) {
  const std::vector<std::vector<int>> codes = {{0, 2}, {1, 2}, {1, 0}, {2, 1}};
  const std::vector<std::string> groups = {"a", "a", "a", "b"};
  const auto h = heatmap_from_codes(codes, groups, {}, 2, 3);
  ASSERT_EQ(h.rows.size(), 2u);
  EXPECT_EQ(h.row_labels, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(h.rows[0], (std::vector<std::uint8_t>{0, 1, 0, 0, 0, 1}));
  EXPECT_EQ(h.rows[1], (std::vector<std::uint8_t>{0, 0, 1, 0, 1, 0}));
  EXPECT_EQ(h.group_sizes, (std::vector<std::size_t>{3, 1}));

  // 1-1 tie in block 0 goes to category 0.
  const auto t = heatmap_from_codes({{2, 0}, {0, 0}}, {"x", "x"}, {}, 2, 3);
  EXPECT_EQ(t.rows[0][0], 1);
  expect_one_hot(t);
}

TEST(Heatmap, EmptyRequestedGroupsAreOmitted) {
  const auto h = heatmap_from_codes({{0}, {1}}, {"b", "d"}, {"a", "b", "c", "d"}, 1, 2);
  EXPECT_EQ(h.row_labels, (std::vector<std::string>{"b", "d"}));
  EXPECT_EQ(h.omitted, (std::vector<std::string>{"a", "c"}));
}

TEST(Heatmap, CsvLayout) {
  const auto h = heatmap_from_codes({{1, 0}}, {"g"}, {}, 2, 2);
  EXPECT_EQ(h.to_csv(), "group,0,1,2,3\ng,0,1,1,0\n");
}

TEST(Heatmap, BuiltFromModelIsDeterministicOneHot) {
  const auto ds = fixtures::micro_dataset();
  auto records = ds.interactions;
  for (std::size_t i = 0; i < records.size(); ++i) records[i].timestamp = static_cast<std::int64_t>(i * 10);
  const GraphStore g(ds);
  const RestModel m(fixtures::micro_config(4, 5), 2);
  const auto grouping = Grouping::parse("window:30");
  const auto a = build_heatmap(m, g, records, grouping);
  const auto b = build_heatmap(m, g, records, grouping);
  EXPECT_EQ(a.rows, b.rows);
  EXPECT_EQ(a.rows.size(), 3u);  // windows [0,30), [30,60), [60,90)
  expect_one_hot(a);

  // Identical codes give identical rows.
  std::vector<InteractionRecord> twice = {records[0], records[0]};
  twice[1].timestamp = 1000;
  const auto t = build_heatmap(m, g, twice, Grouping::parse("window:100"));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0], t.rows[1]);
  EXPECT_EQ(t.omitted.size(), 9u);
}

TEST(Heatmap, GroupingParse) {
  EXPECT_EQ(Grouping::parse("window:60").window, 60);
  EXPECT_EQ(Grouping::parse("date").kind, Grouping::Kind::kDate);
  EXPECT_EQ(Grouping::parse("labels").kind, Grouping::Kind::kLabels);
  EXPECT_THROW(Grouping::parse("window:0"), ValidationError);
  EXPECT_THROW(Grouping::parse("weekly"), ValidationError);
}

TEST(Heatmap, DateGroupingUsesUtcDays) {
  const auto ds = fixtures::micro_dataset();
  auto records = ds.interactions;
  for (std::size_t i = 0; i < records.size(); ++i) records[i].timestamp = i < 4 ? 0 : 86400 * 2 + 5;
  const RestModel m(fixtures::micro_config(4, 5), 2);
  const auto h = build_heatmap(m, GraphStore(ds), records, Grouping::parse("date"));
  EXPECT_EQ(h.row_labels, (std::vector<std::string>{"1970-01-01", "1970-01-03"}));
}

TEST(Heatmap, MissingTimestampsRejected) {
  const auto ds = fixtures::micro_dataset();
  const RestModel m(fixtures::micro_config(4, 5), 2);
  EXPECT_THROW(build_heatmap(m, GraphStore(ds), ds.interactions, Grouping::parse("window:10")), ValidationError);
}

TEST(Heatmap, PngHasSignatureAndSize) {
  const auto h = heatmap_from_codes({{1, 0}, {0, 1}}, {"a", "b"}, {}, 2, 2);
  const auto dir = fixtures::temp_dir("png");
  h.save_png(dir / "h.png", 4);
  std::ifstream in(dir / "h.png", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  ASSERT_GT(bytes.size(), 24u);
  EXPECT_EQ(bytes.substr(1, 3), "PNG");
  auto be32 = [&](std::size_t off) {
    return (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off])) << 24) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + 1])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + 2])) << 8) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + 3]));
  };
  EXPECT_EQ(be32(16), 16u);  // width = 4 columns * 4 px
  EXPECT_EQ(be32(20), 8u);   // height = 2 rows * 4 px
}
