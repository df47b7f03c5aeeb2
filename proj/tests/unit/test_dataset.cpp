#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "rest/dataset.hpp"
#include "rest/errors.hpp"
#include "support/fixtures.hpp"

using namespace rest;

TEST(Ingest, ThreeRowsGiveDenseIds) {
  const auto ds = parse_dataset("alice\tbook\t5\nbob\tbook\t3\nalice\tpen\t1\n", std::nullopt, TsvFormat::kExplicit, 5);
  ASSERT_EQ(ds.interactions.size(), 3u);
  EXPECT_EQ(ds.num_users, 2);
  EXPECT_EQ(ds.num_items, 2);
  EXPECT_EQ(ds.interactions[0], (InteractionRecord{0, 0, 5, true, std::nullopt}));
  EXPECT_EQ(ds.interactions[1], (InteractionRecord{1, 0, 3, true, std::nullopt}));
  EXPECT_EQ(ds.interactions[2], (InteractionRecord{0, 1, 1, true, std::nullopt}));
  EXPECT_EQ(ds.users.original(1), "bob");
  EXPECT_EQ(ds.items.original(1), "pen");
  EXPECT_NO_THROW(ds.validate());
}

TEST(Ingest, EmptyInputIsValidationError) {
  EXPECT_THROW(parse_dataset("", std::nullopt, TsvFormat::kExplicit, 5), ValidationError);
  EXPECT_THROW(parse_dataset("# only a comment\n\n", std::nullopt, TsvFormat::kExplicit, 5), ValidationError);
}

TEST(Ingest, MalformedLineNamesLine) {
  try {
    parse_dataset("a\tb\t4\na\tc\n", std::nullopt, TsvFormat::kExplicit, 5);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  try {
    parse_dataset("a\tb\t4\n\na\tc\tx\n", std::nullopt, TsvFormat::kExplicit, 5);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Ingest, RatingOutOfRange) {
  EXPECT_THROW(parse_dataset("a\tb\t6\n", std::nullopt, TsvFormat::kExplicit, 5), ValidationError);
  EXPECT_THROW(parse_dataset("a\tb\t0\n", std::nullopt, TsvFormat::kExplicit, 5), ValidationError);
  EXPECT_THROW(parse_dataset("a\tb\t2\n", std::nullopt, TsvFormat::kImplicit, 5), ValidationError);
}

TEST(Ingest, DuplicatesKeepLatest) {
  LoadSummary sum;
  auto ds = parse_dataset("a\tb\t4\t20\na\tb\t2\t10\n", std::nullopt, TsvFormat::kExplicit, 5, &sum);
  ASSERT_EQ(ds.interactions.size(), 1u);
  EXPECT_EQ(ds.interactions[0].rating, 4);
  EXPECT_EQ(sum.duplicates_replaced, 1u);
  ds = parse_dataset("a\tb\t4\na\tb\t2\n", std::nullopt, TsvFormat::kExplicit, 5);
  EXPECT_EQ(ds.interactions[0].rating, 2);
}

TEST(Ingest, SocialEdgesSymmetrizedAndUnknownDropped) {
  LoadSummary sum;
  const auto ds = parse_dataset("a\tx\t1\nb\tx\t2\n", std::string("a\tb\na\tzed\nb\tb\n"), TsvFormat::kExplicit, 5, &sum);
  EXPECT_EQ(ds.social_edges, (std::vector<std::pair<UserId, UserId>>{{0, 1}, {1, 0}}));
  EXPECT_EQ(sum.social_edges_dropped, 2u);
  EXPECT_NO_THROW(ds.validate());
}

TEST(Ingest, ImplicitTwoColumns) {
  const auto ds = parse_dataset("a\tx\nb\ty\n", std::nullopt, TsvFormat::kImplicit, 5);
  EXPECT_EQ(ds.feedback_kind, FeedbackKind::kImplicit);
  EXPECT_EQ(ds.rating_levels, 1);
  EXPECT_EQ(ds.interactions[1].rating, 1);
}

TEST(Ingest, LoadFromFilesAndMissingSocialNamed) {
  const auto dir = fixtures::temp_dir("ingest");
  std::ofstream(dir / "i.tsv") << "a\tx\t3\n";
  LoadOptions opt;
  opt.interactions = dir / "i.tsv";
  EXPECT_EQ(load_dataset(opt).interactions.size(), 1u);
  opt.social = dir / "missing_social.tsv";
  try {
    load_dataset(opt);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("missing_social.tsv"), std::string::npos);
  }
}

TEST(Split, SizesBeforeRepair) {
  const auto s = split_sizes(10, SplitSpec{0.8, 0.1, 0.1, 3});
  EXPECT_EQ(s.train, 8u);
  EXPECT_EQ(s.val, 1u);
  EXPECT_EQ(s.test, 1u);

  // Dense toy set: 2 users x 5 items, every record repeatable so no repair moves anything.
  std::vector<std::tuple<int, int, int>> rows;
  for (int u = 0; u < 2; ++u)
    for (int v = 0; v < 5; ++v) rows.emplace_back(u, v, 1 + (u + v) % 5);
  const auto ds = fixtures::make_dataset(2, 5, rows);
  const auto split = split_dataset(ds, SplitSpec{0.8, 0.1, 0.1, 3});
  EXPECT_EQ(split.target_sizes.train, 8u);
  EXPECT_EQ(split.target_sizes.val, 1u);
  EXPECT_EQ(split.target_sizes.test, 1u);
  EXPECT_EQ(split.train.interactions.size() + split.val.interactions.size() + split.test.interactions.size(), 10u);
}

TEST(Split, SingleInteractionUserLandsInTrain) {
  std::vector<std::tuple<int, int, int>> rows;
  for (int u = 0; u < 10; ++u)
    for (int v = 0; v < 6; ++v) rows.emplace_back(u, v, 3);
  rows.emplace_back(10, 2, 5);  // user 10 has one interaction
  const auto ds = fixtures::make_dataset(11, 6, rows);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = split_dataset(ds, SplitSpec{0.5, 0.25, 0.25, seed});
    bool found = false;
    for (const auto& r : s.train.interactions) found |= r.user == 10;
    EXPECT_TRUE(found);
  }
}

TEST(Split, NoNewUsersOrItemsProperty) {
  Rng rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    auto ds = fixtures::random_dataset(rng, 15, 25, 1 + static_cast<int>(rng.index(6)), 0.1);
    const auto s = split_dataset(ds, SplitSpec{0.6, 0.2, 0.2, static_cast<std::uint64_t>(trial)});
    std::set<UserId> users;
    std::set<ItemId> items;
    for (const auto& r : s.train.interactions) {
      users.insert(r.user);
      items.insert(r.item);
    }
    for (const auto* part : {&s.val, &s.test})
      for (const auto& r : part->interactions) {
        EXPECT_TRUE(users.count(r.user));
        EXPECT_TRUE(items.count(r.item));
      }
    EXPECT_EQ(s.train.social_edges, ds.social_edges);
    EXPECT_EQ(s.test.social_edges, ds.social_edges);
    EXPECT_EQ(s.train.interactions.size() + s.val.interactions.size() + s.test.interactions.size(), ds.interactions.size());
  }
}

TEST(Split, DeterministicPerSeedAndValidated) {
  Rng rng(5);
  const auto ds = fixtures::random_dataset(rng, 20, 30, 5, 0.1);
  const auto a = split_dataset(ds, SplitSpec{0.8, 0.1, 0.1, 9});
  const auto b = split_dataset(ds, SplitSpec{0.8, 0.1, 0.1, 9});
  EXPECT_EQ(a.train_indices, b.train_indices);
  EXPECT_EQ(a.test_indices, b.test_indices);
  EXPECT_THROW(split_dataset(ds, SplitSpec{0.9, 0.1, 0.0, 1}), ValidationError);
  EXPECT_THROW(split_dataset(ds, SplitSpec{0.5, 0.1, 0.1, 1}), ValidationError);
}

TEST(Negatives, OnlyRemainingItemIsChosen) {
  // User 0 saw items 0..3 of 5; the eval positive is item 3.
  auto all = fixtures::make_dataset(2, 5, {{0, 0, 1}, {0, 1, 1}, {0, 2, 1}, {1, 4, 1}}, {}, FeedbackKind::kImplicit);
  auto eval = fixtures::make_dataset(2, 5, {{0, 3, 1}}, {}, FeedbackKind::kImplicit);
  const auto neg = sample_eval_negatives(all, eval, 1, 3);
  ASSERT_EQ(neg.lists.size(), 1u);
  auto items = neg.lists[0].items;
  std::sort(items.begin(), items.end());
  EXPECT_EQ(items, (std::vector<ItemId>{3, 4}));
  EXPECT_EQ(neg.lists[0].positive, 3);
}

TEST(Negatives, ListLengthAndHistoryExcluded) {
  Rng rng(3);
  const auto ds = fixtures::random_dataset(rng, 30, 300, 20, 0.0, 1, FeedbackKind::kImplicit);
  const auto split = split_dataset(ds, SplitSpec{0.8, 0.1, 0.1, 1});
  const auto neg = sample_eval_negatives({&split.train, &split.val, &split.test}, split.test, 99, 5);
  std::set<std::pair<UserId, ItemId>> seen;
  for (const auto& r : ds.interactions) seen.emplace(r.user, r.item);
  ASSERT_FALSE(neg.lists.empty());
  for (const auto& l : neg.lists) {
    EXPECT_EQ(l.items.size(), 100u);
    EXPECT_EQ(std::set<ItemId>(l.items.begin(), l.items.end()).size(), 100u);
    for (auto v : l.items)
      if (v != l.positive) {
        EXPECT_FALSE(seen.count(std::make_pair(l.user, v)));
      }
  }
  const auto again = sample_eval_negatives({&split.train, &split.val, &split.test}, split.test, 99, 5);
  EXPECT_EQ(again.lists[0].items, neg.lists[0].items);
}

TEST(Negatives, UserWhoSawEverythingIsSkipped) {
  auto all = fixtures::make_dataset(1, 2, {{0, 0, 1}, {0, 1, 1}}, {}, FeedbackKind::kImplicit);
  auto eval = fixtures::make_dataset(1, 2, {{0, 1, 1}}, {}, FeedbackKind::kImplicit);
  const auto neg = sample_eval_negatives(all, eval, 1, 1);
  EXPECT_TRUE(neg.lists.empty());
  EXPECT_EQ(neg.skipped, 1u);
}

TEST(Negatives, SaveLoadRoundTrip) {
  Rng rng(3);
  const auto ds = fixtures::random_dataset(rng, 10, 50, 5, 0.0, 1, FeedbackKind::kImplicit);
  const auto neg = sample_eval_negatives(ds, ds, 10, 5);
  const auto dir = fixtures::temp_dir("neg");
  save_negatives(neg, dir / "n.tsv");
  const auto back = load_negatives(dir / "n.tsv");
  ASSERT_EQ(back.lists.size(), neg.lists.size());
  EXPECT_EQ(back.lists[3].items, neg.lists[3].items);
  EXPECT_EQ(back.lists[3].positive, neg.lists[3].positive);
}

TEST(Prepared, InteractionsRoundTrip) {
  Rng rng(2);
  const auto ds = fixtures::random_dataset(rng, 10, 20, 4, 0.2);
  const auto dir = fixtures::temp_dir("prepared");
  save_prepared(ds, dir, "train");
  save_social_tsv(ds, dir / "social.tsv");
  ds.users.save(dir / "users.tsv");
  ds.items.save(dir / "items.tsv");
  std::ofstream(dir / "meta.cfg") << "num_users = 10\nnum_items = 20\nfeedback_kind = explicit\nrating_levels = 5\n";
  const auto back = load_prepared(dir, "train");
  EXPECT_EQ(back.interactions, ds.interactions);
  EXPECT_EQ(back.social_edges, ds.social_edges);
}
