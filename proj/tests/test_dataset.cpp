#include <gtest/gtest.h>

#include <random>
#include <set>

#include "cotprobe/dataset.hpp"

using namespace cotprobe;

namespace {

std::vector<RawChunk> plain_chunks(std::size_t n) {
  std::vector<RawChunk> out;
  std::size_t paragraph = 0;
  for (std::size_t i = 0; i < n; ++i) {
    RawChunk c;
    c.index = i;
    c.first_paragraph = paragraph;
    c.paragraph_count = 1 + i % 3;
    c.token_count = 10 * (i + 1);
    c.text = "chunk " + std::to_string(i);
    paragraph += c.paragraph_count;
    out.push_back(c);
  }
  return out;
}

std::vector<Judgment> judgments_from(const std::vector<std::optional<bool>>& marks) {
  std::vector<Judgment> out;
  for (std::size_t i = 0; i < marks.size(); ++i) {
    Judgment j;
    j.chunk_index = i;
    if (marks[i]) {
      j.intermediate_answer = *marks[i] ? "12" : "7";
      j.correctness = *marks[i];
    }
    out.push_back(j);
  }
  return out;
}

// A judged trace with `labels.size()` labeled chunks of `paragraphs` paragraphs each.
ReasoningTrace judged_trace(const std::string& id, const std::vector<bool>& labels, std::size_t paragraphs = 1) {
  ReasoningTrace t;
  t.id = id;
  t.ground_truth = "1";
  for (bool l : labels) t.chunks.push_back({"text", paragraphs, 20, std::string(l ? "1" : "2"), l});
  t.total_tokens = 20 * labels.size() + 5;
  return t;
}

EmbeddingMatrix counting_matrix(std::size_t rows, std::size_t cols) {
  EmbeddingMatrix m(rows, cols);
  for (std::size_t i = 0; i < m.data().size(); ++i) m.data()[i] = static_cast<float>(i);
  return m;
}

}  // namespace

TEST(Merge, WorkedExample) {
  const auto chunks = plain_chunks(8);
  const auto js = judgments_from({false, true, true, std::nullopt, std::nullopt, std::nullopt, true, true});
  const auto merged = merge_unanswered(chunks, js);
  ASSERT_EQ(merged.size(), 5u);
  std::vector<std::pair<std::size_t, std::size_t>> got;
  for (const auto& c : merged) got.emplace_back(c.first_raw_chunk, c.raw_chunk_count);
  EXPECT_EQ(got, (std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {1, 1}, {2, 2}, {4, 3}, {7, 1}}));
  EXPECT_EQ(merged[2].text, "chunk 2\n\nchunk 3");
  EXPECT_EQ(merged[3].intermediate_answer, "12");
  EXPECT_FALSE(merged[0].label);
  EXPECT_TRUE(merged[3].label);
}

TEST(Merge, LeadingAndTrailingUnanswered) {
  const auto merged = merge_unanswered(plain_chunks(5), judgments_from({std::nullopt, std::nullopt, true, std::nullopt,
                                                                        std::nullopt}));
  ASSERT_EQ(merged.size(), 1u);
  EXPECT_EQ(merged[0].raw_chunk_count, 5u);
  EXPECT_EQ(merged[0].token_count, 150u);
}

TEST(Merge, NothingAnswered) {
  EXPECT_TRUE(merge_unanswered(plain_chunks(3), judgments_from({std::nullopt, std::nullopt, std::nullopt})).empty());
  EXPECT_THROW(merge_unanswered(plain_chunks(3), judgments_from({true})), Error);
}

TEST(Merge, InvariantsOnRandomCases) {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + gen() % 15;
    std::vector<std::optional<bool>> marks(n);
    for (auto& m : marks) {
      const auto r = gen() % 3;
      if (r < 2) m = r == 0;
    }
    const auto chunks = plain_chunks(n);
    const auto merged = merge_unanswered(chunks, judgments_from(marks));
    const auto answered = static_cast<std::size_t>(std::count_if(marks.begin(), marks.end(), [](auto m) { return m.has_value(); }));
    ASSERT_EQ(merged.size(), answered);
    std::size_t tokens = 0, paragraphs = 0, raw = 0, tokens_in = 0, paragraphs_in = 0;
    for (const auto& c : chunks) {
      tokens_in += c.token_count;
      paragraphs_in += c.paragraph_count;
    }
    for (std::size_t k = 0; k < merged.size(); ++k) {
      ASSERT_EQ(merged[k].first_raw_chunk, raw);  // contiguous cover, in order
      raw += merged[k].raw_chunk_count;
      tokens += merged[k].token_count;
      paragraphs += merged[k].paragraph_count;
    }
    if (answered == 0) continue;
    EXPECT_EQ(raw, n);
    EXPECT_EQ(tokens, tokens_in);
    EXPECT_EQ(paragraphs, paragraphs_in);
  }
}

TEST(Builder, OneExamplePerLabeledChunk) {
  std::vector<ReasoningTrace> traces{judged_trace("a", {true, false}), judged_trace("b", {true}),
                                     judged_trace("c", {false, false, true})};
  traces[1].chunks.push_back({"unlabeled", 1, 3, std::nullopt, std::nullopt});
  const auto ds = build_probing_dataset(traces, counting_matrix(6, 2), {});
  ASSERT_EQ(ds.size(), 6u);
  EXPECT_EQ(ds.m, 2u);
  EXPECT_EQ(ds.examples[2].trace_id, "b");
  EXPECT_EQ(ds.examples[5].chunk_index, 2u);
  EXPECT_EQ(ds.examples[5].embedding, (std::vector<float>{10.0f, 11.0f}));
  EXPECT_EQ(ds.labels(), (std::vector<bool>{true, false, true, false, false, true}));
}

TEST(Builder, HonoursTraceOrderAndCounts) {
  std::vector<ReasoningTrace> traces{judged_trace("a", {true}), judged_trace("b", {false, false})};
  const auto ds = build_probing_dataset(traces, counting_matrix(3, 1), {{"b", "a"}, {2, 1}});
  EXPECT_EQ(ds.examples[0].trace_id, "b");
  EXPECT_EQ(ds.examples[2].trace_id, "a");
  EXPECT_EQ(ds.examples[2].embedding[0], 2.0f);
  try {
    build_probing_dataset(traces, counting_matrix(3, 1), {{"b", "a"}, {1, 2}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kAlignmentError);
  }
}

TEST(Builder, RowCountMismatchAndNaN) {
  std::vector<ReasoningTrace> traces{judged_trace("a", {true, false})};
  try {
    build_probing_dataset(traces, counting_matrix(3, 2), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kAlignmentError);
  }
  auto m = counting_matrix(2, 2);
  m.data()[1] = std::numeric_limits<float>::quiet_NaN();
  try {
    build_probing_dataset(traces, m, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDataError);
  }
}

TEST(Builder, LookaheadFractionsAndLabels) {
  auto t = judged_trace("a", {true}, 2);
  t.chunks.push_back({"x", 2, 9, std::string("2"), false});
  const auto ds = build_lookahead_dataset({t}, counting_matrix(4, 3), {});
  ASSERT_EQ(ds.size(), 4u);
  std::vector<double> fractions;
  for (const auto& e : ds.examples) fractions.push_back(*e.fraction);
  EXPECT_EQ(fractions, (std::vector<double>{0.5, 1.0, 0.5, 1.0}));
  EXPECT_EQ(ds.labels(), (std::vector<bool>{true, true, false, false}));
  EXPECT_EQ(ds.examples[3].chunk_index, 1u);

  const auto quarters = build_lookahead_dataset({judged_trace("q", {true}, 4)}, counting_matrix(4, 1), {});
  for (std::size_t p = 0; p < 4; ++p) EXPECT_DOUBLE_EQ(*quarters.examples[p].fraction, 0.25 * (p + 1));
}

TEST(Builder, FinalModeSkipsTracesWithoutAnswer) {
  std::vector<ReasoningTrace> traces;
  for (int i = 0; i < 10; ++i) {
    auto t = judged_trace("t" + std::to_string(i), {true});
    if (i % 3 == 0) t.final_answer_correct = i % 2 == 0;
    else if (i % 3 == 1) t.final_answer = "1";
    traces.push_back(t);
  }
  const auto ds = build_final_answer_dataset(traces, counting_matrix(10, 2));
  EXPECT_EQ(ds.size(), 7u);
  EXPECT_EQ(ds.mode, DatasetMode::kFinal);
  EXPECT_EQ(ds.examples[1].trace_id, "t1");
  EXPECT_EQ(ds.examples[1].embedding[0], 2.0f);  // row 1, even though row order includes skipped traces
  EXPECT_EQ(ds.examples[1].token_count, 25u);
  try {
    build_final_answer_dataset(traces, counting_matrix(9, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kAlignmentError);
  }
}

TEST(Downsample, CapsDistinctTraces) {
  ProbingDataset ds;
  ds.m = 1;
  for (int t = 0; t < 1200; ++t)
    for (int c = 0; c < 1 + t % 3; ++c) ds.examples.push_back({{float(t)}, c % 2 == 0, "t" + std::to_string(t), std::size_t(c), 1, {}});
  const auto small = downsample(ds, 1000, 5);
  EXPECT_EQ(dataset_stats(small).n_examples, 1000u);
  std::set<std::string> ids;
  for (const auto& e : small.examples) ids.insert(e.trace_id);
  // every kept trace keeps all its examples
  std::size_t expected = 0;
  for (const auto& id : ids) expected += 1 + std::stoul(id.substr(1)) % 3;
  EXPECT_EQ(small.size(), expected);
  EXPECT_EQ(downsample(ds, 1000, 5), small);
  EXPECT_EQ(downsample(small, 1000, 99), small);
  EXPECT_NE(downsample(ds, 1000, 6), small);
  EXPECT_EQ(downsample(ds, 5000, 1), ds);
}

TEST(Split, SizesDisjointDeterministic) {
  for (std::size_t n : {100u, 5u, 7u}) {
    ProbingDataset ds;
    ds.m = 1;
    for (std::size_t i = 0; i < n; ++i) ds.examples.push_back({{float(i)}, i % 2 == 0, "t" + std::to_string(i), 0, 1, {}});
    const auto split = split_train_val(ds, 3);
    const std::size_t want = n == 100 ? 80 : n == 5 ? 4 : 6;
    EXPECT_EQ(split.train.size(), want);
    EXPECT_EQ(split.train.size() + split.val.size(), n);
    std::set<float> seen;
    for (const auto& e : split.train.examples) seen.insert(e.embedding[0]);
    for (const auto& e : split.val.examples) EXPECT_TRUE(seen.insert(e.embedding[0]).second);
    const auto again = split_train_val(ds, 3);
    EXPECT_EQ(again.train, split.train);
    EXPECT_EQ(again.val, split.val);
  }
  ProbingDataset tiny;
  tiny.examples.resize(4);
  EXPECT_THROW(split_train_val(tiny, 0), Error);
}

TEST(Stats, CountsAndMeans) {
  ProbingDataset ds;
  ds.examples.push_back({{}, true, "a", 0, 10, {}});
  ds.examples.push_back({{}, false, "a", 1, 30, {}});
  ds.examples.push_back({{}, true, "b", 0, 20, {}});
  ds.examples.push_back({{}, true, "c", 0, 40, {}});
  const auto s = dataset_stats(ds);
  EXPECT_EQ(s.n_examples, 3u);
  EXPECT_EQ(s.n_chunks, 4u);
  EXPECT_DOUBLE_EQ(s.positive_fraction, 0.75);
  EXPECT_DOUBLE_EQ(s.mean_chunk_token_length, 25.0);
}
