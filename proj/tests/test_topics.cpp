#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "isect/errors.hpp"
#include "isect/topics.hpp"

using namespace isect;

namespace {

Completion completion_with(std::string prompt_id, int index,
                           std::vector<std::string> sentences) {
  Completion c;
  c.prompt_id = std::move(prompt_id);
  c.model_id = "m";
  c.index = index;
  c.sentences = std::move(sentences);
  return c;
}

}  // namespace

TEST_CASE("stopword parsing skips comments and blank lines") {
  const auto words = parse_stopwords("# comment\nthe\n\nwas\n  and  \n");
  CHECK(words == std::set<std::string>{"the", "was", "and"});
  CHECK(builtin_stopwords().count("the") == 1);
  CHECK(builtin_stopwords().count("was") == 1);
  CHECK(builtin_stopwords().count("man") == 0);
}

TEST_CASE("tokenize_corpus lowercases, filters stopwords and short tokens") {
  const std::vector<Completion> completions = {
      completion_with("p1", 0, {"The man was killed."}),
      completion_with("p2", 0, {"A DOG ran to the BIG park!", "It was fun."}),
  };
  const Corpus corpus = tokenize_corpus(completions, builtin_stopwords());
  REQUIRE(corpus.documents.size() == 2);
  REQUIRE(corpus.doc_meta.size() == 2);
  CHECK(corpus.dropped.empty());

  auto tokens_of = [&](std::size_t doc) {
    std::vector<std::string> out;
    for (int id : corpus.documents[doc]) out.push_back(corpus.vocabulary[id]);
    return out;
  };
  CHECK(tokens_of(0) == std::vector<std::string>{"man", "killed"});
  // "a", "to", "the", "it", "was" are stopwords; "ran" survives (length 3),
  // "fun" survives, casing is normalized.
  CHECK(tokens_of(1) == std::vector<std::string>{"dog", "ran", "big", "park", "fun"});

  CHECK(std::is_sorted(corpus.vocabulary.begin(), corpus.vocabulary.end()));
  const std::set<std::string> vocab(corpus.vocabulary.begin(),
                                    corpus.vocabulary.end());
  CHECK(vocab.size() == corpus.vocabulary.size());
}

TEST_CASE("completions with no surviving tokens are recorded as dropped") {
  const std::vector<Completion> completions = {
      completion_with("keep", 0, {"Genuine words survive here."}),
      completion_with("gone", 1, {"It is so to be."}),  // all filtered
      completion_with("empty", 2, {}),
  };
  const Corpus corpus = tokenize_corpus(completions, builtin_stopwords());
  CHECK(corpus.documents.size() == 1);
  REQUIRE(corpus.dropped.size() == 2);
  CHECK(corpus.dropped[0].meta.prompt_id == "gone");
  CHECK(corpus.dropped[1].meta.prompt_id == "empty");
  for (const auto& d : corpus.dropped) CHECK_FALSE(d.reason.empty());
}

namespace {

// Two vocabularies that never co-occur; docs alternate between clusters.
Corpus two_cluster_corpus() {
  const std::vector<std::string> cluster_a = {"apple", "banana", "cherry"};
  const std::vector<std::string> cluster_b = {"engine", "gearbox", "piston"};
  std::vector<Completion> completions;
  for (int doc = 0; doc < 16; ++doc) {
    const auto& cluster = (doc % 2 == 0) ? cluster_a : cluster_b;
    std::vector<std::string> sentence_words;
    for (int t = 0; t < 12; ++t) {
      sentence_words.push_back(cluster[(doc + t) % cluster.size()]);
    }
    std::string sentence;
    for (const auto& w : sentence_words) {
      if (!sentence.empty()) sentence += ' ';
      sentence += w;
    }
    sentence += '.';
    completions.push_back(
        completion_with("p" + std::to_string(doc), doc, {sentence}));
  }
  return tokenize_corpus(completions, builtin_stopwords());
}

}  // namespace

TEST_CASE("LDA separates two disjoint word clusters for most seeds") {
  const Corpus corpus = two_cluster_corpus();
  REQUIRE(corpus.vocabulary.size() == 6);

  TopicModelParams params;
  params.k = 2;
  params.alpha = 1.0;
  params.beta = 0.01;
  params.iterations = 200;

  const std::set<std::string> set_a = {"apple", "banana", "cherry"};
  const std::set<std::string> set_b = {"engine", "gearbox", "piston"};
  int pure = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    params.seed = seed;
    const TopicModel model = fit_lda(corpus, params);
    const auto terms = top_terms(model, corpus, 3);
    REQUIRE(terms.size() == 2);
    const std::set<std::string> t0(terms[0].begin(), terms[0].end());
    const std::set<std::string> t1(terms[1].begin(), terms[1].end());
    if ((t0 == set_a && t1 == set_b) || (t0 == set_b && t1 == set_a)) ++pure;
  }
  CHECK(pure >= 8);
}

TEST_CASE("Gibbs sweeps conserve token counts") {
  const Corpus corpus = two_cluster_corpus();
  std::size_t total_tokens = 0;
  for (const auto& doc : corpus.documents) total_tokens += doc.size();

  TopicModelParams params;
  params.k = 3;
  params.iterations = 25;
  params.alpha = 50.0 / 3.0;
  params.seed = 99;

  int sweeps_seen = 0;
  const TopicModel model =
      fit_lda(corpus, params, [&](int sweep, const TopicModel& m) {
        CHECK(sweep == sweeps_seen);
        ++sweeps_seen;
        m.check_invariants(corpus);
        const long total =
            std::accumulate(m.topic_totals.begin(), m.topic_totals.end(), 0L);
        CHECK(total == static_cast<long>(total_tokens));
        for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
          const long doc_total = std::accumulate(
              m.doc_topic_counts[d].begin(), m.doc_topic_counts[d].end(), 0L);
          CHECK(doc_total == static_cast<long>(corpus.documents[d].size()));
          for (int c : m.doc_topic_counts[d]) CHECK(c >= 0);
        }
        for (const auto& row : m.topic_word_counts) {
          for (int c : row) CHECK(c >= 0);
        }
      });
  CHECK(sweeps_seen == 25);
  model.check_invariants(corpus);
}

TEST_CASE("k=1 assigns every token to the single topic") {
  const Corpus corpus = two_cluster_corpus();
  TopicModelParams params;
  params.k = 1;
  params.alpha = 50.0;
  params.iterations = 5;
  const TopicModel model = fit_lda(corpus, params);
  for (const auto& doc : model.assignments) {
    for (int z : doc) CHECK(z == 0);
  }
  const auto terms = top_terms(model, corpus, 2);
  REQUIRE(terms.size() == 1);
  CHECK(terms[0].size() == 2);
}

TEST_CASE("invalid topic-model inputs are rejected") {
  const Corpus corpus = two_cluster_corpus();  // |V| == 6
  TopicModelParams params;
  params.k = 7;
  CHECK_THROWS_AS(fit_lda(corpus, params), ValidationError);

  Corpus empty;
  params.k = 2;
  CHECK_THROWS_AS(fit_lda(empty, params), ValidationError);

  TopicModelParams bad;
  bad.k = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad.k = 2;
  bad.iterations = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad.iterations = 10;
  bad.alpha = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad.alpha = 1.0;
  bad.beta = -0.01;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("top terms break count ties lexicographically and clamp to |V|") {
  Corpus corpus;
  corpus.vocabulary = {"alpha", "beta", "gamma"};
  corpus.documents = {{0, 1, 2}};
  corpus.doc_meta = {{"p", "m", 0}};

  TopicModelParams params;
  params.k = 1;
  params.alpha = 50.0;
  params.iterations = 3;
  const TopicModel model = fit_lda(corpus, params);
  const auto terms = top_terms(model, corpus, 10);
  REQUIRE(terms.size() == 1);
  // All counts are 1, so the order is purely lexicographic, clamped to V=3.
  CHECK(terms[0] == std::vector<std::string>{"alpha", "beta", "gamma"});
}

TEST_CASE("identical seed and corpus reproduce the identical model") {
  const Corpus corpus = two_cluster_corpus();
  TopicModelParams params;
  params.k = 2;
  params.alpha = 1.0;
  params.iterations = 60;
  params.seed = 1234;
  const TopicModel a = fit_lda(corpus, params);
  const TopicModel b = fit_lda(corpus, params);
  CHECK(a.assignments == b.assignments);
  CHECK(a.topic_word_counts == b.topic_word_counts);
  CHECK(a.doc_topic_counts == b.doc_topic_counts);
  CHECK(a.topic_totals == b.topic_totals);

  params.seed = 1235;
  const TopicModel c = fit_lda(corpus, params);
  // A different seed is allowed to produce different assignments; the counts
  // must still conserve.
  c.check_invariants(corpus);
}

TEST_CASE("topics_for_pool restricts to pool prompts and is reproducible") {
  std::vector<Completion> completions;
  for (int i = 0; i < 6; ++i) {
    completions.push_back(completion_with(
        "pool" + std::to_string(i % 3), i,
        {"apple banana cherry apple banana cherry apple banana."}));
  }
  completions.push_back(completion_with(
      "outside", 0, {"engine gearbox piston engine gearbox piston."}));

  TopicModelParams params;
  params.k = 1;
  params.alpha = 50.0;
  params.iterations = 20;

  const std::vector<std::string> pool_ids = {"pool0", "pool1", "pool2"};
  const PoolTopics pool = topics_for_pool("high", pool_ids, completions,
                                          builtin_stopwords(), params, 5);
  CHECK(pool.pool == "high");
  CHECK(pool.granularity == "pool");
  REQUIRE(pool.topics.size() == 1);
  const std::set<std::string> terms(pool.topics[0].begin(),
                                    pool.topics[0].end());
  // The out-of-pool completion's vocabulary must not leak in.
  CHECK(terms == std::set<std::string>{"apple", "banana", "cherry"});
  CHECK(pool.prompt_topics.empty());

  const PoolTopics again = topics_for_pool("high", pool_ids, completions,
                                           builtin_stopwords(), params, 5);
  CHECK(again.topics == pool.topics);

  const PoolTopics by_prompt =
      topics_for_pool("high", pool_ids, completions, builtin_stopwords(),
                      params, 5, "prompt");
  CHECK(by_prompt.granularity == "prompt");
  CHECK(by_prompt.topics.empty());
  REQUIRE(by_prompt.prompt_topics.size() == 3);
  CHECK(by_prompt.prompt_topics[0].prompt_id == "pool0");
  for (const auto& pt : by_prompt.prompt_topics) {
    REQUIRE(pt.topics.size() == 1);
    CHECK(std::set<std::string>(pt.topics[0].begin(), pt.topics[0].end()) ==
          std::set<std::string>{"apple", "banana", "cherry"});
  }

  CHECK_THROWS_AS(topics_for_pool("high", {}, completions, builtin_stopwords(),
                                  params, 5),
                  ValidationError);
  CHECK_THROWS_AS(topics_for_pool("high", {"missing"}, completions,
                                  builtin_stopwords(), params, 5),
                  ValidationError);
  CHECK_THROWS_AS(topics_for_pool("high", pool_ids, completions,
                                  builtin_stopwords(), params, 5, "bogus"),
                  ValidationError);
}
