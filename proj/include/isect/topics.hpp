#pragma once

#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "isect/generation.hpp"

namespace isect {

// One token per line; '#' starts a comment.
std::set<std::string> parse_stopwords(std::string_view text);
std::set<std::string> load_stopwords_file(const std::string& path);
std::set<std::string> builtin_stopwords();

struct DocMeta {
  std::string prompt_id;
  std::string model_id;
  int index = 0;
};

struct DroppedDoc {
  DocMeta meta;
  std::string reason;
};

struct Corpus {
  std::vector<std::vector<int>> documents;  // token ids per document
  std::vector<std::string> vocabulary;      // id -> token, sorted
  std::vector<DocMeta> doc_meta;            // aligned with documents
  std::vector<DroppedDoc> dropped;          // empty-after-filtering completions
};

// One document per completion: sentences joined, tokenized (lowercase,
// non-alphanumeric split), minus stopwords and tokens shorter than 3 chars.
// Completions left with no tokens are recorded in `dropped`.
Corpus tokenize_corpus(const std::vector<Completion>& completions,
                       const std::set<std::string>& stopwords);

struct TopicModelParams {
  int k = 5;
  double alpha = 10.0;  // 50 / k convention; recomputed when only k is set
  double beta = 0.01;
  int iterations = 500;
  std::uint64_t seed = 42;

  void validate() const;
};

struct TopicModel {
  int k = 0;
  std::vector<std::vector<int>> topic_word_counts;  // [k][V]
  std::vector<int> topic_totals;                    // [k]
  std::vector<std::vector<int>> doc_topic_counts;   // [D][k]
  std::vector<std::vector<int>> assignments;        // [D][len(doc)]

  // Throws ValidationError if any count is negative or totals do not sum to
  // the corpus token count.
  void check_invariants(const Corpus& corpus) const;
};

// Collapsed Gibbs sampler,
//   p(z=k | rest) ∝ (n_wk + beta) / (n_k + V*beta) * (n_kd + alpha),
// with seeded random initial assignments and fixed document/token sweep
// order. Throws ValidationError on an empty corpus or k > |vocabulary|.
// `after_sweep`, when set, runs after every full sweep (used by invariant
// tests).
TopicModel fit_lda(const Corpus& corpus, const TopicModelParams& params,
                   const std::function<void(int, const TopicModel&)>&
                       after_sweep = nullptr);

// Top `k_terms` tokens per topic by (n_wk + beta) / (n_k + V*beta), ties
// broken lexicographically; fewer if the vocabulary is smaller.
std::vector<std::vector<std::string>> top_terms(const TopicModel& model,
                                                const Corpus& corpus,
                                                int k_terms);

struct PromptTopics {
  std::string prompt_id;
  std::vector<std::vector<std::string>> topics;
};

struct PoolTopics {
  std::string pool;         // "high" or "low"
  std::string granularity;  // "pool" or "prompt"
  std::vector<std::vector<std::string>> topics;  // pool granularity
  std::vector<PromptTopics> prompt_topics;       // prompt granularity
  std::vector<DroppedDoc> dropped;
};

// Fits topics over all completions belonging to the pool's prompts (the
// default "pool" granularity) or one model per prompt ("prompt"). Throws
// ValidationError on an empty pool or a pool whose corpus is empty after
// tokenization.
PoolTopics topics_for_pool(const std::string& pool_name,
                           const std::vector<std::string>& pool_prompt_ids,
                           const std::vector<Completion>& completions,
                           const std::set<std::string>& stopwords,
                           const TopicModelParams& params, int top_k_terms,
                           const std::string& granularity = "pool");

}  // namespace isect
