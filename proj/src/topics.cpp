#include "isect/topics.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <sstream>

#include "isect/builtin_data.hpp"
#include "isect/errors.hpp"
#include "isect/jsonl.hpp"
#include "isect/util.hpp"

namespace isect {

std::set<std::string> parse_stopwords(std::string_view text) {
  std::set<std::string> words;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    if (line[0] == '#') continue;
    words.insert(lowercase(line));
  }
  return words;
}

std::set<std::string> load_stopwords_file(const std::string& path) {
  return parse_stopwords(read_text_file(path));
}

std::set<std::string> builtin_stopwords() {
  return parse_stopwords(embedded::kStopwordsTxt);
}

Corpus tokenize_corpus(const std::vector<Completion>& completions,
                       const std::set<std::string>& stopwords) {
  constexpr std::size_t kMinTokenLength = 3;

  std::vector<std::vector<std::string>> kept_tokens;
  Corpus corpus;
  for (const auto& completion : completions) {
    std::string text;
    for (const auto& sentence : completion.sentences) {
      if (!text.empty()) text += ' ';
      text += sentence;
    }
    std::vector<std::string> tokens;
    for (auto& token : alnum_tokens(text)) {
      if (token.size() < kMinTokenLength) continue;
      if (stopwords.count(token)) continue;
      tokens.push_back(std::move(token));
    }
    const DocMeta meta{completion.prompt_id, completion.model_id,
                       completion.index};
    if (tokens.empty()) {
      corpus.dropped.push_back({meta, "no tokens after stopword/length filter"});
      continue;
    }
    kept_tokens.push_back(std::move(tokens));
    corpus.doc_meta.push_back(meta);
  }

  std::set<std::string> vocab_set;
  for (const auto& tokens : kept_tokens)
    vocab_set.insert(tokens.begin(), tokens.end());
  corpus.vocabulary.assign(vocab_set.begin(), vocab_set.end());
  std::map<std::string, int> ids;
  for (std::size_t i = 0; i < corpus.vocabulary.size(); ++i)
    ids[corpus.vocabulary[i]] = static_cast<int>(i);

  corpus.documents.reserve(kept_tokens.size());
  for (const auto& tokens : kept_tokens) {
    std::vector<int> doc;
    doc.reserve(tokens.size());
    for (const auto& token : tokens) doc.push_back(ids.at(token));
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

void TopicModelParams::validate() const {
  if (k < 1) throw ValidationError("topics: k must be at least 1");
  if (!(alpha > 0.0)) throw ValidationError("topics: alpha must be positive");
  if (!(beta > 0.0)) throw ValidationError("topics: beta must be positive");
  if (iterations < 1)
    throw ValidationError("topics: iterations must be at least 1");
}

void TopicModel::check_invariants(const Corpus& corpus) const {
  std::size_t corpus_tokens = 0;
  for (const auto& doc : corpus.documents) corpus_tokens += doc.size();

  long long topic_total_sum = 0;
  for (int t = 0; t < k; ++t) {
    if (topic_totals[static_cast<std::size_t>(t)] < 0)
      throw ValidationError("topic model: negative topic total");
    topic_total_sum += topic_totals[static_cast<std::size_t>(t)];
    long long word_sum = 0;
    for (int count : topic_word_counts[static_cast<std::size_t>(t)]) {
      if (count < 0) throw ValidationError("topic model: negative word count");
      word_sum += count;
    }
    if (word_sum != topic_totals[static_cast<std::size_t>(t)])
      throw ValidationError("topic model: topic total out of sync");
  }
  if (topic_total_sum != static_cast<long long>(corpus_tokens))
    throw ValidationError("topic model: counts do not sum to corpus tokens");

  long long doc_sum = 0;
  for (std::size_t d = 0; d < doc_topic_counts.size(); ++d) {
    long long row = 0;
    for (int count : doc_topic_counts[d]) {
      if (count < 0) throw ValidationError("topic model: negative doc count");
      row += count;
    }
    if (row != static_cast<long long>(corpus.documents[d].size()))
      throw ValidationError("topic model: doc counts out of sync");
    doc_sum += row;
  }
  if (doc_sum != static_cast<long long>(corpus_tokens))
    throw ValidationError("topic model: doc counts do not sum to corpus tokens");
}

TopicModel fit_lda(const Corpus& corpus, const TopicModelParams& params,
                   const std::function<void(int, const TopicModel&)>&
                       after_sweep) {
  params.validate();
  if (corpus.documents.empty())
    throw ValidationError("topics: cannot fit a model on an empty corpus");
  const int v = static_cast<int>(corpus.vocabulary.size());
  if (v == 0) throw ValidationError("topics: empty vocabulary");
  if (params.k > v)
    throw ValidationError("topics: k (" + std::to_string(params.k) +
                          ") exceeds the vocabulary size (" +
                          std::to_string(v) + ")");

  const int k = params.k;
  const std::size_t d_count = corpus.documents.size();
  TopicModel model;
  model.k = k;
  model.topic_word_counts.assign(static_cast<std::size_t>(k),
                                 std::vector<int>(static_cast<std::size_t>(v), 0));
  model.topic_totals.assign(static_cast<std::size_t>(k), 0);
  model.doc_topic_counts.assign(d_count,
                                std::vector<int>(static_cast<std::size_t>(k), 0));
  model.assignments.resize(d_count);

  std::mt19937_64 rng(params.seed);

  // Random initial assignments, in document then token order.
  for (std::size_t d = 0; d < d_count; ++d) {
    const auto& doc = corpus.documents[d];
    model.assignments[d].resize(doc.size());
    for (std::size_t pos = 0; pos < doc.size(); ++pos) {
      const int topic =
          static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(k)));
      model.assignments[d][pos] = topic;
      model.topic_word_counts[static_cast<std::size_t>(topic)]
                             [static_cast<std::size_t>(doc[pos])]++;
      model.topic_totals[static_cast<std::size_t>(topic)]++;
      model.doc_topic_counts[d][static_cast<std::size_t>(topic)]++;
    }
  }

  const double v_beta = static_cast<double>(v) * params.beta;
  std::vector<double> weights(static_cast<std::size_t>(k), 0.0);

  // Collapsed Gibbs sweeps in fixed document/token order:
  //   p(z = t | rest) ∝ (n_wt + beta) / (n_t + V*beta) * (n_td + alpha)
  for (int sweep = 0; sweep < params.iterations; ++sweep) {
    for (std::size_t d = 0; d < d_count; ++d) {
      const auto& doc = corpus.documents[d];
      for (std::size_t pos = 0; pos < doc.size(); ++pos) {
        const int w = doc[pos];
        const int old_topic = model.assignments[d][pos];
        model.topic_word_counts[static_cast<std::size_t>(old_topic)]
                               [static_cast<std::size_t>(w)]--;
        model.topic_totals[static_cast<std::size_t>(old_topic)]--;
        model.doc_topic_counts[d][static_cast<std::size_t>(old_topic)]--;

        double total = 0.0;
        for (int t = 0; t < k; ++t) {
          const auto ts = static_cast<std::size_t>(t);
          const double word_term =
              (model.topic_word_counts[ts][static_cast<std::size_t>(w)] +
               params.beta) /
              (model.topic_totals[ts] + v_beta);
          const double doc_term = model.doc_topic_counts[d][ts] + params.alpha;
          weights[ts] = word_term * doc_term;
          total += weights[ts];
        }
        const double u = unit_double(rng) * total;
        int new_topic = k - 1;
        double cumulative = 0.0;
        for (int t = 0; t < k; ++t) {
          cumulative += weights[static_cast<std::size_t>(t)];
          if (u < cumulative) {
            new_topic = t;
            break;
          }
        }

        model.assignments[d][pos] = new_topic;
        model.topic_word_counts[static_cast<std::size_t>(new_topic)]
                               [static_cast<std::size_t>(w)]++;
        model.topic_totals[static_cast<std::size_t>(new_topic)]++;
        model.doc_topic_counts[d][static_cast<std::size_t>(new_topic)]++;
      }
    }
    if (after_sweep) after_sweep(sweep, model);
  }
  return model;
}

std::vector<std::vector<std::string>> top_terms(const TopicModel& model,
                                                const Corpus& corpus,
                                                int k_terms) {
  if (k_terms < 1) throw ValidationError("topics: top_terms must be >= 1");
  const int v = static_cast<int>(corpus.vocabulary.size());
  std::vector<std::vector<std::string>> out;
  out.reserve(static_cast<std::size_t>(model.k));
  const int take = std::min(k_terms, v);
  for (int t = 0; t < model.k; ++t) {
    const auto ts = static_cast<std::size_t>(t);
    std::vector<int> order(static_cast<std::size_t>(v));
    for (int w = 0; w < v; ++w) order[static_cast<std::size_t>(w)] = w;
    // (n_wt + beta) / (n_t + V*beta) is monotone in n_wt within one topic, so
    // ranking by raw counts is identical for any positive beta; ties break
    // lexicographically by token.
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const int ca = model.topic_word_counts[ts][static_cast<std::size_t>(a)];
      const int cb = model.topic_word_counts[ts][static_cast<std::size_t>(b)];
      if (ca != cb) return ca > cb;
      return corpus.vocabulary[static_cast<std::size_t>(a)] <
             corpus.vocabulary[static_cast<std::size_t>(b)];
    });
    std::vector<std::string> terms;
    terms.reserve(static_cast<std::size_t>(take));
    for (int i = 0; i < take; ++i)
      terms.push_back(
          corpus.vocabulary[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
    out.push_back(std::move(terms));
  }
  return out;
}

PoolTopics topics_for_pool(const std::string& pool_name,
                           const std::vector<std::string>& pool_prompt_ids,
                           const std::vector<Completion>& completions,
                           const std::set<std::string>& stopwords,
                           const TopicModelParams& params, int top_k_terms,
                           const std::string& granularity) {
  if (pool_prompt_ids.empty())
    throw ValidationError("topics: pool '" + pool_name + "' is empty");
  if (granularity != "pool" && granularity != "prompt")
    throw ValidationError("topics: unknown granularity '" + granularity +
                          "' (expected 'pool' or 'prompt')");

  const std::set<std::string> wanted(pool_prompt_ids.begin(),
                                     pool_prompt_ids.end());
  std::vector<Completion> pool_completions;
  for (const auto& completion : completions) {
    if (wanted.count(completion.prompt_id))
      pool_completions.push_back(completion);
  }
  if (pool_completions.empty())
    throw ValidationError("topics: pool '" + pool_name +
                          "' has no completions");

  PoolTopics result;
  result.pool = pool_name;
  result.granularity = granularity;

  if (granularity == "pool") {
    const Corpus corpus = tokenize_corpus(pool_completions, stopwords);
    result.dropped = corpus.dropped;
    if (corpus.documents.empty())
      throw ValidationError("topics: pool '" + pool_name +
                            "' is empty after tokenization");
    const TopicModel model = fit_lda(corpus, params);
    model.check_invariants(corpus);
    result.topics = top_terms(model, corpus, top_k_terms);
    return result;
  }

  // "prompt" granularity: one model per prompt, prompts in sorted id order.
  std::vector<std::string> sorted_ids(wanted.begin(), wanted.end());
  for (const auto& prompt_id : sorted_ids) {
    std::vector<Completion> subset;
    for (const auto& completion : pool_completions) {
      if (completion.prompt_id == prompt_id) subset.push_back(completion);
    }
    const Corpus corpus = tokenize_corpus(subset, stopwords);
    result.dropped.insert(result.dropped.end(), corpus.dropped.begin(),
                          corpus.dropped.end());
    if (corpus.documents.empty()) {
      result.dropped.push_back(
          {{prompt_id, "", -1}, "prompt skipped: empty corpus"});
      continue;
    }
    TopicModelParams prompt_params = params;
    if (prompt_params.k > static_cast<int>(corpus.vocabulary.size()))
      prompt_params.k = static_cast<int>(corpus.vocabulary.size());
    const TopicModel model = fit_lda(corpus, prompt_params);
    model.check_invariants(corpus);
    result.prompt_topics.push_back(
        {prompt_id, top_terms(model, corpus, top_k_terms)});
  }
  if (result.prompt_topics.empty())
    throw ValidationError("topics: pool '" + pool_name +
                          "' is empty after tokenization");
  return result;
}

}  // namespace isect
