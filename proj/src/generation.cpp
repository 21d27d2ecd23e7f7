#include "isect/generation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "httplib.h"

#include "isect/errors.hpp"
#include "isect/jsonl.hpp"
#include "isect/sentences.hpp"
#include "isect/util.hpp"

namespace isect {

void GenerationParams::validate() const {
  if (max_tokens < 1)
    throw ValidationError("generation: max_tokens must be at least 1");
  if (!(temperature >= 0.0))
    throw ValidationError("generation: temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0))
    throw ValidationError("generation: top_p must lie in (0, 1]");
  if (n_completions < 1)
    throw ValidationError("generation: n_completions must be at least 1");
}

nlohmann::json GenerationParams::canonical_json() const {
  return {{"max_tokens", max_tokens},
          {"temperature", temperature},
          {"top_p", top_p},
          {"n_completions", n_completions},
          {"seed", seed},
          {"stop_sequences", stop_sequences}};
}

const char* to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::stub: return "stub";
    case BackendKind::http: return "http";
  }
  return "unknown";
}

BackendKind backend_kind_from_string(const std::string& name) {
  if (name == "stub") return BackendKind::stub;
  if (name == "http") return BackendKind::http;
  throw ValidationError("unknown backend '" + name +
                        "' (expected 'stub' or 'http')");
}

void ModelSpec::validate() const {
  if (model_id.empty())
    throw ValidationError("model: model_id must not be empty");
  for (char c : model_id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-';
    if (!ok)
      throw ValidationError("model: model_id '" + model_id +
                            "' must match [A-Za-z0-9._-]+ (it names the "
                            "cache file)");
  }
  if (model_id == "pooled")
    throw ValidationError(
        "model: model_id 'pooled' is reserved for the pooled analysis");
  if (backend == BackendKind::http && endpoint.empty())
    throw ValidationError("model '" + model_id +
                          "': http backend needs an endpoint");
}

namespace {

// Neutral continuations for unmatched prompts. Every content word here is
// deliberately absent from the default valence lexicon, so unmatched prompts
// score exactly 0.5 and injected biases stand out against a flat baseline
// (verified by a unit test).
const std::vector<std::string>& neutral_templates() {
  static const std::vector<std::string> templates = {
      " walked to the market in the morning and bought some bread.",
      " sat by the window and watched the street for a while.",
      " took the early train into the city and came back that evening.",
      " spent the afternoon reading in the garden.",
      " prepared a plain meal and listened to the radio.",
      " wrote a letter and posted it on the way back.",
      " fed the neighbour's cat and swept the front step.",
      " counted the change twice and paid the grocer.",
  };
  return templates;
}

std::string truncate_at_stop(std::string text,
                             const std::vector<std::string>& stops) {
  std::size_t cut = std::string::npos;
  for (const auto& stop : stops) {
    if (stop.empty()) continue;
    const auto at = text.find(stop);
    if (at != std::string::npos) cut = std::min(cut, at);
  }
  if (cut != std::string::npos) text.resize(cut);
  return text;
}

}  // namespace

std::vector<std::string> stub_generate(const std::string& prompt_text,
                                       const GenerationParams& params,
                                       std::uint64_t seed,
                                       const InjectionTable& injections) {
  params.validate();
  // std::map iterates in key order, so merged pools are deterministic no
  // matter how the table was built.
  std::vector<std::string> merged;
  for (const auto& [surface, pool] : injections) {
    if (contains_ci(prompt_text, surface))
      merged.insert(merged.end(), pool.begin(), pool.end());
  }
  const std::vector<std::string>& pool =
      merged.empty() ? neutral_templates() : merged;

  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(params.n_completions));
  const std::uint64_t prompt_hash = fnv1a64(prompt_text);
  for (int i = 0; i < params.n_completions; ++i) {
    const std::uint64_t mixed = splitmix64(
        prompt_hash ^ splitmix64(seed ^ static_cast<std::uint64_t>(i)));
    std::string text = pool[mixed % pool.size()];
    out.push_back(truncate_at_stop(std::move(text), params.stop_sequences));
  }
  return out;
}

nlohmann::json build_completion_request(const std::string& model_id,
                                        const std::string& prompt_text,
                                        const GenerationParams& params) {
  nlohmann::json body = {
      {"model", model_id},
      {"prompt", prompt_text},
      {"max_tokens", params.max_tokens},
      {"temperature", params.temperature},
      {"top_p", params.top_p},
      {"n", params.n_completions},
      {"seed", params.seed},
  };
  if (!params.stop_sequences.empty()) body["stop"] = params.stop_sequences;
  return body;
}

std::vector<std::string> parse_completion_response(
    const nlohmann::json& response, const std::string& prompt_text) {
  if (!response.is_object() || !response.contains("choices") ||
      !response["choices"].is_array())
    throw BackendError("completion response has no 'choices' array");

  struct Choice {
    int index;
    std::string text;
  };
  std::vector<Choice> choices;
  int position = 0;
  for (const auto& entry : response["choices"]) {
    if (!entry.is_object() || !entry.contains("text") ||
        !entry["text"].is_string())
      throw BackendError("completion choice is missing a string 'text'");
    Choice choice;
    choice.text = entry["text"].get<std::string>();
    choice.index = position++;
    if (entry.contains("index")) {
      if (!entry["index"].is_number_integer())
        throw BackendError("completion choice has a non-integer 'index'");
      choice.index = entry["index"].get<int>();
    }
    choices.push_back(std::move(choice));
  }
  std::stable_sort(choices.begin(), choices.end(),
                   [](const Choice& a, const Choice& b) {
                     return a.index < b.index;
                   });

  std::vector<std::string> texts;
  texts.reserve(choices.size());
  for (auto& choice : choices) {
    // Some servers echo the prompt; completions are stored without it.
    if (choice.text.rfind(prompt_text, 0) == 0)
      choice.text = choice.text.substr(prompt_text.size());
    texts.push_back(std::move(choice.text));
  }
  return texts;
}

namespace {

// endpoint -> (scheme://host:port, path prefix without trailing slash)
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos)
    throw ValidationError("endpoint '" + endpoint +
                          "' must include a scheme, e.g. http://host:port");
  const auto path_start = endpoint.find('/', scheme_end + 3);
  std::string base = endpoint.substr(0, path_start);
  std::string prefix =
      path_start == std::string::npos ? "" : endpoint.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {std::move(base), std::move(prefix)};
}

}  // namespace

std::vector<std::string> http_generate(const std::string& endpoint,
                                       const std::string& model_id,
                                       const std::string& prompt_text,
                                       const GenerationParams& params,
                                       int timeout_s) {
  const auto [base, prefix] = split_endpoint(endpoint);
  httplib::Client client(base);
  client.set_connection_timeout(std::min(timeout_s, 10), 0);
  client.set_read_timeout(timeout_s, 0);
  client.set_write_timeout(timeout_s, 0);

  httplib::Headers headers;
  if (const char* token = std::getenv("ISECT_API_TOKEN");
      token != nullptr && token[0] != '\0') {
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }

  const std::string body =
      build_completion_request(model_id, prompt_text, params).dump();
  auto result = client.Post(prefix + "/v1/completions", headers, body,
                            "application/json");
  if (!result)
    throw BackendError("transport error calling " + endpoint + ": " +
                       httplib::to_string(result.error()));
  if (result->status < 200 || result->status >= 300)
    throw BackendError("completion endpoint returned HTTP " +
                       std::to_string(result->status) + ": " +
                       result->body.substr(0, 200));

  nlohmann::json payload = nlohmann::json::parse(result->body, nullptr, false);
  if (payload.is_discarded())
    throw BackendError("completion endpoint returned malformed JSON");
  return parse_completion_response(payload, prompt_text);
}

std::vector<CacheRow> load_cache(const std::filesystem::path& cache_file) {
  JsonlReadResult raw = read_jsonl(cache_file);
  if (raw.torn_tail_offset) {
    // Interrupted writer left half a line; drop it so the file is appendable.
    std::filesystem::resize_file(cache_file, *raw.torn_tail_offset);
    raw = read_jsonl(cache_file);
  }
  std::vector<CacheRow> rows;
  rows.reserve(raw.rows.size());
  for (const auto& row : raw.rows) {
    try {
      CacheRow parsed;
      parsed.prompt_id = row.at("prompt_id").get<std::string>();
      parsed.model_id = row.at("model_id").get<std::string>();
      parsed.index = row.at("index").get<int>();
      parsed.raw_text = row.at("raw_text").get<std::string>();
      rows.push_back(std::move(parsed));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("bad cache row in " + cache_file.string() + ": " +
                            e.what());
    }
  }
  return rows;
}

void sort_cache_rows(std::vector<CacheRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const CacheRow& a, const CacheRow& b) {
    if (a.prompt_id != b.prompt_id) return a.prompt_id < b.prompt_id;
    return a.index < b.index;
  });
}

Completion make_completion(const CacheRow& row, const std::string& prompt_text,
                           int sentence_cap) {
  Completion completion;
  completion.prompt_id = row.prompt_id;
  completion.model_id = row.model_id;
  completion.index = row.index;
  completion.raw_text = row.raw_text;
  completion.sentences =
      split_sentences(prompt_text, row.raw_text, sentence_cap);
  return completion;
}

namespace {

struct PendingPrompt {
  const PromptSpec* spec;
  std::vector<int> missing;  // indices not yet cached, ascending
};

std::vector<std::string> call_with_retries(
    const std::function<std::vector<std::string>()>& call,
    const std::string& prompt_id, int retries, int backoff_base_ms) {
  std::string last_error;
  for (int attempt = 0; attempt <= retries; ++attempt) {
    if (attempt > 0) {
      const auto delay =
          std::chrono::milliseconds(backoff_base_ms) * (1 << (attempt - 1));
      std::this_thread::sleep_for(delay);
    }
    try {
      return call();
    } catch (const BackendError& e) {
      last_error = e.what();
    }
  }
  throw BackendError("prompt " + prompt_id + ": giving up after " +
                     std::to_string(retries) + " retries; last error: " +
                     last_error);
}

}  // namespace

std::vector<CacheRow> generate(const ModelSpec& model,
                               const std::vector<PromptSpec>& prompts,
                               const GenerationParams& params,
                               const std::filesystem::path& cache_dir,
                               const GenerateOptions& options) {
  model.validate();
  params.validate();
  if (options.retries < 0)
    throw ValidationError("generation: retries must be >= 0");
  if (options.concurrency < 1)
    throw ValidationError("generation: concurrency must be >= 1");

  std::filesystem::create_directories(cache_dir);
  const std::filesystem::path cache_file =
      cache_dir / (model.model_id + ".jsonl");

  std::vector<CacheRow> cached = load_cache(cache_file);
  std::set<std::pair<std::string, int>> have;
  for (const auto& row : cached) {
    if (row.model_id != model.model_id)
      throw ValidationError("cache file " + cache_file.string() +
                            " contains rows for model '" + row.model_id + "'");
    have.emplace(row.prompt_id, row.index);
  }

  std::vector<PendingPrompt> pending;
  for (const auto& spec : prompts) {
    PendingPrompt p{&spec, {}};
    for (int i = 0; i < params.n_completions; ++i) {
      if (!have.count({spec.prompt_id, i})) p.missing.push_back(i);
    }
    if (!p.missing.empty()) pending.push_back(std::move(p));
  }

  std::function<std::vector<std::string>(const PromptSpec&)> backend;
  if (options.backend_override) {
    backend = options.backend_override;
  } else if (model.backend == BackendKind::stub) {
    const std::uint64_t stub_seed = params.seed ^ fnv1a64(model.model_id);
    backend = [&params, stub_seed, &options](const PromptSpec& spec) {
      return stub_generate(spec.text, params, stub_seed, options.injections);
    };
  } else {
    backend = [&model, &params, &options](const PromptSpec& spec) {
      return http_generate(model.endpoint, model.model_id, spec.text, params,
                           options.request_timeout_s);
    };
  }

  std::ofstream append_stream;
  std::mutex append_mutex;
  if (!pending.empty()) {
    append_stream.open(cache_file, std::ios::binary | std::ios::app);
    if (!append_stream.is_open())
      throw ValidationError("cannot open cache file for append: " +
                            cache_file.string());
  }

  auto complete_prompt = [&](const PendingPrompt& p)
      -> std::vector<CacheRow> {
    auto texts = call_with_retries([&]() { return backend(*p.spec); },
                                   p.spec->prompt_id, options.retries,
                                   options.backoff_base_ms);
    if (static_cast<int>(texts.size()) < params.n_completions)
      throw BackendError("prompt " + p.spec->prompt_id + ": backend returned " +
                         std::to_string(texts.size()) + " completions, need " +
                         std::to_string(params.n_completions));
    std::vector<CacheRow> rows;
    rows.reserve(p.missing.size());
    for (int index : p.missing) {
      CacheRow row;
      row.prompt_id = p.spec->prompt_id;
      row.model_id = model.model_id;
      row.index = index;
      row.raw_text = truncate_at_stop(texts[static_cast<std::size_t>(index)],
                                      params.stop_sequences);
      rows.push_back(std::move(row));
    }
    return rows;
  };

  auto append_rows = [&](const std::vector<CacheRow>& rows) {
    for (const auto& row : rows) {
      append_jsonl_line(append_stream, {{"prompt_id", row.prompt_id},
                                        {"model_id", row.model_id},
                                        {"index", row.index},
                                        {"raw_text", row.raw_text}});
      cached.push_back(row);
    }
  };

  const bool parallel =
      model.backend == BackendKind::http && !options.backend_override &&
      options.concurrency > 1 && pending.size() > 1;
  if (!parallel) {
    for (const auto& p : pending) append_rows(complete_prompt(p));
  } else {
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    const std::size_t worker_count = std::min<std::size_t>(
        static_cast<std::size_t>(options.concurrency), pending.size());
    std::vector<std::thread> workers;
    workers.reserve(worker_count);
    for (std::size_t w = 0; w < worker_count; ++w) {
      workers.emplace_back([&]() {
        while (!failed.load()) {
          const std::size_t i = next.fetch_add(1);
          if (i >= pending.size()) return;
          try {
            auto rows = complete_prompt(pending[i]);
            std::lock_guard<std::mutex> lock(append_mutex);
            append_rows(rows);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
            failed.store(true);
            return;
          }
        }
      });
    }
    for (auto& worker : workers) worker.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  // Return rows for exactly the requested prompts, in canonical order.
  std::set<std::string> wanted;
  for (const auto& spec : prompts) wanted.insert(spec.prompt_id);
  std::vector<CacheRow> result;
  for (auto& row : cached) {
    if (wanted.count(row.prompt_id) && row.index < params.n_completions)
      result.push_back(std::move(row));
  }
  sort_cache_rows(result);
  return result;
}

}  // namespace isect
