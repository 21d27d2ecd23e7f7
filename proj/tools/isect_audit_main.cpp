// isect-audit: audits causal language models for intersectional bias by
// generating a marker-combination prompt battery, collecting completions,
// scoring sentence sentiment, comparing marker groups against an unmarked
// baseline, and topic-modeling the extremes.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "isect/battery.hpp"
#include "isect/config.hpp"
#include "isect/errors.hpp"
#include "isect/harness.hpp"
#include "isect/jsonl.hpp"
#include "isect/version.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "Audit config JSON file")
      ->required();
  cmd->add_option("--seed", args.seed,
                  "Override every module seed (generation, analysis, topics)");
}

nlohmann::json battery_row(const isect::PromptSpec& spec) {
  nlohmann::json row = {{"prompt_id", spec.prompt_id},
                        {"text", spec.text},
                        {"group_key", spec.group_key},
                        {"noun", spec.signature.noun_id}};
  row["religion"] = spec.signature.religion_id
                        ? nlohmann::json(*spec.signature.religion_id)
                        : nlohmann::json(nullptr);
  row["disability"] = spec.signature.disability_id
                          ? nlohmann::json(*spec.signature.disability_id)
                          : nlohmann::json(nullptr);
  return row;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Intersectional bias audit for causal language models"};
  app.set_version_flag("--version", std::string(isect::kToolVersion));
  app.require_subcommand(1);

  CommonArgs battery_args;
  std::string battery_out;
  CLI::App* battery_cmd =
      app.add_subcommand("battery", "Emit the prompt battery as JSONL");
  add_common(battery_cmd, battery_args);
  battery_cmd->add_option("--out", battery_out,
                          "Write to this file instead of stdout");

  CommonArgs generate_args;
  std::string generate_model;
  std::string generate_backend;
  std::string generate_endpoint;
  CLI::App* generate_cmd = app.add_subcommand(
      "generate", "Collect completions into the resumable cache");
  add_common(generate_cmd, generate_args);
  generate_cmd->add_option("--model", generate_model,
                           "Only this model_id from the config");
  generate_cmd->add_option("--backend", generate_backend,
                           "Override the backend (stub|http) for the run");
  generate_cmd->add_option("--endpoint", generate_endpoint,
                           "Override the completion endpoint URL");

  CommonArgs score_args;
  CLI::App* score_cmd =
      app.add_subcommand("score", "Score cached completions");
  add_common(score_cmd, score_args);

  CommonArgs analyze_args;
  CLI::App* analyze_cmd = app.add_subcommand(
      "analyze", "Compare marker groups against the baseline");
  add_common(analyze_cmd, analyze_args);

  CommonArgs topics_args;
  CLI::App* topics_cmd = app.add_subcommand(
      "topics", "Topic-model the high/low scoring prompt pools");
  add_common(topics_cmd, topics_args);

  CommonArgs report_args;
  std::string report_format;
  CLI::App* report_cmd =
      app.add_subcommand("report", "Assemble the report from stage outputs");
  add_common(report_cmd, report_args);
  report_cmd->add_option("--format", report_format,
                         "Also print the report to stdout (json|markdown)");

  CommonArgs run_args;
  CLI::App* run_cmd =
      app.add_subcommand("run", "Run every stage end to end");
  add_common(run_cmd, run_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // argument errors are validation errors
  }

  try {
    if (battery_cmd->parsed()) {
      const auto config =
          isect::load_config(battery_args.config_path, battery_args.seed);
      const auto battery = isect::ensure_battery(config);
      std::string out;
      for (const auto& spec : battery) {
        out += battery_row(spec).dump();
        out += '\n';
      }
      if (battery_out.empty()) {
        std::cout << out;
      } else {
        isect::write_text_file(battery_out, out);
      }
    } else if (generate_cmd->parsed()) {
      auto config =
          isect::load_config(generate_args.config_path, generate_args.seed);
      if (!generate_backend.empty() || !generate_endpoint.empty()) {
        for (auto& model : config.generation.models) {
          if (!generate_model.empty() && model.model_id != generate_model)
            continue;
          if (!generate_backend.empty())
            model.backend = isect::backend_kind_from_string(generate_backend);
          if (!generate_endpoint.empty()) model.endpoint = generate_endpoint;
          model.validate();
        }
      }
      isect::stage_generate(config,
                            generate_model.empty()
                                ? std::nullopt
                                : std::optional<std::string>(generate_model));
    } else if (score_cmd->parsed()) {
      isect::stage_score(
          isect::load_config(score_args.config_path, score_args.seed));
    } else if (analyze_cmd->parsed()) {
      isect::stage_analyze(
          isect::load_config(analyze_args.config_path, analyze_args.seed));
    } else if (topics_cmd->parsed()) {
      isect::stage_topics(
          isect::load_config(topics_args.config_path, topics_args.seed));
    } else if (report_cmd->parsed()) {
      const auto config =
          isect::load_config(report_args.config_path, report_args.seed);
      const auto report = isect::stage_report(config);
      if (!report_format.empty())
        std::cout << isect::emit_report(report, report_format);
    } else if (run_cmd->parsed()) {
      const auto config =
          isect::load_config(run_args.config_path, run_args.seed);
      const auto report = isect::run_audit(config);
      std::cerr << "report written to "
                << (config.paths.report_dir / "report.json").string() << "\n";
      (void)report;
    }
  } catch (const isect::BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return 2;
  } catch (const isect::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
