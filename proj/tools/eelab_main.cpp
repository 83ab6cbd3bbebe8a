// Copyright 2026 The eelab Authors
// SPDX-License-Identifier: Apache-2.0

// eelab: generate toy models, profile exit layers, evaluate exit policies and
// render reports. Exit codes: 0 success, 1 data or runtime error, 2 usage.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "eelab/bench.hpp"
#include "eelab/causal_profiler.hpp"
#include "eelab/parallel.hpp"
#include "eelab/planted.hpp"
#include "eelab/weights_io.hpp"

namespace {

using namespace eelab;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GenArgs {
  std::string out;
  int layers = 8;
  std::optional<int> plant;
  std::optional<int> distract;
  std::string fixture_prefix;
  int vocab = 32;
  int d_model = 64;
  int heads = 4;
  int d_ff = 64;
  int max_seq = 16;
  int examples_per_key = 27;
};

struct RunArgs {
  std::string model;
  std::string dataset;
  std::string task;
  std::string out;
  std::string format;
  std::string name;
  std::string mode = "staged";
  std::string policy = "fixed";
  std::string profile;
  std::optional<int> exit_layer;
  double threshold = 0.0;
  int patience = 2;
  bool wall_clock = false;
};

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string out;
  std::string format = "md";
};

std::uint64_t g_seed = 0;
std::size_t g_jobs = 1;

void apply_seed_env() {
  const char* env = std::getenv("ADEE_SEED");
  if (env == nullptr || *env == '\0') return;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(env, &used);
    if (used != std::string_view(env).size()) throw std::invalid_argument("trailing characters");
    g_seed = v;
  } catch (const std::exception&) {
    throw UsageError(std::string("ADEE_SEED is not an unsigned integer: '") + env + "'");
  }
}

void write_or_print(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    bench::write_text(out, text);
  }
}

bench::Format output_format(const RunArgs& a) {
  if (!a.format.empty()) {
    try {
      return bench::parse_format(a.format);
    } catch (const bench::DataError& e) {
      throw UsageError(e.what());
    }
  }
  return bench::format_from_path(a.out, bench::Format::Json);
}

std::string model_name(const RunArgs& a) {
  return a.name.empty() ? std::filesystem::path(a.model).stem().string() : a.name;
}

int cmd_gen_model(const GenArgs& a) {
  if (a.layers < 1) throw UsageError("--layers must be >= 1");
  if (a.plant && (*a.plant < 1 || *a.plant > a.layers)) {
    throw UsageError("--plant " + std::to_string(*a.plant) + " outside [1, " + std::to_string(a.layers) + "]");
  }
  if (a.distract) {
    if (!a.plant) throw UsageError("--distract-layer requires --plant");
    if (*a.distract <= *a.plant || *a.distract > a.layers) {
      throw UsageError("--distract-layer must lie in [plant + 1, layers]");
    }
  }
  if (!a.fixture_prefix.empty() && !a.plant) throw UsageError("--emit-fixture requires --plant");

  if (!a.plant) {
    model::ModelConfig cfg;
    cfg.n_layers = a.layers;
    cfg.d_model = a.d_model;
    cfg.n_heads = a.heads;
    cfg.d_ff = a.d_ff;
    cfg.vocab_size = a.vocab;
    cfg.max_seq = a.max_seq;
    try {
      cfg.validate();
    } catch (const model::ModelError& e) {
      throw UsageError(e.what());
    }
    model::save_model(model::build_random_model(cfg, g_seed), a.out);
    std::cout << "wrote random model (" << a.layers << " layers) to " << a.out << "\n";
    return 0;
  }

  bench::FixtureOptions opt;
  opt.n_layers = a.layers;
  opt.plant_layer = *a.plant;
  opt.seed = g_seed;
  opt.distract_layer = a.distract;
  opt.examples_per_key = a.examples_per_key;
  const auto fx = bench::make_planted_fixture(opt);
  model::save_model(fx.model, a.out);
  std::cout << "wrote planted model (" << a.layers << " layers, plant " << *a.plant << ") to " << a.out << "\n";
  if (!a.fixture_prefix.empty()) {
    bench::write_text(a.fixture_prefix + ".task.json", bench::task_to_json(fx.task).dump(2) + "\n");
    std::string lines;
    for (const auto& ex : fx.examples) lines += bench::example_to_jsonl(ex) + "\n";
    bench::write_text(a.fixture_prefix + ".jsonl", lines);
    std::cout << "wrote " << fx.examples.size() << " examples to " << a.fixture_prefix << ".jsonl\n";
  }
  return 0;
}

struct Loaded {
  model::LayerStack model;
  bench::TaskSpec task;
  bench::Split split;
};

Loaded load_inputs(const RunArgs& a) {
  auto m = model::load_model(a.model);
  auto task = bench::load_task(a.task);
  const auto examples = bench::load_dataset(a.dataset, task, &m.config());
  auto split = bench::split_dataset(examples, g_seed);
  for (const auto& w : split.warnings) std::cerr << "warning: " << w << "\n";
  return {std::move(m), std::move(task), std::move(split)};
}

int cmd_profile(const RunArgs& a) {
  const auto mode = causal::parse_mode(a.mode);
  if (a.patience < 1) throw UsageError("--patience must be >= 1");
  const auto in = load_inputs(a);
  if (in.split.profiling.empty()) throw bench::DataError("profiling split is empty");
  causal::ProfilerOptions opt;
  opt.patience = a.patience;
  opt.jobs = g_jobs;
  auto profiler = causal::CausalProfiler::for_model(
      in.model, bench::to_labeled_inputs(in.split.profiling, in.task), exit::Matcher(in.task.match_spec), opt);
  const auto sel = profiler.select_optimal_layer(mode);
  const auto report = causal::make_report(model_name(a), profiler, sel);
  const causal::ProfileReport reports[] = {report};
  write_or_print(a.out, bench::render_profiles(reports, output_format(a)));
  std::cerr << in.task.task_id() << ": exit layer "
            << (sel.optimal_layer ? std::to_string(*sel.optimal_layer) : std::string("none")) << " of "
            << in.model.n_layers() << (sel.restoration_validated ? " (validated)" : "") << "\n";
  return 0;
}

int cmd_eval(const RunArgs& a) {
  bench::Policy policy;
  if (a.policy == "full") {
    policy = bench::Policy::full();
  } else if (a.policy == "fixed") {
    if (a.exit_layer) {
      policy = bench::Policy::fixed(*a.exit_layer);
    } else if (!a.profile.empty()) {
      const auto j = nlohmann::ordered_json::parse(bench::read_text(a.profile), nullptr, false);
      if (j.is_discarded()) throw bench::DataError(a.profile + " is not valid JSON");
      const auto rep = causal::profile_report_from_json(j);
      policy = bench::Policy::fixed(rep.selection.optimal_layer);
      const auto task = bench::load_task(a.task);
      if (rep.profile.task_id != task.task_id()) {
        throw bench::DataError("profile is for task '" + rep.profile.task_id + "', not '" + task.task_id() + "'");
      }
    } else {
      throw UsageError("--policy fixed needs --profile or --exit-layer");
    }
  } else if (a.policy == "dynamic") {
    policy = bench::Policy::dynamic(a.threshold);
  } else {
    throw UsageError("unknown policy '" + a.policy + "'");
  }

  const auto in = load_inputs(a);
  if (policy.exit_layer && (*policy.exit_layer < 1 || *policy.exit_layer > in.model.n_layers())) {
    throw UsageError("--exit-layer outside [1, " + std::to_string(in.model.n_layers()) + "]");
  }
  bench::EvalOptions opt;
  opt.jobs = g_jobs;
  opt.wall_clock = a.wall_clock;
  bench::EvalReport report;
  report.task_id = in.task.task_id();
  report.model_name = model_name(a);
  report.n_layers = in.model.n_layers();
  report.n_eval = in.split.eval.size();
  if (in.split.eval.empty()) std::cerr << "warning: eval split is empty\n";
  report.results.push_back(bench::evaluate(in.model, in.split.eval, in.task, bench::Policy::full(), opt));
  report.results.push_back(bench::evaluate(in.model, in.split.eval, in.task, policy, opt));
  const bench::EvalReport reports[] = {report};
  write_or_print(a.out, bench::render_eval(reports, output_format(a)));
  return 0;
}

int cmd_report(const ReportArgs& a) {
  const auto format = bench::parse_format(a.format);
  std::vector<causal::ProfileReport> profiles;
  std::vector<bench::EvalReport> evals;
  for (const auto& path : a.inputs) {
    const auto j = nlohmann::ordered_json::parse(bench::read_text(path), nullptr, false);
    if (j.is_discarded()) throw bench::DataError(path + " is not valid JSON");
    const auto add = [&](const nlohmann::ordered_json& item) {
      if (!item.is_object()) throw bench::DataError(path + ": expected report objects");
      if (item.value("kind", std::string{}) == "eval") {
        evals.push_back(bench::eval_report_from_json(item));
      } else {
        profiles.push_back(causal::profile_report_from_json(item));
      }
    };
    if (j.is_array()) {
      for (const auto& item : j) add(item);
    } else {
      add(j);
    }
  }
  if (profiles.empty() && evals.empty()) throw bench::DataError("no results");
  std::string text;
  if (!profiles.empty()) text += bench::render_profiles(profiles, format);
  if (!evals.empty()) {
    if (!text.empty() && format == bench::Format::Markdown) text += "\n";
    if (!text.empty() && format != bench::Format::Markdown) {
      throw UsageError("mixing profile and eval reports is only supported for md output");
    }
    text += bench::render_eval(evals, format);
  }
  write_or_print(a.out, text);
  return 0;
}

void add_run_options(CLI::App* sub, RunArgs& a) {
  sub->add_option("--model", a.model, "Model weights file")->required();
  sub->add_option("--dataset", a.dataset, "JSONL dataset")->required();
  sub->add_option("--task", a.task, "Task JSON")->required();
  sub->add_option("--out", a.out, "Output path (default stdout)");
  sub->add_option("--format", a.format, "md, csv or json (default from --out extension, else json)");
  sub->add_option("--name", a.name, "Model name shown in reports (default: model file stem)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Early-exit profiling and evaluation for layered toy transformers"};
  app.set_config("--config", "", "TOML/INI file with default flag values");
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--seed", g_seed, "Seed for generation and splitting (ADEE_SEED overrides)");
  g_jobs = default_jobs();
  app.add_option("--jobs", g_jobs, "Worker threads for example-level evaluation")->check(CLI::PositiveNumber);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-model", "Write a planted or random toy model");
  gen_cmd->add_option("--out", gen.out, "Model output path")->required();
  gen_cmd->add_option("--layers", gen.layers, "Number of transformer layers");
  gen_cmd->add_option("--plant", gen.plant, "Layer from which the planted answer is decodable");
  gen_cmd->add_option("--distract-layer", gen.distract, "Layer that flips one fixture example to a wrong label");
  gen_cmd->add_option("--emit-fixture", gen.fixture_prefix, "Also write <prefix>.task.json and <prefix>.jsonl");
  gen_cmd->add_option("--examples-per-key", gen.examples_per_key, "Fixture examples per key token");
  gen_cmd->add_option("--vocab", gen.vocab, "Vocabulary size (random models)");
  gen_cmd->add_option("--d-model", gen.d_model, "Residual width (random models)");
  gen_cmd->add_option("--heads", gen.heads, "Attention heads (random models)");
  gen_cmd->add_option("--d-ff", gen.d_ff, "FFN width (random models)");
  gen_cmd->add_option("--max-seq", gen.max_seq, "Context length (random models)");

  RunArgs prof;
  auto* prof_cmd = app.add_subcommand("profile", "Select the exit layer on the profiling split");
  add_run_options(prof_cmd, prof);
  prof_cmd->add_option("--mode", prof.mode, "staged or exhaustive")->check(CLI::IsMember({"staged", "exhaustive"}));
  prof_cmd->add_option("--patience", prof.patience, "Explore stops after this many layers below the best");

  RunArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Compare full inference with an exit policy on the eval split");
  add_run_options(eval_cmd, ev);
  eval_cmd->add_option("--policy", ev.policy, "full, fixed or dynamic")
      ->check(CLI::IsMember({"full", "fixed", "dynamic"}));
  eval_cmd->add_option("--profile", ev.profile, "Profile report supplying the fixed exit layer");
  eval_cmd->add_option("--exit-layer", ev.exit_layer, "Explicit fixed exit layer");
  eval_cmd->add_option("--threshold", ev.threshold, "Confidence threshold for the dynamic policy");
  eval_cmd->add_flag("--wall-clock", ev.wall_clock, "Record wall-clock latency (output is then not reproducible)");

  ReportArgs rep;
  auto* rep_cmd = app.add_subcommand("report", "Render profile or eval reports");
  rep_cmd->add_option("--input", rep.inputs, "Report JSON files")->required();
  rep_cmd->add_option("--format", rep.format, "md, csv or json")->check(CLI::IsMember({"md", "csv", "json"}));
  rep_cmd->add_option("--out", rep.out, "Output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    apply_seed_env();
    if (gen_cmd->parsed()) return cmd_gen_model(gen);
    if (prof_cmd->parsed()) return cmd_profile(prof);
    if (eval_cmd->parsed()) return cmd_eval(ev);
    if (rep_cmd->parsed()) return cmd_report(rep);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
