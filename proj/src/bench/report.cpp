// Copyright 2026 The eelab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <sstream>

#include "eelab/bench.hpp"

namespace eelab::bench {

namespace {

constexpr std::string_view kDash = "−";

std::string fixed(double v, int prec) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::string signed_fixed(double v, int prec) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%+.*f", prec, v);
  return buf;
}

std::string cell(std::optional<double> v, int prec) { return v ? fixed(*v, prec) : std::string(kDash); }
std::string signed_cell(std::optional<double> v, int prec) {
  return v ? signed_fixed(*v, prec) : std::string(kDash);
}
std::string csv_cell(std::optional<double> v) { return v ? fixed(*v, 6) : std::string(); }

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void md_row(std::ostringstream& out, const std::vector<std::string>& cells) {
  out << '|';
  for (const auto& c : cells) out << ' ' << c << " |";
  out << '\n';
}

void md_rule(std::ostringstream& out, std::size_t left, std::size_t right) {
  out << '|';
  for (std::size_t i = 0; i < left; ++i) out << "---|";
  for (std::size_t i = 0; i < right; ++i) out << "---:|";
  out << '\n';
}

std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

}  // namespace

Format parse_format(std::string_view name) {
  if (name == "md" || name == "markdown") return Format::Markdown;
  if (name == "csv") return Format::Csv;
  if (name == "json") return Format::Json;
  throw DataError("unknown format '" + std::string(name) + "'");
}

Format format_from_path(const std::filesystem::path& path, Format fallback) {
  const auto ext = path.extension().string();
  if (ext == ".md") return Format::Markdown;
  if (ext == ".csv") return Format::Csv;
  if (ext == ".json") return Format::Json;
  return fallback;
}

std::string render_profiles(std::span<const causal::ProfileReport> reports, Format format) {
  if (reports.empty()) throw DataError("no results");
  if (format == Format::Json) {
    if (reports.size() == 1) return dump(causal::to_json(reports.front()));
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : reports) arr.push_back(causal::to_json(r));
    return dump(arr);
  }

  std::ostringstream out;
  if (format == Format::Csv) {
    out << "task_id,model,mode,n_layers,n_examples,acc_clean,optimal_layer,acc_at_optimal,ate,"
           "restoration_validated,partial\n";
    for (const auto& r : reports) {
      const auto& p = r.profile;
      const auto& s = r.selection;
      out << csv_quote(p.task_id) << ',' << csv_quote(r.model_name) << ',' << causal::mode_name(r.mode) << ','
          << p.n_layers << ',' << p.n_examples << ',' << fixed(p.acc_clean(), 6) << ','
          << (s.optimal_layer ? std::to_string(*s.optimal_layer) : "") << ','
          << (s.optimal_layer ? fixed(s.acc_at_optimal, 6) : "") << ','
          << (r.treatment ? fixed(r.treatment->ate, 6) : "") << ',' << (s.restoration_validated ? "true" : "false")
          << ',' << (p.partial() ? "true" : "false") << '\n';
    }
    return out.str();
  }

  out << "# Exit layers\n\n";
  md_row(out, {"Task", "Model", "Mode", "Layers", "Exit layer", "Clean acc (%)", "Exit acc (%)", "ATE", "Validated"});
  md_rule(out, 3, 6);
  for (const auto& r : reports) {
    const auto& p = r.profile;
    const auto& s = r.selection;
    md_row(out, {p.task_id, r.model_name, std::string(causal::mode_name(r.mode)), std::to_string(p.n_layers),
                 s.optimal_layer ? std::to_string(*s.optimal_layer) : std::string(kDash),
                 fixed(100.0 * p.acc_clean(), 2),
                 s.optimal_layer ? fixed(100.0 * s.acc_at_optimal, 2) : std::string(kDash),
                 r.treatment ? fixed(r.treatment->ate, 4) : std::string(kDash),
                 s.restoration_validated ? "yes" : "no"});
  }
  for (const auto& r : reports) {
    const auto& p = r.profile;
    out << "\n## " << p.task_id << ": layer accuracy\n\n";
    if (p.partial()) out << "Partial profile: only the layers visited by the search are listed.\n\n";
    md_row(out, {"Layer", "Acc (%)", "TE"});
    md_rule(out, 0, 3);
    for (int layer : p.evaluated_layers()) {
      std::optional<double> te;
      if (r.treatment) te = r.treatment->te.at(layer);
      md_row(out, {std::to_string(layer), fixed(100.0 * p.acc(layer), 2), signed_cell(te, 4)});
    }
  }
  return out.str();
}

namespace {

void render_eval_md(std::ostringstream& out, const EvalReport& report) {
  out << "## " << report.task_id << " (model " << report.model_name << ", " << report.n_layers << " layers, "
      << report.n_eval << " eval examples)\n";
  const auto& base = report.results.front();
  std::vector<Comparison> cmp;
  for (std::size_t i = 1; i < report.results.size(); ++i) cmp.push_back(compare(base, report.results[i]));

  bool any_wall = false;
  for (const auto& r : report.results) any_wall = any_wall || r.avg_wall_ms.has_value();

  struct Block {
    std::string title;
    std::string delta_title;
    std::optional<double> ClassResult::*value;
    std::optional<double> EvalResult::*avg;
    std::optional<double> ClassDelta::*delta;
    int prec;
    bool signed_delta;
  };
  std::vector<Block> blocks = {
      {"Accuracy (%)", "Delta", &ClassResult::accuracy_pct, &EvalResult::avg_accuracy_pct,
       &ClassDelta::accuracy_delta_pct, 2, true},
      {"Latency (layer fraction)", "Improvement (%)", &ClassResult::layer_fraction, &EvalResult::avg_layer_fraction,
       &ClassDelta::latency_improvement_pct, 4, false},
  };
  if (any_wall) {
    blocks.push_back({"Latency (ms)", "Improvement (%)", &ClassResult::wall_ms, &EvalResult::avg_wall_ms,
                      &ClassDelta::wall_improvement_pct, 4, false});
  }

  for (const auto& b : blocks) {
    out << "\n### " << b.title << "\n\n";
    std::vector<std::string> head{"Class"};
    for (const auto& r : report.results) head.push_back(r.policy.label());
    for (const auto& c : cmp) head.push_back(b.delta_title + " " + c.candidate);
    md_row(out, head);
    md_rule(out, 1, head.size() - 1);
    const auto delta_cell = [&](std::optional<double> v) {
      return b.signed_delta ? signed_cell(v, 2) : cell(v, 2);
    };
    for (std::size_t i = 0; i < base.classes.size(); ++i) {
      std::vector<std::string> row{base.classes[i].class_name};
      for (const auto& r : report.results) row.push_back(cell(r.classes[i].*b.value, b.prec));
      for (const auto& c : cmp) row.push_back(delta_cell(c.classes[i].*b.delta));
      md_row(out, row);
    }
    std::vector<std::string> avg{"Avg"};
    for (const auto& r : report.results) avg.push_back(cell(r.*b.avg, b.prec));
    for (const auto& c : cmp) avg.push_back(delta_cell(c.avg.*b.delta));
    md_row(out, avg);
  }

  std::vector<std::string> notes;
  for (const auto& r : report.results) {
    for (const auto& c : r.classes) {
      if (c.missing != Missing::None) {
        notes.push_back(r.policy.label() + " / " + c.class_name + ": " +
                        (c.missing == Missing::NoData ? "no eval examples" : "no exit layer identified"));
      }
    }
  }
  if (!notes.empty()) {
    out << "\nMissing cells:\n\n";
    for (const auto& n : notes) out << "- " << n << '\n';
  }
}

}  // namespace

std::string render_eval(std::span<const EvalReport> reports, Format format) {
  if (reports.empty()) throw DataError("no results");
  if (format == Format::Json) {
    if (reports.size() == 1) return dump(to_json(reports.front()));
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : reports) arr.push_back(to_json(r));
    return dump(arr);
  }
  std::ostringstream out;
  if (format == Format::Csv) {
    out << "task_id,model,policy,class,n,correct,accuracy_pct,layer_fraction,wall_ms,reason\n";
    for (const auto& rep : reports) {
      for (const auto& r : rep.results) {
        for (const auto& c : r.classes) {
          out << csv_quote(rep.task_id) << ',' << csv_quote(rep.model_name) << ',' << r.policy.label() << ','
              << csv_quote(c.class_name) << ',' << c.n << ',' << c.correct << ',' << csv_cell(c.accuracy_pct) << ','
              << csv_cell(c.layer_fraction) << ',' << csv_cell(c.wall_ms) << ',' << missing_name(c.missing) << '\n';
        }
        out << csv_quote(rep.task_id) << ',' << csv_quote(rep.model_name) << ',' << r.policy.label() << ",Avg,,,"
            << csv_cell(r.avg_accuracy_pct) << ',' << csv_cell(r.avg_layer_fraction) << ','
            << csv_cell(r.avg_wall_ms) << ",\n";
      }
    }
    return out.str();
  }
  out << "# Evaluation\n";
  for (const auto& rep : reports) {
    out << '\n';
    render_eval_md(out, rep);
  }
  return out.str();
}

}  // namespace eelab::bench
