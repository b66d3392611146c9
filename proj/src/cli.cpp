#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hazsim/cli.hpp"
#include "hazsim/dsl.hpp"
#include "hazsim/gridsim.hpp"
#include "hazsim/runner.hpp"
#include "hazsim/trace.hpp"

namespace hazsim::cli {

namespace {

model::ModelBundle load_bundle(const std::vector<std::string>& files) {
  model::ModelBundle bundle;
  for (const auto& file : files) dsl::parse_file_into(bundle, file);
  return bundle;
}

/// Print findings to err; returns the error count.
int report_findings(const std::vector<trace::Finding>& findings,
                    std::ostream& err) {
  for (const auto& f : findings) err << trace::render_finding(f) << "\n";
  return trace::count_errors(findings);
}

bool write_text_file(const std::string& path, const std::string& content,
                     std::ostream& err) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    err << "cannot write " << path << "\n";
    return false;
  }
  out << content;
  return true;
}

int cmd_validate(const std::vector<std::string>& files, std::ostream& out,
                 std::ostream& err) {
  model::ModelBundle bundle = load_bundle(files);
  auto findings = trace::validate(bundle);
  int errors = report_findings(findings, err);
  out << errors << " errors, " << trace::count_warnings(findings)
      << " warnings\n";
  auto coverage = trace::coverage_report(bundle);
  out << "coverage: hazards " << coverage.covered_hazards << "/"
      << coverage.hazards << " in scenarios, scenarios "
      << coverage.tested_scenarios << "/" << coverage.scenarios
      << " tested, hcas " << coverage.referenced_hcas << "/" << coverage.hcas
      << " referenced\n";
  return errors > 0 ? 1 : 0;
}

int require_valid(const model::ModelBundle& bundle, std::ostream& err) {
  auto findings = trace::validate(bundle);
  int errors = 0;
  for (const auto& f : findings) {
    if (f.severity == trace::Severity::error) {
      err << trace::render_finding(f) << "\n";
      ++errors;
    }
  }
  return errors;
}

int cmd_trace(const std::string& scenario_id,
              const std::vector<std::string>& files, const std::string& csv,
              std::ostream& out, std::ostream& err) {
  model::ModelBundle bundle = load_bundle(files);
  if (require_valid(bundle, err) > 0) return 1;
  trace::TraceChain chain = trace::scenario_trace(bundle, scenario_id);
  out << trace::render_trace_text(chain);
  if (!csv.empty() &&
      !write_text_file(csv, trace::render_trace_csv(bundle), err))
    return 2;
  return 0;
}

int cmd_table(const std::string& action, const std::vector<std::string>& files,
              std::ostream& out, std::ostream& err) {
  model::ModelBundle bundle = load_bundle(files);
  if (require_valid(bundle, err) > 0) return 1;
  out << trace::render_hca_table(trace::hca_table(bundle, action));
  return 0;
}

int cmd_skeleton(const std::string& scenario_id,
                 const std::vector<std::string>& files,
                 const std::string& output, std::ostream& out,
                 std::ostream& err) {
  model::ModelBundle bundle = load_bundle(files);
  if (require_valid(bundle, err) > 0) return 1;
  trace::TestSkeleton skeleton = trace::gen_test_skeleton(bundle, scenario_id);
  std::string text;
  for (const auto& note : skeleton.notes) text += "# " + note + "\n";
  text += dsl::serialize(skeleton.draft);
  if (output.empty())
    out << text;
  else if (!write_text_file(output, text, err))
    return 2;
  return 0;
}

int cmd_run(const std::string& experiment_id,
            const std::vector<std::string>& files, const std::string& csv,
            const std::string& report, const std::string& trace_dir,
            std::ostream& out, std::ostream& err) {
  model::ModelBundle bundle = load_bundle(files);
  if (require_valid(bundle, err) > 0) return 1;
  const auto* es = bundle.find_experiment(experiment_id);
  if (!es) {
    err << "unknown experiment " << experiment_id << "\n";
    return 2;
  }

  runner::ResultSet results = runner::execute(bundle, *es);

  int failed = 0;
  for (const auto& rr : results.runs) {
    out << "run " << rr.point.index;
    for (const auto& [name, value] : rr.point.bindings)
      out << " " << name << "=" << value;
    if (!rr.verdict.converged) {
      out << " FAILED: " << rr.verdict.failure << "\n";
      ++failed;
      continue;
    }
    out << " hazards=";
    if (rr.verdict.hazards.empty()) {
      out << "-";
    } else {
      bool first = true;
      for (const auto& h : rr.verdict.hazards) {
        out << (first ? "" : ";") << h;
        first = false;
      }
    }
    out << "\n";
  }
  out << results.runs.size() << " runs, " << failed << " failed\n";
  err << "completed in " << results.wall_time_s << " s\n";

  if (!csv.empty()) {
    std::ostringstream buffer;
    runner::emit_csv(results, buffer);
    if (!write_text_file(csv, buffer.str(), err)) return 2;
  }
  if (!report.empty()) {
    std::ostringstream buffer;
    runner::emit_report(bundle, results, buffer);
    if (!write_text_file(report, buffer.str(), err)) return 2;
  }
  if (!trace_dir.empty()) {
    std::filesystem::create_directories(trace_dir);
    for (const auto& rr : results.runs) {
      if (!rr.verdict.converged) continue;
      char name[32];
      std::snprintf(name, sizeof(name), "run_%03d.csv", rr.point.index);
      std::ostringstream buffer;
      grid::write_trace_csv(rr.trace, buffer);
      if (!write_text_file((std::filesystem::path(trace_dir) / name).string(),
                           buffer.str(), err))
        return 2;
    }
  }

  return failed == static_cast<int>(results.runs.size()) && failed > 0 ? 3 : 0;
}

int cmd_check_feeder(const std::string& file, std::ostream& out,
                     std::ostream& err) {
  std::ifstream probe(file);
  if (!probe) {
    err << "cannot read feeder file " << file << "\n";
    return 2;
  }
  grid::FeederModel feeder = dsl::parse_feeder_file(file);
  out << "feeder OK: " << (feeder.buses.size() + 1) << " buses (slack "
      << feeder.slack_id << "), " << feeder.lines.size() << " lines, "
      << feeder.bems.size() << " bems\n";
  return 0;
}

} // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out,
             std::ostream& err) {
  CLI::App app{"STPA-SafeSec hazard models, HTD test specifications and "
               "feeder experiments"};
  app.require_subcommand(1);

  auto* validate = app.add_subcommand(
      "validate", "Check cross-references and report coverage");
  std::vector<std::string> validate_files;
  validate->add_option("files", validate_files, "model files (.haz/.htd)")
      ->required();

  auto* trace_cmd =
      app.add_subcommand("trace", "Render a hazard scenario's trace chain");
  std::string trace_scenario, trace_csv;
  std::vector<std::string> trace_files;
  trace_cmd->add_option("scenario", trace_scenario, "scenario id")->required();
  trace_cmd->add_option("files", trace_files, "model files")->required();
  trace_cmd->add_option("--csv", trace_csv,
                        "write the full traceability matrix as CSV");

  auto* table =
      app.add_subcommand("table", "Render a control action's HCA matrix");
  std::string table_action;
  std::vector<std::string> table_files;
  table->add_option("action", table_action, "control action name")->required();
  table->add_option("files", table_files, "model files")->required();

  auto* skeleton = app.add_subcommand(
      "skeleton", "Generate a test specification draft from a scenario");
  std::string skeleton_scenario, skeleton_output;
  std::vector<std::string> skeleton_files;
  skeleton->add_option("scenario", skeleton_scenario, "scenario id")
      ->required();
  skeleton->add_option("files", skeleton_files, "model files")->required();
  skeleton->add_option("-o,--output", skeleton_output, "write draft to file");

  auto* run_cmd = app.add_subcommand("run", "Execute an experiment sweep");
  std::string run_experiment, run_csv, run_report, run_trace_dir;
  std::vector<std::string> run_files;
  run_cmd->add_option("experiment", run_experiment, "experiment id")
      ->required();
  run_cmd->add_option("files", run_files, "model files")->required();
  run_cmd->add_option("--csv", run_csv, "write per-run results as CSV");
  run_cmd->add_option("--report", run_report, "write the full text report");
  run_cmd->add_option("--trace-dir", run_trace_dir,
                      "write per-run voltage traces into this directory");

  auto* check =
      app.add_subcommand("check-feeder", "Parse and topology-check a feeder");
  std::string check_file;
  check->add_option("file", check_file, "feeder file (.net)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (validate->parsed()) return cmd_validate(validate_files, out, err);
    if (trace_cmd->parsed())
      return cmd_trace(trace_scenario, trace_files, trace_csv, out, err);
    if (table->parsed()) return cmd_table(table_action, table_files, out, err);
    if (skeleton->parsed())
      return cmd_skeleton(skeleton_scenario, skeleton_files, skeleton_output,
                          out, err);
    if (run_cmd->parsed())
      return cmd_run(run_experiment, run_files, run_csv, run_report,
                     run_trace_dir, out, err);
    if (check->parsed()) return cmd_check_feeder(check_file, out, err);
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return 2;
  }
  return 2;
}

} // namespace hazsim::cli
