#include <algorithm>
#include <set>
#include <sstream>

#include "hazsim/trace.hpp"

namespace hazsim::trace {

const std::vector<std::string>& rule_ids() {
  static const std::vector<std::string> ids = {"R1", "R2", "R3", "R4", "R5",
                                               "R6", "R7", "R8", "R9", "R10"};
  return ids;
}

namespace {

class FindingSink {
 public:
  FindingSink(const model::ModelBundle& bundle, std::vector<Finding>& out)
      : bundle_(bundle), out_(out) {}

  void error(const char* rule, std::string_view kind, const std::string& subject,
             std::string message) {
    push(rule, Severity::error, kind, subject, std::move(message));
  }

  void warning(const char* rule, std::string_view kind,
               const std::string& subject, std::string message) {
    push(rule, Severity::warning, kind, subject, std::move(message));
  }

 private:
  void push(const char* rule, Severity severity, std::string_view kind,
            const std::string& subject, std::string message) {
    Finding f;
    f.rule = rule;
    f.severity = severity;
    f.subject = subject;
    f.message = std::move(message);
    f.pos = bundle_.position_of(kind, subject);
    out_.push_back(std::move(f));
  }

  const model::ModelBundle& bundle_;
  std::vector<Finding>& out_;
};

bool resolves_to_link_or_node(const model::ModelBundle& bundle,
                              const std::string& name) {
  return bundle.find_link(name) != nullptr || bundle.is_loop_node(name);
}

} // namespace

std::vector<Finding> validate(const model::ModelBundle& bundle) {
  std::vector<Finding> findings;
  FindingSink sink(bundle, findings);

  // R1: hazard -> loss references.
  for (const auto& h : bundle.hazards) {
    for (const auto& loss : h.leads_to) {
      if (!bundle.find_loss(loss))
        sink.error("R1", "hazard", h.id,
                   "hazard " + h.id + " leads to unknown loss " + loss);
    }
  }

  // R2: HCA -> action/level/hazard.
  for (const auto& hca : bundle.hcas) {
    const auto* action = bundle.find_action(hca.action);
    if (!action) {
      sink.error("R2", "hca", hca.id,
                 "hca " + hca.id + " names unknown action " + hca.action);
    } else if (std::find(action->levels.begin(), action->levels.end(),
                         hca.level) == action->levels.end()) {
      sink.error("R2", "hca", hca.id,
                 "hca " + hca.id + " level " + hca.level +
                     " is not a level of action " + hca.action);
    }
    if (!bundle.find_hazard(hca.causes))
      sink.error("R2", "hca", hca.id,
                 "hca " + hca.id + " causes unknown hazard " + hca.causes);
  }

  // R3: causal factor locations.
  for (const auto& f : bundle.factors) {
    if (!resolves_to_link_or_node(bundle, f.at))
      sink.error("R3", "factor", f.id,
                 "factor " + f.id + " is located at unknown link or node " +
                     f.at);
  }

  // R4: component realizations.
  for (const auto& c : bundle.components) {
    if (c.realizes.empty())
      sink.error("R4", "component", c.id,
                 "component " + c.id + " realizes nothing");
    for (const auto& target : c.realizes) {
      if (!resolves_to_link_or_node(bundle, target))
        sink.error("R4", "component", c.id,
                   "component " + c.id + " realizes unknown link or node " +
                       target);
    }
  }

  // R5: threat applicability.
  for (const auto& t : bundle.threats) {
    for (const auto& comp : t.applies_to) {
      if (!bundle.find_component(comp))
        sink.error("R5", "threat", t.id,
                   "threat " + t.id + " applies to unknown component " + comp);
    }
  }

  // R6: scenario references and non-emptiness.
  for (const auto& s : bundle.scenarios) {
    if (s.hazards.empty())
      sink.error("R6", "scenario", s.id,
                 "scenario " + s.id + " references no hazards");
    if (s.hcas.empty())
      sink.error("R6", "scenario", s.id,
                 "scenario " + s.id + " references no hazardous control actions");
    auto check = [&](const std::vector<std::string>& ids, auto finder,
                     const char* what) {
      for (const auto& id : ids) {
        if (!finder(id))
          sink.error("R6", "scenario", s.id,
                     "scenario " + s.id + " references unknown " +
                         std::string(what) + " " + id);
      }
    };
    check(s.hazards, [&](const std::string& id) { return bundle.find_hazard(id) != nullptr; }, "hazard");
    check(s.losses, [&](const std::string& id) { return bundle.find_loss(id) != nullptr; }, "loss");
    check(s.hcas, [&](const std::string& id) { return bundle.find_hca(id) != nullptr; }, "hca");
    check(s.factors, [&](const std::string& id) { return bundle.find_factor(id) != nullptr; }, "factor");
    check(s.components, [&](const std::string& id) { return bundle.find_component(id) != nullptr; }, "component");
    check(s.threats, [&](const std::string& id) { return model::resolve_threat(bundle, id) != nullptr; }, "threat");
  }

  // R7 (warning): hazards without a scenario.
  for (const auto& h : bundle.hazards) {
    bool covered = std::any_of(
        bundle.scenarios.begin(), bundle.scenarios.end(), [&](const auto& s) {
          return std::find(s.hazards.begin(), s.hazards.end(), h.id) !=
                 s.hazards.end();
        });
    if (!covered)
      sink.warning("R7", "hazard", h.id,
                   "hazard " + h.id + " is not covered by any scenario");
  }

  // R8 (warning): scenarios without a test specification.
  for (const auto& s : bundle.scenarios) {
    bool tested = std::any_of(bundle.testspecs.begin(), bundle.testspecs.end(),
                              [&](const auto& ts) {
                                return ts.from_scenario == s.id;
                              });
    if (!tested)
      sink.warning("R8", "scenario", s.id,
                   "scenario " + s.id + " has no test specification");
  }

  // R9: HTD-side references.
  for (const auto& ts : bundle.testspecs) {
    if (!bundle.find_scenario(ts.from_scenario))
      sink.error("R9", "testspec", ts.id,
                 "testspec " + ts.id + " derives from unknown scenario " +
                     ts.from_scenario);
  }
  for (const auto& es : bundle.experiments) {
    const auto* ts = bundle.find_testspec(es.from_test);
    if (!ts) {
      sink.error("R9", "experiment", es.id,
                 "experiment " + es.id + " realizes unknown testspec " +
                     es.from_test);
      continue;
    }
    for (const auto& b : es.bindings) {
      const auto* param = ts->find_controllable(b.name);
      if (!param) {
        sink.error("R9", "experiment", es.id,
                   "experiment " + es.id + " binds " + b.name +
                       ", which is not a controllable of " + ts->id);
      } else if (!b.unit.empty() && !param->unit.empty() &&
                 b.unit != param->unit) {
        sink.error("R9", "experiment", es.id,
                   "experiment " + es.id + " binds " + b.name + " in " +
                       b.unit + " but " + ts->id + " declares " + param->unit);
      }
    }
  }

  // R10: constraint negations.
  for (const auto& c : bundle.constraints) {
    if (!bundle.find_hazard(c.negates))
      sink.error("R10", "constraint", c.id,
                 "constraint " + c.id + " negates unknown hazard " + c.negates);
  }

  return findings;
}

int count_errors(const std::vector<Finding>& findings) {
  return static_cast<int>(std::count_if(
      findings.begin(), findings.end(),
      [](const Finding& f) { return f.severity == Severity::error; }));
}

int count_warnings(const std::vector<Finding>& findings) {
  return static_cast<int>(std::count_if(
      findings.begin(), findings.end(),
      [](const Finding& f) { return f.severity == Severity::warning; }));
}

std::string render_finding(const Finding& finding) {
  std::string out;
  if (finding.pos.known()) out += finding.pos.str() + ": ";
  out += finding.severity == Severity::error ? "error" : "warning";
  out += ": [" + finding.rule + "] " + finding.message;
  return out;
}

// ---------------------------------------------------------------------------
// HCA matrix
// ---------------------------------------------------------------------------

UnknownActionError::UnknownActionError(const std::string& action)
    : std::runtime_error("unknown control action " + action) {}

int HcaMatrix::populated_entries() const {
  int count = 0;
  for (const auto& row : cells)
    for (const auto& cell : row) count += static_cast<int>(cell.size());
  return count;
}

HcaMatrix hca_table(const model::ModelBundle& bundle,
                    const std::string& action) {
  const auto* act = bundle.find_action(action);
  if (!act) throw UnknownActionError(action);

  HcaMatrix matrix;
  matrix.action = action;
  matrix.levels = act->levels;
  matrix.cells.resize(matrix.levels.size());

  for (const auto& hca : bundle.hcas) {
    if (hca.action != action) continue;
    auto row = std::find(matrix.levels.begin(), matrix.levels.end(), hca.level);
    if (row == matrix.levels.end()) continue; // R2 reports this
    auto col = std::find(matrix.guidewords.begin(), matrix.guidewords.end(),
                         hca.when);
    matrix.cells[row - matrix.levels.begin()][col - matrix.guidewords.begin()]
        .push_back({hca.causes, hca.qualified});
  }
  return matrix;
}

namespace {

std::string pretty_level(const std::string& level) {
  std::string out = level;
  std::replace(out.begin(), out.end(), '_', ' ');
  if (!out.empty() && out[0] >= 'a' && out[0] <= 'z')
    out[0] = static_cast<char>(out[0] - 'a' + 'A');
  return out;
}

std::string pretty_guideword(model::Guideword g) {
  switch (g) {
    case model::Guideword::any_time:    return "Any time";
    case model::Guideword::too_early:   return "Too early";
    case model::Guideword::too_late:    return "Too late";
    case model::Guideword::not_applied: return "Not applied";
  }
  return "";
}

std::string cell_text(const std::vector<HcaCellEntry>& cell) {
  std::string out;
  for (size_t k = 0; k < cell.size(); ++k) {
    if (k) out += ", ";
    out += cell[k].qualified ? "(" + cell[k].hazard + ")" : cell[k].hazard;
  }
  return out;
}

} // namespace

std::string render_hca_table(const HcaMatrix& matrix) {
  const size_t cols = 1 + matrix.guidewords.size();
  std::vector<std::vector<std::string>> grid;
  grid.push_back({"Control"});
  for (auto g : matrix.guidewords) grid[0].push_back(pretty_guideword(g));
  for (size_t r = 0; r < matrix.levels.size(); ++r) {
    std::vector<std::string> row{pretty_level(matrix.levels[r])};
    for (size_t c = 0; c < matrix.guidewords.size(); ++c)
      row.push_back(cell_text(matrix.cells[r][c]));
    grid.push_back(std::move(row));
  }

  std::vector<size_t> width(cols, 0);
  for (const auto& row : grid)
    for (size_t c = 0; c < cols; ++c)
      width[c] = std::max(width[c], row[c].size());

  std::ostringstream out;
  for (const auto& row : grid) {
    std::string line;
    for (size_t c = 0; c < cols; ++c) {
      line += row[c];
      if (c + 1 < cols)
        line += std::string(width[c] - row[c].size() + 2, ' ');
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Scenario trace chains
// ---------------------------------------------------------------------------

UnknownScenarioError::UnknownScenarioError(const std::string& scenario)
    : std::runtime_error("unknown scenario " + scenario) {}

TraceChain scenario_trace(const model::ModelBundle& bundle,
                          const std::string& scenario_id) {
  const auto* scenario = bundle.find_scenario(scenario_id);
  if (!scenario) throw UnknownScenarioError(scenario_id);

  TraceChain chain;
  chain.scenario = scenario->id;
  chain.title = scenario->title;
  chain.safety_constraint = scenario->safety_constraint;
  chain.losses = scenario->losses;
  chain.hazards = scenario->hazards;
  chain.hcas = scenario->hcas;
  chain.factors = scenario->factors;
  chain.components = scenario->components;
  chain.threats = scenario->threats;
  for (const auto& ts : bundle.testspecs) {
    if (ts.from_scenario == scenario->id) chain.testspecs.push_back(ts.id);
  }
  for (const auto& es : bundle.experiments) {
    if (std::find(chain.testspecs.begin(), chain.testspecs.end(),
                  es.from_test) != chain.testspecs.end())
      chain.experiments.push_back(es.id);
  }
  return chain;
}

namespace {

void chain_line(std::ostringstream& out, const char* label,
                const std::vector<std::string>& ids) {
  out << "  " << label;
  if (ids.empty()) {
    out << "-\n";
    return;
  }
  for (size_t k = 0; k < ids.size(); ++k) out << (k ? " " : "") << ids[k];
  out << "\n";
}

std::string join(const std::vector<std::string>& ids) {
  std::string out;
  for (size_t k = 0; k < ids.size(); ++k) {
    if (k) out += ";";
    out += ids[k];
  }
  return out;
}

} // namespace

std::string render_trace_text(const TraceChain& chain) {
  std::ostringstream out;
  out << "scenario " << chain.scenario;
  if (!chain.title.empty()) out << ": " << chain.title;
  out << "\n";
  chain_line(out, "losses:      ", chain.losses);
  chain_line(out, "hazards:     ", chain.hazards);
  chain_line(out, "hcas:        ", chain.hcas);
  chain_line(out, "factors:     ", chain.factors);
  chain_line(out, "components:  ", chain.components);
  chain_line(out, "threats:     ", chain.threats);
  chain_line(out, "testspecs:   ", chain.testspecs);
  chain_line(out, "experiments: ", chain.experiments);
  if (!chain.safety_constraint.empty())
    out << "  safety:      " << chain.safety_constraint << "\n";
  return out.str();
}

std::string render_trace_csv(const model::ModelBundle& bundle) {
  std::ostringstream out;
  out << "scenario,loss,hazard,hca,factor,component,threat,testspec,experiment\n";
  for (const auto& s : bundle.scenarios) {
    TraceChain chain = scenario_trace(bundle, s.id);
    out << chain.scenario << "," << join(chain.losses) << ","
        << join(chain.hazards) << "," << join(chain.hcas) << ","
        << join(chain.factors) << "," << join(chain.components) << ","
        << join(chain.threats) << "," << join(chain.testspecs) << ","
        << join(chain.experiments) << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Test skeleton generation
// ---------------------------------------------------------------------------

TestSkeleton gen_test_skeleton(const model::ModelBundle& bundle,
                               const std::string& scenario_id) {
  const auto* scenario = bundle.find_scenario(scenario_id);
  if (!scenario) throw UnknownScenarioError(scenario_id);

  TestSkeleton skeleton;
  auto& draft = skeleton.draft;

  int next = 1;
  for (const auto& ts : bundle.testspecs) {
    if (model::id_matches(ts.id, "TS-"))
      next = std::max(next, std::stoi(ts.id.substr(3)) + 1);
  }
  draft.id = "TS-" + std::to_string(next);
  draft.from_scenario = scenario->id;

  std::string loss_list;
  for (size_t k = 0; k < scenario->losses.size(); ++k) {
    if (k) loss_list += ", ";
    loss_list += scenario->losses[k];
  }
  draft.title =
      "Assessment of losses {" + loss_list + "} due to scenario " + scenario->id;
  draft.rationale = "TODO: refine; examines scenario \"" + scenario->title + "\"";

  for (const auto& hazard_id : scenario->hazards) {
    if (const auto* h = bundle.find_hazard(hazard_id))
      draft.target_measures.push_back(h->description);
  }

  // One feedback-delay controllable per causal factor located on a link.
  for (const auto& factor_id : scenario->factors) {
    const auto* factor = bundle.find_factor(factor_id);
    if (!factor || !bundle.find_link(factor->at)) continue;
    std::string name = "d_" + factor->at;
    if (draft.find_controllable(name)) continue;
    draft.controllable.push_back({name, {"0.1", "1.0"}, "s"});
  }
  if (draft.controllable.empty())
    skeleton.notes.push_back(
        "scenario has no delay-class causal factors; add controllable "
        "parameters by hand");

  draft.measured.push_back("voltage at loads");
  draft.initial = model::InitialState{230.0, 0.10, 0.0};
  for (const auto& p : draft.controllable)
    draft.uncertainty_sources.push_back(p.name);
  skeleton.notes.push_back(
      "TODO: uncontrollable parameters (load profile, droop configuration) "
      "are analyst judgment; none were generated");
  return skeleton;
}

// ---------------------------------------------------------------------------
// Coverage
// ---------------------------------------------------------------------------

CoverageReport coverage_report(const model::ModelBundle& bundle) {
  CoverageReport report;
  report.hazards = static_cast<int>(bundle.hazards.size());
  report.scenarios = static_cast<int>(bundle.scenarios.size());
  report.hcas = static_cast<int>(bundle.hcas.size());

  for (const auto& h : bundle.hazards) {
    for (const auto& s : bundle.scenarios) {
      if (std::find(s.hazards.begin(), s.hazards.end(), h.id) !=
          s.hazards.end()) {
        ++report.covered_hazards;
        break;
      }
    }
  }
  for (const auto& s : bundle.scenarios) {
    for (const auto& ts : bundle.testspecs) {
      if (ts.from_scenario == s.id) {
        ++report.tested_scenarios;
        break;
      }
    }
  }
  for (const auto& hca : bundle.hcas) {
    for (const auto& s : bundle.scenarios) {
      if (std::find(s.hcas.begin(), s.hcas.end(), hca.id) != s.hcas.end()) {
        ++report.referenced_hcas;
        break;
      }
    }
  }
  return report;
}

} // namespace hazsim::trace
