#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "hazsim/model.hpp"

namespace hazsim::trace {

enum class Severity { error, warning };

struct Finding {
  std::string rule; // one of rule_ids()
  Severity severity = Severity::error;
  std::string subject; // id of the offending value
  std::string message;
  SourcePos pos;

  friend bool operator==(const Finding&, const Finding&) = default;
};

/// The declared rule set, in evaluation order:
///   R1  every hazard's leads_to losses exist
///   R2  every HCA names an existing hazard and a level of its action
///   R3  every causal factor's location resolves to a link or loop node
///   R4  every component realizes existing links or nodes
///   R5  every threat applies to existing components
///   R6  every scenario's references exist; hazards and hcas non-empty
///   R7  (warning) every hazard appears in at least one scenario
///   R8  (warning) every scenario has at least one test specification
///   R9  test/experiment links resolve (TS->scenario, ES->TS, ES bindings
///       name TS controllables)
///   R10 every constraint negates an existing hazard
const std::vector<std::string>& rule_ids();

/// Pure and idempotent; an empty list means the bundle is valid (warnings
/// report incompleteness without invalidating).
std::vector<Finding> validate(const model::ModelBundle& bundle);

int count_errors(const std::vector<Finding>& findings);
int count_warnings(const std::vector<Finding>& findings);

std::string render_finding(const Finding& finding);

// ---------------------------------------------------------------------------
// Hazardous-control-action matrix
// ---------------------------------------------------------------------------

class UnknownActionError : public std::runtime_error {
 public:
  explicit UnknownActionError(const std::string& action);
};

struct HcaCellEntry {
  std::string hazard;
  bool qualified = false;

  friend bool operator==(const HcaCellEntry&, const HcaCellEntry&) = default;
};

/// rows follow the action's level order; columns are the four guidewords
/// any_time, too_early, too_late, not_applied.
struct HcaMatrix {
  std::string action;
  std::vector<std::string> levels;
  static constexpr std::array<model::Guideword, 4> guidewords = {
      model::Guideword::any_time, model::Guideword::too_early,
      model::Guideword::too_late, model::Guideword::not_applied};
  std::vector<std::array<std::vector<HcaCellEntry>, 4>> cells;

  int populated_entries() const;
};

HcaMatrix hca_table(const model::ModelBundle& bundle,
                    const std::string& action);

/// Aligned plain-text rendering; qualified entries are parenthesized and
/// empty cells left blank.
std::string render_hca_table(const HcaMatrix& matrix);

// ---------------------------------------------------------------------------
// Scenario trace chains
// ---------------------------------------------------------------------------

class UnknownScenarioError : public std::runtime_error {
 public:
  explicit UnknownScenarioError(const std::string& scenario);
};

struct TraceChain {
  std::string scenario;
  std::string title;
  std::string safety_constraint;
  std::vector<std::string> losses;
  std::vector<std::string> hazards;
  std::vector<std::string> hcas;
  std::vector<std::string> factors;
  std::vector<std::string> components;
  std::vector<std::string> threats;
  std::vector<std::string> testspecs;    // TS with from_scenario == scenario
  std::vector<std::string> experiments;  // ES whose from_test is in testspecs

  friend bool operator==(const TraceChain&, const TraceChain&) = default;
};

TraceChain scenario_trace(const model::ModelBundle& bundle,
                          const std::string& scenario_id);

std::string render_trace_text(const TraceChain& chain);

/// One CSV row per scenario; multi-valued layers are semicolon-joined in
/// registration order.
std::string render_trace_csv(const model::ModelBundle& bundle);

// ---------------------------------------------------------------------------
// Test skeleton generation
// ---------------------------------------------------------------------------

struct TestSkeleton {
  model::TestSpecification draft; // not registered; the analyst edits first
  std::vector<std::string> notes; // warnings and TODO annotations
};

/// Draft TS seeded from the scenario: target measures from hazard
/// descriptions, one delay controllable per causal factor located on a link
/// (d_<link id>), measured voltages, initial state 230 V / 0.10 / 0 s.
TestSkeleton gen_test_skeleton(const model::ModelBundle& bundle,
                               const std::string& scenario_id);

// ---------------------------------------------------------------------------
// Coverage
// ---------------------------------------------------------------------------

struct CoverageReport {
  int hazards = 0;
  int covered_hazards = 0; // referenced by at least one scenario
  int scenarios = 0;
  int tested_scenarios = 0; // with at least one test specification
  int hcas = 0;
  int referenced_hcas = 0; // referenced by at least one scenario

  friend bool operator==(const CoverageReport&, const CoverageReport&) = default;
};

CoverageReport coverage_report(const model::ModelBundle& bundle);

} // namespace hazsim::trace
