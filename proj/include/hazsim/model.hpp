#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hazsim/source.hpp"

namespace hazsim::model {

// ---------------------------------------------------------------------------
// STPA-SafeSec domain values
// ---------------------------------------------------------------------------

struct Loss {
  std::string id;          // L<digits>
  std::string description;

  friend bool operator==(const Loss&, const Loss&) = default;
};

struct Hazard {
  std::string id;          // H<digits>
  std::string description;
  std::vector<std::string> leads_to; // Loss ids, declaration order

  friend bool operator==(const Hazard&, const Hazard&) = default;
};

struct Constraint {
  std::string id;      // C<digits>
  std::string negates; // Hazard id
  std::string text;

  friend bool operator==(const Constraint&, const Constraint&) = default;
};

struct ControlAction {
  std::string name;
  std::vector<std::string> levels; // ordered, unique

  friend bool operator==(const ControlAction&, const ControlAction&) = default;
};

enum class LinkKind { command, feedback };

struct Link {
  std::string id; // unique across the bundle (e.g. MSMT-1)
  std::string from;
  std::string to;
  LinkKind kind = LinkKind::command;

  friend bool operator==(const Link&, const Link&) = default;
};

struct ControlLoop {
  std::string id;
  std::string controller;
  std::string actuator;
  std::string sensor;
  std::string process;
  std::vector<ControlAction> actions;
  std::vector<Link> links;

  std::vector<std::string> node_names() const {
    return {controller, actuator, sensor, process};
  }

  friend bool operator==(const ControlLoop&, const ControlLoop&) = default;
};

enum class Guideword { any_time, too_early, too_late, not_applied };

std::string_view guideword_name(Guideword g);
std::optional<Guideword> guideword_from(std::string_view name);

struct HazardousControlAction {
  std::string id;     // HC-<digits>
  std::string action; // ControlAction name
  std::string level;  // level of that action
  Guideword when = Guideword::any_time;
  std::string causes;     // Hazard id
  bool qualified = false; // rendered parenthesized in the matrix

  friend bool operator==(const HazardousControlAction&,
                         const HazardousControlAction&) = default;
};

struct CausalFactor {
  std::string id; // CF<digits>
  std::string description;
  std::string at; // Link id or node name

  friend bool operator==(const CausalFactor&, const CausalFactor&) = default;
};

enum class ComponentKind { device, network };

struct Component {
  std::string id;
  ComponentKind kind = ComponentKind::device;
  std::vector<std::string> realizes; // Link ids or node names

  friend bool operator==(const Component&, const Component&) = default;
};

enum class SecurityClass { availability, integrity, confidentiality };

std::string_view security_class_name(SecurityClass c);
std::optional<SecurityClass> security_class_from(std::string_view name);

struct SecurityThreat {
  std::string id; // e.g. CSTR-A-1
  std::string description;
  SecurityClass cls = SecurityClass::availability;
  std::vector<std::string> applies_to; // Component ids

  friend bool operator==(const SecurityThreat&, const SecurityThreat&) = default;
};

struct HazardScenario {
  std::string id; // HS-<digits>
  std::string title;
  std::vector<std::string> hazards;
  std::vector<std::string> losses;
  std::vector<std::string> hcas;
  std::vector<std::string> factors;
  std::vector<std::string> components;
  std::vector<std::string> threats;
  std::string safety_constraint;

  friend bool operator==(const HazardScenario&, const HazardScenario&) = default;
};

// ---------------------------------------------------------------------------
// HTD level 2/3 values
// ---------------------------------------------------------------------------

struct Parameter {
  std::string name;
  std::vector<std::string> values; // literal tokens: numbers or identifiers
  std::string unit;                // "", "s", "V", "W", "var", "ohm"

  friend bool operator==(const Parameter&, const Parameter&) = default;
};

struct InitialState {
  double nominal_voltage_v = 230.0;
  double tolerance = 0.10;   // fraction of nominal
  double initial_delay_s = 0.0;

  friend bool operator==(const InitialState&, const InitialState&) = default;
};

struct TestSpecification {
  std::string id;            // TS-<digits>
  std::string from_scenario; // HazardScenario id
  std::string title;
  std::string rationale;
  std::vector<std::string> target_measures;
  std::vector<Parameter> controllable;
  std::vector<std::string> uncontrollable;
  std::vector<std::string> measured;
  InitialState initial;
  std::vector<std::string> uncertainty_sources; // controllable names

  const Parameter* find_controllable(std::string_view name) const;

  friend bool operator==(const TestSpecification&,
                         const TestSpecification&) = default;
};

struct DroopSelection {
  std::string name;                    // named curve from the feeder file
  std::vector<double> inline_breakpoints; // v1..v4 per unit when inline

  bool empty() const { return name.empty() && inline_breakpoints.empty(); }

  friend bool operator==(const DroopSelection&, const DroopSelection&) = default;
};

struct ExperimentSpecification {
  std::string id;        // ES-<digits>
  std::string from_test; // TestSpecification id
  std::string feeder_path;
  double dt_s = 0.0;
  double duration_s = 0.0;
  DroopSelection droop;              // empty: use the feeder's own curves
  std::vector<Parameter> bindings;   // sweep values per controllable name

  const Parameter* find_binding(std::string_view name) const;

  friend bool operator==(const ExperimentSpecification&,
                         const ExperimentSpecification&) = default;
};

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

class DuplicateIdError : public std::runtime_error {
 public:
  DuplicateIdError(std::string id, std::string kind, SourcePos pos = {});

  const std::string& id() const { return id_; }
  const std::string& kind() const { return kind_; }
  const SourcePos& pos() const { return pos_; }
  void set_pos(const SourcePos& pos);

 private:
  std::string id_;
  std::string kind_;
  SourcePos pos_;
};

/// Aggregate of one analysis: every registered value plus the source position
/// it came from. Values are immutable once registered; cross-references stay
/// unresolved until trace::validate runs, so files may be loaded in any order.
struct ModelBundle {
  std::vector<Loss> losses;
  std::vector<Hazard> hazards;
  std::vector<Constraint> constraints;
  std::vector<ControlLoop> loops;
  std::vector<HazardousControlAction> hcas;
  std::vector<CausalFactor> factors;
  std::vector<Component> components;
  std::vector<SecurityThreat> threats;
  std::vector<HazardScenario> scenarios;
  std::vector<TestSpecification> testspecs;
  std::vector<ExperimentSpecification> experiments;

  /// "<kind> <id>" -> where it was declared. Diagnostics only; not part of
  /// bundle equality.
  std::map<std::string, SourcePos> positions;

  template <class T>
  void add(T item, const SourcePos& pos = {});

  const Loss* find_loss(std::string_view id) const;
  const Hazard* find_hazard(std::string_view id) const;
  const Constraint* find_constraint(std::string_view id) const;
  const ControlLoop* find_loop(std::string_view id) const;
  const HazardousControlAction* find_hca(std::string_view id) const;
  const CausalFactor* find_factor(std::string_view id) const;
  const Component* find_component(std::string_view id) const;
  const SecurityThreat* find_threat(std::string_view id) const;
  const HazardScenario* find_scenario(std::string_view id) const;
  const TestSpecification* find_testspec(std::string_view id) const;
  const ExperimentSpecification* find_experiment(std::string_view id) const;

  /// The control action with this name, searching loops in order.
  const ControlAction* find_action(std::string_view name) const;

  /// Link with this id, searching all loops.
  const Link* find_link(std::string_view id) const;

  /// True when the name is a declared loop node (controller/actuator/
  /// sensor/process of any loop).
  bool is_loop_node(std::string_view name) const;

  /// Kind of whatever carries this id, or nullopt when nothing does.
  /// Searches type collections in declaration order of this struct.
  std::optional<std::string> kind_of(std::string_view id) const;

  SourcePos position_of(std::string_view kind, std::string_view id) const;

  bool operator==(const ModelBundle& other) const;
};

/// The representative built-in threat set. Not registered into bundles;
/// scenario threat references fall back to these when undeclared.
const std::vector<SecurityThreat>& builtin_threats();

/// Resolve a threat id against the bundle first, then the built-in set.
const SecurityThreat* resolve_threat(const ModelBundle& bundle,
                                     std::string_view id);

/// Constraint by negation: C<digits of h.id> with the template text
/// "The system shall not enter state: <description>".
Constraint constraint_from_hazard(const Hazard& h);

/// "L" + digits, "HC-" + digits, ... used by the parser and validation.
bool id_matches(std::string_view id, std::string_view prefix);

} // namespace hazsim::model
