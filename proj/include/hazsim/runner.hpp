#pragma once

#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hazsim/gridsim.hpp"
#include "hazsim/model.hpp"

namespace hazsim::runner {

class UnboundParameterError : public std::runtime_error {
 public:
  explicit UnboundParameterError(const std::string& name);
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

class FeederLoadError : public std::runtime_error {
 public:
  explicit FeederLoadError(const std::string& path, const std::string& why);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// One cell of the sweep grid: the literal value chosen for every
/// controllable parameter of the test specification.
struct RunPoint {
  int index = 0;
  std::vector<std::pair<std::string, std::string>> bindings; // (name, value)

  const std::string* value_of(std::string_view name) const;

  friend bool operator==(const RunPoint&, const RunPoint&) = default;
};

/// Cartesian product of the experiment's bound value lists, ordered by the
/// test specification's parameter declaration order with later parameters
/// varying fastest.
std::vector<RunPoint> expand_sweep(const model::ExperimentSpecification& es,
                                   const model::TestSpecification& ts);

struct CriterionOutcome {
  std::string id; // OSC, OVER, UNDER, STABLE
  bool pass = false;
  std::string evidence;
};

struct Verdict {
  int run_index = 0;
  bool converged = false;
  std::string failure; // non-empty for failed runs
  std::vector<CriterionOutcome> criteria;
  std::set<std::string> hazards; // raised hazard ids
  std::set<std::string> losses;  // union of leads_to over raised hazards
};

struct RunResult {
  RunPoint point;
  grid::SimulationTrace trace; // empty when the run failed
  std::vector<grid::OscillationMetrics> oscillations; // one per bus
  std::vector<grid::BandViolation> violations;
  Verdict verdict;
};

struct ResultSet {
  std::string experiment_id;
  std::vector<RunResult> runs;
  double wall_time_s = 0.0; // excluded from CSV/report output
};

struct RunnerOptions {
  /// Oscillation and stability checks run over the trailing fraction of the
  /// run so the startup transient is skipped.
  double detection_window_fraction = 0.5;
  /// Amplitude threshold as a fraction of nominal voltage (1.15 V at 230 V).
  double oscillation_amplitude_frac = 0.005;
  int oscillation_reversal_threshold = 6;
  double stable_delta_v = 1e-6;
};

/// Built-in test criteria for one completed run. OSC/OVER/UNDER pass when
/// the monitored condition occurred; STABLE passes when the post-transient
/// per-step voltage change stays below options.stable_delta_v.
std::vector<CriterionOutcome> evaluate_criteria(
    const grid::SimulationTrace& trace, const model::InitialState& initial,
    const RunnerOptions& options = {});

/// OSC -> H3, OVER -> H1, UNDER -> H2.
std::set<std::string> hazard_flags(const std::vector<CriterionOutcome>& criteria);

/// Losses implied by raised hazards through the bundle's hazard -> loss
/// mapping; hazards missing from the bundle contribute nothing.
std::set<std::string> loss_flags(const model::ModelBundle& bundle,
                                 const std::set<std::string>& hazards);

/// Expand the experiment's sweep and run every point: the swept delay d is
/// applied to the n attacked BEMS nearest the target bus by electrical
/// distance, and a deterministic load step at t = duration/4 moves the
/// target bus voltage across one droop breakpoint so the controller must
/// re-act. A failed run is recorded in its verdict; the sweep continues.
ResultSet execute(const model::ModelBundle& bundle,
                  const model::ExperimentSpecification& es,
                  const RunnerOptions& options = {});

/// header: run,d,target,n,osc_any,max_p2p_V,over_cnt,under_cnt,hazards,
/// losses,converged — one row per run point, id sets semicolon-joined.
void emit_csv(const ResultSet& results, std::ostream& out);

/// Plain-text report echoing the test specification, the scenario trace
/// chain and per-run verdicts. Byte-identical when regenerated.
void emit_report(const model::ModelBundle& bundle, const ResultSet& results,
                 std::ostream& out);

} // namespace hazsim::runner
