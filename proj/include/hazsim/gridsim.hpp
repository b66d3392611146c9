#pragma once

#include <complex>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hazsim/feeder.hpp"

namespace hazsim::grid {

// ---------------------------------------------------------------------------
// Droop law
// ---------------------------------------------------------------------------

/// Piecewise-linear Q(V): continuous, non-increasing, bounded by +-q_max.
double droop_q(const DroopCurve& curve, double v_pu);

enum class DroopLevel { max_injection, injection, neutral, consume, max_consume };

/// Region of the curve a voltage falls in; boundaries v1/v4 belong to the
/// saturated side, v2/v3 to the neutral deadband.
DroopLevel droop_level(const DroopCurve& curve, double v_pu);

std::string_view droop_level_name(DroopLevel level);

// ---------------------------------------------------------------------------
// Power flow
// ---------------------------------------------------------------------------

/// Additional net injection at a bus, on top of its configured load.
/// Positive P/Q injects into the grid.
struct Injection {
  double p_w = 0.0;
  double q_var = 0.0;
};

struct PowerFlowResult {
  std::vector<std::string> node_ids; // slack first
  std::vector<std::complex<double>> v;
  bool converged = false;
  int iterations = 0;

  double v_mag(size_t node) const { return std::abs(v[node]); }
};

/// Backward/forward sweep on the feeder tree with constant-power buses.
/// Converged when the largest per-bus voltage-magnitude change between
/// sweeps drops below tol_v.
PowerFlowResult solve_power_flow(const FeederModel& feeder,
                                 const std::map<std::string, Injection>& injections = {},
                                 double tol_v = 1e-8, int max_iterations = 100);

/// Reusable sweep state for a fixed topology; run() steps through this.
class RadialSolver {
 public:
  explicit RadialSolver(const FeederModel& feeder);

  const std::vector<std::string>& node_ids() const { return node_ids_; }
  int node_index(std::string_view id) const; // -1 when unknown

  /// consumption[i] is the net complex power drawn at node i (loads positive);
  /// entry 0 (the slack) is ignored.
  PowerFlowResult solve(const std::vector<std::complex<double>>& consumption,
                        double tol_v, int max_iterations) const;

  struct PathImpedance {
    double magnitude = 0.0; // sum of |r + jx| along the path
    double r = 0.0;
    double x = 0.0;
  };

  /// Impedance sums along the tree path between two nodes.
  PathImpedance path_impedance(std::string_view a, std::string_view b) const;

 private:
  std::vector<std::string> node_ids_;
  double slack_voltage_v_ = 0.0;
  std::vector<int> parent_;                      // parent_[0] = -1
  std::vector<std::complex<double>> line_z_;     // impedance to parent
  std::vector<int> order_;                       // topological, root first
};

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

struct AttackSpec {
  enum class Kind { extra_delay, drop };
  Kind kind = Kind::extra_delay;
  std::string target_bems;  // BEMS bus id
  double start_s = 0.0;     // active on decisions with start <= t < end
  double end_s = 0.0;
  double magnitude_s = 0.0; // extra_delay only
};

/// Permanent load change applied from at_s onward.
struct LoadStep {
  std::string bus;
  double at_s = 0.0;
  double delta_p_w = 0.0;
  double delta_q_var = 0.0;
};

struct SimConfig {
  FeederModel feeder;
  double dt_s = 0.1;
  double duration_s = 0.0;
  std::map<std::string, double> bems_delay_s; // base delay per BEMS bus; absent = 0
  std::vector<AttackSpec> attacks;
  std::vector<LoadStep> load_steps;
  double nominal_voltage_v = 230.0;
  double pf_tolerance_v = 1e-8;
  int pf_max_iterations = 100;
  std::optional<DroopShape> droop_override; // replaces every BEMS's shape
  bool bypass_delay_buffer = false; // read the latest voltage directly
};

struct TraceStep {
  double t_s = 0.0;
  std::vector<double> v_mag_v;      // per node, slack first
  std::vector<double> q_var;        // per BEMS, feeder declaration order
  std::vector<int> meas_age_steps;  // per BEMS; 0 at the initial solve
};

struct SimulationTrace {
  std::vector<std::string> bus_ids;  // slack first
  std::vector<std::string> bems_ids;
  double dt_s = 0.0;
  std::vector<TraceStep> steps; // steps[0] is the initial Q=0 solve

  int bus_index(std::string_view id) const; // -1 when unknown
  double end_time_s() const { return steps.empty() ? 0.0 : steps.back().t_s; }
};

class NonConvergenceError : public std::runtime_error {
 public:
  explicit NonConvergenceError(int step);
  int step() const { return step_; }

 private:
  int step_;
};

/// Deterministic discrete-time run. Step 0 is a power-flow solve with Q = 0
/// at every BEMS; delay buffers are pre-filled with that solution; then
/// floor(duration/dt) steps follow. At the decision for step k -> k+1 each
/// BEMS reads its bus voltage from step k - m_eff and sets
/// Q = droop_q(curve, reading / nominal).
SimulationTrace run(const SimConfig& config);

/// CSV export: header "t,<bus ids...>,q_<bems ids>...", one row per step,
/// values at 6 decimal places.
void write_trace_csv(const SimulationTrace& trace, std::ostream& out);

// ---------------------------------------------------------------------------
// Detection
// ---------------------------------------------------------------------------

struct OscillationMetrics {
  std::string bus;
  double window_start_s = 0.0;
  double window_end_s = 0.0;
  double peak_to_peak_v = 0.0;
  int reversal_count = 0;
  bool oscillating = false;
};

/// peak_to_peak = max - min of |V| over the window; reversal_count = sign
/// changes of the first difference with zero differences skipped;
/// oscillating when peak_to_peak > amplitude_threshold_v and
/// reversal_count >= reversal_threshold. The window must span >= 10 steps.
OscillationMetrics detect_oscillation(const SimulationTrace& trace,
                                      const std::string& bus,
                                      double window_start_s,
                                      double window_end_s,
                                      double amplitude_threshold_v,
                                      int reversal_threshold);

enum class BandKind { over, under };

struct BandViolation {
  std::string bus;
  int step = 0;
  double voltage_v = 0.0;
  BandKind kind = BandKind::over;
};

/// Samples strictly outside nominal * (1 +- tolerance); the band itself is
/// closed, so a sample exactly on the boundary is not a violation.
std::vector<BandViolation> band_violations(const SimulationTrace& trace,
                                           double nominal_v, double tolerance);

} // namespace hazsim::grid
