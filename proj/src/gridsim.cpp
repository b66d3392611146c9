#include <algorithm>
#include <cmath>
#include <cstdio>

#include "hazsim/gridsim.hpp"

namespace hazsim::grid {

// ---------------------------------------------------------------------------
// Droop law
// ---------------------------------------------------------------------------

double droop_q(const DroopCurve& curve, double v_pu) {
  const DroopShape& s = curve.shape;
  const double q = curve.q_max_var;
  if (v_pu <= s.v1) return q;
  if (v_pu < s.v2) return q * (s.v2 - v_pu) / (s.v2 - s.v1);
  if (v_pu <= s.v3) return 0.0;
  if (v_pu < s.v4) return -q * (v_pu - s.v3) / (s.v4 - s.v3);
  return -q;
}

DroopLevel droop_level(const DroopCurve& curve, double v_pu) {
  const DroopShape& s = curve.shape;
  if (v_pu <= s.v1) return DroopLevel::max_injection;
  if (v_pu < s.v2) return DroopLevel::injection;
  if (v_pu <= s.v3) return DroopLevel::neutral;
  if (v_pu < s.v4) return DroopLevel::consume;
  return DroopLevel::max_consume;
}

std::string_view droop_level_name(DroopLevel level) {
  switch (level) {
    case DroopLevel::max_injection: return "max_injection";
    case DroopLevel::injection:     return "injection";
    case DroopLevel::neutral:       return "neutral";
    case DroopLevel::consume:       return "consume";
    case DroopLevel::max_consume:   return "max_consume";
  }
  return "neutral";
}

// ---------------------------------------------------------------------------
// Power flow
// ---------------------------------------------------------------------------

RadialSolver::RadialSolver(const FeederModel& feeder) {
  validate_feeder(feeder);
  node_ids_ = feeder.node_ids();
  slack_voltage_v_ = feeder.slack_voltage_v;

  const int n = static_cast<int>(node_ids_.size());
  auto index_of = [&](std::string_view id) {
    for (int i = 0; i < n; ++i)
      if (node_ids_[i] == id) return i;
    return -1;
  };

  struct Edge {
    int other;
    std::complex<double> z;
  };
  std::vector<std::vector<Edge>> adjacency(n);
  for (const auto& line : feeder.lines) {
    int a = index_of(line.from);
    int b = index_of(line.to);
    std::complex<double> z{line.r_ohm, line.x_ohm};
    adjacency[a].push_back({b, z});
    adjacency[b].push_back({a, z});
  }

  parent_.assign(n, -1);
  line_z_.assign(n, {0.0, 0.0});
  order_.clear();
  order_.reserve(n);
  std::vector<bool> seen(n, false);
  std::vector<int> frontier{0};
  seen[0] = true;
  while (!frontier.empty()) {
    int node = frontier.front();
    frontier.erase(frontier.begin());
    order_.push_back(node);
    for (const auto& edge : adjacency[node]) {
      if (!seen[edge.other]) {
        seen[edge.other] = true;
        parent_[edge.other] = node;
        line_z_[edge.other] = edge.z;
        frontier.push_back(edge.other);
      }
    }
  }
}

int RadialSolver::node_index(std::string_view id) const {
  for (size_t i = 0; i < node_ids_.size(); ++i)
    if (node_ids_[i] == id) return static_cast<int>(i);
  return -1;
}

PowerFlowResult RadialSolver::solve(
    const std::vector<std::complex<double>>& consumption, double tol_v,
    int max_iterations) const {
  const int n = static_cast<int>(node_ids_.size());
  PowerFlowResult result;
  result.node_ids = node_ids_;
  result.v.assign(n, {slack_voltage_v_, 0.0});

  std::vector<std::complex<double>> subtree(n);
  std::vector<double> prev_mag(n, slack_voltage_v_);

  for (int it = 1; it <= max_iterations; ++it) {
    // Backward sweep: accumulate branch currents from the leaves.
    std::fill(subtree.begin(), subtree.end(), std::complex<double>{});
    for (int k = n - 1; k >= 1; --k) {
      int node = order_[k];
      subtree[node] += std::conj(consumption[node] / result.v[node]);
      subtree[parent_[node]] += subtree[node];
    }
    // Forward sweep: propagate voltage drops from the root.
    for (int k = 1; k < n; ++k) {
      int node = order_[k];
      result.v[node] = result.v[parent_[node]] - line_z_[node] * subtree[node];
    }

    double delta = 0.0;
    for (int i = 0; i < n; ++i) {
      double mag = std::abs(result.v[i]);
      delta = std::max(delta, std::abs(mag - prev_mag[i]));
      prev_mag[i] = mag;
    }
    result.iterations = it;
    if (std::isfinite(delta) && delta < tol_v) {
      result.converged = true;
      return result;
    }
  }
  result.converged = false;
  return result;
}

RadialSolver::PathImpedance RadialSolver::path_impedance(
    std::string_view a, std::string_view b) const {
  int ia = node_index(a);
  int ib = node_index(b);
  if (ia < 0 || ib < 0)
    throw std::invalid_argument("path_impedance: unknown bus");

  auto depth_of = [&](int node) {
    int d = 0;
    for (int cur = node; parent_[cur] >= 0; cur = parent_[cur]) ++d;
    return d;
  };
  PathImpedance total;
  auto accumulate = [&](int node) {
    total.magnitude += std::abs(line_z_[node]);
    total.r += line_z_[node].real();
    total.x += line_z_[node].imag();
  };
  int da = depth_of(ia);
  int db = depth_of(ib);
  while (da > db) {
    accumulate(ia);
    ia = parent_[ia];
    --da;
  }
  while (db > da) {
    accumulate(ib);
    ib = parent_[ib];
    --db;
  }
  while (ia != ib) {
    accumulate(ia);
    accumulate(ib);
    ia = parent_[ia];
    ib = parent_[ib];
  }
  return total;
}

PowerFlowResult solve_power_flow(const FeederModel& feeder,
                                 const std::map<std::string, Injection>& injections,
                                 double tol_v, int max_iterations) {
  RadialSolver solver(feeder);
  const auto& ids = solver.node_ids();
  std::vector<std::complex<double>> consumption(ids.size());
  for (size_t i = 1; i < ids.size(); ++i) {
    const FeederBus& bus = feeder.buses[i - 1];
    consumption[i] = {bus.p_load_w, bus.q_load_var};
  }
  for (const auto& [bus, inj] : injections) {
    int idx = solver.node_index(bus);
    if (idx < 0) throw std::invalid_argument("injection at unknown bus " + bus);
    consumption[idx] -= std::complex<double>{inj.p_w, inj.q_var};
  }
  return solver.solve(consumption, tol_v, max_iterations);
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

NonConvergenceError::NonConvergenceError(int step)
    : std::runtime_error("power flow did not converge at step " +
                         std::to_string(step)),
      step_(step) {}

int SimulationTrace::bus_index(std::string_view id) const {
  for (size_t i = 0; i < bus_ids.size(); ++i)
    if (bus_ids[i] == id) return static_cast<int>(i);
  return -1;
}

namespace {

struct BemsState {
  int node = 0;
  DroopCurve curve;
  int base_delay_steps = 0;
  long last_src_step = 0; // trace index the last delivered reading came from
};

} // namespace

SimulationTrace run(const SimConfig& config) {
  if (!(config.dt_s > 0.0)) throw std::invalid_argument("dt must be > 0");
  if (config.duration_s < 0.0)
    throw std::invalid_argument("duration must be >= 0");

  RadialSolver solver(config.feeder);
  const auto& nodes = solver.node_ids();
  const int n = static_cast<int>(nodes.size());
  const double dt = config.dt_s;
  const double eps = dt * 1e-9;
  const int n_steps =
      static_cast<int>(std::floor(config.duration_s / dt + 1e-9));

  std::vector<BemsState> bems;
  bems.reserve(config.feeder.bems.size());
  SimulationTrace trace;
  trace.bus_ids = nodes;
  trace.dt_s = dt;
  for (const auto& unit : config.feeder.bems) {
    BemsState state;
    state.node = solver.node_index(unit.bus);
    DroopShape shape = config.droop_override
                           ? *config.droop_override
                           : *config.feeder.find_shape(unit.droop);
    state.curve = DroopCurve{unit.droop, shape, unit.q_max_var};
    auto it = config.bems_delay_s.find(unit.bus);
    double delay = it == config.bems_delay_s.end() ? 0.0 : it->second;
    if (delay < 0.0) throw std::invalid_argument("delay must be >= 0");
    state.base_delay_steps = static_cast<int>(std::lround(delay / dt));
    state.last_src_step = -state.base_delay_steps;
    bems.push_back(std::move(state));
    trace.bems_ids.push_back(unit.bus);
  }
  for (const auto& attack : config.attacks) {
    if (!(attack.start_s < attack.end_s))
      throw std::invalid_argument("attack start must precede end");
    if (trace.bems_ids.end() == std::find(trace.bems_ids.begin(),
                                          trace.bems_ids.end(),
                                          attack.target_bems))
      throw std::invalid_argument("attack targets unknown BEMS " +
                                  attack.target_bems);
  }

  // Net complex consumption per node at a given step time.
  auto consumption_at = [&](double t) {
    std::vector<std::complex<double>> s(n);
    for (int i = 1; i < n; ++i) {
      const FeederBus& bus = config.feeder.buses[i - 1];
      s[i] = {bus.p_load_w, bus.q_load_var};
    }
    for (const auto& step : config.load_steps) {
      if (t + eps >= step.at_s) {
        int idx = solver.node_index(step.bus);
        if (idx < 0)
          throw std::invalid_argument("load step at unknown bus " + step.bus);
        s[idx] += std::complex<double>{step.delta_p_w, step.delta_q_var};
      }
    }
    return s;
  };

  auto solve_step = [&](const std::vector<std::complex<double>>& s, int step) {
    PowerFlowResult pf =
        solver.solve(s, config.pf_tolerance_v, config.pf_max_iterations);
    if (!pf.converged) throw NonConvergenceError(step);
    TraceStep entry;
    entry.v_mag_v.resize(n);
    for (int i = 0; i < n; ++i) entry.v_mag_v[i] = pf.v_mag(i);
    return entry;
  };

  // Step 0: all BEMS at Q = 0; this solution also pre-fills delay buffers.
  {
    TraceStep entry = solve_step(consumption_at(0.0), 0);
    entry.t_s = 0.0;
    entry.q_var.assign(bems.size(), 0.0);
    entry.meas_age_steps.assign(bems.size(), 0);
    trace.steps.push_back(std::move(entry));
  }

  for (int k = 0; k < n_steps; ++k) {
    const double t_decision = k * dt;
    const double t_next = (k + 1) * dt;

    auto s = consumption_at(t_next);
    std::vector<double> q(bems.size());
    std::vector<int> ages(bems.size());
    for (size_t b = 0; b < bems.size(); ++b) {
      BemsState& state = bems[b];
      long src;
      if (config.bypass_delay_buffer) {
        src = k;
      } else {
        int m_eff = state.base_delay_steps;
        bool dropped = false;
        for (const auto& attack : config.attacks) {
          if (attack.target_bems != trace.bems_ids[b]) continue;
          bool active =
              t_decision + eps >= attack.start_s && t_decision < attack.end_s - eps;
          if (!active) continue;
          if (attack.kind == AttackSpec::Kind::extra_delay)
            m_eff += static_cast<int>(std::lround(attack.magnitude_s / dt));
          else
            dropped = true;
        }
        if (dropped) {
          src = state.last_src_step; // hold the last delivered reading
        } else {
          src = k - m_eff;
          state.last_src_step = src;
        }
      }
      double reading =
          trace.steps[static_cast<size_t>(std::max(0L, src))].v_mag_v[state.node];
      ages[b] = static_cast<int>(k - src);
      q[b] = droop_q(state.curve, reading / config.nominal_voltage_v);
      s[state.node] -= std::complex<double>{0.0, q[b]};
    }

    TraceStep entry = solve_step(s, k + 1);
    entry.t_s = t_next;
    entry.q_var = std::move(q);
    entry.meas_age_steps = std::move(ages);
    trace.steps.push_back(std::move(entry));
  }
  return trace;
}

void write_trace_csv(const SimulationTrace& trace, std::ostream& out) {
  out << "t";
  for (const auto& id : trace.bus_ids) out << "," << id;
  for (const auto& id : trace.bems_ids) out << ",q_" << id;
  out << "\n";
  char buf[40];
  for (const auto& step : trace.steps) {
    std::snprintf(buf, sizeof(buf), "%.6f", step.t_s);
    out << buf;
    for (double v : step.v_mag_v) {
      std::snprintf(buf, sizeof(buf), "%.6f", v);
      out << "," << buf;
    }
    for (double q : step.q_var) {
      std::snprintf(buf, sizeof(buf), "%.6f", q);
      out << "," << buf;
    }
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// Detection
// ---------------------------------------------------------------------------

OscillationMetrics detect_oscillation(const SimulationTrace& trace,
                                      const std::string& bus,
                                      double window_start_s,
                                      double window_end_s,
                                      double amplitude_threshold_v,
                                      int reversal_threshold) {
  int bus_idx = trace.bus_index(bus);
  if (bus_idx < 0)
    throw std::invalid_argument("detect_oscillation: unknown bus " + bus);
  const double eps = (trace.dt_s > 0 ? trace.dt_s : 1.0) * 1e-9;
  if (window_start_s < -eps || window_end_s > trace.end_time_s() + eps ||
      window_start_s >= window_end_s)
    throw std::invalid_argument("detect_oscillation: window outside trace");

  std::vector<double> samples;
  for (const auto& step : trace.steps) {
    if (step.t_s + eps >= window_start_s && step.t_s <= window_end_s + eps)
      samples.push_back(step.v_mag_v[bus_idx]);
  }
  if (samples.size() < 10)
    throw std::invalid_argument("detect_oscillation: window spans fewer than 10 steps");

  OscillationMetrics metrics;
  metrics.bus = bus;
  metrics.window_start_s = window_start_s;
  metrics.window_end_s = window_end_s;

  double lo = samples[0], hi = samples[0];
  for (double v : samples) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  metrics.peak_to_peak_v = hi - lo;

  int prev_sign = 0;
  for (size_t i = 1; i < samples.size(); ++i) {
    double diff = samples[i] - samples[i - 1];
    int sign = diff > 0.0 ? 1 : diff < 0.0 ? -1 : 0;
    if (sign == 0) continue; // zero differences are skipped
    if (prev_sign != 0 && sign != prev_sign) ++metrics.reversal_count;
    prev_sign = sign;
  }

  metrics.oscillating = metrics.peak_to_peak_v > amplitude_threshold_v &&
                        metrics.reversal_count >= reversal_threshold;
  return metrics;
}

std::vector<BandViolation> band_violations(const SimulationTrace& trace,
                                           double nominal_v, double tolerance) {
  if (!(tolerance > 0.0 && tolerance < 1.0))
    throw std::invalid_argument("band tolerance must be in (0, 1)");
  // Compared in per-unit so that e.g. 207.0 V against 230 V +- 10% sits
  // exactly on the closed boundary and is not flagged.
  const double upper = 1.0 + tolerance;
  const double lower = 1.0 - tolerance;
  std::vector<BandViolation> out;
  for (size_t k = 0; k < trace.steps.size(); ++k) {
    const auto& step = trace.steps[k];
    for (size_t i = 0; i < trace.bus_ids.size(); ++i) {
      double v_pu = step.v_mag_v[i] / nominal_v;
      if (v_pu > upper)
        out.push_back({trace.bus_ids[i], static_cast<int>(k), step.v_mag_v[i],
                       BandKind::over});
      else if (v_pu < lower)
        out.push_back({trace.bus_ids[i], static_cast<int>(k), step.v_mag_v[i],
                       BandKind::under});
    }
  }
  return out;
}

} // namespace hazsim::grid
