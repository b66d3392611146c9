#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "hazsim/dsl.hpp"
#include "hazsim/runner.hpp"
#include "hazsim/trace.hpp"

namespace hazsim::runner {

UnboundParameterError::UnboundParameterError(const std::string& name)
    : std::runtime_error("experiment binds no values for controllable parameter " +
                         name),
      name_(name) {}

FeederLoadError::FeederLoadError(const std::string& path,
                                 const std::string& why)
    : std::runtime_error("cannot load feeder file " + path + ": " + why),
      path_(path) {}

const std::string* RunPoint::value_of(std::string_view name) const {
  for (const auto& [key, value] : bindings)
    if (key == name) return &value;
  return nullptr;
}

std::vector<RunPoint> expand_sweep(const model::ExperimentSpecification& es,
                                   const model::TestSpecification& ts) {
  std::vector<const model::Parameter*> bound;
  bound.reserve(ts.controllable.size());
  for (const auto& param : ts.controllable) {
    const auto* binding = es.find_binding(param.name);
    if (!binding || binding->values.empty())
      throw UnboundParameterError(param.name);
    bound.push_back(binding);
  }

  // Later parameters vary fastest: the last binding has stride 1.
  std::vector<size_t> stride(bound.size(), 1);
  size_t total = 1;
  for (size_t k = bound.size(); k-- > 0;) {
    stride[k] = total;
    total *= bound[k]->values.size();
  }

  std::vector<RunPoint> points;
  points.reserve(total);
  for (size_t idx = 0; idx < total; ++idx) {
    RunPoint point;
    point.index = static_cast<int>(idx);
    for (size_t k = 0; k < bound.size(); ++k) {
      size_t value_idx = (idx / stride[k]) % bound[k]->values.size();
      point.bindings.emplace_back(bound[k]->name, bound[k]->values[value_idx]);
    }
    points.push_back(std::move(point));
  }
  return points;
}

namespace {

std::string fmt(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", value);
  return buf;
}

bool parse_double(const std::string& text, double& out) {
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && ptr == end;
}

bool parse_int(const std::string& text, int& out) {
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && ptr == end;
}

bool is_delay_name(const std::string& name) {
  return name == "d" || name.rfind("d_", 0) == 0;
}

/// Detection window: the trailing fraction of the run, widened when needed
/// so the oscillation detector sees at least 10 steps.
std::pair<double, double> detection_window(const grid::SimulationTrace& trace,
                                           const RunnerOptions& options) {
  double end = trace.end_time_s();
  double start = end * (1.0 - options.detection_window_fraction);
  start = std::min(start, end - 10.0 * trace.dt_s);
  return {std::max(0.0, start), end};
}

/// Load step moving the bus from v_pu across the nearest droop breakpoint:
/// downward (load increase) when a breakpoint lies below, otherwise upward.
/// Sized by the first-order sensitivity dV = -(r dP + x dQ) / V.
std::pair<double, double> perturbation_deltas(
    double v_pu, const grid::DroopShape& shape,
    const grid::RadialSolver::PathImpedance& z, double nominal_v) {
  const std::array<double, 4> bp{shape.v1, shape.v2, shape.v3, shape.v4};
  constexpr double kMargin = 0.02; // pu, for the unbounded outer regions

  double goal = v_pu;
  int below = -1;
  for (int i = 0; i < 4; ++i)
    if (bp[static_cast<size_t>(i)] < v_pu - 1e-12) below = i;
  if (below >= 0) {
    goal = below == 0 ? bp[0] - kMargin
                      : 0.5 * (bp[static_cast<size_t>(below - 1)] +
                               bp[static_cast<size_t>(below)]);
  } else {
    int above = -1;
    for (int i = 3; i >= 0; --i)
      if (bp[static_cast<size_t>(i)] > v_pu + 1e-12) above = i;
    if (above < 0) return {0.0, 0.0}; // degenerate curve at the operating point
    goal = above == 3 ? bp[3] + kMargin
                      : 0.5 * (bp[static_cast<size_t>(above)] +
                               bp[static_cast<size_t>(above + 1)]);
  }

  double dv_volts = (goal - v_pu) * nominal_v;
  if (z.r > 1e-9) return {-dv_volts * nominal_v / z.r, 0.0};
  if (z.x > 1e-9) return {0.0, -dv_volts * nominal_v / z.x};
  return {0.0, 0.0};
}

struct RunFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

} // namespace

std::vector<CriterionOutcome> evaluate_criteria(
    const grid::SimulationTrace& trace, const model::InitialState& initial,
    const RunnerOptions& options) {
  auto [win_start, win_end] = detection_window(trace, options);
  const double amp_threshold =
      options.oscillation_amplitude_frac * initial.nominal_voltage_v;

  std::vector<CriterionOutcome> out;

  // OSC: any bus oscillating over the detection window.
  {
    CriterionOutcome c{"OSC", false, ""};
    double max_p2p = 0.0;
    for (const auto& bus : trace.bus_ids) {
      auto metrics = grid::detect_oscillation(
          trace, bus, win_start, win_end, amp_threshold,
          options.oscillation_reversal_threshold);
      max_p2p = std::max(max_p2p, metrics.peak_to_peak_v);
      if (metrics.oscillating && !c.pass) {
        c.pass = true;
        c.evidence = "bus " + bus + " peak-to-peak " +
                     fmt(metrics.peak_to_peak_v) + " V, " +
                     std::to_string(metrics.reversal_count) + " reversals";
      }
    }
    if (!c.pass)
      c.evidence = "no oscillation (max peak-to-peak " + fmt(max_p2p) + " V)";
    out.push_back(std::move(c));
  }

  // OVER / UNDER: any sample outside the closed voltage band.
  {
    auto violations =
        grid::band_violations(trace, initial.nominal_voltage_v, initial.tolerance);
    int over = 0, under = 0;
    std::string over_first, under_first;
    for (const auto& v : violations) {
      if (v.kind == grid::BandKind::over) {
        if (over == 0)
          over_first = "bus " + v.bus + " at " + fmt(v.voltage_v) + " V";
        ++over;
      } else {
        if (under == 0)
          under_first = "bus " + v.bus + " at " + fmt(v.voltage_v) + " V";
        ++under;
      }
    }
    out.push_back({"OVER", over > 0,
                   over > 0 ? std::to_string(over) + " samples, first " + over_first
                            : "no over-voltage sample"});
    out.push_back({"UNDER", under > 0,
                   under > 0 ? std::to_string(under) + " samples, first " + under_first
                             : "no under-voltage sample"});
  }

  // STABLE: post-transient per-step voltage change below the threshold.
  {
    double max_dv = 0.0;
    const double eps = trace.dt_s * 1e-9;
    for (size_t k = 1; k < trace.steps.size(); ++k) {
      if (trace.steps[k].t_s + eps < win_start) continue;
      for (size_t i = 0; i < trace.bus_ids.size(); ++i)
        max_dv = std::max(max_dv, std::abs(trace.steps[k].v_mag_v[i] -
                                           trace.steps[k - 1].v_mag_v[i]));
    }
    out.push_back({"STABLE", max_dv < options.stable_delta_v,
                   "post-transient max per-step delta-V " + fmt(max_dv) + " V"});
  }
  return out;
}

std::set<std::string> hazard_flags(
    const std::vector<CriterionOutcome>& criteria) {
  std::set<std::string> hazards;
  for (const auto& c : criteria) {
    if (!c.pass) continue;
    if (c.id == "OSC") hazards.insert("H3");
    if (c.id == "OVER") hazards.insert("H1");
    if (c.id == "UNDER") hazards.insert("H2");
  }
  return hazards;
}

std::set<std::string> loss_flags(const model::ModelBundle& bundle,
                                 const std::set<std::string>& hazards) {
  std::set<std::string> losses;
  for (const auto& id : hazards) {
    if (const auto* h = bundle.find_hazard(id))
      losses.insert(h->leads_to.begin(), h->leads_to.end());
  }
  return losses;
}

ResultSet execute(const model::ModelBundle& bundle,
                  const model::ExperimentSpecification& es,
                  const RunnerOptions& options) {
  const auto start_time = std::chrono::steady_clock::now();

  const auto* ts = bundle.find_testspec(es.from_test);
  if (!ts)
    throw std::invalid_argument("experiment " + es.id +
                                " realizes unknown testspec " + es.from_test);

  // The runner realizes three controllable roles: a feedback delay
  // (d or d_<link>), the attacked target bus, and the attacked count n.
  std::string delay_param, target_param, count_param;
  for (const auto& p : ts->controllable) {
    if (is_delay_name(p.name)) {
      if (!delay_param.empty())
        throw std::invalid_argument(
            "testspec " + ts->id + " declares more than one delay parameter");
      delay_param = p.name;
    } else if (p.name == "target") {
      target_param = p.name;
    } else if (p.name == "n") {
      count_param = p.name;
    } else {
      throw std::invalid_argument("controllable parameter " + p.name +
                                  " is not supported by the runner "
                                  "(expected d, d_<link>, target or n)");
    }
  }

  std::vector<RunPoint> points = expand_sweep(es, *ts);

  // Feeder paths resolve relative to the file the experiment came from.
  std::filesystem::path feeder_path = es.feeder_path;
  if (feeder_path.is_relative()) {
    SourcePos pos = bundle.position_of("experiment", es.id);
    if (!pos.file.empty())
      feeder_path = std::filesystem::path(pos.file).parent_path() / feeder_path;
  }
  const std::string feeder_file = feeder_path.string();
  {
    std::ifstream probe(feeder_file);
    if (!probe) throw FeederLoadError(feeder_file, "cannot read file");
  }
  grid::FeederModel feeder = dsl::parse_feeder_file(feeder_file);

  std::optional<grid::DroopShape> droop_override;
  if (!es.droop.name.empty()) {
    auto shape = feeder.find_shape(es.droop.name);
    if (!shape)
      throw std::invalid_argument("experiment droop curve " + es.droop.name +
                                  " is not declared in " + feeder_file);
    droop_override = *shape;
  } else if (!es.droop.inline_breakpoints.empty()) {
    const auto& b = es.droop.inline_breakpoints;
    droop_override = grid::DroopShape{b[0], b[1], b[2], b[3]};
  }

  grid::RadialSolver solver(feeder);
  grid::PowerFlowResult baseline = grid::solve_power_flow(feeder);

  ResultSet results;
  results.experiment_id = es.id;

  for (const auto& point : points) {
    RunResult rr;
    rr.point = point;
    rr.verdict.run_index = point.index;
    try {
      double d = ts->initial.initial_delay_s;
      if (!delay_param.empty()) {
        const std::string& token = *point.value_of(delay_param);
        if (!parse_double(token, d) || d < 0.0)
          throw RunFailure("delay value '" + token + "' is not a valid delay");
      }
      int n = 1;
      if (!count_param.empty()) {
        const std::string& token = *point.value_of(count_param);
        if (!parse_int(token, n) || n < 1)
          throw RunFailure("n value '" + token + "' is not a positive integer");
      }
      if (feeder.bems.empty())
        throw RunFailure("feeder " + feeder_file + " has no BEMS to attack");
      std::string target = target_param.empty()
                               ? feeder.bems.front().bus
                               : *point.value_of(target_param);
      const auto* target_bems = feeder.find_bems(target);
      if (!target_bems)
        throw RunFailure("target " + target + " is not a BEMS bus");

      // The n attacked BEMS nearest the target by electrical distance,
      // ties broken by bus id.
      std::vector<std::pair<double, std::string>> ranked;
      for (const auto& b : feeder.bems)
        ranked.emplace_back(solver.path_impedance(b.bus, target).magnitude,
                            b.bus);
      std::sort(ranked.begin(), ranked.end());
      const size_t attacked = std::min<size_t>(ranked.size(),
                                               static_cast<size_t>(n));

      grid::SimConfig config;
      config.feeder = feeder;
      config.dt_s = es.dt_s;
      config.duration_s = es.duration_s;
      config.nominal_voltage_v = ts->initial.nominal_voltage_v;
      config.droop_override = droop_override;
      for (const auto& b : feeder.bems)
        config.bems_delay_s[b.bus] = ts->initial.initial_delay_s;
      for (size_t k = 0; k < attacked; ++k)
        config.bems_delay_s[ranked[k].second] = d;

      if (baseline.converged) {
        double v_pu = baseline.v_mag(static_cast<size_t>(
                          solver.node_index(target))) /
                      ts->initial.nominal_voltage_v;
        grid::DroopShape shape =
            droop_override ? *droop_override
                           : *feeder.find_shape(target_bems->droop);
        auto [dp, dq] = perturbation_deltas(
            v_pu, shape, solver.path_impedance(feeder.slack_id, target),
            ts->initial.nominal_voltage_v);
        config.load_steps.push_back({target, 0.25 * es.duration_s, dp, dq});
      }

      rr.trace = grid::run(config);

      auto [win_start, win_end] = detection_window(rr.trace, options);
      const double amp_threshold = options.oscillation_amplitude_frac *
                                   ts->initial.nominal_voltage_v;
      for (const auto& bus : rr.trace.bus_ids)
        rr.oscillations.push_back(grid::detect_oscillation(
            rr.trace, bus, win_start, win_end, amp_threshold,
            options.oscillation_reversal_threshold));
      rr.violations = grid::band_violations(
          rr.trace, ts->initial.nominal_voltage_v, ts->initial.tolerance);

      rr.verdict.criteria = evaluate_criteria(rr.trace, ts->initial, options);
      rr.verdict.hazards = hazard_flags(rr.verdict.criteria);
      rr.verdict.losses = loss_flags(bundle, rr.verdict.hazards);
      rr.verdict.converged = true;
    } catch (const grid::NonConvergenceError& e) {
      rr.verdict.converged = false;
      rr.verdict.failure = e.what();
    } catch (const RunFailure& e) {
      rr.verdict.converged = false;
      rr.verdict.failure = e.what();
    } catch (const std::invalid_argument& e) {
      rr.verdict.converged = false;
      rr.verdict.failure = e.what();
    }
    results.runs.push_back(std::move(rr));
  }

  results.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                    start_time)
          .count();
  return results;
}

namespace {

std::string join_set(const std::set<std::string>& ids) {
  std::string out;
  for (const auto& id : ids) {
    if (!out.empty()) out += ";";
    out += id;
  }
  return out;
}

std::string binding_cell(const RunPoint& point, const char* role) {
  for (const auto& [name, value] : point.bindings) {
    if (role == std::string("d") ? is_delay_name(name) : name == role)
      return value;
  }
  return "";
}

const CriterionOutcome* find_criterion(const Verdict& v, std::string_view id) {
  for (const auto& c : v.criteria)
    if (c.id == id) return &c;
  return nullptr;
}

} // namespace

void emit_csv(const ResultSet& results, std::ostream& out) {
  out << "run,d,target,n,osc_any,max_p2p_V,over_cnt,under_cnt,hazards,losses,"
         "converged\n";
  for (const auto& rr : results.runs) {
    out << rr.point.index << "," << binding_cell(rr.point, "d") << ","
        << binding_cell(rr.point, "target") << ","
        << binding_cell(rr.point, "n") << ",";
    if (rr.verdict.converged) {
      const auto* osc = find_criterion(rr.verdict, "OSC");
      double max_p2p = 0.0;
      for (const auto& m : rr.oscillations)
        max_p2p = std::max(max_p2p, m.peak_to_peak_v);
      int over = 0, under = 0;
      for (const auto& v : rr.violations)
        (v.kind == grid::BandKind::over ? over : under)++;
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.6f", max_p2p);
      out << (osc && osc->pass ? "true" : "false") << "," << buf << ","
          << over << "," << under << ",";
    } else {
      out << ",,,,";
    }
    out << join_set(rr.verdict.hazards) << "," << join_set(rr.verdict.losses)
        << "," << (rr.verdict.converged ? "true" : "false") << "\n";
  }
}

void emit_report(const model::ModelBundle& bundle, const ResultSet& results,
                 std::ostream& out) {
  const auto* es = bundle.find_experiment(results.experiment_id);
  const auto* ts = es ? bundle.find_testspec(es->from_test) : nullptr;

  out << "experiment " << results.experiment_id << "\n";
  if (ts) {
    out << "realizes " << ts->id << ": " << ts->title << "\n";
    if (!ts->rationale.empty()) out << "rationale: " << ts->rationale << "\n";
    for (const auto& m : ts->target_measures)
      out << "target measure: " << m << "\n";
    out << "controllable:";
    for (const auto& p : ts->controllable) {
      out << " " << p.name << " [";
      for (size_t k = 0; k < p.values.size(); ++k)
        out << (k ? ", " : "") << p.values[k];
      out << "]";
      if (!p.unit.empty()) out << " " << p.unit;
      out << ";";
    }
    out << "\n";
    for (const auto& u : ts->uncontrollable) out << "fixed: " << u << "\n";
    for (const auto& m : ts->measured) out << "measured: " << m << "\n";
    out << "initial state: nominal " << fmt(ts->initial.nominal_voltage_v)
        << " V, tolerance " << fmt(ts->initial.tolerance) << ", delay "
        << fmt(ts->initial.initial_delay_s) << " s\n";
    if (bundle.find_scenario(ts->from_scenario)) {
      out << "\n";
      out << trace::render_trace_text(
          trace::scenario_trace(bundle, ts->from_scenario));
    }
  }

  out << "\nruns:\n";
  int failed = 0;
  for (const auto& rr : results.runs) {
    out << "  run " << rr.point.index;
    for (const auto& [name, value] : rr.point.bindings)
      out << " " << name << "=" << value;
    if (!rr.verdict.converged) {
      out << " -> FAILED: " << rr.verdict.failure << "\n";
      ++failed;
      continue;
    }
    out << " ->";
    for (const auto& c : rr.verdict.criteria)
      out << " " << c.id << (c.pass ? "+" : "-");
    out << " hazards: "
        << (rr.verdict.hazards.empty() ? "-" : join_set(rr.verdict.hazards));
    out << " losses: "
        << (rr.verdict.losses.empty() ? "-" : join_set(rr.verdict.losses));
    out << "\n";
    for (const auto& c : rr.verdict.criteria)
      out << "    " << c.id << ": " << c.evidence << "\n";
  }
  out << "\nsummary: " << results.runs.size() << " runs, " << failed
      << " failed\n";
}

} // namespace hazsim::runner
