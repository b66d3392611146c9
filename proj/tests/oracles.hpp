#pragma once

// Reference implementations used only by tests. These stay independent of
// the library's solver code: an analytic two-bus solution found by
// bisection, an exact branch-current back-substitution power flow, a
// delayed scalar iteration map, and an alternating droop fixed point.

#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "hazsim/feeder.hpp"

namespace oracle {

/// |V1| of a two-bus feeder: the high-voltage root of
/// v^4 - v^2 (v0^2 - 2(rP + xQ)) + (r^2 + x^2)(P^2 + Q^2) = 0
/// by bisection on u = v^2. P, Q are net consumption at the receiving bus.
/// Returns -1 when the loading is infeasible.
inline double two_bus_voltage(double v0, double r, double x, double p,
                              double q) {
  const double a = v0 * v0 - 2.0 * (r * p + x * q);
  const double b = (r * r + x * x) * (p * p + q * q);
  if (!(a > 0.0)) return -1.0;
  auto f = [&](double u) { return u * u - a * u + b; };
  double lo = a / 2.0;
  double hi = a;
  if (f(lo) > 0.0) return -1.0; // discriminant negative: no real solution
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (f(mid) <= 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return std::sqrt(0.5 * (lo + hi));
}

/// Voltage magnitudes per node id from repeated exact branch-current
/// back-substitution, run to `tol` volts. `consumption` maps bus id to the
/// net complex power drawn there. Returns an empty map when it fails to
/// settle within max_iter rounds.
inline std::map<std::string, double> backsub_power_flow(
    const hazsim::grid::FeederModel& feeder,
    const std::map<std::string, std::complex<double>>& consumption,
    double tol = 1e-12, int max_iter = 20000) {
  using C = std::complex<double>;

  std::map<std::string, std::vector<std::pair<std::string, C>>> neighbours;
  for (const auto& line : feeder.lines) {
    C z{line.r_ohm, line.x_ohm};
    neighbours[line.from].push_back({line.to, z});
    neighbours[line.to].push_back({line.from, z});
  }

  std::map<std::string, std::vector<std::string>> children;
  std::map<std::string, C> z_up;
  std::vector<std::string> stack{feeder.slack_id};
  std::map<std::string, bool> visited{{feeder.slack_id, true}};
  while (!stack.empty()) {
    std::string node = stack.back();
    stack.pop_back();
    for (const auto& [next, z] : neighbours[node]) {
      if (visited[next]) continue;
      visited[next] = true;
      children[node].push_back(next);
      z_up[next] = z;
      stack.push_back(next);
    }
  }

  std::map<std::string, C> v;
  v[feeder.slack_id] = {feeder.slack_voltage_v, 0.0};
  for (const auto& bus : feeder.buses) v[bus.id] = v[feeder.slack_id];

  std::function<C(const std::string&)> subtree_current =
      [&](const std::string& node) -> C {
    C total =
        consumption.count(node)
            ? std::conj(consumption.at(node) / v[node])
            : C{0.0, 0.0};
    for (const auto& child : children[node]) total += subtree_current(child);
    return total;
  };

  std::function<void(const std::string&)> push_down =
      [&](const std::string& node) {
        for (const auto& child : children[node]) {
          v[child] = v[node] - z_up[child] * subtree_current(child);
          push_down(child);
        }
      };

  for (int it = 0; it < max_iter; ++it) {
    std::map<std::string, C> before = v;
    push_down(feeder.slack_id);
    double delta = 0.0;
    for (const auto& [id, value] : v)
      delta = std::max(delta, std::abs(std::abs(value) - std::abs(before[id])));
    if (!std::isfinite(delta)) return {};
    if (delta < tol) {
      std::map<std::string, double> mags;
      for (const auto& [id, value] : v) mags[id] = std::abs(value);
      return mags;
    }
  }
  return {};
}

/// Independent piecewise-linear droop evaluation.
inline double droop_q_ref(double v_pu, double v1, double v2, double v3,
                          double v4, double q_max) {
  if (v_pu <= v1) return q_max;
  if (v_pu < v2) return q_max * (v2 - v_pu) / (v2 - v1);
  if (v_pu <= v3) return 0.0;
  if (v_pu < v4) return -q_max * (v_pu - v3) / (v4 - v3);
  return -q_max;
}

struct ScalarMapResult {
  std::vector<double> v;
  double peak_to_peak = 0.0;
  int reversals = 0;
  bool oscillating = false;
  bool converged = false;
};

/// Delayed scalar iteration v_{k+1} = g(v_{k-m}) on a two-bus feeder with a
/// droop-controlled BEMS at the load bus, analysed over the trailing half.
inline ScalarMapResult delayed_scalar_map(double v0, double r, double x,
                                          double p_load, double q_load,
                                          double v1, double v2, double v3,
                                          double v4, double q_max,
                                          double nominal, int m, int steps,
                                          double amplitude_threshold,
                                          int reversal_threshold) {
  ScalarMapResult result;
  result.v.push_back(two_bus_voltage(v0, r, x, p_load, q_load));
  for (int k = 1; k <= steps; ++k) {
    double reading = result.v[static_cast<size_t>(std::max(0, k - 1 - m))];
    double q_inj =
        droop_q_ref(reading / nominal, v1, v2, v3, v4, q_max);
    result.v.push_back(
        two_bus_voltage(v0, r, x, p_load, q_load - q_inj));
  }

  const size_t start = result.v.size() / 2;
  double lo = result.v[start], hi = result.v[start];
  double max_step = 0.0;
  int prev_sign = 0;
  for (size_t k = start; k < result.v.size(); ++k) {
    lo = std::min(lo, result.v[k]);
    hi = std::max(hi, result.v[k]);
    if (k > start) {
      double diff = result.v[k] - result.v[k - 1];
      max_step = std::max(max_step, std::abs(diff));
      int sign = diff > 0.0 ? 1 : diff < 0.0 ? -1 : 0;
      if (sign != 0) {
        if (prev_sign != 0 && sign != prev_sign) ++result.reversals;
        prev_sign = sign;
      }
    }
  }
  result.peak_to_peak = hi - lo;
  result.oscillating = result.peak_to_peak > amplitude_threshold &&
                       result.reversals >= reversal_threshold;
  result.converged = max_step < 1e-9;
  return result;
}

/// Fixed point of the alternating power-flow / droop iteration. Every BEMS
/// uses the shape `override` when given, otherwise its curve from the feeder.
inline std::map<std::string, double> droop_fixed_point(
    const hazsim::grid::FeederModel& feeder, double nominal,
    const hazsim::grid::DroopShape* override = nullptr, int rounds = 10000) {
  std::map<std::string, std::complex<double>> consumption;
  for (const auto& bus : feeder.buses)
    consumption[bus.id] = {bus.p_load_w, bus.q_load_var};

  std::map<std::string, double> q;
  for (const auto& bems : feeder.bems) q[bems.bus] = 0.0;

  std::map<std::string, double> v;
  for (int it = 0; it < rounds; ++it) {
    auto adjusted = consumption;
    for (const auto& [bus, q_inj] : q)
      adjusted[bus] -= std::complex<double>{0.0, q_inj};
    v = backsub_power_flow(feeder, adjusted);
    if (v.empty()) return {};
    double delta = 0.0;
    for (const auto& bems : feeder.bems) {
      hazsim::grid::DroopShape shape =
          override ? *override : *feeder.find_shape(bems.droop);
      double q_new = droop_q_ref(v[bems.bus] / nominal, shape.v1, shape.v2,
                                 shape.v3, shape.v4, bems.q_max_var);
      delta = std::max(delta, std::abs(q_new - q[bems.bus]));
      q[bems.bus] = q_new;
    }
    if (delta < 1e-10) return v;
  }
  return {};
}

/// Random 2-4 bus radial tree with moderate loads and impedances.
inline hazsim::grid::FeederModel random_tree_feeder(std::mt19937& rng) {
  hazsim::grid::FeederModel feeder;
  feeder.slack_id = "B0";
  feeder.slack_voltage_v = 230.0;

  std::uniform_int_distribution<int> bus_count(1, 3);
  std::uniform_real_distribution<double> impedance(0.05, 0.8);
  std::uniform_real_distribution<double> load_p(0.0, 3000.0);
  std::uniform_real_distribution<double> load_q(-500.0, 1500.0);

  int n = bus_count(rng);
  for (int i = 1; i <= n; ++i) {
    std::string id = "B" + std::to_string(i);
    feeder.buses.push_back({id, load_p(rng), load_q(rng)});
    std::uniform_int_distribution<int> parent_pick(0, i - 1);
    std::string parent = "B" + std::to_string(parent_pick(rng));
    feeder.lines.push_back({parent, id, impedance(rng), impedance(rng)});
  }
  return feeder;
}

} // namespace oracle
