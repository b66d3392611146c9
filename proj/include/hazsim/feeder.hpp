#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hazsim/source.hpp"

namespace hazsim::grid {

/// Q(V) curve breakpoints in per-unit voltage, v1 <= v2 <= v3 <= v4.
/// Q = +q_max below v1, tapers to 0 at v2, stays 0 in the [v2, v3]
/// deadband, tapers to -q_max at v4 and saturates beyond it.
struct DroopShape {
  double v1 = 0.92;
  double v2 = 0.98;
  double v3 = 1.02;
  double v4 = 1.08;

  bool monotone() const { return v1 <= v2 && v2 <= v3 && v3 <= v4; }

  friend bool operator==(const DroopShape&, const DroopShape&) = default;
};

/// The curve a single inverter evaluates: a named shape scaled to its q_max.
struct DroopCurve {
  std::string name = "default";
  DroopShape shape;
  double q_max_var = 0.0; // positive = injection capability

  friend bool operator==(const DroopCurve&, const DroopCurve&) = default;
};

DroopShape default_droop_shape();

struct FeederBus {
  std::string id;
  double p_load_w = 0.0;   // negative = net generation at the bus
  double q_load_var = 0.0;

  friend bool operator==(const FeederBus&, const FeederBus&) = default;
};

struct FeederLine {
  std::string from;
  std::string to;
  double r_ohm = 0.0;
  double x_ohm = 0.0;

  friend bool operator==(const FeederLine&, const FeederLine&) = default;
};

struct BemsUnit {
  std::string bus;
  double q_max_var = 0.0;
  std::string droop = "default";

  friend bool operator==(const BemsUnit&, const BemsUnit&) = default;
};

struct DroopDecl {
  std::string name;
  DroopShape shape;

  friend bool operator==(const DroopDecl&, const DroopDecl&) = default;
};

/// Radial low-voltage network: one slack bus holding its voltage, load buses,
/// lines forming a tree, and BEMS inverters attached to buses.
struct FeederModel {
  std::string slack_id;
  double slack_voltage_v = 0.0;
  std::vector<FeederBus> buses;   // excludes the slack bus
  std::vector<FeederLine> lines;
  std::vector<BemsUnit> bems;
  std::vector<DroopDecl> curves;  // named shapes declared in the file

  /// All node ids, slack first, then buses in declaration order.
  std::vector<std::string> node_ids() const;

  bool has_node(std::string_view id) const;

  /// Named shape from the file, falling back to the built-in "default".
  std::optional<DroopShape> find_shape(std::string_view name) const;

  const BemsUnit* find_bems(std::string_view bus) const;

  friend bool operator==(const FeederModel&, const FeederModel&) = default;
};

/// Structural defect in a feeder description. kind is one of
/// "duplicate slack", "disconnected bus", "not a tree".
class TopologyError : public std::runtime_error {
 public:
  TopologyError(std::string kind, std::string detail, SourcePos pos = {});

  const std::string& kind() const { return kind_; }
  const SourcePos& pos() const { return pos_; }

 private:
  std::string kind_;
  SourcePos pos_;
};

/// Throws TopologyError unless the lines form a tree over the declared buses
/// rooted at the slack, every BEMS sits on a declared bus, and every BEMS
/// droop name resolves.
void validate_feeder(const FeederModel& feeder);

} // namespace hazsim::grid
