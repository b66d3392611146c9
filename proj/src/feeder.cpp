#include "hazsim/feeder.hpp"

#include <map>
#include <set>

namespace hazsim::grid {

DroopShape default_droop_shape() { return DroopShape{0.92, 0.98, 1.02, 1.08}; }

std::vector<std::string> FeederModel::node_ids() const {
  std::vector<std::string> ids;
  ids.reserve(buses.size() + 1);
  ids.push_back(slack_id);
  for (const auto& b : buses) ids.push_back(b.id);
  return ids;
}

bool FeederModel::has_node(std::string_view id) const {
  if (slack_id == id) return true;
  for (const auto& b : buses)
    if (b.id == id) return true;
  return false;
}

std::optional<DroopShape> FeederModel::find_shape(std::string_view name) const {
  for (const auto& c : curves)
    if (c.name == name) return c.shape;
  if (name == "default") return default_droop_shape();
  return std::nullopt;
}

const BemsUnit* FeederModel::find_bems(std::string_view bus) const {
  for (const auto& b : bems)
    if (b.bus == bus) return &b;
  return nullptr;
}

TopologyError::TopologyError(std::string kind, std::string detail,
                             SourcePos pos)
    : std::runtime_error(detail.empty() ? kind : kind + ": " + detail),
      kind_(std::move(kind)),
      pos_(std::move(pos)) {}

void validate_feeder(const FeederModel& feeder) {
  if (feeder.slack_id.empty())
    throw TopologyError("disconnected bus", "no slack bus declared");

  std::map<std::string, int> index; // node id -> index, slack = 0
  index[feeder.slack_id] = 0;
  for (const auto& b : feeder.buses) {
    if (index.count(b.id))
      throw TopologyError("not a tree", "bus " + b.id + " declared twice");
    index[b.id] = static_cast<int>(index.size());
  }

  const int n = static_cast<int>(index.size());
  std::vector<std::vector<int>> adjacency(n);
  for (const auto& line : feeder.lines) {
    auto from = index.find(line.from);
    if (from == index.end())
      throw TopologyError("disconnected bus",
                          "line endpoint " + line.from + " is not declared");
    auto to = index.find(line.to);
    if (to == index.end())
      throw TopologyError("disconnected bus",
                          "line endpoint " + line.to + " is not declared");
    adjacency[from->second].push_back(to->second);
    adjacency[to->second].push_back(from->second);
  }

  // A connected graph with |edges| == |nodes| - 1 is a tree.
  if (static_cast<int>(feeder.lines.size()) != n - 1)
    throw TopologyError("not a tree",
                        std::to_string(feeder.lines.size()) + " lines over " +
                            std::to_string(n) + " buses");

  std::vector<bool> seen(n, false);
  std::vector<int> frontier{0};
  seen[0] = true;
  while (!frontier.empty()) {
    int node = frontier.back();
    frontier.pop_back();
    for (int next : adjacency[node]) {
      if (!seen[next]) {
        seen[next] = true;
        frontier.push_back(next);
      }
    }
  }
  for (const auto& [id, i] : index) {
    if (!seen[i])
      throw TopologyError("disconnected bus",
                          id + " is not reachable from the slack bus");
  }

  std::set<std::string> bems_buses;
  for (const auto& b : feeder.bems) {
    if (!index.count(b.bus))
      throw TopologyError("disconnected bus",
                          "bems bus " + b.bus + " is not declared");
    if (!bems_buses.insert(b.bus).second)
      throw TopologyError("not a tree", "two bems units on bus " + b.bus);
    if (!(b.q_max_var > 0.0))
      throw std::invalid_argument("bems " + b.bus + " q_max must be > 0");
    if (!feeder.find_shape(b.droop))
      throw std::invalid_argument("bems " + b.bus + " references unknown droop curve " + b.droop);
  }

  for (const auto& line : feeder.lines) {
    if (line.r_ohm < 0.0 || line.x_ohm < 0.0 ||
        (line.r_ohm == 0.0 && line.x_ohm == 0.0))
      throw std::invalid_argument("line " + line.from + " " + line.to +
                                  " must have r >= 0, x >= 0, not both zero");
  }
  for (const auto& c : feeder.curves) {
    if (!c.shape.monotone())
      throw std::invalid_argument("droop " + c.name +
                                  " breakpoints must be non-decreasing");
  }
}

} // namespace hazsim::grid
