#include "hazsim/model.hpp"

#include <algorithm>
#include <cctype>

namespace hazsim {

std::string SourcePos::str() const {
  if (!known()) return file.empty() ? std::string("<unknown>") : file;
  return file + ":" + std::to_string(line) + ":" + std::to_string(column);
}

} // namespace hazsim

namespace hazsim::model {

std::string_view guideword_name(Guideword g) {
  switch (g) {
    case Guideword::any_time:    return "any_time";
    case Guideword::too_early:   return "too_early";
    case Guideword::too_late:    return "too_late";
    case Guideword::not_applied: return "not_applied";
  }
  return "any_time";
}

std::optional<Guideword> guideword_from(std::string_view name) {
  if (name == "any_time") return Guideword::any_time;
  if (name == "too_early") return Guideword::too_early;
  if (name == "too_late") return Guideword::too_late;
  if (name == "not_applied") return Guideword::not_applied;
  return std::nullopt;
}

std::string_view security_class_name(SecurityClass c) {
  switch (c) {
    case SecurityClass::availability:    return "availability";
    case SecurityClass::integrity:       return "integrity";
    case SecurityClass::confidentiality: return "confidentiality";
  }
  return "availability";
}

std::optional<SecurityClass> security_class_from(std::string_view name) {
  if (name == "availability") return SecurityClass::availability;
  if (name == "integrity") return SecurityClass::integrity;
  if (name == "confidentiality") return SecurityClass::confidentiality;
  return std::nullopt;
}

const Parameter* TestSpecification::find_controllable(
    std::string_view name) const {
  for (const auto& p : controllable)
    if (p.name == name) return &p;
  return nullptr;
}

const Parameter* ExperimentSpecification::find_binding(
    std::string_view name) const {
  for (const auto& p : bindings)
    if (p.name == name) return &p;
  return nullptr;
}

DuplicateIdError::DuplicateIdError(std::string id, std::string kind,
                                   SourcePos pos)
    : std::runtime_error("duplicate " + kind + " id " + id),
      id_(std::move(id)),
      kind_(std::move(kind)),
      pos_(std::move(pos)) {}

void DuplicateIdError::set_pos(const SourcePos& pos) { pos_ = pos; }

namespace {

template <class T>
const T* find_by_id(const std::vector<T>& items, std::string_view id) {
  for (const auto& item : items)
    if (item.id == id) return &item;
  return nullptr;
}

template <class T>
struct KindName;
template <> struct KindName<Loss> { static constexpr const char* value = "loss"; };
template <> struct KindName<Hazard> { static constexpr const char* value = "hazard"; };
template <> struct KindName<Constraint> { static constexpr const char* value = "constraint"; };
template <> struct KindName<ControlLoop> { static constexpr const char* value = "controlloop"; };
template <> struct KindName<HazardousControlAction> { static constexpr const char* value = "hca"; };
template <> struct KindName<CausalFactor> { static constexpr const char* value = "factor"; };
template <> struct KindName<Component> { static constexpr const char* value = "component"; };
template <> struct KindName<SecurityThreat> { static constexpr const char* value = "threat"; };
template <> struct KindName<HazardScenario> { static constexpr const char* value = "scenario"; };
template <> struct KindName<TestSpecification> { static constexpr const char* value = "testspec"; };
template <> struct KindName<ExperimentSpecification> { static constexpr const char* value = "experiment"; };

template <class T>
std::vector<T>& slot(ModelBundle& b);
template <> std::vector<Loss>& slot(ModelBundle& b) { return b.losses; }
template <> std::vector<Hazard>& slot(ModelBundle& b) { return b.hazards; }
template <> std::vector<Constraint>& slot(ModelBundle& b) { return b.constraints; }
template <> std::vector<ControlLoop>& slot(ModelBundle& b) { return b.loops; }
template <> std::vector<HazardousControlAction>& slot(ModelBundle& b) { return b.hcas; }
template <> std::vector<CausalFactor>& slot(ModelBundle& b) { return b.factors; }
template <> std::vector<Component>& slot(ModelBundle& b) { return b.components; }
template <> std::vector<SecurityThreat>& slot(ModelBundle& b) { return b.threats; }
template <> std::vector<HazardScenario>& slot(ModelBundle& b) { return b.scenarios; }
template <> std::vector<TestSpecification>& slot(ModelBundle& b) { return b.testspecs; }
template <> std::vector<ExperimentSpecification>& slot(ModelBundle& b) { return b.experiments; }

} // namespace

template <class T>
void ModelBundle::add(T item, const SourcePos& pos) {
  const char* kind = KindName<T>::value;
  if (item.id.empty())
    throw std::invalid_argument(std::string(kind) + " id must be non-empty");
  auto& items = slot<T>(*this);
  if (find_by_id(items, item.id))
    throw DuplicateIdError(item.id, kind, pos);
  if (pos.known()) positions[std::string(kind) + " " + item.id] = pos;
  items.push_back(std::move(item));
}

template void ModelBundle::add(Loss, const SourcePos&);
template void ModelBundle::add(Hazard, const SourcePos&);
template void ModelBundle::add(Constraint, const SourcePos&);
template void ModelBundle::add(ControlLoop, const SourcePos&);
template void ModelBundle::add(HazardousControlAction, const SourcePos&);
template void ModelBundle::add(CausalFactor, const SourcePos&);
template void ModelBundle::add(Component, const SourcePos&);
template void ModelBundle::add(SecurityThreat, const SourcePos&);
template void ModelBundle::add(HazardScenario, const SourcePos&);
template void ModelBundle::add(TestSpecification, const SourcePos&);
template void ModelBundle::add(ExperimentSpecification, const SourcePos&);

const Loss* ModelBundle::find_loss(std::string_view id) const { return find_by_id(losses, id); }
const Hazard* ModelBundle::find_hazard(std::string_view id) const { return find_by_id(hazards, id); }
const Constraint* ModelBundle::find_constraint(std::string_view id) const { return find_by_id(constraints, id); }
const ControlLoop* ModelBundle::find_loop(std::string_view id) const { return find_by_id(loops, id); }
const HazardousControlAction* ModelBundle::find_hca(std::string_view id) const { return find_by_id(hcas, id); }
const CausalFactor* ModelBundle::find_factor(std::string_view id) const { return find_by_id(factors, id); }
const Component* ModelBundle::find_component(std::string_view id) const { return find_by_id(components, id); }
const SecurityThreat* ModelBundle::find_threat(std::string_view id) const { return find_by_id(threats, id); }
const HazardScenario* ModelBundle::find_scenario(std::string_view id) const { return find_by_id(scenarios, id); }
const TestSpecification* ModelBundle::find_testspec(std::string_view id) const { return find_by_id(testspecs, id); }
const ExperimentSpecification* ModelBundle::find_experiment(std::string_view id) const { return find_by_id(experiments, id); }

const ControlAction* ModelBundle::find_action(std::string_view name) const {
  for (const auto& loop : loops)
    for (const auto& action : loop.actions)
      if (action.name == name) return &action;
  return nullptr;
}

const Link* ModelBundle::find_link(std::string_view id) const {
  for (const auto& loop : loops)
    for (const auto& link : loop.links)
      if (link.id == id) return &link;
  return nullptr;
}

bool ModelBundle::is_loop_node(std::string_view name) const {
  for (const auto& loop : loops)
    for (const auto& node : loop.node_names())
      if (node == name) return true;
  return false;
}

std::optional<std::string> ModelBundle::kind_of(std::string_view id) const {
  if (find_loss(id)) return "loss";
  if (find_hazard(id)) return "hazard";
  if (find_constraint(id)) return "constraint";
  if (find_loop(id)) return "controlloop";
  if (find_hca(id)) return "hca";
  if (find_factor(id)) return "factor";
  if (find_component(id)) return "component";
  if (find_threat(id)) return "threat";
  if (find_scenario(id)) return "scenario";
  if (find_testspec(id)) return "testspec";
  if (find_experiment(id)) return "experiment";
  return std::nullopt;
}

SourcePos ModelBundle::position_of(std::string_view kind,
                                   std::string_view id) const {
  auto it = positions.find(std::string(kind) + " " + std::string(id));
  return it == positions.end() ? SourcePos{} : it->second;
}

bool ModelBundle::operator==(const ModelBundle& other) const {
  return losses == other.losses && hazards == other.hazards &&
         constraints == other.constraints && loops == other.loops &&
         hcas == other.hcas && factors == other.factors &&
         components == other.components && threats == other.threats &&
         scenarios == other.scenarios && testspecs == other.testspecs &&
         experiments == other.experiments;
}

const std::vector<SecurityThreat>& builtin_threats() {
  static const std::vector<SecurityThreat> threats = {
      {"CSTR-A-1", "Communication delay", SecurityClass::availability, {}},
      {"CSTR-A-2", "Communication drop", SecurityClass::availability, {}},
      {"CSTR-I-1", "Message modification", SecurityClass::integrity, {}},
  };
  return threats;
}

const SecurityThreat* resolve_threat(const ModelBundle& bundle,
                                     std::string_view id) {
  if (const auto* t = bundle.find_threat(id)) return t;
  for (const auto& t : builtin_threats())
    if (t.id == id) return &t;
  return nullptr;
}

Constraint constraint_from_hazard(const Hazard& h) {
  Constraint c;
  c.id = "C" + h.id.substr(1);
  c.negates = h.id;
  c.text = "The system shall not enter state: " + h.description;
  return c;
}

bool id_matches(std::string_view id, std::string_view prefix) {
  if (id.size() <= prefix.size() || id.substr(0, prefix.size()) != prefix)
    return false;
  return std::all_of(id.begin() + static_cast<long>(prefix.size()), id.end(),
                     [](unsigned char ch) { return std::isdigit(ch) != 0; });
}

} // namespace hazsim::model
