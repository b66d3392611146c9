#include <cstdio>
#include <sstream>

#include "hazsim/dsl.hpp"

namespace hazsim::dsl {

std::string format_number(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", value);
  return buf;
}

namespace {

std::string quoted(const std::string& text) {
  std::string out = "\"";
  for (char c : text) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

bool bare_safe(const std::string& text) {
  if (text.empty()) return false;
  for (char c : text) {
    switch (c) {
      case ' ': case '\t': case '\r': case '\n':
      case '#': case '"': case '{': case '}':
      case '[': case ']': case ',':
        return false;
      default:
        break;
    }
  }
  return true;
}

void append_ids(std::ostringstream& out, const std::vector<std::string>& ids) {
  for (const auto& id : ids) out << " " << id;
}

void append_value_list(std::ostringstream& out, const char* clause,
                       const model::Parameter& p) {
  out << "  " << clause << " " << p.name << " [";
  for (size_t k = 0; k < p.values.size(); ++k) {
    if (k) out << ", ";
    out << p.values[k];
  }
  out << "]";
  if (!p.unit.empty()) out << " " << p.unit;
  out << "\n";
}

void append_testspec(std::ostringstream& out,
                     const model::TestSpecification& ts) {
  out << "testspec " << ts.id << " {\n";
  out << "  from " << ts.from_scenario << "\n";
  out << "  title " << quoted(ts.title) << "\n";
  if (!ts.rationale.empty())
    out << "  rationale " << quoted(ts.rationale) << "\n";
  for (const auto& m : ts.target_measures)
    out << "  measure " << quoted(m) << "\n";
  for (const auto& p : ts.controllable) append_value_list(out, "vary", p);
  for (const auto& u : ts.uncontrollable)
    out << "  fixed " << quoted(u) << "\n";
  for (const auto& m : ts.measured) out << "  measured " << quoted(m) << "\n";
  out << "  initial nominal " << format_number(ts.initial.nominal_voltage_v)
      << " tolerance " << format_number(ts.initial.tolerance) << " delay "
      << format_number(ts.initial.initial_delay_s) << "\n";
  if (!ts.uncertainty_sources.empty()) {
    out << "  uncertainty";
    append_ids(out, ts.uncertainty_sources);
    out << "\n";
  }
  out << "}\n";
}

} // namespace

std::string serialize(const model::TestSpecification& ts) {
  std::ostringstream out;
  append_testspec(out, ts);
  return out.str();
}

std::string serialize(const model::ModelBundle& bundle) {
  std::ostringstream out;
  for (const auto& l : bundle.losses)
    out << "loss " << l.id << " " << quoted(l.description) << "\n";
  for (const auto& h : bundle.hazards) {
    out << "hazard " << h.id << " " << quoted(h.description) << " ->";
    append_ids(out, h.leads_to);
    out << "\n";
  }
  for (const auto& c : bundle.constraints)
    out << "constraint " << c.id << " negates " << c.negates << " "
        << quoted(c.text) << "\n";
  for (const auto& loop : bundle.loops) {
    out << "controlloop " << loop.id << " {\n";
    out << "  controller " << loop.controller << "\n";
    out << "  actuator " << loop.actuator << "\n";
    out << "  sensor " << loop.sensor << "\n";
    out << "  process " << loop.process << "\n";
    for (const auto& a : loop.actions) {
      out << "  action " << a.name << " levels";
      append_ids(out, a.levels);
      out << "\n";
    }
    for (const auto& l : loop.links)
      out << "  link " << l.id << " from " << l.from << " to " << l.to
          << " kind "
          << (l.kind == model::LinkKind::command ? "command" : "feedback")
          << "\n";
    out << "}\n";
  }
  for (const auto& h : bundle.hcas) {
    out << "hca " << h.id << " action " << h.action << "." << h.level
        << " when " << model::guideword_name(h.when) << " causes " << h.causes;
    if (h.qualified) out << " qualified";
    out << "\n";
  }
  for (const auto& f : bundle.factors)
    out << "factor " << f.id << " " << quoted(f.description) << " at " << f.at
        << "\n";
  for (const auto& c : bundle.components) {
    out << "component " << c.id << " "
        << (c.kind == model::ComponentKind::device ? "device" : "network")
        << " realizes";
    append_ids(out, c.realizes);
    out << "\n";
  }
  for (const auto& t : bundle.threats) {
    out << "threat " << t.id << " " << model::security_class_name(t.cls) << " "
        << quoted(t.description);
    if (!t.applies_to.empty()) {
      out << " applies";
      append_ids(out, t.applies_to);
    }
    out << "\n";
  }
  for (const auto& s : bundle.scenarios) {
    out << "scenario " << s.id << " {\n";
    if (!s.title.empty()) out << "  title " << quoted(s.title) << "\n";
    auto list = [&](const char* kw, const std::vector<std::string>& ids) {
      if (ids.empty()) return;
      out << "  " << kw;
      append_ids(out, ids);
      out << "\n";
    };
    list("hazards", s.hazards);
    list("losses", s.losses);
    list("hcas", s.hcas);
    list("factors", s.factors);
    list("components", s.components);
    list("threats", s.threats);
    if (!s.safety_constraint.empty())
      out << "  safety " << quoted(s.safety_constraint) << "\n";
    out << "}\n";
  }
  for (const auto& ts : bundle.testspecs) append_testspec(out, ts);
  for (const auto& es : bundle.experiments) {
    out << "experiment " << es.id << " {\n";
    out << "  from " << es.from_test << "\n";
    out << "  feeder "
        << (bare_safe(es.feeder_path) ? es.feeder_path
                                      : quoted(es.feeder_path))
        << "\n";
    out << "  dt " << format_number(es.dt_s) << " s\n";
    out << "  duration " << format_number(es.duration_s) << " s\n";
    if (!es.droop.name.empty()) {
      out << "  droop " << es.droop.name << "\n";
    } else if (!es.droop.inline_breakpoints.empty()) {
      out << "  droop inline";
      for (double v : es.droop.inline_breakpoints)
        out << " " << format_number(v);
      out << "\n";
    }
    for (const auto& b : es.bindings) append_value_list(out, "bind", b);
    out << "}\n";
  }
  return out.str();
}

std::string serialize(const grid::FeederModel& feeder) {
  std::ostringstream out;
  out << "slack " << feeder.slack_id << " "
      << format_number(feeder.slack_voltage_v) << "\n";
  for (const auto& b : feeder.buses)
    out << "bus " << b.id << " load " << format_number(b.p_load_w) << " "
        << format_number(b.q_load_var) << "\n";
  for (const auto& l : feeder.lines)
    out << "line " << l.from << " " << l.to << " r " << format_number(l.r_ohm)
        << " x " << format_number(l.x_ohm) << "\n";
  for (const auto& c : feeder.curves)
    out << "droop " << c.name << " " << format_number(c.shape.v1) << " "
        << format_number(c.shape.v2) << " " << format_number(c.shape.v3) << " "
        << format_number(c.shape.v4) << "\n";
  for (const auto& b : feeder.bems)
    out << "bems " << b.bus << " qmax " << format_number(b.q_max_var)
        << " droop " << b.droop << "\n";
  return out.str();
}

} // namespace hazsim::dsl
