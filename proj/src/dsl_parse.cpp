#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include "hazsim/dsl.hpp"

namespace hazsim::dsl {

ParseError::ParseError(SourcePos pos, std::string expected, std::string found)
    : std::runtime_error(pos.str() + ": expected " + expected + ", found " +
                         found),
      pos_(std::move(pos)),
      expected_(std::move(expected)),
      found_(std::move(found)) {}

MissingFieldError::MissingFieldError(SourcePos pos, std::string field)
    : ParseError(std::move(pos), field + " clause", "end of block"),
      field_(std::move(field)) {}

namespace {

enum class Tok {
  word,
  string,
  lbrace,
  rbrace,
  lbracket,
  rbracket,
  comma,
  newline,
  eof,
};

struct Token {
  Tok kind = Tok::eof;
  std::string text;
  int line = 1;
  int col = 1;
};

bool is_word_char(char c) {
  switch (c) {
    case ' ': case '\t': case '\r': case '\n':
    case '#': case '"': case '{': case '}':
    case '[': case ']': case ',':
      return false;
    default:
      return true;
  }
}

class Lexer {
 public:
  Lexer(std::string_view text, std::string file)
      : text_(text), file_(std::move(file)) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (i_ < text_.size()) {
      char c = text_[i_];
      if (c == ' ' || c == '\t' || c == '\r') {
        bump();
      } else if (c == '\n') {
        if (!out.empty() && out.back().kind != Tok::newline)
          out.push_back({Tok::newline, "\n", line_, col_});
        bump();
      } else if (c == '#') {
        while (i_ < text_.size() && text_[i_] != '\n') bump();
      } else if (c == '"') {
        out.push_back(lex_string());
      } else if (c == '{' || c == '}' || c == '[' || c == ']' || c == ',') {
        Tok kind = c == '{'   ? Tok::lbrace
                   : c == '}' ? Tok::rbrace
                   : c == '[' ? Tok::lbracket
                   : c == ']' ? Tok::rbracket
                              : Tok::comma;
        out.push_back({kind, std::string(1, c), line_, col_});
        bump();
      } else {
        out.push_back(lex_word());
      }
    }
    if (!out.empty() && out.back().kind != Tok::newline)
      out.push_back({Tok::newline, "\n", line_, col_});
    out.push_back({Tok::eof, "end of file", line_, col_});
    return out;
  }

 private:
  void bump() {
    if (text_[i_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++i_;
  }

  Token lex_word() {
    Token t{Tok::word, "", line_, col_};
    while (i_ < text_.size() && is_word_char(text_[i_])) {
      t.text.push_back(text_[i_]);
      bump();
    }
    return t;
  }

  Token lex_string() {
    Token t{Tok::string, "", line_, col_};
    bump(); // opening quote
    while (i_ < text_.size()) {
      char c = text_[i_];
      if (c == '"') {
        bump();
        return t;
      }
      if (c == '\n') break;
      if (c == '\\' && i_ + 1 < text_.size() &&
          (text_[i_ + 1] == '"' || text_[i_ + 1] == '\\')) {
        bump();
        t.text.push_back(text_[i_]);
        bump();
        continue;
      }
      t.text.push_back(c);
      bump();
    }
    throw ParseError({file_, t.line, t.col}, "closing '\"'", "end of line");
  }

  std::string_view text_;
  std::string file_;
  size_t i_ = 0;
  int line_ = 1;
  int col_ = 1;
};

const std::set<std::string, std::less<>> kUnitTokens = {"s", "V", "W", "var",
                                                        "ohm"};

std::string describe(const Token& t) {
  switch (t.kind) {
    case Tok::word:    return "'" + t.text + "'";
    case Tok::string:  return "string \"" + t.text + "\"";
    case Tok::newline: return "end of line";
    case Tok::eof:     return "end of file";
    default:           return "'" + t.text + "'";
  }
}

class Parser {
 public:
  Parser(std::string_view text, std::string file) : file_(std::move(file)) {
    toks_ = Lexer(text, file_).run();
  }

  void parse_model(model::ModelBundle& bundle) {
    skip_newlines();
    while (!at_end()) {
      parse_model_decl(bundle);
      skip_newlines();
    }
  }

  void parse_testspec(model::ModelBundle& bundle) {
    skip_newlines();
    while (!at_end()) {
      const Token& head = peek();
      if (head.text == "testspec") {
        advance();
        parse_testspec_block(bundle);
      } else if (head.text == "experiment") {
        advance();
        parse_experiment_block(bundle);
      } else {
        fail(head, "'testspec' or 'experiment'");
      }
      skip_newlines();
    }
  }

  grid::FeederModel parse_feeder() {
    grid::FeederModel feeder;
    bool have_slack = false;
    skip_newlines();
    while (!at_end()) {
      const Token& head = peek();
      if (head.text == "slack") {
        if (have_slack)
          throw grid::TopologyError("duplicate slack",
                                    "second slack declaration", pos(head));
        advance();
        feeder.slack_id = expect_word("bus id");
        feeder.slack_voltage_v = expect_number("slack voltage");
        maybe_unit("V");
        if (!(feeder.slack_voltage_v > 0.0))
          fail(prev(), "slack voltage > 0");
        have_slack = true;
        expect_eol();
      } else if (head.text == "bus") {
        advance();
        grid::FeederBus bus;
        const Token& id_tok = peek();
        bus.id = expect_word("bus id");
        if ((have_slack && bus.id == feeder.slack_id) ||
            std::any_of(feeder.buses.begin(), feeder.buses.end(),
                        [&](const auto& b) { return b.id == bus.id; }))
          fail(id_tok, "a new bus id");
        if (accept_word("load")) {
          bus.p_load_w = expect_number("load P in watts");
          maybe_unit("W");
          bus.q_load_var = expect_number("load Q in vars");
          maybe_unit("var");
        }
        feeder.buses.push_back(std::move(bus));
        expect_eol();
      } else if (head.text == "line") {
        advance();
        grid::FeederLine line;
        line.from = expect_word("bus id");
        line.to = expect_word("bus id");
        expect_keyword("r");
        line.r_ohm = expect_number("resistance in ohms");
        maybe_unit("ohm");
        expect_keyword("x");
        const Token& x_tok = peek();
        line.x_ohm = expect_number("reactance in ohms");
        maybe_unit("ohm");
        if (line.r_ohm < 0.0 || line.x_ohm < 0.0 ||
            (line.r_ohm == 0.0 && line.x_ohm == 0.0))
          fail(x_tok, "r >= 0 and x >= 0, not both zero");
        feeder.lines.push_back(std::move(line));
        expect_eol();
      } else if (head.text == "bems") {
        advance();
        grid::BemsUnit bems;
        bems.bus = expect_word("bus id");
        expect_keyword("qmax");
        const Token& q_tok = peek();
        bems.q_max_var = expect_number("q_max in vars");
        maybe_unit("var");
        if (!(bems.q_max_var > 0.0)) fail(q_tok, "q_max > 0");
        expect_keyword("droop");
        bems.droop = expect_word("droop curve name");
        feeder.bems.push_back(std::move(bems));
        expect_eol();
      } else if (head.text == "droop") {
        advance();
        grid::DroopDecl decl;
        const Token& name_tok = peek();
        decl.name = expect_word("droop curve name");
        if (std::any_of(feeder.curves.begin(), feeder.curves.end(),
                        [&](const auto& c) { return c.name == decl.name; }))
          fail(name_tok, "a new droop curve name");
        decl.shape.v1 = expect_number("breakpoint v1");
        decl.shape.v2 = expect_number("breakpoint v2");
        decl.shape.v3 = expect_number("breakpoint v3");
        decl.shape.v4 = expect_number("breakpoint v4");
        if (!decl.shape.monotone())
          fail(prev(), "non-decreasing breakpoints v1 <= v2 <= v3 <= v4");
        feeder.curves.push_back(std::move(decl));
        expect_eol();
      } else {
        fail(head, "'slack', 'bus', 'line', 'bems' or 'droop'");
      }
      skip_newlines();
    }
    if (!have_slack)
      fail(peek(), "a slack declaration");
    for (const auto& b : feeder.bems) {
      if (!feeder.find_shape(b.droop))
        throw ParseError({file_, 0, 0}, "known droop curve for bems " + b.bus,
                         "'" + b.droop + "'");
    }
    grid::validate_feeder(feeder);
    return feeder;
  }

 private:
  // --- token plumbing ------------------------------------------------------

  const Token& peek() const { return toks_[i_]; }
  const Token& prev() const { return toks_[i_ == 0 ? 0 : i_ - 1]; }
  const Token& advance() { return toks_[i_ == toks_.size() - 1 ? i_ : i_++]; }
  bool at_end() const { return peek().kind == Tok::eof; }

  SourcePos pos(const Token& t) const { return {file_, t.line, t.col}; }

  [[noreturn]] void fail(const Token& t, std::string expected) const {
    throw ParseError(pos(t), std::move(expected), describe(t));
  }

  void skip_newlines() {
    while (peek().kind == Tok::newline) advance();
  }

  std::string expect_word(std::string what) {
    const Token& t = peek();
    if (t.kind != Tok::word) fail(t, std::move(what));
    advance();
    return t.text;
  }

  void expect_keyword(std::string_view word) {
    const Token& t = peek();
    if (t.kind != Tok::word || t.text != word)
      fail(t, "'" + std::string(word) + "'");
    advance();
  }

  bool accept_word(std::string_view word) {
    if (peek().kind == Tok::word && peek().text == word) {
      advance();
      return true;
    }
    return false;
  }

  std::string expect_string(std::string what, bool non_empty = true) {
    const Token& t = peek();
    if (t.kind != Tok::string) fail(t, std::move(what));
    if (non_empty && t.text.empty()) fail(t, "non-empty " + what);
    advance();
    return t.text;
  }

  double expect_number(std::string what) {
    const Token& t = peek();
    double value = 0.0;
    if (t.kind != Tok::word) fail(t, std::move(what));
    const char* begin = t.text.data();
    const char* end = begin + t.text.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end) fail(t, std::move(what));
    advance();
    return value;
  }

  bool is_number(const Token& t) const {
    if (t.kind != Tok::word) return false;
    double value = 0.0;
    const char* begin = t.text.data();
    const char* end = begin + t.text.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    return ec == std::errc{} && ptr == end;
  }

  /// Consume an allowed unit suffix when present; a unit token that does not
  /// match the expected dimension is an error. Units are never converted.
  void maybe_unit(std::string_view expected) {
    const Token& t = peek();
    if (t.kind != Tok::word || !kUnitTokens.count(t.text)) return;
    if (t.text != expected) fail(t, "unit '" + std::string(expected) + "'");
    advance();
  }

  void expect_eol() {
    const Token& t = peek();
    if (t.kind != Tok::newline && t.kind != Tok::eof) fail(t, "end of line");
    if (t.kind == Tok::newline) advance();
  }

  std::string expect_id(std::string_view prefix, std::string what) {
    const Token& t = peek();
    if (t.kind != Tok::word || !model::id_matches(t.text, prefix))
      fail(t, std::move(what));
    advance();
    return t.text;
  }

  template <class T>
  void add_to(model::ModelBundle& bundle, T item, const Token& id_tok) {
    try {
      bundle.add(std::move(item), pos(id_tok));
    } catch (model::DuplicateIdError& e) {
      e.set_pos(pos(id_tok));
      throw;
    }
  }

  // --- hazard-model declarations -------------------------------------------

  void parse_model_decl(model::ModelBundle& bundle) {
    const Token& head = peek();
    if (head.kind != Tok::word)
      fail(head, "a declaration keyword");
    const std::string& kw = head.text;
    if (kw == "loss") {
      advance();
      parse_loss(bundle);
    } else if (kw == "hazard") {
      advance();
      parse_hazard(bundle);
    } else if (kw == "constraint") {
      advance();
      parse_constraint(bundle);
    } else if (kw == "controlloop") {
      advance();
      parse_controlloop(bundle);
    } else if (kw == "hca") {
      advance();
      parse_hca(bundle);
    } else if (kw == "factor") {
      advance();
      parse_factor(bundle);
    } else if (kw == "component") {
      advance();
      parse_component(bundle);
    } else if (kw == "threat") {
      advance();
      parse_threat(bundle);
    } else if (kw == "scenario") {
      advance();
      parse_scenario(bundle);
    } else if (kw == "testspec") {
      advance();
      parse_testspec_block(bundle);
    } else if (kw == "experiment") {
      advance();
      parse_experiment_block(bundle);
    } else {
      fail(head, "a declaration keyword");
    }
  }

  void parse_loss(model::ModelBundle& bundle) {
    const Token& id_tok = peek();
    model::Loss loss;
    loss.id = expect_id("L", "loss id (L<digits>)");
    loss.description = expect_string("description");
    expect_eol();
    add_to(bundle, std::move(loss), id_tok);
  }

  void parse_hazard(model::ModelBundle& bundle) {
    const Token& id_tok = peek();
    model::Hazard hazard;
    hazard.id = expect_id("H", "hazard id (H<digits>)");
    hazard.description = expect_string("description");
    expect_keyword("->");
    hazard.leads_to.push_back(expect_id("L", "loss id"));
    while (peek().kind == Tok::word)
      hazard.leads_to.push_back(expect_id("L", "loss id"));
    expect_eol();
    add_to(bundle, std::move(hazard), id_tok);
  }

  void parse_constraint(model::ModelBundle& bundle) {
    const Token& id_tok = peek();
    model::Constraint constraint;
    constraint.id = expect_id("C", "constraint id (C<digits>)");
    expect_keyword("negates");
    constraint.negates = expect_id("H", "hazard id");
    constraint.text = expect_string("constraint text");
    expect_eol();
    add_to(bundle, std::move(constraint), id_tok);
  }

  void parse_controlloop(model::ModelBundle& bundle) {
    const Token& id_tok = peek();
    model::ControlLoop loop;
    loop.id = expect_word("control loop id");
    expect_open_block();
    std::vector<Token> link_tokens;
    while (!accept_block_end()) {
      const Token& field = peek();
      const std::string kw = expect_word("a control loop clause");
      if (kw == "controller" || kw == "actuator" || kw == "sensor" ||
          kw == "process") {
        std::string& target = kw == "controller" ? loop.controller
                              : kw == "actuator" ? loop.actuator
                              : kw == "sensor"   ? loop.sensor
                                                 : loop.process;
        if (!target.empty()) fail(field, "a single " + kw + " clause");
        target = expect_word("node name");
      } else if (kw == "action") {
        model::ControlAction action;
        const Token& name_tok = peek();
        action.name = expect_word("action name");
        for (const auto& existing : loop.actions)
          if (existing.name == action.name) fail(name_tok, "a new action name");
        expect_keyword("levels");
        while (peek().kind == Tok::word) {
          const Token& lvl_tok = peek();
          std::string level = expect_word("level name");
          if (std::find(action.levels.begin(), action.levels.end(), level) !=
              action.levels.end())
            fail(lvl_tok, "a new level name");
          action.levels.push_back(std::move(level));
        }
        if (action.levels.empty()) fail(peek(), "level name");
        loop.actions.push_back(std::move(action));
      } else if (kw == "link") {
        model::Link link;
        const Token& link_tok = peek();
        link.id = expect_word("link id");
        expect_keyword("from");
        link.from = expect_word("node name");
        expect_keyword("to");
        link.to = expect_word("node name");
        expect_keyword("kind");
        const Token& kind_tok = peek();
        std::string kind = expect_word("'command' or 'feedback'");
        if (kind == "command")
          link.kind = model::LinkKind::command;
        else if (kind == "feedback")
          link.kind = model::LinkKind::feedback;
        else
          fail(kind_tok, "'command' or 'feedback'");
        for (const auto& existing : loop.links)
          if (existing.id == link.id)
            throw model::DuplicateIdError(link.id, "link", pos(link_tok));
        if (bundle.find_link(link.id))
          throw model::DuplicateIdError(link.id, "link", pos(link_tok));
        link_tokens.push_back(link_tok);
        loop.links.push_back(std::move(link));
      } else {
        fail(field, "a control loop clause");
      }
      expect_eol();
    }
    for (const char* role : {"controller", "actuator", "sensor", "process"}) {
      const std::string& value = role == std::string("controller") ? loop.controller
                                 : role == std::string("actuator") ? loop.actuator
                                 : role == std::string("sensor")   ? loop.sensor
                                                                   : loop.process;
      if (value.empty())
        fail(prev(), std::string(role) + " clause before '}'");
    }
    auto nodes = loop.node_names();
    std::sort(nodes.begin(), nodes.end());
    if (std::adjacent_find(nodes.begin(), nodes.end()) != nodes.end())
      fail(prev(), "distinct controller/actuator/sensor/process names");
    for (size_t k = 0; k < loop.links.size(); ++k) {
      const auto& link = loop.links[k];
      auto declared = loop.node_names();
      auto in_loop = [&](const std::string& n) {
        return std::find(declared.begin(), declared.end(), n) != declared.end();
      };
      if (!in_loop(link.from) || !in_loop(link.to))
        fail(link_tokens[k], "link endpoints naming declared loop nodes");
    }
    expect_eol();
    add_to(bundle, std::move(loop), id_tok);
  }

  void parse_hca(model::ModelBundle& bundle) {
    const Token& id_tok = peek();
    model::HazardousControlAction hca;
    hca.id = expect_id("HC-", "hca id (HC-<digits>)");
    expect_keyword("action");
    const Token& pair_tok = peek();
    std::string pair = expect_word("action.level");
    auto dot = pair.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == pair.size())
      fail(pair_tok, "action.level");
    hca.action = pair.substr(0, dot);
    hca.level = pair.substr(dot + 1);
    expect_keyword("when");
    const Token& gw_tok = peek();
    std::string gw = expect_word("guideword");
    auto parsed = model::guideword_from(gw);
    if (!parsed)
      fail(gw_tok, "'any_time', 'too_early', 'too_late' or 'not_applied'");
    hca.when = *parsed;
    expect_keyword("causes");
    hca.causes = expect_id("H", "hazard id");
    hca.qualified = accept_word("qualified");
    expect_eol();
    for (const auto& existing : bundle.hcas) {
      if (existing.action == hca.action && existing.level == hca.level &&
          existing.when == hca.when && existing.causes == hca.causes)
        fail(id_tok, "a new (action, level, guideword, causes) combination");
    }
    add_to(bundle, std::move(hca), id_tok);
  }

  void parse_factor(model::ModelBundle& bundle) {
    const Token& id_tok = peek();
    model::CausalFactor factor;
    factor.id = expect_id("CF", "factor id (CF<digits>)");
    factor.description = expect_string("description");
    expect_keyword("at");
    factor.at = expect_word("link id or node name");
    expect_eol();
    add_to(bundle, std::move(factor), id_tok);
  }

  void parse_component(model::ModelBundle& bundle) {
    const Token& id_tok = peek();
    model::Component component;
    component.id = expect_word("component id");
    const Token& kind_tok = peek();
    std::string kind = expect_word("'device' or 'network'");
    if (kind == "device")
      component.kind = model::ComponentKind::device;
    else if (kind == "network")
      component.kind = model::ComponentKind::network;
    else
      fail(kind_tok, "'device' or 'network'");
    expect_keyword("realizes");
    component.realizes.push_back(expect_word("link id or node name"));
    while (peek().kind == Tok::word)
      component.realizes.push_back(expect_word("link id or node name"));
    expect_eol();
    add_to(bundle, std::move(component), id_tok);
  }

  void parse_threat(model::ModelBundle& bundle) {
    const Token& id_tok = peek();
    model::SecurityThreat threat;
    threat.id = expect_word("threat id");
    const Token& cls_tok = peek();
    std::string cls = expect_word("security class");
    auto parsed = model::security_class_from(cls);
    if (!parsed)
      fail(cls_tok, "'availability', 'integrity' or 'confidentiality'");
    threat.cls = *parsed;
    threat.description = expect_string("description");
    if (accept_word("applies")) {
      threat.applies_to.push_back(expect_word("component id"));
      while (peek().kind == Tok::word)
        threat.applies_to.push_back(expect_word("component id"));
    }
    expect_eol();
    add_to(bundle, std::move(threat), id_tok);
  }

  void parse_id_list(std::vector<std::string>& into, std::string_view prefix,
                     std::string what) {
    if (prefix.empty())
      into.push_back(expect_word(what));
    else
      into.push_back(expect_id(prefix, what));
    while (peek().kind == Tok::word) {
      if (prefix.empty())
        into.push_back(expect_word(what));
      else
        into.push_back(expect_id(prefix, what));
    }
  }

  void parse_scenario(model::ModelBundle& bundle) {
    const Token& id_tok = peek();
    model::HazardScenario scenario;
    scenario.id = expect_id("HS-", "scenario id (HS-<digits>)");
    expect_open_block();
    while (!accept_block_end()) {
      const Token& field = peek();
      const std::string kw = expect_word("a scenario clause");
      if (kw == "title") {
        if (!scenario.title.empty()) fail(field, "a single title clause");
        scenario.title = expect_string("title");
      } else if (kw == "hazards") {
        parse_id_list(scenario.hazards, "H", "hazard id");
      } else if (kw == "losses") {
        parse_id_list(scenario.losses, "L", "loss id");
      } else if (kw == "hcas") {
        parse_id_list(scenario.hcas, "HC-", "hca id");
      } else if (kw == "factors") {
        parse_id_list(scenario.factors, "CF", "factor id");
      } else if (kw == "components") {
        parse_id_list(scenario.components, "", "component id");
      } else if (kw == "threats") {
        parse_id_list(scenario.threats, "", "threat id");
      } else if (kw == "safety") {
        if (!scenario.safety_constraint.empty())
          fail(field, "a single safety clause");
        scenario.safety_constraint = expect_string("safety constraint text");
      } else {
        fail(field, "a scenario clause");
      }
      expect_eol();
    }
    expect_eol();
    add_to(bundle, std::move(scenario), id_tok);
  }

  // --- HTD declarations -----------------------------------------------------

  model::Parameter parse_value_list(const std::string& clause) {
    model::Parameter param;
    const Token& name_tok = peek();
    param.name = expect_word("parameter name");
    if (kUnitTokens.count(param.name))
      fail(name_tok, "a parameter name that is not a unit token");
    expect_punct(Tok::lbracket, "'['");
    while (true) {
      const Token& value_tok = peek();
      if (value_tok.kind != Tok::word) fail(value_tok, clause + " value");
      param.values.push_back(value_tok.text);
      advance();
      if (peek().kind == Tok::comma) {
        advance();
        continue;
      }
      break;
    }
    expect_punct(Tok::rbracket, "']'");
    const Token& unit_tok = peek();
    if (unit_tok.kind == Tok::word && kUnitTokens.count(unit_tok.text)) {
      param.unit = unit_tok.text;
      advance();
    }
    return param;
  }

  void parse_testspec_block(model::ModelBundle& bundle) {
    const Token& id_tok = peek();
    model::TestSpecification ts;
    ts.id = expect_id("TS-", "testspec id (TS-<digits>)");
    expect_open_block();
    bool have_from = false, have_title = false, have_initial = false;
    std::vector<Token> uncertainty_tokens;
    while (!accept_block_end()) {
      const Token& field = peek();
      const std::string kw = expect_word("a testspec clause");
      if (kw == "from") {
        if (have_from) fail(field, "a single from clause");
        ts.from_scenario = expect_id("HS-", "scenario id");
        have_from = true;
      } else if (kw == "title") {
        if (have_title) fail(field, "a single title clause");
        ts.title = expect_string("title");
        have_title = true;
      } else if (kw == "rationale") {
        ts.rationale = expect_string("rationale");
      } else if (kw == "measure") {
        ts.target_measures.push_back(expect_string("target measure"));
      } else if (kw == "vary") {
        model::Parameter param = parse_value_list("controllable");
        if (ts.find_controllable(param.name))
          fail(field, "a new controllable parameter name");
        ts.controllable.push_back(std::move(param));
      } else if (kw == "fixed") {
        ts.uncontrollable.push_back(expect_string("uncontrollable parameter"));
      } else if (kw == "measured") {
        ts.measured.push_back(expect_string("measured parameter"));
      } else if (kw == "initial") {
        if (have_initial) fail(field, "a single initial clause");
        expect_keyword("nominal");
        const Token& nom_tok = peek();
        ts.initial.nominal_voltage_v = expect_number("nominal voltage");
        maybe_unit("V");
        if (!(ts.initial.nominal_voltage_v > 0.0))
          fail(nom_tok, "nominal voltage > 0");
        expect_keyword("tolerance");
        const Token& tol_tok = peek();
        ts.initial.tolerance = expect_number("tolerance fraction");
        if (!(ts.initial.tolerance > 0.0 && ts.initial.tolerance < 1.0))
          fail(tol_tok, "tolerance in (0, 1)");
        expect_keyword("delay");
        const Token& delay_tok = peek();
        ts.initial.initial_delay_s = expect_number("initial delay");
        maybe_unit("s");
        if (ts.initial.initial_delay_s < 0.0) fail(delay_tok, "delay >= 0");
        have_initial = true;
      } else if (kw == "uncertainty") {
        uncertainty_tokens.push_back(peek());
        ts.uncertainty_sources.push_back(expect_word("controllable name"));
        while (peek().kind == Tok::word) {
          uncertainty_tokens.push_back(peek());
          ts.uncertainty_sources.push_back(expect_word("controllable name"));
        }
      } else {
        fail(field, "a testspec clause");
      }
      expect_eol();
    }
    expect_eol();
    if (!have_title) throw MissingFieldError(pos(id_tok), "title");
    if (!have_from) throw MissingFieldError(pos(id_tok), "from");
    if (!have_initial) throw MissingFieldError(pos(id_tok), "initial");
    for (size_t k = 0; k < ts.uncertainty_sources.size(); ++k) {
      if (!ts.find_controllable(ts.uncertainty_sources[k]))
        fail(uncertainty_tokens[k],
             "an uncertainty source naming a controllable parameter");
    }
    add_to(bundle, std::move(ts), id_tok);
  }

  void parse_experiment_block(model::ModelBundle& bundle) {
    const Token& id_tok = peek();
    model::ExperimentSpecification es;
    es.id = expect_id("ES-", "experiment id (ES-<digits>)");
    expect_open_block();
    bool have_from = false, have_feeder = false, have_dt = false,
         have_duration = false;
    Token duration_tok;
    while (!accept_block_end()) {
      const Token& field = peek();
      const std::string kw = expect_word("an experiment clause");
      if (kw == "from") {
        if (have_from) fail(field, "a single from clause");
        es.from_test = expect_id("TS-", "testspec id");
        have_from = true;
      } else if (kw == "feeder") {
        if (have_feeder) fail(field, "a single feeder clause");
        const Token& t = peek();
        if (t.kind == Tok::string) {
          es.feeder_path = t.text;
          advance();
        } else {
          es.feeder_path = expect_word("feeder file path");
        }
        if (es.feeder_path.empty()) fail(t, "non-empty feeder file path");
        have_feeder = true;
      } else if (kw == "dt") {
        if (have_dt) fail(field, "a single dt clause");
        const Token& t = peek();
        es.dt_s = expect_number("timestep in seconds");
        maybe_unit("s");
        if (!(es.dt_s > 0.0)) fail(t, "dt > 0");
        have_dt = true;
      } else if (kw == "duration") {
        if (have_duration) fail(field, "a single duration clause");
        duration_tok = peek();
        es.duration_s = expect_number("duration in seconds");
        maybe_unit("s");
        have_duration = true;
      } else if (kw == "droop") {
        if (!es.droop.empty()) fail(field, "a single droop clause");
        if (accept_word("inline")) {
          es.droop.inline_breakpoints.resize(4);
          for (double& v : es.droop.inline_breakpoints)
            v = expect_number("droop breakpoint");
          if (!std::is_sorted(es.droop.inline_breakpoints.begin(),
                              es.droop.inline_breakpoints.end()))
            fail(prev(), "non-decreasing breakpoints");
        } else {
          es.droop.name = expect_word("droop curve name or 'inline'");
        }
      } else if (kw == "bind") {
        model::Parameter param = parse_value_list("binding");
        if (es.find_binding(param.name))
          fail(field, "a new binding parameter name");
        es.bindings.push_back(std::move(param));
      } else {
        fail(field, "an experiment clause");
      }
      expect_eol();
    }
    expect_eol();
    if (!have_from) throw MissingFieldError(pos(id_tok), "from");
    if (!have_feeder) throw MissingFieldError(pos(id_tok), "feeder");
    if (!have_dt) throw MissingFieldError(pos(id_tok), "dt");
    if (!have_duration) throw MissingFieldError(pos(id_tok), "duration");
    if (es.duration_s < 10.0 * es.dt_s)
      fail(duration_tok, "duration >= 10 * dt");
    add_to(bundle, std::move(es), id_tok);
  }

  void expect_punct(Tok kind, std::string what) {
    const Token& t = peek();
    if (t.kind != kind) fail(t, std::move(what));
    advance();
  }

  void expect_open_block() {
    expect_punct(Tok::lbrace, "'{'");
    expect_eol();
    skip_newlines();
  }

  bool accept_block_end() {
    skip_newlines();
    if (peek().kind == Tok::rbrace) {
      advance();
      return true;
    }
    if (peek().kind == Tok::eof) fail(peek(), "'}'");
    return false;
  }

  std::string file_;
  std::vector<Token> toks_;
  size_t i_ = 0;
};

} // namespace

void parse_model_into(model::ModelBundle& bundle, std::string_view text,
                      const std::string& file) {
  Parser(text, file).parse_model(bundle);
}

model::ModelBundle parse_model(std::string_view text, const std::string& file) {
  model::ModelBundle bundle;
  parse_model_into(bundle, text, file);
  return bundle;
}

void parse_testspec_into(model::ModelBundle& bundle, std::string_view text,
                         const std::string& file) {
  Parser(text, file).parse_testspec(bundle);
}

model::ModelBundle parse_testspec(std::string_view text,
                                  const std::string& file) {
  model::ModelBundle bundle;
  parse_testspec_into(bundle, text, file);
  return bundle;
}

grid::FeederModel parse_feeder(std::string_view text, const std::string& file) {
  return Parser(text, file).parse_feeder();
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read file " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

} // namespace

void parse_file_into(model::ModelBundle& bundle, const std::string& path) {
  const std::string ext = std::filesystem::path(path).extension().string();
  const std::string text = read_file(path);
  if (ext == ".haz")
    parse_model_into(bundle, text, path);
  else if (ext == ".htd")
    parse_testspec_into(bundle, text, path);
  else
    throw std::runtime_error("unsupported model file extension '" + ext +
                             "' for " + path + " (expected .haz or .htd)");
}

grid::FeederModel parse_feeder_file(const std::string& path) {
  return parse_feeder(read_file(path), path);
}

} // namespace hazsim::dsl
