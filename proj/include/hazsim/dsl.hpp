#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "hazsim/feeder.hpp"
#include "hazsim/model.hpp"
#include "hazsim/source.hpp"

namespace hazsim::dsl {

/// First-error-abort diagnostic. what() renders as
/// "file:line:col: expected <X>, found <Y>".
class ParseError : public std::runtime_error {
 public:
  ParseError(SourcePos pos, std::string expected, std::string found);

  const SourcePos& pos() const { return pos_; }
  const std::string& expected() const { return expected_; }
  const std::string& found() const { return found_; }

 private:
  SourcePos pos_;
  std::string expected_;
  std::string found_;
};

/// A mandatory clause is absent from a testspec or experiment block.
class MissingFieldError : public ParseError {
 public:
  MissingFieldError(SourcePos pos, std::string field);

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Parse hazard-model text (.haz); accepts every bundle-level declaration.
/// New values register into `bundle`; the first error aborts, leaving the
/// bundle with everything registered before the failing declaration.
void parse_model_into(model::ModelBundle& bundle, std::string_view text,
                      const std::string& file);
model::ModelBundle parse_model(std::string_view text, const std::string& file);

/// Parse test-hierarchy text (.htd); accepts only testspec and experiment
/// declarations.
void parse_testspec_into(model::ModelBundle& bundle, std::string_view text,
                         const std::string& file);
model::ModelBundle parse_testspec(std::string_view text,
                                  const std::string& file);

/// Parse feeder text (.net) and check the network forms a tree rooted at
/// the slack bus. Throws ParseError or grid::TopologyError.
grid::FeederModel parse_feeder(std::string_view text, const std::string& file);

/// Read and parse a model file, dispatching on its extension
/// (.haz -> parse_model, .htd -> parse_testspec). Throws std::runtime_error
/// naming the path when the file cannot be read.
void parse_file_into(model::ModelBundle& bundle, const std::string& path);

/// Read and parse a .net file from disk.
grid::FeederModel parse_feeder_file(const std::string& path);

/// Canonical text, registration order, numbers at up to 9 significant
/// digits. parse(serialize(x)) == x.
std::string serialize(const model::ModelBundle& bundle);
std::string serialize(const grid::FeederModel& feeder);
std::string serialize(const model::TestSpecification& ts);

/// Shortest %.9g rendering ("0.5", never "0.500000000").
std::string format_number(double value);

} // namespace hazsim::dsl
