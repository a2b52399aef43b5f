#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "semarag/config.hpp"
#include "semarag/domain.hpp"
#include "semarag/llm_gateway.hpp"

namespace semarag {

struct InterpretResult {
  ClinicalSchema schema;
  bool degraded = false;
  std::string failure;  // parse error of the last attempt when degraded
  std::vector<std::string> raw_outputs;
};

std::string interpreter_prompt(const Question& q);

/// Parses and validates the interpreter's JSON. Throws SchemaParseFailure.
ClinicalSchema parse_schema(std::string_view raw, bool strict = false);

/// One counted call in the fault-free case, plus up to max_parse_retries
/// re-asks. When every attempt fails to parse, returns the degraded schema
/// (q_init = stem) with `degraded` set instead of throwing.
InterpretResult interpret(const Question& q, Gateway& gateway, const RunConfig& cfg, CallScope& scope);

/// "q_init; intent; e1, e2; c1, c2". Empty fields are left out together with
/// their separator.
std::string linearize(const ClinicalSchema& s);

}  // namespace semarag
