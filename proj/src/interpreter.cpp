#include "semarag/interpreter.hpp"

#include "semarag/errors.hpp"
#include "semarag/json_io.hpp"
#include "semarag/text.hpp"

namespace semarag {

std::string interpreter_prompt(const Question& q) {
  return render(role_prompt(Role::interpreter).text, {{"research_topic", render_question(q)}});
}

namespace {

std::vector<std::string> read_items(const Json& j, const char* key, std::string_view raw) {
  std::vector<std::string> out;
  if (!j.contains(key) || j.at(key).is_null()) return out;
  const auto& v = j.at(key);
  if (v.is_string()) {
    out.push_back(v.get<std::string>());
    return out;
  }
  if (!v.is_array()) throw SchemaParseFailure(std::string("'") + key + "' must be a list of strings", std::string(raw));
  for (const auto& item : v) {
    if (!item.is_string()) {
      throw SchemaParseFailure(std::string("'") + key + "' must be a list of strings", std::string(raw));
    }
    out.push_back(item.get<std::string>());
  }
  return out;
}

}  // namespace

ClinicalSchema parse_schema(std::string_view raw, bool strict) {
  auto j = extract_json_object(raw, strict);
  if (!j) throw SchemaParseFailure("interpreter output holds no JSON object", std::string(raw));
  if (!j->contains("q_init") || !j->at("q_init").is_string()) {
    throw SchemaParseFailure("interpreter output lacks a string 'q_init'", std::string(raw));
  }
  ClinicalSchema s;
  if (j->contains("intent") && j->at("intent").is_string()) s.intent = j->at("intent").get<std::string>();
  s.entities = read_items(*j, "entities", raw);
  s.constraints = read_items(*j, "constraints", raw);
  s.q_init = j->at("q_init").get<std::string>();
  try {
    return validate_schema(std::move(s));
  } catch (const ValidationError& e) {
    throw SchemaParseFailure(e.what(), std::string(raw));
  }
}

InterpretResult interpret(const Question& q, Gateway& gateway, const RunConfig& cfg, CallScope& scope) {
  InterpretResult result;
  const auto prompt = interpreter_prompt(q);
  for (int attempt = 0; attempt <= cfg.max_parse_retries; ++attempt) {
    auto c = gateway.complete(Role::interpreter, prompt, cfg.temp_interpreter_explorer, scope, attempt > 0);
    result.raw_outputs.push_back(c.text);
    try {
      result.schema = parse_schema(c.text, cfg.strict_json);
      return result;
    } catch (const SchemaParseFailure& e) {
      result.failure = e.what();
    }
  }
  result.schema = degraded_schema(q);
  result.degraded = true;
  return result;
}

std::string linearize(const ClinicalSchema& s) {
  std::vector<std::string> segments{s.q_init};
  if (!s.intent.empty()) segments.push_back(s.intent);
  if (!s.entities.empty()) segments.push_back(join(s.entities, ", "));
  if (!s.constraints.empty()) segments.push_back(join(s.constraints, ", "));
  return join(segments, "; ");
}

}  // namespace semarag
