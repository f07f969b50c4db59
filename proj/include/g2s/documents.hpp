#pragma once

// JSON object-level access to the graph, change and vocabulary documents, for
// callers that embed them in larger documents (scene files, HTTP bodies).

#include <json.hpp>

#include "g2s/scenegraph.hpp"

namespace g2s {

using Json = nlohmann::json;

Json graph_to_json(const SceneGraph& g, const Vocabulary& v);
/// `path` prefixes error locations, e.g. "/graph".
SceneGraph graph_from_json(const Json& j, const Vocabulary& v, const std::string& path = "");
Json vocabulary_to_json(const Vocabulary& v);
Vocabulary vocabulary_from_json(const Json& j, std::string name = {}, const std::string& path = "");
Json change_to_json(const GraphChange& c, const Vocabulary& v);
GraphChange change_from_json(const Json& j, const SceneGraph& base, const Vocabulary& v,
                             const std::string& path = "");
Json report_to_json(const ValidationReport& r);

/// Parse text, converting nlohmann parse errors into g2s::ParseError with the byte offset.
Json parse_json(std::string_view text);

namespace detail {
const Json& require_key(const Json& j, const char* key, const std::string& path);
int require_int(const Json& j, const std::string& path);
double require_number(const Json& j, const std::string& path);
const std::string& require_string(const Json& j, const std::string& path);
}  // namespace detail

}  // namespace g2s
