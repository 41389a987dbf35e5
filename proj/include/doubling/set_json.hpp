#pragma once

#include <string>

#include "json.hpp"
#include "doubling/sets.hpp"

namespace doubling {

using Json = nlohmann::ordered_json;

/// Discriminated-node encoding: {"type":"cap","axis":[x,y,z],"theta":t}, {"type":"ball","radius":r},
/// {"type":"union","parts":[...]}, {"type":"intersection","parts":[...]}.
Json set_to_json(const SetSpec& s);

/// Normalizes cap axes; throws InvalidArgument on unknown types, missing fields or non-finite numbers.
SetSpec set_from_json(const Json& j);

SetSpec load_set_file(const std::string& path);

}  // namespace doubling
