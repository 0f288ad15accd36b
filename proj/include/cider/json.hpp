#pragma once

#include <json.hpp>

namespace cider {

// Ordered so that serialized documents keep a stable field order; several
// tests assert byte-identical re-serialization.
using Json = nlohmann::ordered_json;

}  // namespace cider
