#pragma once

// Declarative scenario files. The format is a small TOML subset:
//
//   host = "rpki.kiln.test"          # optional
//   validity_days = 30               # optional
//
//   [ta]
//   resources = ["10.0.0.0/8", "192.0.2.0/24", "AS65000-65010"]
//
//   [[ca]]
//   name = "evil"
//   parent = "ta"                    # optional, default "ta"
//   resources = ["10.1.0.0/16"]
//   mutation = "keyusage-overflow payload=41414141414141414141"
//
//   [[roa]]
//   name = "benign"
//   issuer = "ta"                    # optional, default "ta"
//   asn = 65000
//   prefixes = ["192.0.2.0/24", "10.0.0.0/16-24"]   # "-N" sets maxLength
//   mutation = "keyusage-overflow payload=4141"     # optional, hits the EE cert
//
// Strings, integers, booleans and single- or multi-line arrays are
// supported; unknown tables and keys are rejected.

#include "kiln/forge.hpp"

#include <string_view>

namespace kiln::forge {

/// Throws ForgeError(InvalidScenario) with a line number on any error.
Scenario parse_scenario(std::string_view text);

/// "keyusage-overflow payload=<hex>" or "none".
MutationSpec parse_mutation(std::string_view text, keyusage::CertKind kind);

} // namespace kiln::forge
