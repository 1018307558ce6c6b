// Copyright 2026 The presa Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PRESA_JSON_IO_H_
#define PRESA_JSON_IO_H_

#include <string>

#include "json.hpp"
#include "presa/env.h"

namespace presa {

nlohmann::json env_to_json(const EnvSpec& spec);
// Throws ParseError on missing or ill-typed fields.
EnvSpec env_from_json(const nlohmann::json& j);

// Writes `text` to a sibling temp file and renames it over `path`.
void atomic_write_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace presa

#endif  // PRESA_JSON_IO_H_
