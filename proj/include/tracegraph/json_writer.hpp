// Copyright 2026 The tracegraph Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tracegraph {

/// Formats a double with 17 significant digits ("%.17g"), which is enough for
/// an exact binary round trip through strtod.
std::string format_double(double value);

/// Minimal streaming JSON emitter. Numbers are written with format_double so
/// every document it produces round-trips bit-exactly; parsing goes through
/// nlohmann::json.
class JsonWriter {
 public:
  JsonWriter& begin_object();
  JsonWriter& end_object();
  JsonWriter& begin_array();
  JsonWriter& end_array();
  JsonWriter& key(std::string_view name);

  JsonWriter& value(double v);
  JsonWriter& value(std::int64_t v);
  JsonWriter& value(std::uint64_t v);
  JsonWriter& value(int v) { return value(static_cast<std::int64_t>(v)); }
  JsonWriter& value(bool v);
  JsonWriter& value(std::string_view v);
  JsonWriter& value(const char* v) { return value(std::string_view(v)); }
  JsonWriter& null();

  JsonWriter& array(std::span<const double> values);
  JsonWriter& array(std::span<const std::string> values);

  const std::string& str() const { return out_; }

 private:
  void before_value();

  std::string out_;
  // One entry per open container: true once it holds at least one element.
  std::vector<bool> has_items_;
  bool after_key_ = false;
};

/// JSON string literal with escapes, including the surrounding quotes.
std::string json_quote(std::string_view s);

}  // namespace tracegraph
