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

#include "tracegraph/spans.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tracegraph/error.hpp"

namespace tracegraph {

using nlohmann::json;

namespace {

bool is_bool_string(const std::string& s) { return s == "true" || s == "false"; }

bool is_nonneg_integer_string(const std::string& s) {
  return !s.empty() && s.size() < 19 &&
         std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

bool read_int(const json& obj, const char* key, std::int64_t* out,
              std::string* reason, bool required) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    if (required) *reason = std::string("missing ") + key;
    return !required;
  }
  if (it->is_number_unsigned()) {
    const auto v = it->get<std::uint64_t>();
    if (v > static_cast<std::uint64_t>(INT64_MAX)) {
      *reason = std::string(key) + " out of range";
      return false;
    }
    *out = static_cast<std::int64_t>(v);
    return true;
  }
  if (it->is_number_integer()) {
    *out = it->get<std::int64_t>();
    return true;
  }
  *reason = std::string(key) + " is not an integer";
  return false;
}

bool read_string(const json& obj, const char* key, std::string* out,
                 std::string* reason) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    *reason = std::string("missing ") + key;
    return false;
  }
  if (!it->is_string()) {
    *reason = std::string(key) + " is not a string";
    return false;
  }
  *out = it->get<std::string>();
  return true;
}

std::optional<std::string> tag_value_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
  return std::nullopt;
}

std::vector<std::string> split_lines(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  if (in.bad()) {
    throw Error(ErrorCode::kIo, "failed reading span stream");
  }
  return lines;
}

}  // namespace

bool SpanRecord::has_error() const {
  auto it = tags.find("error");
  return it != tags.end() && it->second == "true";
}

bool SpanRecord::has_timeout() const {
  auto it = tags.find("timeout");
  return it != tags.end() && it->second == "true";
}

std::int64_t SpanRecord::retry_count() const {
  auto it = tags.find("retry_count");
  if (it == tags.end() || !is_nonneg_integer_string(it->second)) return 0;
  return std::stoll(it->second);
}

std::optional<SpanRecord> parse_span_line(std::string_view line,
                                          std::string* reason) {
  json obj = json::parse(line.begin(), line.end(), nullptr, false);
  if (obj.is_discarded()) {
    *reason = "invalid JSON";
    return std::nullopt;
  }
  if (!obj.is_object()) {
    *reason = "line is not a JSON object";
    return std::nullopt;
  }

  SpanRecord span;
  if (!read_string(obj, "trace_id", &span.trace_id, reason)) return std::nullopt;
  if (!read_string(obj, "span_id", &span.span_id, reason)) return std::nullopt;
  if (span.span_id.empty()) {
    *reason = "empty span_id";
    return std::nullopt;
  }
  if (span.trace_id.empty()) {
    *reason = "empty trace_id";
    return std::nullopt;
  }
  if (auto it = obj.find("parent_span_id"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) {
      *reason = "parent_span_id is not a string";
      return std::nullopt;
    }
    auto parent = it->get<std::string>();
    if (!parent.empty()) span.parent_span_id = std::move(parent);
  }
  if (span.parent_span_id && *span.parent_span_id == span.span_id) {
    *reason = "parent_span_id equals span_id";
    return std::nullopt;
  }
  if (!read_string(obj, "service_name", &span.service_name, reason)) return std::nullopt;
  if (span.service_name.empty()) {
    *reason = "empty service_name";
    return std::nullopt;
  }
  if (!read_string(obj, "operation_name", &span.operation_name, reason)) {
    return std::nullopt;
  }
  if (!read_int(obj, "start_ts", &span.start_ts, reason, true)) return std::nullopt;
  if (!read_int(obj, "duration", &span.duration, reason, true)) return std::nullopt;
  if (span.duration < 0) {
    *reason = "negative duration";
    return std::nullopt;
  }

  if (auto it = obj.find("tags"); it != obj.end() && !it->is_null()) {
    if (!it->is_object()) {
      *reason = "tags is not an object";
      return std::nullopt;
    }
    for (const auto& [k, v] : it->items()) {
      auto s = tag_value_string(v);
      if (!s) {
        *reason = "tag '" + k + "' has unsupported value type";
        return std::nullopt;
      }
      if ((k == "error" || k == "timeout") && !is_bool_string(*s)) {
        *reason = "tag '" + k + "' must be \"true\" or \"false\"";
        return std::nullopt;
      }
      if (k == "retry_count" && !is_nonneg_integer_string(*s)) {
        *reason = "tag 'retry_count' must be a non-negative integer";
        return std::nullopt;
      }
      span.tags.emplace(k, std::move(*s));
    }
  }

  if (auto it = obj.find("logs"); it != obj.end() && !it->is_null()) {
    if (!it->is_array()) {
      *reason = "logs is not an array";
      return std::nullopt;
    }
    for (const auto& entry : *it) {
      if (!entry.is_object()) {
        *reason = "log entry is not an object";
        return std::nullopt;
      }
      SpanLog log;
      if (!read_int(entry, "ts", &log.ts, reason, true)) {
        *reason = "log entry: " + *reason;
        return std::nullopt;
      }
      if (auto m = entry.find("message"); m != entry.end() && !m->is_null()) {
        if (!m->is_string()) {
          *reason = "log entry: message is not a string";
          return std::nullopt;
        }
        log.message = m->get<std::string>();
      }
      span.logs.push_back(std::move(log));
    }
  }
  return span;
}

ParseResult parse_spans(std::istream& in) {
  if (!in) throw Error(ErrorCode::kIo, "span stream is not readable");
  const std::vector<std::string> lines = split_lines(in);

  std::vector<std::optional<SpanRecord>> decoded(lines.size());
  std::vector<std::string> reasons(lines.size());
  std::vector<char> blank(lines.size(), 0);
  const auto n = static_cast<std::int64_t>(lines.size());
#pragma omp parallel for schedule(dynamic, 256)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& line = lines[static_cast<std::size_t>(i)];
    if (line.find_first_not_of(" \t") == std::string::npos) {
      blank[i] = 1;
      continue;
    }
    decoded[i] = parse_span_line(line, &reasons[i]);
  }

  ParseResult result;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (blank[i]) continue;
    if (decoded[i]) {
      result.spans.push_back(std::move(*decoded[i]));
    } else {
      result.rejects.push_back(RejectedLine{i + 1, std::move(reasons[i])});
    }
  }
  return result;
}

ParseResult parse_spans_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_spans(in);
}

ParseResult parse_spans_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open span file: " + path);
  return parse_spans(in);
}

std::string to_ndjson(const SpanRecord& span) {
  json obj = {
      {"trace_id", span.trace_id},
      {"span_id", span.span_id},
      {"service_name", span.service_name},
      {"operation_name", span.operation_name},
      {"start_ts", span.start_ts},
      {"duration", span.duration},
  };
  if (span.parent_span_id) obj["parent_span_id"] = *span.parent_span_id;
  if (!span.tags.empty()) obj["tags"] = span.tags;
  if (!span.logs.empty()) {
    json logs = json::array();
    for (const auto& log : span.logs) {
      logs.push_back({{"ts", log.ts}, {"message", log.message}});
    }
    obj["logs"] = std::move(logs);
  }
  return obj.dump();
}

void write_spans(std::ostream& out, const std::vector<SpanRecord>& spans) {
  for (const auto& s : spans) out << to_ndjson(s) << '\n';
}

void write_spans_file(const std::string& path,
                      const std::vector<SpanRecord>& spans) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write span file: " + path);
  write_spans(out, spans);
  if (!out) throw Error(ErrorCode::kIo, "failed writing span file: " + path);
}

void write_rejects(std::ostream& out, const std::vector<RejectedLine>& rejects) {
  for (const auto& r : rejects) {
    out << json{{"line_no", r.line_no}, {"reason", r.reason}}.dump() << '\n';
  }
}

}  // namespace tracegraph
