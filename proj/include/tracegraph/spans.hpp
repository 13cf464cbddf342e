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

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace tracegraph {

struct SpanLog {
  std::int64_t ts = 0;
  std::string message;

  bool operator==(const SpanLog&) const = default;
};

/// One Jaeger-style span. Timestamps and durations are integer microseconds.
struct SpanRecord {
  std::string trace_id;
  std::string span_id;
  std::optional<std::string> parent_span_id;  // absent for the root span
  std::string service_name;
  std::string operation_name;
  std::int64_t start_ts = 0;
  std::int64_t duration = 0;
  std::map<std::string, std::string> tags;
  std::vector<SpanLog> logs;

  bool is_root() const noexcept { return !parent_span_id.has_value(); }
  bool has_error() const;
  bool has_timeout() const;
  /// Value of the "retry_count" tag, 0 when absent.
  std::int64_t retry_count() const;

  bool operator==(const SpanRecord&) const = default;
};

struct RejectedLine {
  std::size_t line_no = 0;  // 1-based
  std::string reason;

  bool operator==(const RejectedLine&) const = default;
};

struct ParseResult {
  std::vector<SpanRecord> spans;
  std::vector<RejectedLine> rejects;
};

/// Parses one NDJSON object. Returns the rejection reason on failure.
/// Unknown fields are ignored; tags and logs default to empty.
std::optional<SpanRecord> parse_span_line(std::string_view line,
                                          std::string* reason);

/// Parses an NDJSON stream. Blank lines are skipped; every other line yields
/// either a span or a RejectedLine, in input order. Lines are decoded in
/// parallel and merged in order. Throws kIo if the stream fails.
ParseResult parse_spans(std::istream& in);
ParseResult parse_spans_text(std::string_view text);
ParseResult parse_spans_file(const std::string& path);

/// Serializes a span as a single NDJSON line (no trailing newline).
std::string to_ndjson(const SpanRecord& span);
void write_spans(std::ostream& out, const std::vector<SpanRecord>& spans);
void write_spans_file(const std::string& path,
                      const std::vector<SpanRecord>& spans);
void write_rejects(std::ostream& out, const std::vector<RejectedLine>& rejects);

}  // namespace tracegraph
