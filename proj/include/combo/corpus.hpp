// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "combo/jsonl.hpp"

namespace combo {

enum class Source { Retrieved, LlmGenerated };

enum class HopType { SingleHop, MultiHopBridge, MultiHopComparison, Unknown };

std::string_view to_string(Source s);
std::string_view to_string(HopType h);
HopType parse_hop_type(std::string_view s);
bool is_multi_hop(HopType h);

struct Passage {
  std::string id;
  std::optional<std::string> title;
  std::string text;
  Source source = Source::Retrieved;

  bool operator==(const Passage&) const = default;
};

/// One retrieved or generated unit: a single passage for single-hop data,
/// an ordered reasoning path of passages for multi-hop data.
struct PassageChain {
  std::vector<Passage> segments;
  Source source = Source::Retrieved;

  /// Segment ids joined with '|'; stable identity of the chain in its pool.
  std::string id() const;

  bool operator==(const PassageChain&) const = default;
};

struct QAExample {
  std::string question_id;
  std::string question;
  std::vector<std::string> answers;
  std::vector<PassageChain> retrieved;  // N chains
  std::vector<PassageChain> generated;  // M chains
  HopType hop_type = HopType::Unknown;

  std::size_t n() const { return retrieved.size(); }
  std::size_t m() const { return generated.size(); }

  bool operator==(const QAExample&) const = default;
};

struct AnswerVerdict {
  bool exact_match = false;
  double f1 = 0.0;
  std::optional<std::string> matched_alias;
};

// ---------------------------------------------------------------------------
// Answer normalization and metrics

/// SQuAD-style normalization: lowercase, drop ASCII punctuation, drop the
/// articles a/an/the as whole tokens, collapse whitespace.
std::string normalize_answer(std::string_view s);

/// Tokens of the normalized text.
std::vector<std::string> answer_tokens(std::string_view s);

/// Token-multiset F1 between two strings after normalization. Two empty
/// token lists score 1, one empty list scores 0.
double token_f1(std::string_view prediction, std::string_view alias);

/// Requires a non-empty alias list.
AnswerVerdict exact_match(std::string_view prediction, const std::vector<std::string>& answers);

/// Segment texts joined with single spaces (titles excluded).
std::string chain_text(const PassageChain& chain);

/// True if any alias, normalized, occurs as a contiguous token run of the
/// normalized text. Aliases that normalize to nothing never match.
bool text_contains_answer(std::string_view text, const std::vector<std::string>& answers);
bool contains_answer(const PassageChain& chain, const std::vector<std::string>& answers);

// ---------------------------------------------------------------------------
// Ingestion

enum class FormatHint { Auto, SingleHop, MultiHop };

struct EmptyPoolFlag {
  std::string question_id;
  Source pool;
};

struct IngestReport {
  std::vector<QAExample> examples;  // file order
  std::vector<LineError> errors;
  std::vector<EmptyPoolFlag> empty_pools;
};

/// Parses one record. Throws std::invalid_argument describing the first
/// violated field constraint.
QAExample parse_example(const Json& record, FormatHint hint = FormatHint::Auto);
Json to_json(const QAExample& example);

/// Reads a line-delimited record file. Throws IoError if the file is unreadable;
/// malformed records land in the report with their line numbers.
IngestReport load_examples(const std::filesystem::path& path, FormatHint hint = FormatHint::Auto);
void write_examples(const std::filesystem::path& path, const std::vector<QAExample>& examples);

}  // namespace combo
