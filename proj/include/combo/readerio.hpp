// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "combo/corpus.hpp"
#include "combo/matching.hpp"

namespace combo {

enum class InputVariant { Pairwise, Linearized, ShuffledPairs, ShuffledWithinPair };

std::string_view to_string(InputVariant v);
InputVariant parse_input_variant(std::string_view s);

inline constexpr std::string_view kQuestionMarker = "question:";
inline constexpr std::string_view kGeneratedMarker = "generated passage:";
inline constexpr std::string_view kRetrievedMarker = "retrieved passage:";

struct ReaderExample {
  std::string question_id;
  std::vector<std::string> blocks;  // one per encoder input
  std::vector<double> scores;       // compatibility of the pair behind each block
  InputVariant variant = InputVariant::Pairwise;
  std::size_t budget = 0;           // max whitespace tokens per block
};

/// Chain rendered for a reader: segments joined by spaces, each prefixed
/// with "title . " when it has a title.
std::string render_chain(const PassageChain& chain);

/// Whitespace token count.
std::size_t count_tokens(std::string_view s);

/// Token budget per block: pairwise-style inputs get 400 (single-hop) or
/// 1000 (multi-hop); per-passage linearized inputs get 200 or 500.
std::size_t default_budget(HopType hop_type, InputVariant variant = InputVariant::Pairwise);

/// "question: Q generated passage: LP retrieved passage: RP", truncated to
/// `budget` tokens. The question is kept whole; the two passages share what
/// is left equally and are cut from the end. Throws ContractViolation when
/// the question and markers alone exceed the budget.
std::string pair_block(std::string_view question, std::string_view lp_text, std::string_view rp_text,
                       std::size_t budget, bool retrieved_first = false);

/// "question: Q <marker> TEXT" for one passage, truncated to `budget` tokens.
std::string passage_block(std::string_view question, Source source, std::string_view text, std::size_t budget);

struct ParsedBlock {
  std::string question;
  std::string lp_text;
  std::string rp_text;
  bool retrieved_first = false;
};

/// Inverse of pair_block. Throws std::invalid_argument for text that lacks the markers.
ParsedBlock parse_pair_block(std::string_view block);

/// One block per matched pair in matching order, generated passage first.
ReaderExample serialize_pairwise(const QAExample& example, const PairMatching& matching, std::size_t budget);

/// Ablation layouts. Linearized emits a generated block and a retrieved block
/// per pair; ShuffledPairs permutes pairwise blocks; ShuffledWithinPair flips
/// each block's passage order with probability 1/2. Shuffles derive from `seed`.
ReaderExample serialize_variant(const QAExample& example, const PairMatching& matching, InputVariant variant,
                                std::size_t budget, std::uint64_t seed);

Json to_json(const ReaderExample& reader_example);

struct PredictionIngest {
  std::map<std::string, std::string> predictions;
  std::vector<LineError> errors;
  std::vector<std::string> warnings;
};

/// Reads {"question_id","answer"} lines. Duplicate ids keep the last answer.
PredictionIngest ingest_predictions(const std::filesystem::path& path);

}  // namespace combo
