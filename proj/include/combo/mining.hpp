// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "combo/corpus.hpp"
#include "combo/providers.hpp"

namespace combo {

/// Reader inputs used to probe one (generated, retrieved) pair.
///   I    all retrieved chains
///   II   all retrieved chains except the target retrieved one
///   III  all retrieved chains plus the target generated one
///   IV   II plus the target generated one
enum class MiningConfig { I_Full, II_DropRp, III_AddLp, IV_SwapLpForRp };

std::string_view to_string(MiningConfig c);
MiningConfig parse_mining_config(std::string_view s);

enum class Verdict { Positive, Negative, Undetermined };

std::string_view to_string(Verdict v);
Verdict parse_verdict(std::string_view s);

struct ConfigOutcome {
  MiningConfig config = MiningConfig::I_Full;
  std::string prediction;
  bool correct = false;

  bool operator==(const ConfigOutcome&) const = default;
};

struct SilverLabel {
  std::string question_id;
  ScoreKind kind = ScoreKind::Evidentiality;
  std::optional<std::size_t> lp_index;  // consistency labels only
  std::size_t rp_index = 0;
  Verdict verdict = Verdict::Undetermined;
  std::vector<ConfigOutcome> outcomes;
  std::string note;  // predictor failure, if any
};

/// Positive iff I correct and II incorrect; Negative iff I incorrect and II
/// correct. Missing outcomes yield Undetermined.
Verdict evidentiality_verdict(const std::vector<ConfigOutcome>& outcomes);

/// Positive (consistent) iff II incorrect and I, III, IV correct; Negative
/// (conflicting) iff I correct and II, III, IV incorrect.
Verdict consistency_verdict(const std::vector<ConfigOutcome>& outcomes);

struct MiningStats {
  std::size_t predictor_calls = 0;   // calls issued by the miner (cache hits included)
  std::size_t gated_pairs = 0;       // pairs with I correct and II incorrect
  std::size_t third_fourth_calls = 0;
  std::size_t failures = 0;
};

struct MiningResult {
  std::vector<SilverLabel> evidentiality;
  std::vector<SilverLabel> consistency;
  MiningStats stats;
};

struct MiningOptions {
  bool evidentiality = true;
  bool consistency = true;
};

/// Runs leave-one-out evidentiality mining and four-configuration consistency
/// mining for one question, sharing configuration I and II predictions.
/// III/IV are only requested for gated pairs. Throws ContractViolation when
/// fewer than two retrieved chains (or no generated chain, for consistency)
/// are available.
MiningResult mine_question(const QAExample& example, Predictor& predictor, const MiningOptions& options = {});

std::vector<SilverLabel> mine_evidentiality(const QAExample& example, Predictor& predictor);
std::vector<SilverLabel> mine_consistency(const QAExample& example, Predictor& predictor);

/// Reader input for a configuration: one "question: .. <marker> .." block per chain.
PredictRequest mining_request(const QAExample& example, MiningConfig config, std::size_t rp_index,
                              std::optional<std::size_t> lp_index);

Json to_json(const SilverLabel& label);
SilverLabel silver_label_from_json(const Json& record);

struct ClassCounts {
  std::size_t positive = 0;
  std::size_t negative = 0;
};

/// Writes classifier-ready records (Positive -> 1, Negative -> 0, Undetermined
/// dropped) into `<out_dir>/evidentiality_train.jsonl` and/or
/// `<out_dir>/consistency_train.jsonl`, one file per label kind present.
std::map<ScoreKind, ClassCounts> emit_training_records(const std::vector<SilverLabel>& labels,
                                                       const std::vector<QAExample>& examples,
                                                       const std::filesystem::path& out_dir);

}  // namespace combo
