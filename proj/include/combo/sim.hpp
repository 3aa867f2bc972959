// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "combo/corpus.hpp"
#include "combo/providers.hpp"

namespace combo {

struct SynthSpec {
  std::size_t num_questions = 100;
  std::size_t n = 10;  // retrieved chains per question
  std::size_t m = 10;  // generated chains per question
  double p_retrieved_evidential = 0.3;
  double p_llm_hallucinated = 0.3;
  std::uint64_t seed = 0;
  HopType hop_type = HopType::SingleHop;
  /// Exactly one evidential retrieved chain per question (ignores
  /// p_retrieved_evidential); the only setting where leave-one-out fires.
  bool single_pivot = false;

  /// Throws ContractViolation on out-of-range fields.
  void validate() const;
};

struct QuestionTruth {
  std::string question_id;
  std::string gold;
  std::string distractor;
  std::vector<std::string> retrieved_ids;
  std::vector<bool> retrieved_evidential;
  std::vector<std::string> generated_ids;
  std::vector<bool> generated_faithful;
};

/// Ground truth of a synthetic corpus, indexed by reader passage id
/// ("R:<chain id>" or "L:<chain id>").
class GroundTruth {
 public:
  GroundTruth() = default;
  explicit GroundTruth(std::vector<QuestionTruth> questions);

  const std::vector<QuestionTruth>& questions() const { return questions_; }
  const QuestionTruth& question(const std::string& question_id) const;

  struct ChainFact {
    std::size_t question = 0;
    Source source = Source::Retrieved;
    bool supports_gold = false;  // evidential (retrieved) or faithful (generated)
  };
  /// Throws ContractViolation for unknown ids.
  const ChainFact& chain(const std::string& passage_id) const;

 private:
  std::vector<QuestionTruth> questions_;
  std::unordered_map<std::string, std::size_t> by_question_;
  std::unordered_map<std::string, ChainFact> by_chain_;
};

struct SyntheticCorpus {
  std::vector<QAExample> examples;
  GroundTruth truth;
};

/// Deterministic in spec.seed; question k draws from seed + k only.
/// Evidential retrieved chains and faithful generated chains mention the gold
/// answer; hallucinated generated chains mention the distractor instead;
/// non-evidential retrieved chains mention neither.
SyntheticCorpus generate_corpus(const SynthSpec& spec);

/// Noiseless set-based reader. A hallucinated generated chain in the input
/// pulls the answer to the distractor; otherwise the gold answer comes out iff
/// some evidential or faithful chain is present. Requires passage_ids.
std::string mock_predict(const PredictRequest& req, const GroundTruth& truth);

class SimPredictor : public Predictor {
 public:
  explicit SimPredictor(const GroundTruth& truth) : truth_(truth) {}
  std::string predict(const PredictRequest& req) override { return mock_predict(req, truth_); }
  std::string tag() const override { return "sim"; }

 private:
  const GroundTruth& truth_;
};

std::vector<Json> truth_records(const GroundTruth& truth);
GroundTruth load_truth(const std::filesystem::path& path);

}  // namespace combo
