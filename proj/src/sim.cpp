// SPDX-License-Identifier: Apache-2.0

#include "combo/sim.hpp"

#include "combo/errors.hpp"
#include "combo/rng.hpp"

namespace combo {

void SynthSpec::validate() const {
  if (n < 1 || m < 1) throw ContractViolation("synthetic pools need n >= 1 and m >= 1");
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(p_retrieved_evidential) || !prob(p_llm_hallucinated))
    throw ContractViolation("synthetic probabilities must lie in [0,1]");
}

GroundTruth::GroundTruth(std::vector<QuestionTruth> questions) : questions_(std::move(questions)) {
  for (std::size_t q = 0; q < questions_.size(); ++q) {
    const auto& t = questions_[q];
    by_question_.emplace(t.question_id, q);
    for (std::size_t j = 0; j < t.retrieved_ids.size(); ++j)
      by_chain_["R:" + t.retrieved_ids[j]] = {q, Source::Retrieved, t.retrieved_evidential[j]};
    for (std::size_t i = 0; i < t.generated_ids.size(); ++i)
      by_chain_["L:" + t.generated_ids[i]] = {q, Source::LlmGenerated, t.generated_faithful[i]};
  }
}

const QuestionTruth& GroundTruth::question(const std::string& question_id) const {
  auto it = by_question_.find(question_id);
  if (it == by_question_.end()) throw ContractViolation("no ground truth for question " + question_id);
  return questions_[it->second];
}

const GroundTruth::ChainFact& GroundTruth::chain(const std::string& passage_id) const {
  auto it = by_chain_.find(passage_id);
  if (it == by_chain_.end()) throw ContractViolation("unknown chain id " + passage_id);
  return it->second;
}

namespace {

Passage make_passage(std::string id, std::string text, Source source) {
  Passage p;
  p.id = std::move(id);
  p.text = std::move(text);
  p.source = source;
  return p;
}

PassageChain retrieved_chain(const std::string& qid, std::size_t j, bool evidential, const std::string& gold,
                             bool multi_hop) {
  const std::string id = qid + "-r" + std::to_string(j);
  const std::string fact = evidential ? "the registry lists the linked code as " + gold + " for this entry."
                                      : "the registry entry covers unrelated background with no linked code.";
  PassageChain chain;
  chain.source = Source::Retrieved;
  if (multi_hop) {
    chain.segments.push_back(make_passage(id + "-s0",
                                          "Archive record " + std::to_string(j) + " for " + qid +
                                              " points to the bridge entity bridge" + std::to_string(j) + ".",
                                          Source::Retrieved));
    chain.segments.push_back(make_passage(id + "-s1", "For bridge" + std::to_string(j) + ", " + fact, Source::Retrieved));
  } else {
    chain.segments.push_back(
        make_passage(id, "Archive record " + std::to_string(j) + " for " + qid + ": " + fact, Source::Retrieved));
  }
  return chain;
}

PassageChain generated_chain(const std::string& qid, std::size_t i, const std::string& answer, bool multi_hop) {
  const std::string id = qid + "-g" + std::to_string(i);
  const std::string claim = "the linked code is " + answer + ".";
  PassageChain chain;
  chain.source = Source::LlmGenerated;
  if (multi_hop) {
    chain.segments.push_back(make_passage(id + "-s0", "Background note " + std::to_string(i) + " on " + qid + ".",
                                          Source::LlmGenerated));
    chain.segments.push_back(make_passage(id + "-s1", "It is widely reported that " + claim, Source::LlmGenerated));
  } else {
    chain.segments.push_back(make_passage(
        id, "Background note " + std::to_string(i) + " on " + qid + " says " + claim, Source::LlmGenerated));
  }
  return chain;
}

}  // namespace

SyntheticCorpus generate_corpus(const SynthSpec& spec) {
  spec.validate();
  const bool multi_hop = is_multi_hop(spec.hop_type);
  SyntheticCorpus corpus;
  std::vector<QuestionTruth> truths;
  for (std::size_t q = 0; q < spec.num_questions; ++q) {
    SeededRng rng(spec.seed + q);
    // Every draw happens regardless of the probabilities, so sweeping one
    // probability keeps the rest of the corpus fixed.
    const std::size_t pivot = static_cast<std::size_t>(rng.below(spec.n));
    std::vector<double> u_retrieved(spec.n), u_generated(spec.m);
    for (auto& u : u_retrieved) u = rng.uniform();
    for (auto& u : u_generated) u = rng.uniform();

    QuestionTruth t;
    t.question_id = "syn" + std::to_string(q);
    t.gold = "aurum" + std::to_string(q);
    t.distractor = "pyrite" + std::to_string(q);

    QAExample ex;
    ex.question_id = t.question_id;
    ex.question = "What is the linked code of registry entry " + std::to_string(q) + "?";
    ex.answers = {t.gold};
    ex.hop_type = spec.hop_type;
    for (std::size_t j = 0; j < spec.n; ++j) {
      const bool evidential = spec.single_pivot ? j == pivot : u_retrieved[j] < spec.p_retrieved_evidential;
      ex.retrieved.push_back(retrieved_chain(t.question_id, j, evidential, t.gold, multi_hop));
      t.retrieved_ids.push_back(ex.retrieved.back().id());
      t.retrieved_evidential.push_back(evidential);
    }
    for (std::size_t i = 0; i < spec.m; ++i) {
      const bool faithful = !(u_generated[i] < spec.p_llm_hallucinated);
      ex.generated.push_back(generated_chain(t.question_id, i, faithful ? t.gold : t.distractor, multi_hop));
      t.generated_ids.push_back(ex.generated.back().id());
      t.generated_faithful.push_back(faithful);
    }
    corpus.examples.push_back(std::move(ex));
    truths.push_back(std::move(t));
  }
  corpus.truth = GroundTruth(std::move(truths));
  return corpus;
}

std::string mock_predict(const PredictRequest& req, const GroundTruth& truth) {
  if (req.passages.empty()) throw ContractViolation("mock_predict: no passages");
  if (req.passage_ids.size() != req.passages.size()) throw ContractViolation("mock_predict: passage ids required");

  std::optional<std::size_t> question;
  bool supported = false;
  bool misled = false;
  for (const auto& id : req.passage_ids) {
    const auto& fact = truth.chain(id);
    if (question && *question != fact.question) throw ContractViolation("mock_predict: passages from two questions");
    question = fact.question;
    if (fact.supports_gold) {
      supported = true;
    } else if (fact.source == Source::LlmGenerated) {
      misled = true;
    }
  }
  const auto& t = truth.questions()[*question];
  return supported && !misled ? t.gold : t.distractor;
}

std::vector<Json> truth_records(const GroundTruth& truth) {
  std::vector<Json> out;
  for (const auto& t : truth.questions()) {
    Json retrieved = Json::array(), generated = Json::array();
    for (std::size_t j = 0; j < t.retrieved_ids.size(); ++j)
      retrieved.push_back(Json{{"id", t.retrieved_ids[j]}, {"evidential", static_cast<bool>(t.retrieved_evidential[j])}});
    for (std::size_t i = 0; i < t.generated_ids.size(); ++i)
      generated.push_back(Json{{"id", t.generated_ids[i]}, {"faithful", static_cast<bool>(t.generated_faithful[i])}});
    out.push_back(Json{{"question_id", t.question_id},
                       {"gold", t.gold},
                       {"distractor", t.distractor},
                       {"retrieved", retrieved},
                       {"generated", generated}});
  }
  return out;
}

GroundTruth load_truth(const std::filesystem::path& path) {
  std::vector<QuestionTruth> questions;
  auto errors = for_each_jsonl(path, [&](const Json& j, std::size_t) {
    QuestionTruth t;
    t.question_id = j.at("question_id").get<std::string>();
    t.gold = j.at("gold").get<std::string>();
    t.distractor = j.at("distractor").get<std::string>();
    for (const auto& r : j.at("retrieved")) {
      t.retrieved_ids.push_back(r.at("id").get<std::string>());
      t.retrieved_evidential.push_back(r.at("evidential").get<bool>());
    }
    for (const auto& g : j.at("generated")) {
      t.generated_ids.push_back(g.at("id").get<std::string>());
      t.generated_faithful.push_back(g.at("faithful").get<bool>());
    }
    questions.push_back(std::move(t));
  });
  if (!errors.empty())
    throw ProtocolError(path.string() + ":" + std::to_string(errors.front().line) + ": " + errors.front().message);
  return GroundTruth(std::move(questions));
}

}  // namespace combo
