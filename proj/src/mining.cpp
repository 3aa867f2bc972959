// SPDX-License-Identifier: Apache-2.0

#include "combo/mining.hpp"

#include <unordered_map>

#include "combo/readerio.hpp"

namespace combo {

std::string_view to_string(MiningConfig c) {
  switch (c) {
    case MiningConfig::I_Full: return "I";
    case MiningConfig::II_DropRp: return "II";
    case MiningConfig::III_AddLp: return "III";
    case MiningConfig::IV_SwapLpForRp: break;
  }
  return "IV";
}

MiningConfig parse_mining_config(std::string_view s) {
  if (s == "I") return MiningConfig::I_Full;
  if (s == "II") return MiningConfig::II_DropRp;
  if (s == "III") return MiningConfig::III_AddLp;
  if (s == "IV") return MiningConfig::IV_SwapLpForRp;
  throw std::invalid_argument("unknown mining config '" + std::string(s) + "'");
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Positive: return "positive";
    case Verdict::Negative: return "negative";
    case Verdict::Undetermined: break;
  }
  return "undetermined";
}

Verdict parse_verdict(std::string_view s) {
  if (s == "positive") return Verdict::Positive;
  if (s == "negative") return Verdict::Negative;
  if (s == "undetermined") return Verdict::Undetermined;
  throw std::invalid_argument("unknown verdict '" + std::string(s) + "'");
}

namespace {

std::optional<bool> correctness(const std::vector<ConfigOutcome>& outcomes, MiningConfig config) {
  for (const auto& o : outcomes) {
    if (o.config == config) return o.correct;
  }
  return std::nullopt;
}

}  // namespace

Verdict evidentiality_verdict(const std::vector<ConfigOutcome>& outcomes) {
  const auto full = correctness(outcomes, MiningConfig::I_Full);
  const auto drop = correctness(outcomes, MiningConfig::II_DropRp);
  if (!full || !drop) return Verdict::Undetermined;
  if (*full && !*drop) return Verdict::Positive;
  if (!*full && *drop) return Verdict::Negative;
  return Verdict::Undetermined;
}

Verdict consistency_verdict(const std::vector<ConfigOutcome>& outcomes) {
  const auto i = correctness(outcomes, MiningConfig::I_Full);
  const auto ii = correctness(outcomes, MiningConfig::II_DropRp);
  const auto iii = correctness(outcomes, MiningConfig::III_AddLp);
  const auto iv = correctness(outcomes, MiningConfig::IV_SwapLpForRp);
  if (!i || !ii || !iii || !iv) return Verdict::Undetermined;
  if (*i && !*ii && *iii && *iv) return Verdict::Positive;
  if (*i && !*ii && !*iii && !*iv) return Verdict::Negative;
  return Verdict::Undetermined;
}

PredictRequest mining_request(const QAExample& example, MiningConfig config, std::size_t rp_index,
                              std::optional<std::size_t> lp_index) {
  const bool drop_rp = config == MiningConfig::II_DropRp || config == MiningConfig::IV_SwapLpForRp;
  const bool add_lp = config == MiningConfig::III_AddLp || config == MiningConfig::IV_SwapLpForRp;
  if (add_lp && (!lp_index || *lp_index >= example.m())) throw ContractViolation("mining config needs a valid lp index");
  if (drop_rp && rp_index >= example.n()) throw ContractViolation("mining config needs a valid rp index");

  constexpr std::size_t kUnbounded = static_cast<std::size_t>(-1);
  PredictRequest req;
  req.question = example.question;
  for (std::size_t j = 0; j < example.n(); ++j) {
    if (drop_rp && j == rp_index) continue;
    req.passages.push_back(
        passage_block(example.question, Source::Retrieved, render_chain(example.retrieved[j]), kUnbounded));
    req.passage_ids.push_back("R:" + example.retrieved[j].id());
  }
  // The generated passage goes after every retrieved one.
  if (add_lp) {
    const auto& lp = example.generated[*lp_index];
    req.passages.push_back(passage_block(example.question, Source::LlmGenerated, render_chain(lp), kUnbounded));
    req.passage_ids.push_back("L:" + lp.id());
  }
  return req;
}

namespace {

// Per-question memo so each distinct reader input is requested once.
class ConfigProbe {
 public:
  ConfigProbe(const QAExample& example, Predictor& predictor, MiningStats& stats)
      : example_(example), predictor_(predictor), stats_(stats) {}

  // Throws whatever the predictor throws; failures are remembered.
  ConfigOutcome get(MiningConfig config, std::size_t rp, std::optional<std::size_t> lp) {
    const std::string key = key_for(config, rp, lp);
    if (auto it = failed_.find(key); it != failed_.end()) throw std::runtime_error(it->second);
    if (auto it = done_.find(key); it != done_.end()) return it->second;

    ++stats_.predictor_calls;
    if (config == MiningConfig::III_AddLp || config == MiningConfig::IV_SwapLpForRp) ++stats_.third_fourth_calls;
    try {
      const auto answer = predictor_.predict(mining_request(example_, config, rp, lp));
      ConfigOutcome outcome{config, answer, exact_match(answer, example_.answers).exact_match};
      done_.emplace(key, outcome);
      return outcome;
    } catch (const ContractViolation&) {
      throw;
    } catch (const std::exception& e) {
      ++stats_.failures;
      failed_.emplace(key, e.what());
      throw;
    }
  }

 private:
  static std::string key_for(MiningConfig config, std::size_t rp, std::optional<std::size_t> lp) {
    switch (config) {
      case MiningConfig::I_Full: return "I";
      case MiningConfig::II_DropRp: return "II/" + std::to_string(rp);
      case MiningConfig::III_AddLp: return "III/" + std::to_string(*lp);
      case MiningConfig::IV_SwapLpForRp: break;
    }
    return "IV/" + std::to_string(rp) + "/" + std::to_string(*lp);
  }

  const QAExample& example_;
  Predictor& predictor_;
  MiningStats& stats_;
  std::unordered_map<std::string, ConfigOutcome> done_;
  std::unordered_map<std::string, std::string> failed_;
};

}  // namespace

MiningResult mine_question(const QAExample& example, Predictor& predictor, const MiningOptions& options) {
  if (example.n() < 2) throw ContractViolation("mining needs at least two retrieved chains in " + example.question_id);
  if (options.consistency && example.m() < 1)
    throw ContractViolation("consistency mining needs a generated chain in " + example.question_id);

  MiningResult result;
  ConfigProbe probe(example, predictor, result.stats);

  for (std::size_t j = 0; j < example.n(); ++j) {
    std::vector<ConfigOutcome> base;
    std::string note;
    try {
      base.push_back(probe.get(MiningConfig::I_Full, j, std::nullopt));
      base.push_back(probe.get(MiningConfig::II_DropRp, j, std::nullopt));
    } catch (const ContractViolation&) {
      throw;
    } catch (const std::exception& e) {
      note = e.what();
    }

    if (options.evidentiality) {
      SilverLabel label;
      label.question_id = example.question_id;
      label.kind = ScoreKind::Evidentiality;
      label.rp_index = j;
      label.outcomes = base;
      label.note = note;
      label.verdict = note.empty() ? evidentiality_verdict(base) : Verdict::Undetermined;
      result.evidentiality.push_back(std::move(label));
    }
    if (!options.consistency) continue;

    const bool gated = note.empty() && base.size() == 2 && base[0].correct && !base[1].correct;
    if (gated) result.stats.gated_pairs += example.m();
    for (std::size_t i = 0; i < example.m(); ++i) {
      SilverLabel label;
      label.question_id = example.question_id;
      label.kind = ScoreKind::Consistency;
      label.lp_index = i;
      label.rp_index = j;
      label.outcomes = base;
      label.note = note;
      if (gated) {
        try {
          label.outcomes.push_back(probe.get(MiningConfig::III_AddLp, j, i));
          label.outcomes.push_back(probe.get(MiningConfig::IV_SwapLpForRp, j, i));
        } catch (const ContractViolation&) {
          throw;
        } catch (const std::exception& e) {
          label.note = e.what();
        }
      }
      label.verdict = label.note.empty() ? consistency_verdict(label.outcomes) : Verdict::Undetermined;
      result.consistency.push_back(std::move(label));
    }
  }
  return result;
}

std::vector<SilverLabel> mine_evidentiality(const QAExample& example, Predictor& predictor) {
  return mine_question(example, predictor, {true, false}).evidentiality;
}

std::vector<SilverLabel> mine_consistency(const QAExample& example, Predictor& predictor) {
  return mine_question(example, predictor, {false, true}).consistency;
}

Json to_json(const SilverLabel& label) {
  Json outcomes = Json::array();
  for (const auto& o : label.outcomes)
    outcomes.push_back(Json{{"config", to_string(o.config)}, {"prediction", o.prediction}, {"correct", o.correct}});
  Json j{{"question_id", label.question_id},
         {"kind", label.kind == ScoreKind::Evidentiality ? "evidentiality" : "consistency"},
         {"rp", label.rp_index},
         {"verdict", to_string(label.verdict)},
         {"outcomes", std::move(outcomes)}};
  j["lp"] = label.lp_index ? Json(*label.lp_index) : Json(nullptr);
  if (!label.note.empty()) j["note"] = label.note;
  return j;
}

SilverLabel silver_label_from_json(const Json& record) {
  SilverLabel label;
  label.question_id = record.at("question_id").get<std::string>();
  const auto kind = record.at("kind").get<std::string>();
  if (kind == "evidentiality") {
    label.kind = ScoreKind::Evidentiality;
  } else if (kind == "consistency") {
    label.kind = ScoreKind::Consistency;
  } else {
    throw std::invalid_argument("unknown label kind '" + kind + "'");
  }
  label.rp_index = record.at("rp").get<std::size_t>();
  if (record.contains("lp") && !record["lp"].is_null()) label.lp_index = record["lp"].get<std::size_t>();
  label.verdict = parse_verdict(record.at("verdict").get<std::string>());
  for (const auto& o : record.at("outcomes")) {
    label.outcomes.push_back({parse_mining_config(o.at("config").get<std::string>()),
                              o.at("prediction").get<std::string>(), o.at("correct").get<bool>()});
  }
  if (record.contains("note")) label.note = record["note"].get<std::string>();
  return label;
}

std::map<ScoreKind, ClassCounts> emit_training_records(const std::vector<SilverLabel>& labels,
                                                       const std::vector<QAExample>& examples,
                                                       const std::filesystem::path& out_dir) {
  std::unordered_map<std::string, const QAExample*> by_id;
  for (const auto& ex : examples) by_id.emplace(ex.question_id, &ex);

  std::map<ScoreKind, ClassCounts> counts;
  std::map<ScoreKind, std::vector<Json>> records;
  for (const auto& label : labels) {
    auto& c = counts[label.kind];
    auto& out = records[label.kind];
    if (label.verdict == Verdict::Undetermined) continue;

    auto it = by_id.find(label.question_id);
    if (it == by_id.end()) throw ContractViolation("label refers to unknown question " + label.question_id);
    const QAExample& ex = *it->second;
    if (label.rp_index >= ex.n()) throw ContractViolation("label rp index out of range for " + ex.question_id);

    const int y = label.verdict == Verdict::Positive ? 1 : 0;
    (y ? c.positive : c.negative) += 1;
    Json rec{{"question", ex.question}, {"retrieved", chain_text(ex.retrieved[label.rp_index])}, {"label", y}};
    if (label.kind == ScoreKind::Consistency) {
      if (!label.lp_index || *label.lp_index >= ex.m())
        throw ContractViolation("consistency label without a valid lp index for " + ex.question_id);
      rec["generated"] = chain_text(ex.generated[*label.lp_index]);
    }
    out.push_back(std::move(rec));
  }

  for (const auto& [kind, recs] : records) {
    const char* name = kind == ScoreKind::Evidentiality ? "evidentiality_train.jsonl" : "consistency_train.jsonl";
    write_jsonl(out_dir / name, recs);
  }
  return counts;
}

}  // namespace combo
