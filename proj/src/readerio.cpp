// SPDX-License-Identifier: Apache-2.0

#include "combo/readerio.hpp"

#include <numeric>
#include <sstream>

#include "combo/errors.hpp"
#include "combo/log.hpp"
#include "combo/rng.hpp"

namespace combo {

namespace {

std::vector<std::string_view> split_tokens(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  auto space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  while (i < s.size()) {
    while (i < s.size() && space(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && !space(s[j])) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

void append_tokens(std::string& out, const std::vector<std::string_view>& toks, std::size_t limit) {
  for (std::size_t k = 0; k < toks.size() && k < limit; ++k) {
    if (!out.empty()) out += ' ';
    out += toks[k];
  }
}

void append_word(std::string& out, std::string_view word) {
  if (!out.empty()) out += ' ';
  out += word;
}

std::string_view marker_for(Source s) { return s == Source::Retrieved ? kRetrievedMarker : kGeneratedMarker; }

std::string trim(std::string_view s) {
  const auto a = s.find_first_not_of(' ');
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(' ');
  return std::string(s.substr(a, b - a + 1));
}

}  // namespace

std::string_view to_string(InputVariant v) {
  switch (v) {
    case InputVariant::Pairwise: return "pairwise";
    case InputVariant::Linearized: return "linearized";
    case InputVariant::ShuffledPairs: return "shuffled-pairs";
    case InputVariant::ShuffledWithinPair: break;
  }
  return "shuffled-within-pair";
}

InputVariant parse_input_variant(std::string_view s) {
  if (s == "pairwise") return InputVariant::Pairwise;
  if (s == "linearized") return InputVariant::Linearized;
  if (s == "shuffled-pairs") return InputVariant::ShuffledPairs;
  if (s == "shuffled-within-pair") return InputVariant::ShuffledWithinPair;
  throw std::invalid_argument("unknown input variant '" + std::string(s) + "'");
}

std::string render_chain(const PassageChain& chain) {
  std::string out;
  for (const auto& seg : chain.segments) {
    if (!out.empty()) out += ' ';
    if (seg.title && !seg.title->empty()) out += *seg.title + " . ";
    out += seg.text;
  }
  return out;
}

std::size_t count_tokens(std::string_view s) { return split_tokens(s).size(); }

std::size_t default_budget(HopType hop_type, InputVariant variant) {
  const bool multi = is_multi_hop(hop_type);
  if (variant == InputVariant::Linearized) return multi ? 500 : 200;
  return multi ? 1000 : 400;
}

std::string pair_block(std::string_view question, std::string_view lp_text, std::string_view rp_text,
                       std::size_t budget, bool retrieved_first) {
  const auto q = split_tokens(question);
  const auto lp = split_tokens(lp_text);
  const auto rp = split_tokens(rp_text);
  const std::size_t overhead = 5 + q.size();
  if (budget < overhead)
    throw ContractViolation("budget of " + std::to_string(budget) + " tokens cannot hold the question and markers");

  const std::size_t room = budget - overhead;
  std::size_t lp_keep = lp.size(), rp_keep = rp.size();
  if (lp.size() + rp.size() > room) {
    const std::size_t half = room / 2;
    if (lp.size() <= half) {
      rp_keep = room - lp.size();
    } else if (rp.size() <= room - half) {
      lp_keep = room - rp.size();
    } else {
      lp_keep = half;
      rp_keep = room - half;
    }
  }

  std::string out;
  append_word(out, kQuestionMarker);
  append_tokens(out, q, q.size());
  if (retrieved_first) {
    append_word(out, kRetrievedMarker);
    append_tokens(out, rp, rp_keep);
    append_word(out, kGeneratedMarker);
    append_tokens(out, lp, lp_keep);
  } else {
    append_word(out, kGeneratedMarker);
    append_tokens(out, lp, lp_keep);
    append_word(out, kRetrievedMarker);
    append_tokens(out, rp, rp_keep);
  }
  return out;
}

std::string passage_block(std::string_view question, Source source, std::string_view text, std::size_t budget) {
  const auto q = split_tokens(question);
  const auto body = split_tokens(text);
  const std::size_t overhead = 3 + q.size();
  if (budget < overhead)
    throw ContractViolation("budget of " + std::to_string(budget) + " tokens cannot hold the question and marker");
  std::string out;
  append_word(out, kQuestionMarker);
  append_tokens(out, q, q.size());
  append_word(out, marker_for(source));
  append_tokens(out, body, budget - overhead);
  return out;
}

ParsedBlock parse_pair_block(std::string_view block) {
  const std::string qprefix = std::string(kQuestionMarker);
  if (block.substr(0, qprefix.size()) != qprefix) throw std::invalid_argument("block does not start with \"question:\"");
  const std::string gen = " " + std::string(kGeneratedMarker);
  const std::string ret = " " + std::string(kRetrievedMarker);
  const auto g = block.find(gen);
  const auto r = block.find(ret);
  if (g == std::string_view::npos || r == std::string_view::npos)
    throw std::invalid_argument("block lacks a passage marker");

  ParsedBlock out;
  out.retrieved_first = r < g;
  const auto first = std::min(g, r);
  out.question = trim(block.substr(qprefix.size(), first - qprefix.size()));
  if (out.retrieved_first) {
    const auto g2 = block.find(gen, r + ret.size());
    if (g2 == std::string_view::npos) throw std::invalid_argument("block lacks a generated marker after retrieved");
    out.rp_text = trim(block.substr(r + ret.size(), g2 - r - ret.size()));
    out.lp_text = trim(block.substr(g2 + gen.size()));
  } else {
    const auto r2 = block.find(ret, g + gen.size());
    if (r2 == std::string_view::npos) throw std::invalid_argument("block lacks a retrieved marker after generated");
    out.lp_text = trim(block.substr(g + gen.size(), r2 - g - gen.size()));
    out.rp_text = trim(block.substr(r2 + ret.size()));
  }
  return out;
}

namespace {

void check_matching(const QAExample& example, const PairMatching& matching) {
  if (!matching.question_id.empty() && matching.question_id != example.question_id)
    throw ContractViolation("matching for " + matching.question_id + " applied to " + example.question_id);
  for (const auto& p : matching.pairs) {
    if (p.lp_index >= example.m() || p.rp_index >= example.n())
      throw ContractViolation("matched pair (" + std::to_string(p.lp_index) + ", " + std::to_string(p.rp_index) +
                              ") out of range for " + example.question_id);
  }
}

}  // namespace

ReaderExample serialize_pairwise(const QAExample& example, const PairMatching& matching, std::size_t budget) {
  check_matching(example, matching);
  ReaderExample out;
  out.question_id = example.question_id;
  out.variant = InputVariant::Pairwise;
  out.budget = budget;
  for (const auto& p : matching.pairs) {
    out.blocks.push_back(pair_block(example.question, render_chain(example.generated[p.lp_index]),
                                    render_chain(example.retrieved[p.rp_index]), budget));
    out.scores.push_back(p.score);
  }
  return out;
}

ReaderExample serialize_variant(const QAExample& example, const PairMatching& matching, InputVariant variant,
                                std::size_t budget, std::uint64_t seed) {
  if (variant == InputVariant::Pairwise) return serialize_pairwise(example, matching, budget);
  check_matching(example, matching);

  ReaderExample out;
  out.question_id = example.question_id;
  out.variant = variant;
  out.budget = budget;
  SeededRng rng(seed);

  switch (variant) {
    case InputVariant::Linearized:
      for (const auto& p : matching.pairs) {
        out.blocks.push_back(passage_block(example.question, Source::LlmGenerated,
                                           render_chain(example.generated[p.lp_index]), budget));
        out.blocks.push_back(
            passage_block(example.question, Source::Retrieved, render_chain(example.retrieved[p.rp_index]), budget));
        out.scores.insert(out.scores.end(), 2, p.score);
      }
      break;
    case InputVariant::ShuffledPairs: {
      auto base = serialize_pairwise(example, matching, budget);
      std::vector<std::size_t> order(base.blocks.size());
      std::iota(order.begin(), order.end(), 0);
      rng.shuffle(std::span<std::size_t>(order));
      for (auto k : order) {
        out.blocks.push_back(std::move(base.blocks[k]));
        out.scores.push_back(base.scores[k]);
      }
      break;
    }
    case InputVariant::ShuffledWithinPair:
      for (const auto& p : matching.pairs) {
        const bool flip = rng.coin();
        out.blocks.push_back(pair_block(example.question, render_chain(example.generated[p.lp_index]),
                                        render_chain(example.retrieved[p.rp_index]), budget, flip));
        out.scores.push_back(p.score);
      }
      break;
    case InputVariant::Pairwise:
      break;
  }
  return out;
}

Json to_json(const ReaderExample& reader_example) {
  return Json{{"question_id", reader_example.question_id}, {"blocks", reader_example.blocks}};
}

PredictionIngest ingest_predictions(const std::filesystem::path& path) {
  PredictionIngest out;
  out.errors = for_each_jsonl(path, [&](const Json& j, std::size_t line) {
    if (!j.is_object() || !j.contains("question_id") || !j["question_id"].is_string() || !j.contains("answer") ||
        !j["answer"].is_string())
      throw std::invalid_argument("expected {\"question_id\": str, \"answer\": str}");
    const auto qid = j["question_id"].get<std::string>();
    auto [it, fresh] = out.predictions.insert_or_assign(qid, j["answer"].get<std::string>());
    if (!fresh) {
      std::ostringstream msg;
      msg << path.string() << ":" << line << ": duplicate prediction for " << qid << ", keeping the last";
      out.warnings.push_back(msg.str());
      log_warning(msg.str());
    }
  });
  return out;
}

}  // namespace combo
