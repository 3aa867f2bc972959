// SPDX-License-Identifier: Apache-2.0

#include "combo/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <stdexcept>

namespace combo {

namespace {

bool is_ascii_punct(unsigned char c) {
  return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) || (c >= 123 && c <= 126);
}

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_article(std::string_view tok) { return tok == "a" || tok == "an" || tok == "the"; }

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_space(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

bool contains_run(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > hay.size()) return false;
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

}  // namespace

std::string_view to_string(Source s) { return s == Source::Retrieved ? "retrieved" : "generated"; }

std::string_view to_string(HopType h) {
  switch (h) {
    case HopType::SingleHop: return "single_hop";
    case HopType::MultiHopBridge: return "multi_hop_bridge";
    case HopType::MultiHopComparison: return "multi_hop_comparison";
    case HopType::Unknown: break;
  }
  return "unknown";
}

HopType parse_hop_type(std::string_view s) {
  if (s == "single_hop") return HopType::SingleHop;
  if (s == "multi_hop_bridge" || s == "bridge") return HopType::MultiHopBridge;
  if (s == "multi_hop_comparison" || s == "comparison") return HopType::MultiHopComparison;
  if (s == "unknown") return HopType::Unknown;
  throw std::invalid_argument("unknown hop_type '" + std::string(s) + "'");
}

bool is_multi_hop(HopType h) { return h == HopType::MultiHopBridge || h == HopType::MultiHopComparison; }

std::string PassageChain::id() const {
  std::string out;
  for (std::size_t k = 0; k < segments.size(); ++k) {
    if (k) out += '|';
    out += segments[k].id;
  }
  return out;
}

std::string normalize_answer(std::string_view s) {
  std::string stripped;
  stripped.reserve(s.size());
  for (char ch : s) {
    auto c = static_cast<unsigned char>(ch);
    if (is_ascii_punct(c)) continue;
    stripped.push_back(c < 128 ? static_cast<char>(std::tolower(c)) : ch);
  }
  std::string out;
  for (const auto& tok : split_ws(stripped)) {
    if (is_article(tok)) continue;
    if (!out.empty()) out += ' ';
    out += tok;
  }
  return out;
}

std::vector<std::string> answer_tokens(std::string_view s) { return split_ws(normalize_answer(s)); }

double token_f1(std::string_view prediction, std::string_view alias) {
  const auto pred = answer_tokens(prediction);
  const auto gold = answer_tokens(alias);
  if (pred.empty() || gold.empty()) return pred.empty() && gold.empty() ? 1.0 : 0.0;

  std::map<std::string, int> counts;
  for (const auto& t : gold) ++counts[t];
  int same = 0;
  for (const auto& t : pred) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++same;
    }
  }
  if (same == 0) return 0.0;
  const double precision = static_cast<double>(same) / static_cast<double>(pred.size());
  const double recall = static_cast<double>(same) / static_cast<double>(gold.size());
  return 2.0 * precision * recall / (precision + recall);
}

AnswerVerdict exact_match(std::string_view prediction, const std::vector<std::string>& answers) {
  if (answers.empty()) throw std::invalid_argument("exact_match: empty answer list");
  AnswerVerdict v;
  const auto norm = normalize_answer(prediction);
  for (const auto& alias : answers) {
    if (!v.exact_match && normalize_answer(alias) == norm) {
      v.exact_match = true;
      v.matched_alias = alias;
    }
    v.f1 = std::max(v.f1, token_f1(prediction, alias));
  }
  if (v.exact_match) v.f1 = 1.0;
  return v;
}

std::string chain_text(const PassageChain& chain) {
  std::string out;
  for (const auto& seg : chain.segments) {
    if (!out.empty()) out += ' ';
    out += seg.text;
  }
  return out;
}

bool text_contains_answer(std::string_view text, const std::vector<std::string>& answers) {
  const auto hay = answer_tokens(text);
  return std::any_of(answers.begin(), answers.end(),
                     [&](const std::string& a) { return contains_run(hay, answer_tokens(a)); });
}

bool contains_answer(const PassageChain& chain, const std::vector<std::string>& answers) {
  return text_contains_answer(chain_text(chain), answers);
}

// ---------------------------------------------------------------------------

namespace {

Passage parse_passage(const Json& j, Source source) {
  if (!j.is_object()) throw std::invalid_argument("passage must be an object");
  Passage p;
  p.source = source;
  if (!j.contains("id") || !j["id"].is_string()) throw std::invalid_argument("passage missing string \"id\"");
  p.id = j["id"].get<std::string>();
  if (j.contains("title") && !j["title"].is_null()) {
    if (!j["title"].is_string()) throw std::invalid_argument("passage \"title\" must be a string");
    p.title = j["title"].get<std::string>();
  }
  if (!j.contains("text") || !j["text"].is_string()) throw std::invalid_argument("passage missing string \"text\"");
  p.text = j["text"].get<std::string>();
  if (split_ws(p.text).empty()) throw std::invalid_argument("passage '" + p.id + "' has empty text");
  return p;
}

std::vector<PassageChain> parse_pool(const Json& record, const char* field, Source source, FormatHint hint) {
  std::vector<PassageChain> pool;
  if (!record.contains(field)) return pool;
  const Json& arr = record[field];
  if (!arr.is_array()) throw std::invalid_argument(std::string("\"") + field + "\" must be an array");

  std::set<std::string> seen;
  for (const auto& item : arr) {
    PassageChain chain;
    chain.source = source;
    if (item.is_object()) {
      chain.segments.push_back(parse_passage(item, source));
    } else if (item.is_array()) {
      for (const auto& seg : item) chain.segments.push_back(parse_passage(seg, source));
    } else {
      throw std::invalid_argument(std::string("\"") + field + "\" entries must be objects or arrays");
    }
    if (chain.segments.empty()) throw std::invalid_argument(std::string("empty chain in \"") + field + "\"");
    if (hint == FormatHint::SingleHop && chain.segments.size() != 1)
      throw std::invalid_argument("single-hop file contains a multi-segment chain");
    for (const auto& seg : chain.segments) {
      if (!seen.insert(seg.id).second)
        throw std::invalid_argument("duplicate passage id '" + seg.id + "' in \"" + field + "\"");
    }
    pool.push_back(std::move(chain));
  }
  return pool;
}

Json passage_json(const Passage& p) {
  Json j{{"id", p.id}, {"text", p.text}};
  j["title"] = p.title ? Json(*p.title) : Json(nullptr);
  return j;
}

Json pool_json(const std::vector<PassageChain>& pool) {
  Json arr = Json::array();
  for (const auto& chain : pool) {
    Json c = Json::array();
    for (const auto& seg : chain.segments) c.push_back(passage_json(seg));
    arr.push_back(std::move(c));
  }
  return arr;
}

}  // namespace

QAExample parse_example(const Json& record, FormatHint hint) {
  if (!record.is_object()) throw std::invalid_argument("record must be an object");
  QAExample ex;
  if (!record.contains("question_id") || !record["question_id"].is_string())
    throw std::invalid_argument("missing string \"question_id\"");
  ex.question_id = record["question_id"].get<std::string>();
  if (!record.contains("question") || !record["question"].is_string())
    throw std::invalid_argument("missing string \"question\"");
  ex.question = record["question"].get<std::string>();
  if (split_ws(ex.question).empty()) throw std::invalid_argument("empty \"question\"");

  if (!record.contains("answers") || !record["answers"].is_array())
    throw std::invalid_argument("missing array \"answers\"");
  for (const auto& a : record["answers"]) {
    if (!a.is_string()) throw std::invalid_argument("\"answers\" must contain strings");
    ex.answers.push_back(a.get<std::string>());
  }
  if (ex.answers.empty()) throw std::invalid_argument("empty \"answers\"");

  ex.retrieved = parse_pool(record, "retrieved", Source::Retrieved, hint);
  ex.generated = parse_pool(record, "generated", Source::LlmGenerated, hint);

  if (record.contains("hop_type") && !record["hop_type"].is_null()) {
    ex.hop_type = parse_hop_type(record["hop_type"].get<std::string>());
  } else if (hint == FormatHint::SingleHop) {
    ex.hop_type = HopType::SingleHop;
  } else if (hint == FormatHint::MultiHop) {
    ex.hop_type = HopType::MultiHopBridge;
  }
  return ex;
}

Json to_json(const QAExample& ex) {
  return Json{{"question_id", ex.question_id},
              {"question", ex.question},
              {"answers", ex.answers},
              {"hop_type", to_string(ex.hop_type)},
              {"retrieved", pool_json(ex.retrieved)},
              {"generated", pool_json(ex.generated)}};
}

IngestReport load_examples(const std::filesystem::path& path, FormatHint hint) {
  IngestReport report;
  report.errors = for_each_jsonl(path, [&](const Json& record, std::size_t) {
    QAExample ex = parse_example(record, hint);
    if (ex.retrieved.empty()) report.empty_pools.push_back({ex.question_id, Source::Retrieved});
    if (ex.generated.empty()) report.empty_pools.push_back({ex.question_id, Source::LlmGenerated});
    report.examples.push_back(std::move(ex));
  });
  return report;
}

void write_examples(const std::filesystem::path& path, const std::vector<QAExample>& examples) {
  std::vector<Json> records;
  records.reserve(examples.size());
  for (const auto& ex : examples) records.push_back(to_json(ex));
  write_jsonl(path, records);
}

}  // namespace combo
