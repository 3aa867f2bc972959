// SPDX-License-Identifier: Apache-2.0

#include "combo/providers.hpp"

#include <openssl/sha.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "combo/log.hpp"

namespace combo {

// ---------------------------------------------------------------------------
// Logging

namespace {
std::mutex g_log_mu;
std::atomic<std::size_t> g_warnings{0};
std::atomic<bool> g_quiet{false};
}  // namespace

void log_warning(std::string_view message) {
  ++g_warnings;
  if (g_quiet.load()) return;
  std::lock_guard<std::mutex> lock(g_log_mu);
  std::cerr << "warning: " << message << '\n';
}

std::size_t warning_count() { return g_warnings.load(); }
void set_warnings_quiet(bool quiet) { g_quiet = quiet; }

// ---------------------------------------------------------------------------
// Requests

std::string_view to_string(GenerationMode m) {
  return m == GenerationMode::MultiHopChain ? "multi_hop_chain" : "single_hop_background";
}

GenerationMode parse_generation_mode(std::string_view s) {
  if (s == "single_hop_background" || s == "single-hop") return GenerationMode::SingleHopBackground;
  if (s == "multi_hop_chain" || s == "multi-hop") return GenerationMode::MultiHopChain;
  throw std::invalid_argument("unknown generation mode '" + std::string(s) + "'");
}

void ScoreRequest::validate() const {
  if (kind == ScoreKind::Consistency && !generated_text)
    throw ContractViolation("consistency request without generated text");
  if (kind == ScoreKind::Evidentiality && generated_text)
    throw ContractViolation("evidentiality request must not carry generated text");
}

Json ScoreRequest::to_wire() const {
  return Json{{"kind", kind == ScoreKind::Evidentiality ? "evidentiality" : "consistency"},
              {"question", question},
              {"retrieved", retrieved_text},
              {"generated", generated_text ? Json(*generated_text) : Json(nullptr)}};
}

void PredictRequest::validate() const {
  if (passages.empty()) throw ContractViolation("predict request with no passages");
  if (!passage_ids.empty() && passage_ids.size() != passages.size())
    throw ContractViolation("passage_ids must parallel passages");
}

Json PredictRequest::to_wire() const { return Json{{"question", question}, {"passages", passages}}; }

std::string render_prompt(const GenerationRequest& req) {
  if (req.mode == GenerationMode::MultiHopChain) {
    return "You are an assistant designed to provide a chain of two 100-word documents from Wikipedia "
           "that can be combined together to answer the user's question. Here's an example of your "
           "output format: Document 1: \"\"\n\n Document 2: \"\"\n\n " +
           req.question;
  }
  return "Provide a background document from Wikipedia to answer the given question. \n\n " + req.question +
         " \n\n";
}

namespace {

std::string trim_segment(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  s = s.substr(first, last - first + 1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

}  // namespace

std::vector<std::string> parse_multi_hop(std::string_view completion) {
  constexpr std::string_view kFirst = "Document 1:";
  constexpr std::string_view kSecond = "Document 2:";
  const auto p1 = completion.find(kFirst);
  if (p1 == std::string_view::npos) throw ProtocolError("multi-hop completion missing \"Document 1:\"");
  const auto p2 = completion.find(kSecond, p1 + kFirst.size());
  if (p2 == std::string_view::npos) throw ProtocolError("multi-hop completion missing \"Document 2:\"");

  std::vector<std::string> docs{
      trim_segment(completion.substr(p1 + kFirst.size(), p2 - p1 - kFirst.size())),
      trim_segment(completion.substr(p2 + kSecond.size())),
  };
  for (std::size_t k = 0; k < docs.size(); ++k) {
    if (docs[k].empty()) throw ProtocolError("multi-hop completion has empty document " + std::to_string(k + 1));
  }
  return docs;
}

// ---------------------------------------------------------------------------
// Transport

HttpTransport::HttpTransport(std::string url, std::string token, std::chrono::seconds timeout)
    : url_(std::move(url)), token_(std::move(token)), timeout_(timeout) {
  const auto scheme = url_.find("://");
  if (scheme == std::string::npos) throw std::invalid_argument("endpoint URL needs a scheme: " + url_);
  const auto slash = url_.find('/', scheme + 3);
  origin_ = url_.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : url_.substr(slash);
}

Json HttpTransport::post(const Json& body) {
  httplib::Client client(origin_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  httplib::Headers headers;
  if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);

  auto res = client.Post(path_, headers, body.dump(), "application/json");
  if (!res) throw TransportFailure(url_ + ": " + httplib::to_string(res.error()));
  if (res->status >= 500 || res->status == 429)
    throw TransportFailure(url_ + ": HTTP " + std::to_string(res->status));
  if (res->status != 200) throw ProtocolError(url_ + ": HTTP " + std::to_string(res->status));
  try {
    return Json::parse(res->body);
  } catch (const Json::parse_error& e) {
    throw ProtocolError(url_ + ": response is not JSON: " + e.what());
  }
}

Json post_with_retry(JsonTransport& transport, const Json& body, const RetryPolicy& policy) {
  const int attempts = std::max(1, policy.max_attempts);
  auto delay = policy.base_delay;
  std::string last;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    try {
      return transport.post(body);
    } catch (const TransportFailure& e) {
      last = e.what();
      if (attempt < attempts && delay.count() > 0) {
        std::this_thread::sleep_for(delay);
        delay *= 2;
      }
    }
  }
  throw RetryableError(transport.describe() + ": " + last, attempts);
}

double clamp_probability(double value, std::string_view origin) {
  if (!std::isfinite(value)) throw ProtocolError(std::string(origin) + ": non-finite probability");
  if (value < 0.0 || value > 1.0) {
    std::ostringstream msg;
    msg << origin << ": probability " << value << " outside [0,1], clamped";
    log_warning(msg.str());
    return std::clamp(value, 0.0, 1.0);
  }
  return value;
}

// ---------------------------------------------------------------------------
// Cache

ResponseCache::ResponseCache(std::filesystem::path dir) : file_(std::move(dir) / "responses.jsonl") {
  std::error_code ec;
  std::filesystem::create_directories(file_.parent_path(), ec);
  if (!std::filesystem::exists(file_)) return;
  auto errors = for_each_jsonl(file_, [&](const Json& j, std::size_t) {
    entries_[j.at("key").get<std::string>()] = j.at("response");
  });
  // A torn final line from an interrupted run is expected; anything else is worth a warning.
  for (const auto& e : errors) log_warning("cache " + file_.string() + ":" + std::to_string(e.line) + ": " + e.message);
}

std::optional<Json> ResponseCache::get(const std::string& key) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::put(const std::string& key, const Json& response) {
  std::lock_guard<std::mutex> lock(mu_);
  if (!entries_.emplace(key, response).second) return;
  std::ofstream out(file_, std::ios::app | std::ios::binary);
  if (!out) throw IoError("cannot append to cache " + file_.string());
  out << Json{{"key", key}, {"response", response}}.dump() << '\n';
}

std::size_t ResponseCache::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return entries_.size();
}

std::string ResponseCache::key_for(std::string_view namespace_tag, const Json& material) {
  const std::string content = std::string(namespace_tag) + '\n' + material.dump();
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(content.data()), content.size(), digest);
  std::ostringstream hex;
  hex << std::hex << std::setfill('0');
  for (unsigned char b : digest) hex << std::setw(2) << static_cast<int>(b);
  return hex.str();
}

// ---------------------------------------------------------------------------
// Scorers

RemoteScorer::RemoteScorer(std::shared_ptr<JsonTransport> transport, RetryPolicy policy)
    : transport_(std::move(transport)), policy_(policy) {}

double RemoteScorer::score(const ScoreRequest& req, const ScoreContext&) {
  req.validate();
  const Json res = post_with_retry(*transport_, req.to_wire(), policy_);
  if (!res.is_object() || !res.contains("probability") || !res["probability"].is_number())
    throw ProtocolError(transport_->describe() + ": response missing numeric \"probability\"");
  return clamp_probability(res["probability"].get<double>(), transport_->describe());
}

FileScoreStore::FileScoreStore(const std::filesystem::path& matrix_dump) {
  auto errors = for_each_jsonl(matrix_dump, [&](const Json& j, std::size_t) {
    const auto qid = j.at("question_id").get<std::string>();
    const auto i = j.at("i").get<std::size_t>();
    const auto rp = j.at("j").get<std::size_t>();
    set_evidentiality(qid, rp, j.at("evidentiality").get<double>());
    set_consistency(qid, i, rp, j.at("consistency").get<double>());
  });
  if (!errors.empty()) {
    throw ProtocolError("score store " + matrix_dump.string() + ":" + std::to_string(errors.front().line) + ": " +
                        errors.front().message);
  }
}

void FileScoreStore::set_evidentiality(const std::string& qid, std::size_t rp, double p) {
  evidentiality_[{qid, rp}] = clamp_probability(p, "score store");
}

void FileScoreStore::set_consistency(const std::string& qid, std::size_t lp, std::size_t rp, double p) {
  consistency_[{qid, lp, rp}] = clamp_probability(p, "score store");
}

double FileScoreStore::score(const ScoreRequest& req, const ScoreContext& ctx) {
  req.validate();
  if (req.kind == ScoreKind::Evidentiality) {
    auto it = evidentiality_.find({ctx.question_id, ctx.rp_index});
    if (it == evidentiality_.end())
      throw MissingScoreError("score store has no evidentiality for (question_id=" + ctx.question_id +
                              ", rp=" + std::to_string(ctx.rp_index) + ")");
    return it->second;
  }
  if (!ctx.lp_index) throw ContractViolation("consistency lookup without lp index");
  auto it = consistency_.find({ctx.question_id, *ctx.lp_index, ctx.rp_index});
  if (it == consistency_.end())
    throw MissingScoreError("score store has no consistency for (question_id=" + ctx.question_id +
                            ", lp=" + std::to_string(*ctx.lp_index) + ", rp=" + std::to_string(ctx.rp_index) + ")");
  return it->second;
}

double LexicalMockScorer::score(const ScoreRequest& req, const ScoreContext& ctx) {
  req.validate();
  const std::string& text = req.kind == ScoreKind::Evidentiality ? req.retrieved_text : *req.generated_text;
  return text_contains_answer(text, ctx.answers) ? 1.0 : 0.0;
}

CachedScorer::CachedScorer(std::shared_ptr<Scorer> inner, std::shared_ptr<ResponseCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

double CachedScorer::score(const ScoreRequest& req, const ScoreContext& ctx) {
  Json material{{"request", req.to_wire()}, {"question_id", ctx.question_id}, {"rp", ctx.rp_index}};
  material["lp"] = ctx.lp_index ? Json(*ctx.lp_index) : Json(nullptr);
  const auto key = ResponseCache::key_for("score/" + inner_->tag(), material);
  if (auto hit = cache_->get(key)) return hit->at("probability").get<double>();
  const double p = inner_->score(req, ctx);
  cache_->put(key, Json{{"probability", p}});
  return p;
}

// ---------------------------------------------------------------------------
// Predictors

RemotePredictor::RemotePredictor(std::shared_ptr<JsonTransport> transport, RetryPolicy policy)
    : transport_(std::move(transport)), policy_(policy) {}

std::string RemotePredictor::predict(const PredictRequest& req) {
  req.validate();
  const Json res = post_with_retry(*transport_, req.to_wire(), policy_);
  if (!res.is_object() || !res.contains("answer") || !res["answer"].is_string())
    throw ProtocolError(transport_->describe() + ": response missing string \"answer\"");
  return res["answer"].get<std::string>();
}

CachedPredictor::CachedPredictor(std::shared_ptr<Predictor> inner, std::shared_ptr<ResponseCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

std::string CachedPredictor::predict(const PredictRequest& req) {
  const Json material{{"request", req.to_wire()}, {"ids", req.passage_ids}};
  const auto key = ResponseCache::key_for("predict/" + inner_->tag(), material);
  if (auto hit = cache_->get(key)) return hit->at("answer").get<std::string>();
  auto answer = inner_->predict(req);
  cache_->put(key, Json{{"answer", answer}});
  return answer;
}

// ---------------------------------------------------------------------------
// Generators

RemoteGenerator::RemoteGenerator(std::shared_ptr<JsonTransport> transport, RetryPolicy policy)
    : transport_(std::move(transport)), policy_(policy) {}

std::vector<std::vector<std::string>> RemoteGenerator::generate(const GenerationRequest& req) {
  const Json body{{"question", req.question},
                  {"n", req.num_passages},
                  {"mode", to_string(req.mode)},
                  {"prompt", render_prompt(req)}};
  const Json res = post_with_retry(*transport_, body, policy_);
  if (!res.is_object() || !res.contains("passages") || !res["passages"].is_array())
    throw ProtocolError(transport_->describe() + ": response missing array \"passages\"");

  std::vector<std::vector<std::string>> items;
  for (const auto& entry : res["passages"]) {
    std::vector<std::string> item;
    if (entry.is_string()) {
      item.push_back(entry.get<std::string>());
    } else if (entry.is_array()) {
      for (const auto& s : entry) {
        if (s.is_string()) item.push_back(s.get<std::string>());
      }
    }
    items.push_back(std::move(item));
  }
  return items;
}

GenerationResult generate_passages(const GenerationRequest& req, Generator& generator,
                                   const std::string& question_id) {
  if (req.num_passages < 1) throw ContractViolation("num_passages must be at least 1");
  GenerationResult result;
  const auto items = generator.generate(req);
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (result.chains.size() >= static_cast<std::size_t>(req.num_passages)) break;
    const auto& item = items[k];
    const std::string base = question_id + "-g" + std::to_string(k);
    try {
      std::vector<std::string> docs;
      if (req.mode == GenerationMode::MultiHopChain) {
        std::string joined;
        for (const auto& s : item) joined += (joined.empty() ? "" : "\n") + s;
        docs = parse_multi_hop(joined);
      } else {
        std::string joined;
        for (const auto& s : item) joined += (joined.empty() ? "" : " ") + s;
        if (joined.find_first_not_of(" \t\r\n") == std::string::npos) throw ProtocolError("empty completion");
        docs.push_back(std::move(joined));
      }
      PassageChain chain;
      chain.source = Source::LlmGenerated;
      for (std::size_t s = 0; s < docs.size(); ++s) {
        Passage p;
        p.id = docs.size() == 1 ? base : base + "-" + std::to_string(s);
        p.text = std::move(docs[s]);
        p.source = Source::LlmGenerated;
        chain.segments.push_back(std::move(p));
      }
      result.chains.push_back(std::move(chain));
    } catch (const ProtocolError& e) {
      result.item_errors.push_back(base + ": " + e.what());
      log_warning("generation item " + base + " skipped: " + e.what());
    }
  }
  return result;
}

}  // namespace combo
