// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "combo/corpus.hpp"
#include "combo/errors.hpp"
#include "combo/jsonl.hpp"

namespace combo {

// ---------------------------------------------------------------------------
// Requests

enum class GenerationMode { SingleHopBackground, MultiHopChain };

std::string_view to_string(GenerationMode m);
GenerationMode parse_generation_mode(std::string_view s);

struct GenerationRequest {
  std::string question;
  int num_passages = 1;
  GenerationMode mode = GenerationMode::SingleHopBackground;
};

enum class ScoreKind { Evidentiality, Consistency };

struct ScoreRequest {
  ScoreKind kind = ScoreKind::Evidentiality;
  std::string question;
  std::string retrieved_text;
  std::optional<std::string> generated_text;

  /// Throws ContractViolation unless generated_text is present exactly for
  /// consistency requests.
  void validate() const;
  Json to_wire() const;
};

/// Where a score request sits in its question. Offline backends key on it.
struct ScoreContext {
  std::string question_id;
  std::size_t rp_index = 0;
  std::optional<std::size_t> lp_index;
  std::vector<std::string> answers;
};

struct PredictRequest {
  std::string question;
  std::vector<std::string> passages;
  /// Optional chain identities parallel to `passages`; never sent on the wire.
  std::vector<std::string> passage_ids;

  void validate() const;
  Json to_wire() const;
};

/// Prompt sent to the passage generator, verbatim per mode.
std::string render_prompt(const GenerationRequest& req);

/// Splits a two-document completion on the "Document 1:" / "Document 2:"
/// markers. Throws ProtocolError when a marker or a segment is missing.
std::vector<std::string> parse_multi_hop(std::string_view completion);

// ---------------------------------------------------------------------------
// Transport

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{200};
};

/// Posts one JSON object and returns one JSON object.
class JsonTransport {
 public:
  virtual ~JsonTransport() = default;
  /// Throws TransportFailure for retryable faults and ProtocolError otherwise.
  virtual Json post(const Json& body) = 0;
  virtual std::string describe() const = 0;
};

class TransportFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// HTTP POST to "http://host[:port]/path" with an optional bearer token.
class HttpTransport : public JsonTransport {
 public:
  explicit HttpTransport(std::string url, std::string token = {},
                         std::chrono::seconds timeout = std::chrono::seconds(60));
  Json post(const Json& body) override;
  std::string describe() const override { return url_; }

 private:
  std::string url_;
  std::string origin_;
  std::string path_;
  std::string token_;
  std::chrono::seconds timeout_;
};

/// Retries TransportFailure with exponential backoff; gives up with RetryableError.
Json post_with_retry(JsonTransport& transport, const Json& body, const RetryPolicy& policy);

/// Clamps into [0,1], logging a protocol warning when clamping was needed.
/// Non-finite values throw ProtocolError.
double clamp_probability(double value, std::string_view origin);

// ---------------------------------------------------------------------------
// Response cache

/// Persistent response store keyed by a SHA-256 of the request content.
/// Entries are appended to `<dir>/responses.jsonl`; reopening the directory
/// restores them.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<Json> get(const std::string& key) const;
  void put(const std::string& key, const Json& response);
  std::size_t size() const;

  static std::string key_for(std::string_view namespace_tag, const Json& material);

 private:
  std::filesystem::path file_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, Json> entries_;
};

// ---------------------------------------------------------------------------
// Scorers

class Scorer {
 public:
  virtual ~Scorer() = default;
  /// Returns P(rp |= Q) for evidentiality, P(lp |= Q | rp |= Q) for consistency.
  virtual double score(const ScoreRequest& req, const ScoreContext& ctx) = 0;
  /// Identity used to namespace cache entries.
  virtual std::string tag() const = 0;
};

class RemoteScorer : public Scorer {
 public:
  RemoteScorer(std::shared_ptr<JsonTransport> transport, RetryPolicy policy = {});
  double score(const ScoreRequest& req, const ScoreContext& ctx) override;
  std::string tag() const override { return "remote:" + transport_->describe(); }

 private:
  std::shared_ptr<JsonTransport> transport_;
  RetryPolicy policy_;
};

class MissingScoreError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

/// Scores read back from a matrix dump, keyed by (question_id, lp index, rp index).
class FileScoreStore : public Scorer {
 public:
  explicit FileScoreStore(const std::filesystem::path& matrix_dump);
  FileScoreStore() = default;

  void set_evidentiality(const std::string& qid, std::size_t rp, double p);
  void set_consistency(const std::string& qid, std::size_t lp, std::size_t rp, double p);

  double score(const ScoreRequest& req, const ScoreContext& ctx) override;
  std::string tag() const override { return "file"; }

 private:
  std::map<std::pair<std::string, std::size_t>, double> evidentiality_;
  std::map<std::tuple<std::string, std::size_t, std::size_t>, double> consistency_;
};

/// Answer-containment stand-in for both discriminators: evidentiality is 1 iff
/// the retrieved text contains a gold alias, consistency is 1 iff the
/// generated text does.
class LexicalMockScorer : public Scorer {
 public:
  double score(const ScoreRequest& req, const ScoreContext& ctx) override;
  std::string tag() const override { return "lexical"; }
};

class CachedScorer : public Scorer {
 public:
  CachedScorer(std::shared_ptr<Scorer> inner, std::shared_ptr<ResponseCache> cache);
  double score(const ScoreRequest& req, const ScoreContext& ctx) override;
  std::string tag() const override { return inner_->tag(); }

 private:
  std::shared_ptr<Scorer> inner_;
  std::shared_ptr<ResponseCache> cache_;
};

// ---------------------------------------------------------------------------
// Predictors

class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::string predict(const PredictRequest& req) = 0;
  virtual std::string tag() const = 0;
};

class RemotePredictor : public Predictor {
 public:
  RemotePredictor(std::shared_ptr<JsonTransport> transport, RetryPolicy policy = {});
  std::string predict(const PredictRequest& req) override;
  std::string tag() const override { return "remote:" + transport_->describe(); }

 private:
  std::shared_ptr<JsonTransport> transport_;
  RetryPolicy policy_;
};

class CachedPredictor : public Predictor {
 public:
  CachedPredictor(std::shared_ptr<Predictor> inner, std::shared_ptr<ResponseCache> cache);
  std::string predict(const PredictRequest& req) override;
  std::string tag() const override { return inner_->tag(); }

 private:
  std::shared_ptr<Predictor> inner_;
  std::shared_ptr<ResponseCache> cache_;
};

/// Wraps a predictor and counts calls that reach it.
class CountingPredictor : public Predictor {
 public:
  explicit CountingPredictor(std::shared_ptr<Predictor> inner) : inner_(std::move(inner)) {}
  std::string predict(const PredictRequest& req) override {
    ++calls_;
    return inner_->predict(req);
  }
  std::string tag() const override { return inner_->tag(); }
  std::size_t calls() const { return calls_.load(); }

 private:
  std::shared_ptr<Predictor> inner_;
  std::atomic<std::size_t> calls_{0};
};

// ---------------------------------------------------------------------------
// Generators

/// Returns raw completions: one entry per generated item, each a list of
/// strings (a single completion string, or pre-split documents).
class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::vector<std::vector<std::string>> generate(const GenerationRequest& req) = 0;
};

class RemoteGenerator : public Generator {
 public:
  RemoteGenerator(std::shared_ptr<JsonTransport> transport, RetryPolicy policy = {});
  std::vector<std::vector<std::string>> generate(const GenerationRequest& req) override;

 private:
  std::shared_ptr<JsonTransport> transport_;
  RetryPolicy policy_;
};

struct GenerationResult {
  std::vector<PassageChain> chains;
  std::vector<std::string> item_errors;  // skipped items, one message each
};

/// Requests passages and turns them into LlmGenerated chains with ids
/// "<question_id>-g<k>" (segments suffixed "-<s>" for multi-hop chains).
GenerationResult generate_passages(const GenerationRequest& req, Generator& generator,
                                   const std::string& question_id);

}  // namespace combo
