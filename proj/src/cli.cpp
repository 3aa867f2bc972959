// SPDX-License-Identifier: Apache-2.0

#include "combo/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <CLI11.hpp>

#include "combo/analysis.hpp"
#include "combo/corpus.hpp"
#include "combo/errors.hpp"
#include "combo/log.hpp"
#include "combo/matching.hpp"
#include "combo/mining.hpp"
#include "combo/providers.hpp"
#include "combo/readerio.hpp"
#include "combo/scoring.hpp"
#include "combo/sim.hpp"

namespace combo::cli {

namespace fs = std::filesystem;

Json default_config() {
  return Json{
      {"dataset", ""},
      {"out", "out"},
      {"cache", ""},
      {"matrices", ""},
      {"matchings", ""},
      {"strategy", "optimal"},
      {"scoring_mode", "cutoff"},
      {"variant", "pairwise"},
      {"budget", 0},
      {"seed", 0},
      {"workers", 4},
      {"strict", false},
      {"scorer", {{"backend", "lexical"}, {"url", ""}, {"token", ""}, {"store", ""}}},
      {"predictor", {{"backend", "sim"}, {"url", ""}, {"token", ""}, {"truth", ""}}},
      {"generator", {{"url", ""}, {"token", ""}, {"num_passages", 10}, {"mode", "auto"}}},
      {"retry", {{"attempts", 3}, {"backoff_ms", 200}}},
      {"sim",
       {{"num_questions", 1000},
        {"n", 10},
        {"m", 10},
        {"p_retrieved_evidential", 0.3},
        {"p_llm_hallucinated", 0.5},
        {"single_pivot", true},
        {"hop_type", "single_hop"},
        {"sweep", {0.0, 0.25, 0.5, 0.75, 1.0}}}},
      {"analyze", {{"predictions", Json::object()}, {"annotations", ""}}},
  };
}

namespace {

// ---------------------------------------------------------------------------
// Configuration plumbing

void collect_leaves(const Json& node, const std::string& prefix, std::vector<std::string>& out) {
  for (const auto& [key, value] : node.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object() && !value.empty()) {
      collect_leaves(value, path, out);
    } else {
      out.push_back(path);
    }
  }
}

Json::json_pointer pointer_for(const std::string& dotted) {
  std::string ptr;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) ptr += "/" + part;
  return Json::json_pointer(ptr);
}

std::string flag_for(const std::string& dotted) {
  std::string flag = "--" + dotted;
  std::replace(flag.begin(), flag.end(), '_', '-');
  return flag;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

Json parse_override(const Json& like, const std::string& key, const std::string& text) {
  try {
    switch (like.type()) {
      case Json::value_t::boolean:
        if (text == "true" || text == "1") return true;
        if (text == "false" || text == "0") return false;
        throw std::invalid_argument("expected true/false");
      case Json::value_t::number_integer:
      case Json::value_t::number_unsigned:
        return std::stoll(text);
      case Json::value_t::number_float:
        return std::stod(text);
      case Json::value_t::array: {
        Json arr = Json::array();
        for (const auto& item : split(text, ',')) arr.push_back(std::stod(item));
        return arr;
      }
      case Json::value_t::object: {
        Json obj = Json::object();
        for (const auto& item : split(text, ',')) {
          const auto eq = item.find('=');
          if (eq == std::string::npos) throw std::invalid_argument("expected name=value pairs");
          obj[item.substr(0, eq)] = item.substr(eq + 1);
        }
        return obj;
      }
      default:
        return text;
    }
  } catch (const std::exception& e) {
    throw std::invalid_argument("bad value for " + flag_for(key) + ": '" + text + "' (" + e.what() + ")");
  }
}

void merge_into(Json& base, const Json& patch, const std::string& prefix) {
  for (const auto& [key, value] : patch.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) throw std::invalid_argument("unknown config key '" + path + "'");
    if (base[key].is_object() && !base[key].empty() && value.is_object()) {
      merge_into(base[key], value, path);
    } else {
      base[key] = value;
    }
  }
}

}  // namespace

Json resolve_config(const fs::path& config_file, const std::map<std::string, std::string>& overrides) {
  Json cfg = default_config();
  for (const char* service : {"scorer", "predictor", "generator"}) {
    std::string upper(service);
    std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
    if (const char* url = std::getenv(("COMBO_" + upper + "_URL").c_str())) cfg[service]["url"] = url;
    if (const char* token = std::getenv(("COMBO_" + upper + "_TOKEN").c_str())) cfg[service]["token"] = token;
  }
  if (!config_file.empty()) {
    Json file;
    try {
      file = Json::parse(read_text_file(config_file));
    } catch (const Json::parse_error& e) {
      throw std::invalid_argument("config " + config_file.string() + ": " + e.what());
    }
    if (!file.is_object()) throw std::invalid_argument("config " + config_file.string() + " must be an object");
    merge_into(cfg, file, "");
  }
  const Json defaults = default_config();
  for (const auto& [key, text] : overrides) {
    const auto ptr = pointer_for(key);
    if (!defaults.contains(ptr)) throw std::invalid_argument("unknown config key '" + key + "'");
    cfg[ptr] = parse_override(defaults[ptr], key, text);
  }
  return cfg;
}

std::map<std::size_t, std::string> parallel_for(std::size_t count, std::size_t workers,
                                                const std::function<void(std::size_t)>& fn) {
  std::map<std::size_t, std::string> errors;
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next++;
      if (i >= count) return;
      try {
        fn(i);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(mu);
        errors.emplace(i, e.what());
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(workers, count));
  if (n_threads == 1) {
    worker();
    return errors;
  }
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return errors;
}

namespace {

// ---------------------------------------------------------------------------
// Pipeline context

class StrictFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Context {
  Json cfg;
  fs::path out_dir;
  std::ostream& out;
  std::size_t workers = 1;
  std::uint64_t seed = 0;
  bool strict = false;
  std::vector<Json> item_errors;

  Context(Json c, std::ostream& o) : cfg(std::move(c)), out(o) {
    out_dir = cfg["out"].get<std::string>();
    workers = static_cast<std::size_t>(std::max<long long>(1, cfg["workers"].get<long long>()));
    seed = cfg["seed"].get<std::uint64_t>();
    strict = cfg["strict"].get<bool>();
    fs::create_directories(out_dir);
  }

  fs::path path_or(const char* key, const char* fallback) const {
    const auto v = cfg[key].get<std::string>();
    return v.empty() ? out_dir / fallback : fs::path(v);
  }

  fs::path cache_dir() const { return path_or("cache", "cache"); }

  RetryPolicy retry() const {
    return {static_cast<int>(cfg["retry"]["attempts"].get<long long>()),
            std::chrono::milliseconds(cfg["retry"]["backoff_ms"].get<long long>())};
  }

  std::shared_ptr<JsonTransport> transport(const char* service) const {
    const auto url = cfg[service]["url"].get<std::string>();
    if (url.empty()) throw std::invalid_argument(std::string(service) + ".url is not set");
    return std::make_shared<HttpTransport>(url, cfg[service]["token"].get<std::string>());
  }

  void item_error(const std::string& stage, const std::string& question_id, const std::string& message) {
    item_errors.push_back(Json{{"stage", stage}, {"question_id", question_id}, {"error", message}});
  }

  std::vector<QAExample> load_dataset() {
    const auto path = cfg["dataset"].get<std::string>();
    if (path.empty()) throw std::invalid_argument("dataset is not set (--dataset)");
    auto report = load_examples(path);
    for (const auto& e : report.errors) item_error("ingest", path + ":" + std::to_string(e.line), e.message);
    for (const auto& flag : report.empty_pools)
      log_warning("question " + flag.question_id + " has an empty " + std::string(to_string(flag.pool)) + " pool");
    return std::move(report.examples);
  }

  // Writes the item error report and applies --strict.
  void finish(const std::string& stage) {
    write_jsonl(out_dir / (stage + "_errors.jsonl"), item_errors);
    out << stage << ": " << item_errors.size() << " item error(s)\n";
    if (strict && !item_errors.empty())
      throw StrictFailure(std::to_string(item_errors.size()) + " item error(s) in " + stage + " under --strict");
  }
};

std::shared_ptr<Scorer> make_scorer(const Context& ctx) {
  const auto backend = ctx.cfg["scorer"]["backend"].get<std::string>();
  std::shared_ptr<Scorer> inner;
  if (backend == "lexical") {
    inner = std::make_shared<LexicalMockScorer>();
  } else if (backend == "file") {
    const auto store = ctx.cfg["scorer"]["store"].get<std::string>();
    if (store.empty()) throw std::invalid_argument("scorer.store is required for the file backend");
    inner = std::make_shared<FileScoreStore>(store);
  } else if (backend == "remote") {
    inner = std::make_shared<RemoteScorer>(ctx.transport("scorer"), ctx.retry());
  } else {
    throw std::invalid_argument("unknown scorer backend '" + backend + "'");
  }
  return std::make_shared<CachedScorer>(inner, std::make_shared<ResponseCache>(ctx.cache_dir()));
}

struct PredictorHandle {
  std::shared_ptr<GroundTruth> truth;  // keeps the sim backend's truth alive
  std::shared_ptr<Predictor> predictor;
};

PredictorHandle make_predictor(const Context& ctx) {
  const auto backend = ctx.cfg["predictor"]["backend"].get<std::string>();
  PredictorHandle h;
  std::shared_ptr<Predictor> inner;
  if (backend == "sim") {
    const auto truth = ctx.cfg["predictor"]["truth"].get<std::string>();
    if (truth.empty()) throw std::invalid_argument("predictor.truth is required for the sim backend");
    h.truth = std::make_shared<GroundTruth>(load_truth(truth));
    inner = std::make_shared<SimPredictor>(*h.truth);
  } else if (backend == "remote") {
    inner = std::make_shared<RemotePredictor>(ctx.transport("predictor"), ctx.retry());
  } else {
    throw std::invalid_argument("unknown predictor backend '" + backend + "'");
  }
  h.predictor = std::make_shared<CachedPredictor>(inner, std::make_shared<ResponseCache>(ctx.cache_dir()));
  return h;
}

// ---------------------------------------------------------------------------
// Subcommands

void cmd_generate(Context& ctx) {
  auto examples = ctx.load_dataset();
  RemoteGenerator generator(ctx.transport("generator"), ctx.retry());
  const int n = static_cast<int>(ctx.cfg["generator"]["num_passages"].get<long long>());
  const auto mode_name = ctx.cfg["generator"]["mode"].get<std::string>();

  std::vector<std::vector<std::string>> skipped(examples.size());
  auto errors = parallel_for(examples.size(), ctx.workers, [&](std::size_t k) {
    auto& ex = examples[k];
    GenerationRequest req;
    req.question = ex.question;
    req.num_passages = n;
    req.mode = mode_name == "auto" ? (is_multi_hop(ex.hop_type) ? GenerationMode::MultiHopChain
                                                                 : GenerationMode::SingleHopBackground)
                                   : parse_generation_mode(mode_name);
    auto result = generate_passages(req, generator, ex.question_id);
    ex.generated = std::move(result.chains);
    skipped[k] = std::move(result.item_errors);
  });
  for (std::size_t k = 0; k < examples.size(); ++k) {
    for (const auto& msg : skipped[k]) ctx.item_error("generate", examples[k].question_id, msg);
    if (auto it = errors.find(k); it != errors.end()) ctx.item_error("generate", examples[k].question_id, it->second);
  }
  write_examples(ctx.out_dir / "corpus.generated.jsonl", examples);
  ctx.out << "generate: wrote " << examples.size() << " question(s) to " << (ctx.out_dir / "corpus.generated.jsonl").string()
          << '\n';
  ctx.finish("generate");
}

void cmd_score(Context& ctx) {
  const auto examples = ctx.load_dataset();
  const auto mode = parse_scoring_mode(ctx.cfg["scoring_mode"].get<std::string>());
  auto scorer = make_scorer(ctx);

  std::vector<MatrixBuild> builds(examples.size());
  auto errors = parallel_for(examples.size(), ctx.workers,
                             [&](std::size_t k) { builds[k] = build_matrix(examples[k], *scorer, mode); });

  std::vector<Json> records;
  std::size_t kept = 0, evid_calls = 0, cons_calls = 0;
  for (std::size_t k = 0; k < examples.size(); ++k) {
    if (auto it = errors.find(k); it != errors.end()) {
      ctx.item_error("score", examples[k].question_id, it->second);
      continue;
    }
    evid_calls += builds[k].evidentiality_calls;
    cons_calls += builds[k].consistency_calls;
    if (!builds[k].matrix) {
      ctx.item_error("score", examples[k].question_id, "matrix incomplete: " + builds[k].error);
      continue;
    }
    ++kept;
    for (auto& r : matrix_records(*builds[k].matrix)) records.push_back(std::move(r));
  }
  const auto path = ctx.path_or("matrices", "matrices.jsonl");
  write_jsonl(path, records);
  ctx.out << "score: " << kept << "/" << examples.size() << " matrices (" << evid_calls << " evidentiality, "
          << cons_calls << " consistency queries) -> " << path.string() << '\n';
  ctx.finish("score");
}

void cmd_match(Context& ctx) {
  const auto examples = ctx.load_dataset();
  const auto strategy = parse_match_strategy(ctx.cfg["strategy"].get<std::string>());
  const auto mode = parse_scoring_mode(ctx.cfg["scoring_mode"].get<std::string>());
  const auto matrices_path = ctx.path_or("matrices", "matrices.jsonl");

  std::unordered_map<std::string, CompatibilityMatrix> matrices;
  const bool need_matrices = strategy == MatchStrategy::Optimal || strategy == MatchStrategy::Greedy;
  if (need_matrices || (strategy == MatchStrategy::Random && fs::exists(matrices_path))) {
    for (auto& m : load_matrices(matrices_path, mode)) matrices.emplace(m.question_id(), std::move(m));
  }

  std::vector<std::optional<PairMatching>> results(examples.size());
  auto errors = parallel_for(examples.size(), ctx.workers, [&](std::size_t k) {
    const auto& ex = examples[k];
    const std::uint64_t item_seed = ctx.seed + k;
    auto it = matrices.find(ex.question_id);
    if (it != matrices.end() && (it->second.m() != ex.m() || it->second.n() != ex.n()))
      throw ProtocolError("matrix shape does not match the dataset pools");
    switch (strategy) {
      case MatchStrategy::Optimal:
      case MatchStrategy::Greedy: {
        if (it == matrices.end()) throw ProtocolError("no compatibility matrix");
        const auto graph = equalize_pools(it->second);
        results[k] = strategy == MatchStrategy::Optimal ? match_optimal(graph)
                                                        : match_greedy(graph, expand_pair_types(it->second, graph));
        break;
      }
      case MatchStrategy::Random: {
        PairMatching m = it != matrices.end() ? match_random(equalize_pools(it->second), item_seed)
                                              : match_random(ex.m(), ex.n(), item_seed);
        m.question_id = ex.question_id;
        results[k] = std::move(m);
        break;
      }
      case MatchStrategy::SameAnswerOracle:
        results[k] = match_same_answer(ex, item_seed);
        break;
    }
  });

  std::vector<Json> records;
  for (std::size_t k = 0; k < examples.size(); ++k) {
    if (auto it = errors.find(k); it != errors.end()) {
      ctx.item_error("match", examples[k].question_id, it->second);
      continue;
    }
    records.push_back(to_json(*results[k]));
  }
  const auto path = ctx.path_or("matchings", "matchings.jsonl");
  write_jsonl(path, records);
  ctx.out << "match: " << records.size() << " " << to_string(strategy) << " matching(s) -> " << path.string() << '\n';
  ctx.finish("match");
}

void cmd_serialize(Context& ctx) {
  const auto examples = ctx.load_dataset();
  const auto variant = parse_input_variant(ctx.cfg["variant"].get<std::string>());
  const auto budget_cfg = ctx.cfg["budget"].get<long long>();
  std::unordered_map<std::string, PairMatching> matchings;
  for (auto& m : load_matchings(ctx.path_or("matchings", "matchings.jsonl"))) matchings.emplace(m.question_id, std::move(m));

  std::vector<std::optional<ReaderExample>> results(examples.size());
  auto errors = parallel_for(examples.size(), ctx.workers, [&](std::size_t k) {
    const auto& ex = examples[k];
    auto it = matchings.find(ex.question_id);
    if (it == matchings.end()) throw ProtocolError("no matching");
    const std::size_t budget =
        budget_cfg > 0 ? static_cast<std::size_t>(budget_cfg) : default_budget(ex.hop_type, variant);
    results[k] = serialize_variant(ex, it->second, variant, budget, ctx.seed + k);
  });

  std::vector<Json> records;
  for (std::size_t k = 0; k < examples.size(); ++k) {
    if (auto it = errors.find(k); it != errors.end()) {
      ctx.item_error("serialize", examples[k].question_id, it->second);
      continue;
    }
    records.push_back(to_json(*results[k]));
  }
  const auto path = ctx.out_dir / "reader_input.jsonl";
  write_jsonl(path, records);
  ctx.out << "serialize: " << records.size() << " " << to_string(variant) << " example(s) -> " << path.string() << '\n';
  ctx.finish("serialize");
}

void cmd_mine(Context& ctx) {
  const auto examples = ctx.load_dataset();
  auto handle = make_predictor(ctx);

  std::vector<MiningResult> results(examples.size());
  auto errors = parallel_for(examples.size(), ctx.workers,
                             [&](std::size_t k) { results[k] = mine_question(examples[k], *handle.predictor); });

  std::vector<SilverLabel> labels;
  std::vector<Json> audit;
  MiningStats total;
  for (std::size_t k = 0; k < examples.size(); ++k) {
    if (auto it = errors.find(k); it != errors.end()) {
      ctx.item_error("mine", examples[k].question_id, it->second);
      continue;
    }
    const auto& r = results[k];
    total.predictor_calls += r.stats.predictor_calls;
    total.gated_pairs += r.stats.gated_pairs;
    total.third_fourth_calls += r.stats.third_fourth_calls;
    total.failures += r.stats.failures;
    for (const auto* set : {&r.evidentiality, &r.consistency}) {
      for (const auto& label : *set) {
        if (!label.note.empty()) ctx.item_error("mine", label.question_id, label.note);
        audit.push_back(to_json(label));
        labels.push_back(label);
      }
    }
  }
  write_jsonl(ctx.out_dir / "silver_labels.jsonl", audit);
  const auto counts = emit_training_records(labels, examples, ctx.out_dir);

  Json summary{{"predictor_calls", total.predictor_calls},
               {"gated_pairs", total.gated_pairs},
               {"third_fourth_calls", total.third_fourth_calls},
               {"failures", total.failures}};
  for (const auto& [kind, c] : counts) {
    summary[kind == ScoreKind::Evidentiality ? "evidentiality" : "consistency"] = {{"1", c.positive}, {"0", c.negative}};
  }
  write_text_file(ctx.out_dir / "mining_summary.json", summary.dump(2) + "\n");
  ctx.out << "mine: " << summary.dump() << '\n';
  ctx.finish("mine");
}

void cmd_analyze(Context& ctx) {
  const auto examples = ctx.load_dataset();
  std::vector<ConflictStats> stats;
  std::vector<Json> stat_records;
  for (const auto& ex : examples) {
    try {
      stats.push_back(conflicting_rate(ex));
      stat_records.push_back(to_json(stats.back()));
    } catch (const ContractViolation& e) {
      ctx.item_error("analyze", ex.question_id, e.what());
    }
  }
  write_jsonl(ctx.out_dir / "conflict_stats.jsonl", stat_records);
  double mean = 0.0;
  for (const auto& s : stats) mean += s.conflicting_rate;
  if (!stats.empty()) mean /= static_cast<double>(stats.size());
  ctx.out << "analyze: " << stats.size() << " question(s), mean conflicting rate " << mean << '\n';

  const auto& pred_files = ctx.cfg["analyze"]["predictions"];
  if (!pred_files.empty()) {
    MethodPredictions predictions;
    for (const auto& [method, path] : pred_files.items()) {
      auto ingest = ingest_predictions(path.get<std::string>());
      for (const auto& e : ingest.errors)
        ctx.item_error("analyze", path.get<std::string>() + ":" + std::to_string(e.line), e.message);
      predictions[method] = std::move(ingest.predictions);
    }
    const auto report = bin_report(stats, predictions, examples);
    write_jsonl(ctx.out_dir / "conflict_bins.jsonl", bin_report_records(report));
    write_text_file(ctx.out_dir / "conflict_bins.csv", bin_report_csv(report));
    ctx.out << format_bin_table(report);
  }

  const auto matrices_path = ctx.path_or("matrices", "matrices.jsonl");
  if (fs::exists(matrices_path)) {
    const auto mode = parse_scoring_mode(ctx.cfg["scoring_mode"].get<std::string>());
    const auto dist = pair_type_distribution(load_matrices(matrices_path, mode));
    write_text_file(ctx.out_dir / "pair_types.json", to_json(dist).dump(2) + "\n");
    ctx.out << "pair types: " << to_json(dist)["fractions"].dump() << '\n';
  }

  const auto annotations = ctx.cfg["analyze"]["annotations"].get<std::string>();
  if (!annotations.empty()) {
    std::vector<PairType> predicted, annotated;
    auto errs = for_each_jsonl(annotations, [&](const Json& j, std::size_t) {
      auto p = parse_pair_type(j.at("predicted").get<std::string>());
      auto a = parse_pair_type(j.at("annotated").get<std::string>());
      predicted.push_back(p);
      annotated.push_back(a);
    });
    for (const auto& e : errs) ctx.item_error("analyze", annotations + ":" + std::to_string(e.line), e.message);
    const auto cm = label_confusion(predicted, annotated);
    write_text_file(ctx.out_dir / "confusion.json", to_json(cm).dump(2) + "\n");
    ctx.out << "confusion accuracy: " << cm.accuracy << " over " << cm.total << " labels\n";
  }
  ctx.finish("analyze");
}

// ---------------------------------------------------------------------------
// Simulation suite

SynthSpec sim_spec(const Json& cfg, std::uint64_t seed) {
  const auto& s = cfg["sim"];
  SynthSpec spec;
  spec.num_questions = s["num_questions"].get<std::size_t>();
  spec.n = s["n"].get<std::size_t>();
  spec.m = s["m"].get<std::size_t>();
  spec.p_retrieved_evidential = s["p_retrieved_evidential"].get<double>();
  spec.p_llm_hallucinated = s["p_llm_hallucinated"].get<double>();
  spec.single_pivot = s["single_pivot"].get<bool>();
  spec.hop_type = parse_hop_type(s["hop_type"].get<std::string>());
  spec.seed = seed;
  return spec;
}

struct Check {
  std::string name;
  bool pass = false;
  Json detail;
};

Check check_mining_soundness(const SyntheticCorpus& corpus) {
  Check c{"mining-soundness", true, Json::object()};
  std::size_t tp = 0, fp = 0, fn = 0, call_violations = 0, skipped = 0;
  for (const auto& ex : corpus.examples) {
    if (ex.n() < 2) {
      ++skipped;
      continue;
    }
    auto counter = std::make_shared<CountingPredictor>(std::make_shared<SimPredictor>(corpus.truth));
    const auto result = mine_question(ex, *counter, {false, true});
    const auto& t = corpus.truth.question(ex.question_id);
    const auto evidential = std::count(t.retrieved_evidential.begin(), t.retrieved_evidential.end(), true);
    if (counter->calls() > ex.n() + 1 + 2 * result.stats.gated_pairs ||
        result.stats.third_fourth_calls > 2 * result.stats.gated_pairs)
      ++call_violations;
    for (const auto& label : result.consistency) {
      const bool pivotal = t.retrieved_evidential[label.rp_index] && evidential == 1;
      const bool faithful = t.generated_faithful[*label.lp_index];
      const Verdict expected = !pivotal ? Verdict::Undetermined : (faithful ? Verdict::Positive : Verdict::Negative);
      if (label.verdict == expected) {
        if (expected != Verdict::Undetermined) ++tp;
      } else {
        if (label.verdict != Verdict::Undetermined) ++fp;
        if (expected != Verdict::Undetermined) ++fn;
      }
    }
  }
  c.pass = fp == 0 && fn == 0 && call_violations == 0;
  c.detail = {{"true_positive", tp}, {"false_positive", fp}, {"false_negative", fn},
              {"call_bound_violations", call_violations}, {"skipped_questions", skipped}};
  return c;
}

std::pair<Check, Check> check_sweep(const Json& cfg, std::uint64_t seed) {
  Check mono{"conflict-monotonicity", true, Json::array()};
  Check trend{"optimal-vs-random-compatible-top", true, Json::array()};
  double prev = -1.0;
  LexicalMockScorer scorer;
  for (const auto& p : cfg["sim"]["sweep"]) {
    auto spec = sim_spec(cfg, seed);
    spec.p_llm_hallucinated = p.get<double>();
    const auto corpus = generate_corpus(spec);
    double mean = 0.0;
    std::size_t opt_top = 0, rnd_top = 0;
    for (std::size_t k = 0; k < corpus.examples.size(); ++k) {
      const auto& ex = corpus.examples[k];
      mean += conflicting_rate(ex).conflicting_rate;
      const auto build = build_matrix(ex, scorer, ScoringMode::Cutoff);
      const auto graph = equalize_pools(*build.matrix);
      const auto top_type = [&](const PairMatching& m) {
        const auto& top = m.pairs.front();
        return classify_pair(build.matrix->at(top.lp_index, top.rp_index));
      };
      opt_top += top_type(match_optimal(graph)) == PairType::Compatible;
      rnd_top += top_type(match_random(graph, seed + k)) == PairType::Compatible;
    }
    const double q = static_cast<double>(std::max<std::size_t>(1, corpus.examples.size()));
    mean /= q;
    if (mean < prev) mono.pass = false;
    prev = mean;
    if (opt_top < rnd_top) trend.pass = false;
    mono.detail.push_back({{"p_llm_hallucinated", p}, {"mean_conflicting_rate", mean}});
    trend.detail.push_back({{"p_llm_hallucinated", p},
                            {"optimal_compatible_top", static_cast<double>(opt_top) / q},
                            {"random_compatible_top", static_cast<double>(rnd_top) / q}});
  }
  return {mono, trend};
}

void cmd_simulate(Context& ctx) {
  const auto spec = sim_spec(ctx.cfg, ctx.seed);
  const auto corpus = generate_corpus(spec);
  write_examples(ctx.out_dir / "corpus.jsonl", corpus.examples);
  write_jsonl(ctx.out_dir / "truth.jsonl", truth_records(corpus.truth));

  std::vector<Check> checks;
  checks.push_back(check_mining_soundness(corpus));
  auto [mono, trend] = check_sweep(ctx.cfg, ctx.seed);
  checks.push_back(std::move(mono));
  checks.push_back(std::move(trend));

  const auto again = generate_corpus(spec);
  Check det{"determinism", again.examples == corpus.examples &&
                               truth_records(again.truth) == truth_records(corpus.truth),
            Json::object()};
  checks.push_back(std::move(det));

  Json report = Json::array();
  bool all = true;
  for (const auto& c : checks) {
    all = all && c.pass;
    ctx.out << (c.pass ? "PASS " : "FAIL ") << c.name << ' ' << c.detail.dump() << '\n';
    report.push_back({{"check", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  }
  write_text_file(ctx.out_dir / "simulate_report.json", report.dump(2) + "\n");
  ctx.out << "simulate: " << corpus.examples.size() << " question(s) -> " << (ctx.out_dir / "corpus.jsonl").string()
          << '\n';
  if (!all) throw StrictFailure("simulation soundness suite failed");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Merge retrieved and LLM-generated passages: score, match, mine, serialize, analyze."};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON configuration file");

  const Json defaults = default_config();
  std::vector<std::string> keys;
  collect_leaves(defaults, "", keys);
  std::map<std::string, std::string> values;
  for (const auto& k : keys) values[k];
  std::vector<std::pair<std::string, CLI::Option*>> options;
  bool strict_flag = false;
  for (const auto& k : keys) {
    if (k == "strict") {
      options.emplace_back(k, app.add_flag("--strict", strict_flag, "Fail the run on any per-item error"));
    } else {
      options.emplace_back(k, app.add_option(flag_for(k), values[k], "Overrides config key " + k));
    }
  }

  const std::vector<std::pair<std::string, std::function<void(Context&)>>> commands{
      {"generate", cmd_generate}, {"score", cmd_score},     {"match", cmd_match},      {"mine", cmd_mine},
      {"serialize", cmd_serialize}, {"analyze", cmd_analyze}, {"simulate", cmd_simulate}};
  const std::map<std::string, std::string> blurbs{
      {"generate", "Fill missing generated passages from the generator service"},
      {"score", "Score evidentiality and consistency into compatibility matrices"},
      {"match", "Pair generated and retrieved passages"},
      {"mine", "Mine silver consistency labels with the predictor"},
      {"serialize", "Write reader inputs from matchings"},
      {"analyze", "Conflict statistics, bin tables and pair-type breakdowns"},
      {"simulate", "Generate a synthetic corpus and run self checks"}};
  for (const auto& [name, fn] : commands) app.add_subcommand(name, blurbs.at(name))->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  std::string command;
  try {
    std::map<std::string, std::string> overrides;
    for (const auto& [k, opt] : options) {
      if (opt->count() == 0) continue;
      overrides[k] = k == "strict" ? (strict_flag ? "true" : "false") : values[k];
    }
    Context ctx(resolve_config(config_path, overrides), out);
    for (const auto& [name, fn] : commands) {
      if (app.got_subcommand(name)) {
        command = name;
        fn(ctx);
      }
    }
  } catch (const StrictFailure& e) {
    err << Json{{"error", e.what()}, {"kind", "item_errors"}, {"command", command}}.dump() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::string kind = "fatal";
    if (dynamic_cast<const std::invalid_argument*>(&e)) kind = "config";
    if (dynamic_cast<const IoError*>(&e)) kind = "io";
    if (dynamic_cast<const ProtocolError*>(&e)) kind = "protocol";
    if (dynamic_cast<const RetryableError*>(&e)) kind = "transport";
    if (dynamic_cast<const ContractViolation*>(&e)) kind = "contract";
    err << Json{{"error", e.what()}, {"kind", kind}, {"command", command}}.dump() << '\n';
    return 2;
  }
  return 0;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"combo"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace combo::cli
