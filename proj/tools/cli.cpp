#include "cli.hpp"

#include <atomic>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "cabs/divergence.hpp"
#include "cabs/lexicon.hpp"
#include "cabs/matching.hpp"
#include "cabs/mcq.hpp"
#include "cabs/metrics.hpp"
#include "cabs/reward_service.hpp"
#include "cabs/surface_metrics.hpp"
#include "cabs/text.hpp"

namespace cabs_eval::cli {

namespace {

struct LineFailure {
  std::size_t line = 0;
  Error error;
};

struct Options {
  std::string input = "-";
  std::string output = "-";
  std::string matcher = "lexical";
  std::string model;
  std::string endpoint;
  std::string cache_dir;
  std::optional<double> alpha;
  std::optional<double> gamma;
  std::optional<double> clip_eps;
  std::optional<double> beta;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  // subcommand specific
  std::string averaging = "macro";
  std::string format = "json";
  std::vector<std::string> edits;
  std::string scores;
  std::string matrix;
  std::string matrix_output;
  std::string predictions;
  std::string config;
  std::string bind;
  std::optional<int> port;
};

bool is_backend_error(ErrorCode c) {
  const int s = service::http_status_for(c);
  return s == 502 || s == 504;
}

void report_error(std::ostream& err, const Error& e, std::optional<std::size_t> line) {
  Json j = Json::object();
  j["error"] = error_code_name(e.code());
  j["path"] = e.path();
  if (line) j["line"] = *line;
  j["message"] = e.what();
  err << j.dump() << '\n';
}

std::string read_all(std::istream& in) {
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string read_source(const std::string& path, const Io& io) {
  if (path == "-") return read_all(*io.in);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return read_all(in);
}

struct Line {
  std::size_t number;
  std::string text;
};

std::vector<Line> jsonl_lines(const std::string& text) {
  std::vector<Line> out;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    out.push_back({n, line});
  }
  return out;
}

class Sink {
 public:
  Sink(const std::string& path, const Io& io) {
    if (path == "-") {
      out_ = io.out;
    } else {
      file_.open(path, std::ios::binary | std::ios::trunc);
      if (!file_) throw Error(ErrorCode::kIo, "cannot write " + path);
      out_ = &file_;
    }
  }
  std::ostream& operator*() { return *out_; }

 private:
  std::ofstream file_;
  std::ostream* out_ = nullptr;
};

// Order-preserving parallel map over input lines; the failure reported is
// the one on the earliest line.
template <typename F>
auto map_lines(const std::vector<Line>& lines, std::size_t jobs, F f)
    -> std::vector<decltype(f(std::declval<const Line&>(), std::size_t{}))> {
  using R = decltype(f(std::declval<const Line&>(), std::size_t{}));
  std::vector<std::optional<R>> results(lines.size());
  std::vector<std::exception_ptr> errors(lines.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < lines.size(); i = next++) {
      try {
        results[i] = f(lines[i], i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(jobs, lines.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  std::vector<R> out;
  out.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (errors[i]) {
      try {
        std::rethrow_exception(errors[i]);
      } catch (const Error& e) {
        throw LineFailure{lines[i].number, e};
      }
    }
    out.push_back(std::move(*results[i]));
  }
  return out;
}

// Judge client plus its cache; on scope exit the touched cache keys are
// committed to {cache_dir}/manifest.json so the run can be replayed.
struct Judge {
  std::shared_ptr<llm::ResponseCache> cache;
  std::shared_ptr<llm::LlmClient> client;
  std::filesystem::path manifest;

  Judge() = default;
  Judge(const Judge&) = delete;
  Judge& operator=(const Judge&) = delete;
  ~Judge() {
    if (!client || manifest.empty()) return;
    try {
      cache->write_manifest(manifest);
    } catch (const Error&) {
    }
  }
  llm::LlmClient* get() const { return client.get(); }
  explicit operator bool() const { return client != nullptr; }
};

std::unique_ptr<Judge> make_judge(const Options& o, const Io& io) {
  auto j = std::make_unique<Judge>();
  if (o.matcher != "llm") return j;
  if (o.endpoint.empty() || o.model.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "--matcher llm needs --endpoint and --model", "matcher");
  }
  llm::ModelConfig cfg;
  cfg.endpoint = o.endpoint;
  cfg.model = o.model;
  j->cache = std::make_shared<llm::ResponseCache>(o.cache_dir);
  j->client = std::make_shared<llm::LlmClient>(cfg, io.transport ? io.transport : llm::make_http_transport(), j->cache);
  if (!o.cache_dir.empty()) j->manifest = std::filesystem::path(o.cache_dir) / "manifest.json";
  return j;
}

RewardConfig reward_config(const Options& o) {
  RewardConfig cfg;
  if (o.alpha) cfg.alpha = *o.alpha;
  if (o.gamma) cfg.gamma = *o.gamma;
  validate(cfg);
  return cfg;
}

grpo::ObjectiveConfig objective_config(const Options& o) {
  grpo::ObjectiveConfig cfg;
  if (o.clip_eps) cfg.clip_epsilon = *o.clip_eps;
  if (o.beta) cfg.beta = *o.beta;
  grpo::validate(cfg);
  return cfg;
}

MatchBackend backend_of(const std::unique_ptr<Judge>& judge) { return MatchBackend{judge->get()}; }

ReportDecomposition gt_of(const CaseRecord& c, const MatchBackend& backend) {
  if (c.gt_units) return *c.gt_units;
  if (c.gt_report) return extract_units(*c.gt_report, backend);
  throw Error(ErrorCode::kSchemaViolation, "case needs gt_units or gt_report", "gt_units");
}

// ---------------------------------------------------------------------------

int cmd_extract(const Options& o, const Io& io) {
  auto judge = make_judge(o, io);
  const auto backend = backend_of(judge);
  const auto lines = jsonl_lines(read_source(o.input, io));
  auto out = map_lines(lines, o.jobs, [&](const Line& l, std::size_t) {
    CaseRecord c = parse_case_line(l.text);
    if (!c.gt_units && c.gt_report) c.gt_units = extract_units(*c.gt_report, backend);
    if (!c.pred_units && c.pred_report) {
      c.pred_units = trim(*c.pred_report).empty() ? ReportDecomposition{} : extract_units(*c.pred_report, backend);
    }
    return case_to_json(c).dump();
  });
  Sink sink(o.output, io);
  for (const auto& s : out) *sink << s << '\n';
  return kExitOk;
}

int cmd_eval(const Options& o, const Io& io) {
  Averaging mode;
  if (o.averaging == "macro") mode = Averaging::kMacro;
  else if (o.averaging == "micro") mode = Averaging::kMicro;
  else throw Error(ErrorCode::kInvalidArgument, "--averaging must be macro or micro", "averaging");
  auto judge = make_judge(o, io);
  const auto backend = backend_of(judge);
  const auto lines = jsonl_lines(read_source(o.input, io));
  if (lines.empty()) throw Error(ErrorCode::kEmptyCorpus, "input has no cases");
  struct CaseOut {
    std::string id;
    EvaluatedCase ec;
    MetricReport report;
  };
  auto cases = map_lines(lines, o.jobs, [&](const Line& l, std::size_t) {
    const CaseRecord c = parse_case_line(l.text);
    CaseOut r;
    r.id = c.case_id;
    r.ec.gt = gt_of(c, backend);
    Prediction pred;
    if (c.pred_units) pred = *c.pred_units;
    else if (c.pred_report) pred = *c.pred_report;
    else throw Error(ErrorCode::kSchemaViolation, "case needs pred_units or pred_report", "pred_units");
    r.ec.match = match_reports(r.ec.gt, pred, backend);
    r.report = evaluate(r.ec.match, r.ec.gt);
    return r;
  });
  std::vector<EvaluatedCase> evs;
  for (const auto& c : cases) evs.push_back(c.ec);
  const MetricReport agg = aggregate(evs, mode);
  Sink sink(o.output, io);
  if (o.format == "csv") {
    *sink << csv_header() << '\n';
    for (const auto& c : cases) *sink << csv_row(c.id, c.report) << '\n';
    *sink << csv_row("__aggregate_" + o.averaging, agg) << '\n';
  } else if (o.format == "json") {
    Json j = Json::object();
    Json per = Json::array();
    for (const auto& c : cases) {
      Json jc = Json::object();
      jc["case_id"] = c.id;
      jc["scores"] = report_to_json(c.report);
      per.push_back(std::move(jc));
    }
    j["cases"] = std::move(per);
    j["averaging"] = o.averaging;
    j["aggregate"] = report_to_json(agg);
    *sink << j.dump(2) << '\n';
  } else {
    throw Error(ErrorCode::kInvalidArgument, "--format must be json or csv", "format");
  }
  return kExitOk;
}

int cmd_reward(const Options& o, const Io& io) {
  service::ServiceConfig defaults;
  defaults.reward = reward_config(o);
  const auto objective = objective_config(o);
  auto judge = make_judge(o, io);
  const auto lines = jsonl_lines(read_source(o.input, io));
  auto out = map_lines(lines, o.jobs, [&](const Line& l, std::size_t) {
    Json j = schema::parse_json_text(l.text);
    // Optional policy-side inputs for the surrogate objective; not part of
    // the service request schema.
    std::optional<Json> ratios, kl;
    if (j.is_object() && j.contains("ratios")) {
      ratios = j["ratios"];
      j.erase("ratios");
    }
    if (j.is_object() && j.contains("kl")) {
      kl = j["kl"];
      j.erase("kl");
    }
    auto req = service::parse_group_request(j, defaults);
    if (o.matcher == "llm") req.matcher = service::MatcherKind::kLlm;
    const auto resp = service::handle_group_request(req, judge->get());
    Json out = service::response_to_json(resp);
    if (ratios) {
      if (!ratios->is_array() || ratios->size() != resp.scores.advantages.size()) {
        throw Error(ErrorCode::kSchemaViolation, "ratios must hold one number per rollout", "ratios");
      }
      std::vector<double> rs;
      for (std::size_t i = 0; i < ratios->size(); ++i) {
        if (!(*ratios)[i].is_number()) {
          throw Error(ErrorCode::kSchemaViolation, "expected number", schema::index_path("ratios", i));
        }
        rs.push_back((*ratios)[i].get<double>());
      }
      double kl_value = 0.0;
      if (kl) {
        if (!kl->is_number()) throw Error(ErrorCode::kSchemaViolation, "expected number", "kl");
        kl_value = kl->get<double>();
      }
      out["objective"] = {{"value", grpo::group_objective(rs, resp.scores.advantages, kl_value, objective)},
                          {"clip_epsilon", objective.clip_epsilon},
                          {"beta", objective.beta}};
    }
    return out.dump();
  });
  Sink sink(o.output, io);
  for (const auto& s : out) *sink << s << '\n';
  return kExitOk;
}

int cmd_perturb(const Options& o, const Io& io) {
  divergence::PerturbOptions popts;
  if (!o.edits.empty()) {
    popts.allowed.clear();
    for (const auto& e : o.edits) {
      auto k = divergence::edit_kind_from_label(e);
      if (!k) throw Error(ErrorCode::kInvalidArgument, "unknown edit kind '" + e + "'", "edits");
      popts.allowed.push_back(*k);
    }
  }
  auto judge = make_judge(o, io);
  const auto backend = backend_of(judge);
  const auto lines = jsonl_lines(read_source(o.input, io));
  auto out = map_lines(lines, o.jobs, [&](const Line& l, std::size_t i) {
    const CaseRecord c = parse_case_line(l.text);
    const auto pool = divergence::build_pool(c.case_id, gt_of(c, backend), derive_seed(*o.seed, i), popts);
    return divergence::pool_to_json(pool).dump();
  });
  Sink sink(o.output, io);
  for (const auto& s : out) *sink << s << '\n';
  return kExitOk;
}

int cmd_analyze(const Options& o, const Io& io) {
  const bool pools = o.input != "-" || o.matrix.empty();
  if (pools) {
    std::optional<surface::ScoreTable> external;
    if (!o.scores.empty()) external = surface::parse_score_csv(read_source(o.scores, io));
    const auto lines = jsonl_lines(read_source(o.input, io));
    auto scored = map_lines(lines, o.jobs, [&](const Line& l, std::size_t) {
      const auto pool = divergence::pool_from_json(schema::parse_json_text(l.text));
      return divergence::score_pool(pool, external ? &*external : nullptr);
    });
    const auto report = divergence::analyze_pools(scored);
    Sink sink(o.output, io);
    *sink << divergence::report_to_json(report).dump(2) << '\n';
  }
  if (!o.matrix.empty()) {
    const auto table = surface::parse_score_csv(read_source(o.matrix, io));
    const auto m = divergence::correlation_matrix(table);
    std::string target = o.matrix_output;
    if (target.empty()) target = pools ? "" : o.output;
    if (target.empty()) throw Error(ErrorCode::kInvalidArgument, "--matrix-output is required", "matrix_output");
    Sink sink(target, io);
    *sink << divergence::matrix_to_csv(m);
  }
  return kExitOk;
}

int cmd_mcq_build(const Options& o, const Io& io) {
  auto judge = make_judge(o, io);
  const auto backend = backend_of(judge);
  const auto lines = jsonl_lines(read_source(o.input, io));
  std::vector<std::pair<std::string, ReportDecomposition>> cases;
  for (const auto& l : lines) {
    try {
      const CaseRecord c = parse_case_line(l.text);
      cases.emplace_back(c.case_id, gt_of(c, backend));
    } catch (const Error& e) {
      throw LineFailure{l.number, e};
    }
  }
  const auto& lex = Lexicon::builtin();
  std::vector<std::string> corpus_names, lexicon_names, locations = lex.all_locations(),
                                                        attributes = lex.attributes();
  for (const auto& e : lex.entries()) lexicon_names.push_back(e.name);
  for (const auto& [id, d] : cases) {
    for (const auto& u : d.units()) {
      corpus_names.push_back(u.name);
      if (!u.location.empty()) locations.push_back(u.location);
      if (!u.attributes.empty()) attributes.push_back(u.attributes);
    }
  }
  auto out = map_lines(lines, o.jobs, [&](const Line&, std::size_t i) {
    const auto& [case_id, d] = cases[i];
    std::string text;
    for (std::size_t u = 0; u < d.size(); ++u) {
      const std::uint64_t seed = derive_seed(derive_seed(*o.seed, i), u);
      std::string neg;
      try {
        neg = mcq::sample_negative_name(d.units(), corpus_names, seed);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNoNegativeAvailable) throw;
        neg = mcq::sample_negative_name(d.units(), lexicon_names, seed);
      }
      const mcq::McqSet set = *judge ? mcq::build_mcq(d[u], neg, *judge->get())
                                    : mcq::build_mcq(d[u], neg, locations, attributes, seed);
      for (const auto& item : set.items) {
        mcq::McqRecord r{case_id, case_id + ":" + std::to_string(u) + ":" + std::string(mcq::to_string(item.type)),
                         item};
        text += mcq::record_to_json(r).dump();
        text += '\n';
      }
    }
    return text;
  });
  Sink sink(o.output, io);
  for (const auto& s : out) *sink << s;
  return kExitOk;
}

int cmd_mcq_score(const Options& o, const Io& io) {
  if (o.predictions.empty()) throw Error(ErrorCode::kInvalidArgument, "--predictions is required", "predictions");
  std::vector<mcq::McqRecord> records;
  for (const auto& l : jsonl_lines(read_source(o.input, io))) {
    try {
      records.push_back(mcq::record_from_json(schema::parse_json_text(l.text)));
    } catch (const Error& e) {
      throw LineFailure{l.number, e};
    }
  }
  std::map<std::string, std::string> preds;
  for (const auto& l : jsonl_lines(read_source(o.predictions, io))) {
    try {
      const Json j = schema::parse_json_text(l.text);
      schema::require_object(j, "");
      schema::reject_unknown_keys(j, {"item_id", "answer"}, "");
      const auto id = schema::require_string(j, "item_id", "");
      if (!preds.emplace(id, schema::require_string(j, "answer", "")).second) {
        throw Error(ErrorCode::kDuplicateKey, "duplicate prediction", id);
      }
    } catch (const Error& e) {
      throw LineFailure{l.number, e};
    }
  }
  const auto acc = mcq::score_mcq(records, preds);
  Sink sink(o.output, io);
  *sink << mcq::accuracy_to_json(acc).dump(2) << '\n';
  return kExitOk;
}

int cmd_serve(const Options& o, const Io& io) {
  service::ServiceConfig cfg = o.config.empty() ? service::ServiceConfig{} : service::load_config(o.config);
  cfg = service::apply_env_overrides(cfg);
  if (!o.bind.empty()) cfg.bind_address = o.bind;
  if (o.port) cfg.port = *o.port;
  if (!o.cache_dir.empty()) cfg.cache_dir = o.cache_dir;
  if (!o.endpoint.empty() || !o.model.empty()) {
    llm::ModelConfig m = cfg.judge.value_or(llm::ModelConfig{});
    if (!o.endpoint.empty()) m.endpoint = o.endpoint;
    if (!o.model.empty()) m.model = o.model;
    cfg.judge = m;
  }
  if (o.alpha) cfg.reward.alpha = *o.alpha;
  if (o.gamma) cfg.reward.gamma = *o.gamma;
  if (o.clip_eps) cfg.objective.clip_epsilon = *o.clip_eps;
  if (o.beta) cfg.objective.beta = *o.beta;
  validate(cfg.reward);
  grpo::validate(cfg.objective);
  service::RewardService svc(cfg, io.transport);
  Json j = {{"event", "listening"}, {"bind", cfg.bind_address}, {"port", cfg.port}};
  *io.err << j.dump() << std::endl;
  svc.run();
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, const Io& io) {
  Options o;
  CLI::App app{"Clinical abnormality benchmarking: evaluation, rewards and analyses"};
  app.name("cabs");
  app.require_subcommand(1);

  auto common = [&](CLI::App* s, bool with_judge) {
    s->add_option("--input", o.input, "input file, - for stdin");
    s->add_option("--output", o.output, "output file, - for stdout");
    s->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
    if (with_judge) {
      s->add_option("--matcher", o.matcher, "lexical or llm")->check(CLI::IsMember({"lexical", "llm"}));
      s->add_option("--model", o.model, "judge model name");
      s->add_option("--endpoint", o.endpoint, "chat-completions URL");
      s->add_option("--cache-dir", o.cache_dir, "judge response cache directory");
    }
  };

  auto* extract = app.add_subcommand("extract", "reports to abnormality decompositions");
  common(extract, true);
  auto* eval = app.add_subcommand("eval", "score predictions against ground truth");
  common(eval, true);
  eval->add_option("--averaging", o.averaging, "macro or micro")->check(CLI::IsMember({"macro", "micro"}));
  eval->add_option("--format", o.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  auto* reward = app.add_subcommand("reward", "group rewards and advantages");
  common(reward, true);
  reward->add_option("--alpha", o.alpha, "running-cost weight");
  reward->add_option("--gamma", o.gamma, "control-effort weight");
  reward->add_option("--clip-eps", o.clip_eps, "surrogate clip range");
  reward->add_option("--beta", o.beta, "KL weight");
  auto* perturb = app.add_subcommand("perturb", "counterfactual variant pools");
  common(perturb, true);
  perturb->add_option("--seed", o.seed, "base seed")->required();
  perturb->add_option("--edits", o.edits, "allowed edit kinds")->delimiter(',');
  auto* analyze = app.add_subcommand("analyze", "concordance and correlation analyses");
  common(analyze, false);
  analyze->add_option("--scores", o.scores, "external per-variant scores CSV");
  analyze->add_option("--matrix", o.matrix, "model x metric scores CSV for the Spearman matrix");
  analyze->add_option("--matrix-output", o.matrix_output, "matrix CSV destination");
  auto* mcq_cmd = app.add_subcommand("mcq", "multiple-choice items");
  mcq_cmd->require_subcommand(1);
  auto* mcq_build = mcq_cmd->add_subcommand("build", "items from decompositions");
  common(mcq_build, true);
  mcq_build->add_option("--seed", o.seed, "base seed")->required();
  auto* mcq_score = mcq_cmd->add_subcommand("score", "subtask accuracies");
  common(mcq_score, false);
  mcq_score->add_option("--predictions", o.predictions, "JSONL of {item_id, answer}")->required();
  auto* serve = app.add_subcommand("serve", "run the reward service");
  serve->add_option("--config", o.config, "service config JSON");
  serve->add_option("--bind", o.bind, "bind address");
  serve->add_option("--port", o.port, "port");
  serve->add_option("--model", o.model, "judge model name");
  serve->add_option("--endpoint", o.endpoint, "chat-completions URL");
  serve->add_option("--cache-dir", o.cache_dir, "judge response cache directory");
  serve->add_option("--alpha", o.alpha, "running-cost weight");
  serve->add_option("--gamma", o.gamma, "control-effort weight");
  serve->add_option("--clip-eps", o.clip_eps, "surrogate clip range");
  serve->add_option("--beta", o.beta, "KL weight");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    *io.out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    *io.out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    Json j = {{"error", "usage"}, {"path", ""}, {"message", e.what()}};
    *io.err << j.dump() << '\n';
    return kExitUsage;
  }

  try {
    if (*extract) return cmd_extract(o, io);
    if (*eval) return cmd_eval(o, io);
    if (*reward) return cmd_reward(o, io);
    if (*perturb) return cmd_perturb(o, io);
    if (*analyze) return cmd_analyze(o, io);
    if (*mcq_build) return cmd_mcq_build(o, io);
    if (*mcq_score) return cmd_mcq_score(o, io);
    if (*serve) return cmd_serve(o, io);
  } catch (const LineFailure& f) {
    report_error(*io.err, f.error, f.line);
    return is_backend_error(f.error.code()) ? kExitBackend : kExitInput;
  } catch (const Error& e) {
    report_error(*io.err, e, std::nullopt);
    return is_backend_error(e.code()) ? kExitBackend : kExitInput;
  } catch (const std::exception& e) {
    Json j = {{"error", "internal"}, {"path", ""}, {"message", e.what()}};
    *io.err << j.dump() << '\n';
    return kExitBackend;
  }
  return kExitUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  Io io{&std::cin, &std::cout, &std::cerr, nullptr};
  return run(args, io);
}

}  // namespace cabs_eval::cli
