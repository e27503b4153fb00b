#include "webtwin/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <thread>

#include "webtwin/prompts.hpp"
#include "webtwin/util.hpp"

namespace webtwin::harness {

using improve::IterationLedger;
using nlohmann::json;
using rollout::Trajectory;

namespace {

json parse_json_file(const std::filesystem::path& path) {
  json j = json::parse(util::read_file(path.string()), nullptr, false);
  if (j.is_discarded()) throw ConfigError("invalid JSON: " + path.string());
  return j;
}

// Applies one "a.b.c=value" override onto the raw config document.
void apply_override(json& doc, const std::string& expr) {
  size_t eq = expr.find('=');
  if (eq == std::string::npos) throw ConfigError("--set expects key=value, got: " + expr);
  std::string path_expr = expr.substr(0, eq);
  std::string value_text = expr.substr(eq + 1);

  json value = json::parse(value_text, nullptr, false);
  if (value.is_discarded()) value = value_text;  // plain string

  json* node = &doc;
  size_t pos = 0;
  while (true) {
    size_t dot = path_expr.find('.', pos);
    std::string key = path_expr.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (key.empty()) throw ConfigError("bad --set path: " + path_expr);
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    pos = dot + 1;
  }
}

// ${NAME} -> getenv(NAME); used for backend auth fields only.
std::string interpolate_env(const std::string& raw) {
  if (!util::starts_with(raw, "${") || raw.back() != '}') return raw;
  std::string name = raw.substr(2, raw.size() - 3);
  const char* value = std::getenv(name.c_str());
  return value ? value : "";
}

improve::JudgeKind judge_kind_from(const std::string& s, const std::string& where) {
  if (s == "rule") return improve::JudgeKind::Rule;
  if (s == "model") return improve::JudgeKind::Model;
  throw ConfigError("judge kind must be rule or model " + where);
}

}  // namespace

RunConfig load_config(const std::filesystem::path& config_file,
                      const std::vector<std::string>& overrides) {
  json doc = parse_json_file(config_file);
  for (const std::string& expr : overrides) apply_override(doc, expr);

  RunConfig cfg;
  cfg.config_dir = std::filesystem::absolute(config_file).parent_path();

  auto rel = [&cfg](const std::string& p) -> std::filesystem::path {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : cfg.config_dir / path;
  };

  if (!doc.contains("sites_dir")) throw ConfigError("config missing sites_dir");
  if (!doc.contains("tasks_file")) throw ConfigError("config missing tasks_file");
  if (!doc.contains("output_dir")) throw ConfigError("config missing output_dir");
  cfg.sites_dir = rel(doc["sites_dir"].get<std::string>());
  cfg.tasks_file = rel(doc["tasks_file"].get<std::string>());
  cfg.output_dir = std::filesystem::path(doc["output_dir"].get<std::string>());
  cfg.seed = doc.value("seed", 0);
  cfg.parallelism = doc.value("parallelism", 1);
  if (cfg.parallelism < 1) throw ConfigError("parallelism must be >= 1");

  if (!std::filesystem::is_directory(cfg.sites_dir))
    throw ConfigError("sites_dir does not exist: " + cfg.sites_dir.string());
  if (!std::filesystem::exists(cfg.tasks_file))
    throw ConfigError("tasks_file does not exist: " + cfg.tasks_file.string());

  const json backends_doc = doc.value("backends", json::object());
  for (const auto& [role, spec_json] : backends_doc.items()) {
    backend::BackendSpec spec;
    std::string kind = spec_json.value("kind", "");
    if (kind == "replay") {
      spec.kind = backend::BackendKind::Replay;
      if (!spec_json.contains("script"))
        throw ConfigError("replay backend '" + role + "' missing script");
      spec.script_path = rel(spec_json["script"].get<std::string>()).string();
      if (!std::filesystem::exists(spec.script_path))
        throw ConfigError("replay script does not exist: " + spec.script_path);
    } else if (kind == "remote") {
      spec.kind = backend::BackendKind::Remote;
      spec.endpoint = spec_json.value("endpoint", "");
      if (spec.endpoint.empty()) throw ConfigError("remote backend '" + role + "' missing endpoint");
      spec.model = spec_json.value("model", "");
      spec.auth_token = interpolate_env(spec_json.value("auth", ""));
      spec.retry.max_attempts = spec_json.value("max_attempts", 3);
      spec.retry.backoff_ms = spec_json.value("backoff_ms", 50);
    } else {
      throw ConfigError("backend '" + role + "' kind must be replay or remote");
    }
    cfg.backends[role] = spec;
  }

  if (doc.contains("rollout")) {
    const json& r = doc["rollout"];
    cfg.rollout.k_obs = r.value("k_obs", cfg.rollout.k_obs);
    cfg.rollout.step_limit = r.value("step_limit", cfg.rollout.step_limit);
    cfg.rollout.synthetic_max_steps = r.value("synthetic_max_steps", cfg.rollout.synthetic_max_steps);
    cfg.rollout.policy_temperature = r.value("policy_temperature", cfg.rollout.policy_temperature);
    cfg.rollout.max_malformed_retries =
        r.value("max_malformed_retries", cfg.rollout.max_malformed_retries);
    cfg.rollout.policy_max_tokens = r.value("policy_max_tokens", cfg.rollout.policy_max_tokens);
    cfg.rollout.world_max_tokens = r.value("world_max_tokens", cfg.rollout.world_max_tokens);
    if (cfg.rollout.k_obs < 1 || cfg.rollout.step_limit < 1 || cfg.rollout.synthetic_max_steps < 1)
      throw ConfigError("rollout limits must be positive");
  }

  if (doc.contains("wmla")) {
    const json& w = doc["wmla"];
    cfg.wmla.k = w.value("k", cfg.wmla.k);
    cfg.wmla.d = w.value("d", cfg.wmla.d);
    cfg.wmla.explore_temperature = w.value("explore_temperature", cfg.wmla.explore_temperature);
    if (cfg.wmla.k < 1 || cfg.wmla.d < 1) throw ConfigError("wmla.k and wmla.d must be >= 1");
    std::string scorer = w.value("scorer", "rule");
    if (scorer == "rule") cfg.wmla.scorer_kind = wmla::WmlaConfig::ScorerKind::Rule;
    else if (scorer == "model") cfg.wmla.scorer_kind = wmla::WmlaConfig::ScorerKind::Model;
    else throw ConfigError("wmla.scorer must be rule or model");
    if (w.contains("tasks_file")) cfg.wmla_tasks_file = rel(w["tasks_file"].get<std::string>());
  }
  if (cfg.wmla_tasks_file.empty()) cfg.wmla_tasks_file = cfg.tasks_file;

  if (doc.contains("judge")) {
    const json& j = doc["judge"];
    if (j.contains("collect"))
      cfg.collect_judge = judge_kind_from(j["collect"].get<std::string>(), "(judge.collect)");
    if (j.contains("synthesize"))
      cfg.synthesize_judge =
          judge_kind_from(j["synthesize"].get<std::string>(), "(judge.synthesize)");
  }
  if (doc.contains("emit")) cfg.emit_distill = doc["emit"].value("distill", cfg.emit_distill);
  if (doc.contains("wm_eval"))
    cfg.wm_eval_max_depth = doc["wm_eval"].value("max_depth", cfg.wm_eval_max_depth);
  if (doc.contains("logging"))
    cfg.backend_audit = doc["logging"].value("backend_audit", cfg.backend_audit);

  return cfg;
}

BackendSet make_backends(const RunConfig& cfg, const std::vector<std::string>& roles) {
  BackendSet set;
  std::shared_ptr<backend::AuditLog> audit;

  auto build = [&](const std::string& role) -> std::shared_ptr<backend::TextBackend> {
    auto it = cfg.backends.find(role);
    if (it == cfg.backends.end())
      throw ConfigError("this command requires a '" + role + "' backend in the config");
    return backend::make_backend(it->second, audit);
  };

  if (cfg.backend_audit) {
    std::filesystem::create_directories(cfg.output_dir / "audit");
    audit = std::make_shared<backend::AuditLog>((cfg.output_dir / "audit" / "backends.jsonl").string());
    set.audit = audit;
  }

  for (const std::string& role : roles) {
    if (role == "policy") set.policy = build(role);
    else if (role == "world") set.world = build(role);
    else if (role == "judge") set.judge = build(role);
    else if (role == "scorer") set.scorer = build(role);
  }
  return set;
}

json report_to_json(const RunReport& report) {
  json counts = json::object();
  for (const auto& [key, value] : report.counts) counts[key] = value;
  json rates = json::object();
  for (const auto& [key, value] : report.success_rate) rates[key] = value;
  json out = {
      {"command", report.command},
      {"counts", counts},
      {"success_rate", rates},
      {"failures", report.failures},
  };
  if (!report.extra.is_null()) out["extra"] = report.extra;
  return out;
}

void write_report(const RunConfig& cfg, const RunReport& report) {
  std::filesystem::create_directories(cfg.output_dir / "reports");
  util::write_file((cfg.output_dir / "reports" / (report.command + ".json")).string(),
                   report_to_json(report).dump(2) + "\n");
}

std::filesystem::path ledger_path(const RunConfig& cfg, int iteration) {
  char name[32];
  std::snprintf(name, sizeof name, "iter_%04d.json", iteration);
  return cfg.output_dir / "ledger" / name;
}

std::optional<int> latest_ledger_iteration(const RunConfig& cfg) {
  std::filesystem::path dir = cfg.output_dir / "ledger";
  if (!std::filesystem::is_directory(dir)) return std::nullopt;
  std::optional<int> latest;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::string name = entry.path().filename().string();
    if (name.size() == 14 && util::starts_with(name, "iter_") && util::ends_with(name, ".json")) {
      int n = std::atoi(name.substr(5, 4).c_str());
      if (!latest || n > *latest) latest = n;
    }
  }
  return latest;
}

IterationLedger load_ledger(const RunConfig& cfg, int iteration) {
  return improve::ledger_from_json(parse_json_file(ledger_path(cfg, iteration)));
}

void save_ledger(const RunConfig& cfg, const IterationLedger& ledger) {
  std::filesystem::path path = ledger_path(cfg, ledger.iteration);
  std::filesystem::create_directories(path.parent_path());
  util::write_file(path.string(), improve::ledger_to_json(ledger).dump(2) + "\n");
}

namespace {

std::string run_id_of(const RunConfig& cfg) { return "seed" + std::to_string(cfg.seed); }

// Runs fn(i) for i in [0, n) on `parallelism` workers; results land in index
// order so downstream writes stay deterministic.
template <typename Result, typename Fn>
std::vector<Result> ordered_parallel(int n, int parallelism, Fn fn) {
  std::vector<Result> results(static_cast<size_t>(n));
  if (parallelism <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) results[static_cast<size_t>(i)] = fn(i);
    return results;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> workers;
  int worker_count = std::min(parallelism, n);
  std::vector<std::exception_ptr> errors(static_cast<size_t>(worker_count));
  for (int w = 0; w < worker_count; ++w) {
    workers.emplace_back([&, w] {
      try {
        while (true) {
          int i = next.fetch_add(1);
          if (i >= n) break;
          results[static_cast<size_t>(i)] = fn(i);
        }
      } catch (...) {
        errors[static_cast<size_t>(w)] = std::current_exception();
      }
    });
  }
  for (std::thread& t : workers) t.join();
  for (std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

struct TaskRun {
  std::optional<Trajectory> trajectory;
  std::string error;
};

void tally_success(RunReport& report, const std::vector<simweb::TaskSpec>& tasks,
                   const std::vector<TaskRun>& runs) {
  std::map<std::string, std::pair<int, int>> by_tag;  // tag -> (accepted, total)
  for (size_t i = 0; i < tasks.size(); ++i) {
    auto& [accepted, total] = by_tag[tasks[i].tag];
    ++total;
    if (runs[i].trajectory && runs[i].trajectory->judge_verdict &&
        runs[i].trajectory->judge_verdict->accepted)
      ++accepted;
  }
  for (const auto& [tag, counts] : by_tag)
    report.success_rate[tag] =
        counts.second == 0 ? 0.0 : static_cast<double>(counts.first) / counts.second;
}

}  // namespace

RunReport cmd_collect(const RunConfig& cfg, const BackendSet& backends) {
  auto start = std::chrono::steady_clock::now();
  if (!backends.policy) throw ConfigError("collect requires a policy backend");

  std::map<std::string, simweb::SiteSpec> sites = simweb::load_sites(cfg.sites_dir);
  std::vector<simweb::TaskSpec> tasks = simweb::load_tasks(cfg.tasks_file);

  IterationLedger ledger;
  if (auto latest = latest_ledger_iteration(cfg)) ledger = load_ledger(cfg, *latest);
  if (ledger.query_pool.empty())
    for (const simweb::TaskSpec& task : tasks) ledger.query_pool.push_back(task.id);
  int iteration = ledger.iteration + 1;

  improve::JudgeSpec judge{cfg.collect_judge, backends.judge};
  if (cfg.collect_judge == improve::JudgeKind::Model && !backends.judge)
    throw ConfigError("collect with a model judge requires a judge backend");

  std::vector<TaskRun> runs = ordered_parallel<TaskRun>(
      static_cast<int>(tasks.size()), cfg.parallelism, [&](int i) {
        const simweb::TaskSpec& task = tasks[static_cast<size_t>(i)];
        TaskRun run;
        auto site = sites.find(task.site);
        if (site == sites.end()) {
          run.error = "unknown site: " + task.site;
          return run;
        }
        char traj_id[128];
        std::snprintf(traj_id, sizeof traj_id, "i%04d-real-%s", iteration, task.id.c_str());
        try {
          Trajectory t = rollout::run_real(task, site->second, *backends.policy, cfg.rollout,
                                           run_id_of(cfg), traj_id, iteration);
          t.judge_verdict = improve::judge_trajectory(t, judge, sites);
          run.trajectory = std::move(t);
        } catch (const rollout::RolloutError& e) {
          Trajectory partial = e.partial();
          partial.terminated_reason = "env_error";
          run.trajectory = std::move(partial);
          run.error = e.what();
        }
        return run;
      });

  char file_name[64];
  std::snprintf(file_name, sizeof file_name, "iter_%04d_real.jsonl", iteration);
  std::filesystem::path rel_file = std::filesystem::path("trajectories") / file_name;
  rollout::TrajectoryWriter writer(cfg.output_dir / rel_file);

  std::vector<Trajectory> accepted;
  long steps = 0;
  RunReport report;
  report.command = "collect";
  for (const TaskRun& run : runs) {
    if (!run.error.empty()) {
      ++report.failures;
      std::cerr << "collect: " << run.error << "\n";
    }
    if (!run.trajectory) continue;
    writer.append(*run.trajectory);
    steps += static_cast<long>(run.trajectory->steps.size());
    if (run.trajectory->judge_verdict && run.trajectory->judge_verdict->accepted)
      accepted.push_back(*run.trajectory);
  }

  IterationLedger next = improve::advance_iteration(ledger, accepted);
  next.trajectory_files.push_back(rel_file.generic_string());
  save_ledger(cfg, next);

  report.counts["tasks"] = static_cast<long>(tasks.size());
  report.counts["trajectories"] = static_cast<long>(runs.size()) - report.failures;
  report.counts["accepted"] = static_cast<long>(accepted.size());
  report.counts["steps"] = steps;
  report.counts["iteration"] = iteration;
  tally_success(report, tasks, runs);
  report.wall_clock_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - start)
                             .count();
  write_report(cfg, report);
  return report;
}

RunReport cmd_synthesize(const RunConfig& cfg, const BackendSet& backends) {
  auto start = std::chrono::steady_clock::now();
  if (!backends.policy) throw ConfigError("synthesize requires a policy backend");
  if (!backends.world) throw ConfigError("synthesize requires a world backend");

  auto latest = latest_ledger_iteration(cfg);
  if (!latest) throw ConfigError("NoLedger: run collect before synthesize");
  IterationLedger ledger = load_ledger(cfg, *latest);

  std::map<std::string, simweb::SiteSpec> sites = simweb::load_sites(cfg.sites_dir);
  std::vector<simweb::TaskSpec> pool = simweb::load_tasks(cfg.tasks_file);
  std::vector<simweb::TaskSpec> queries = improve::select_synthesis_queries(ledger, pool);
  int iteration = ledger.iteration + 1;

  improve::JudgeSpec judge{cfg.synthesize_judge, backends.judge};
  if (cfg.synthesize_judge == improve::JudgeKind::Model && !backends.judge)
    throw ConfigError("synthesize with a model judge requires a judge backend");

  std::vector<TaskRun> runs = ordered_parallel<TaskRun>(
      static_cast<int>(queries.size()), cfg.parallelism, [&](int i) {
        const simweb::TaskSpec& task = queries[static_cast<size_t>(i)];
        TaskRun run;
        auto site = sites.find(task.site);
        if (site == sites.end()) {
          run.error = "unknown site: " + task.site;
          return run;
        }
        simweb::EnvSession session(site->second, task.start_page, cfg.rollout.step_limit);
        simweb::Observation seed = session.reset().observation;
        char traj_id[128];
        std::snprintf(traj_id, sizeof traj_id, "i%04d-synth-%s", iteration, task.id.c_str());
        try {
          Trajectory t =
              rollout::run_synthetic(task, seed, *backends.policy, *backends.world, cfg.rollout,
                                     run_id_of(cfg), traj_id, iteration);
          t.judge_verdict = improve::judge_trajectory(t, judge, sites);
          run.trajectory = std::move(t);
        } catch (const rollout::RolloutError& e) {
          Trajectory partial = e.partial();
          partial.terminated_reason = "env_error";
          run.trajectory = std::move(partial);
          run.error = e.what();
        }
        return run;
      });

  char file_name[64];
  std::snprintf(file_name, sizeof file_name, "iter_%04d_synthetic.jsonl", iteration);
  std::filesystem::path rel_file = std::filesystem::path("trajectories") / file_name;
  rollout::TrajectoryWriter writer(cfg.output_dir / rel_file);

  std::vector<Trajectory> accepted;
  RunReport report;
  report.command = "synthesize";
  for (const TaskRun& run : runs) {
    if (!run.error.empty()) {
      ++report.failures;
      std::cerr << "synthesize: " << run.error << "\n";
    }
    if (!run.trajectory) continue;
    writer.append(*run.trajectory);
    if (run.trajectory->judge_verdict && run.trajectory->judge_verdict->accepted)
      accepted.push_back(*run.trajectory);
  }

  IterationLedger next = improve::advance_iteration(ledger, accepted);
  next.trajectory_files.push_back(rel_file.generic_string());
  save_ledger(cfg, next);

  report.counts["tasks"] = static_cast<long>(queries.size());
  report.counts["trajectories"] = static_cast<long>(runs.size()) - report.failures;
  report.counts["accepted"] = static_cast<long>(accepted.size());
  report.counts["iteration"] = iteration;
  tally_success(report, queries, runs);
  report.wall_clock_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - start)
                             .count();
  write_report(cfg, report);
  return report;
}

namespace {

// Accepted trajectories in ledger order.
std::vector<Trajectory> load_accepted(const RunConfig& cfg, const IterationLedger& ledger) {
  std::map<std::string, Trajectory> by_id;
  std::set<std::string> wanted(ledger.accepted.begin(), ledger.accepted.end());
  for (const std::string& rel : ledger.trajectory_files) {
    std::filesystem::path path = cfg.output_dir / rel;
    if (!std::filesystem::exists(path)) continue;
    rollout::TrajectoryReader reader(path);
    while (auto t = reader.next())
      if (wanted.count(t->trajectory_id)) by_id[t->trajectory_id] = std::move(*t);
  }
  std::vector<Trajectory> out;
  for (const std::string& id : ledger.accepted) {
    auto it = by_id.find(id);
    if (it != by_id.end()) out.push_back(it->second);
  }
  return out;
}

}  // namespace

RunReport cmd_emit(const RunConfig& cfg, const BackendSet& backends, const std::string& role) {
  auto start = std::chrono::steady_clock::now();
  if (role != "policy" && role != "world") throw ConfigError("emit role must be policy or world");

  auto latest = latest_ledger_iteration(cfg);
  if (!latest) throw ConfigError("EmptyLedger: nothing collected yet");
  IterationLedger ledger = load_ledger(cfg, *latest);
  if (ledger.accepted.empty()) throw ConfigError("EmptyLedger: no accepted trajectories");

  std::vector<Trajectory> accepted = load_accepted(cfg, ledger);

  std::vector<improve::SftRecord> records;
  if (role == "policy") {
    records = improve::emit_policy_sft(accepted, cfg.rollout.k_obs);
  } else {
    improve::WorldSftOptions options;
    if (cfg.emit_distill) {
      if (!backends.policy)
        throw ConfigError("emit --role world with distillation requires a policy backend");
      options.distiller = backends.policy.get();
    }
    records = improve::emit_world_sft(accepted, options);
  }

  char file_name[64];
  std::snprintf(file_name, sizeof file_name, "%s_iter%04d.jsonl", role.c_str(), ledger.iteration);
  std::filesystem::path rel_file = std::filesystem::path("datasets") / file_name;
  std::filesystem::create_directories(cfg.output_dir / "datasets");
  std::string payload;
  for (const improve::SftRecord& record : records) {
    payload += improve::sft_record_to_json(record).dump();
    payload += '\n';
  }
  util::write_file((cfg.output_dir / rel_file).string(), payload);

  std::string rel_name = rel_file.generic_string();
  if (std::find(ledger.dataset_files.begin(), ledger.dataset_files.end(), rel_name) ==
      ledger.dataset_files.end()) {
    ledger.dataset_files.push_back(rel_name);
    save_ledger(cfg, ledger);
  }

  RunReport report;
  report.command = "emit_" + role;
  report.counts["accepted"] = static_cast<long>(accepted.size());
  report.counts["records"] = static_cast<long>(records.size());
  report.counts["iteration"] = ledger.iteration;
  report.wall_clock_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - start)
                             .count();
  write_report(cfg, report);
  return report;
}

RunReport cmd_wmla(const RunConfig& cfg, const BackendSet& backends) {
  auto start = std::chrono::steady_clock::now();
  if (!backends.policy) throw ConfigError("wmla requires a policy backend");
  if (!backends.world) throw ConfigError("wmla requires a world backend");
  if (cfg.wmla.scorer_kind == wmla::WmlaConfig::ScorerKind::Model && !backends.scorer)
    throw ConfigError("wmla with a model scorer requires a scorer backend");

  std::map<std::string, simweb::SiteSpec> sites = simweb::load_sites(cfg.sites_dir);
  std::vector<simweb::TaskSpec> tasks = simweb::load_tasks(cfg.wmla_tasks_file);

  rollout::RolloutConfig rollout_cfg = cfg.rollout;
  rollout_cfg.strict_world_observations = true;

  std::filesystem::path rel_file = std::filesystem::path("trajectories") / "lookahead.jsonl";
  rollout::TrajectoryWriter writer(cfg.output_dir / rel_file);

  RunReport report;
  report.command = "wmla";
  std::vector<TaskRun> runs(tasks.size());

  for (size_t i = 0; i < tasks.size(); ++i) {
    const simweb::TaskSpec& task = tasks[i];
    auto site = sites.find(task.site);
    if (site == sites.end()) {
      runs[i].error = "unknown site: " + task.site;
      ++report.failures;
      continue;
    }
    wmla::Backends set;
    set.policy = backends.policy.get();
    set.world = backends.world.get();
    set.scorer = backends.scorer ? backends.scorer.get() : nullptr;

    std::filesystem::create_directories(cfg.output_dir / "audit");
    wmla::AuditWriter audit(cfg.output_dir / "audit" / ("wmla_" + task.id + ".jsonl"));
    char traj_id[128];
    std::snprintf(traj_id, sizeof traj_id, "wmla-%s", task.id.c_str());
    try {
      Trajectory t = wmla::run_with_lookahead(task, site->second, set, cfg.wmla, rollout_cfg,
                                              &audit, run_id_of(cfg), traj_id, 0);
      improve::JudgeSpec judge{improve::JudgeKind::Rule, nullptr};
      t.judge_verdict = improve::judge_trajectory(t, judge, sites);
      writer.append(t);
      runs[i].trajectory = std::move(t);
    } catch (const std::runtime_error& e) {
      runs[i].error = e.what();
      ++report.failures;
      std::cerr << "wmla: task " << task.id << ": " << e.what() << "\n";
    }
  }

  long accepted = 0;
  for (const TaskRun& run : runs)
    if (run.trajectory && run.trajectory->judge_verdict && run.trajectory->judge_verdict->accepted)
      ++accepted;

  report.counts["tasks"] = static_cast<long>(tasks.size());
  report.counts["accepted"] = accepted;
  report.counts["k"] = cfg.wmla.k;
  report.counts["d"] = cfg.wmla.d;
  tally_success(report, tasks, runs);
  report.wall_clock_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - start)
                             .count();
  write_report(cfg, report);
  return report;
}

RunReport cmd_wm_eval(const RunConfig& cfg, const BackendSet& backends) {
  auto start = std::chrono::steady_clock::now();
  if (!backends.world) throw ConfigError("wm-eval requires a world backend");
  if (!backends.judge) throw ConfigError("wm-eval requires a judge backend");

  auto latest = latest_ledger_iteration(cfg);
  if (!latest) throw ConfigError("InsufficientGroundTruth: no ledger; run collect first");
  IterationLedger ledger = load_ledger(cfg, *latest);
  std::vector<Trajectory> accepted = load_accepted(cfg, ledger);

  std::vector<Trajectory> ground_truth;
  for (Trajectory& t : accepted)
    if (t.source == rollout::Source::Real && t.steps.size() >= 2)
      ground_truth.push_back(std::move(t));
  if (ground_truth.empty())
    throw ConfigError("InsufficientGroundTruth: no accepted real trajectory with 2+ steps");

  std::vector<improve::IntrinsicSample> samples;
  json sample_log = json::array();

  for (const Trajectory& t : ground_truth) {
    // Replay the real actions but substitute generated observations, one
    // chain per trajectory seeded at the first observation.
    std::vector<agent::Step> rolled;
    simweb::Observation current = t.steps[0].observation;
    int max_depth = std::min(static_cast<int>(t.steps.size()) - 1, cfg.wm_eval_max_depth);

    for (int j = 1; j <= max_depth; ++j) {
      const agent::Step& real = t.steps[static_cast<size_t>(j - 1)];
      agent::Step acting;
      acting.observation = current;
      acting.thought = real.thought;
      acting.action = real.action;

      agent::WorldContext ctx = agent::build_world_context(
          rolled, current, acting.action, agent::WorldContext::OutputMode::Axtree);
      backend::GenRequest req =
          agent::render_world_prompt(ctx, 0.0, cfg.rollout.world_max_tokens);
      agent::WorldPrediction pred = agent::parse_world_output(backends.world->generate(req).text);
      if (pred.terminal) break;

      const std::string& gt_tree = t.steps[static_cast<size_t>(j)].observation.axtree;
      std::string predicted_tree =
          pred.observation.axtree.empty() ? pred.raw_observation : pred.observation.axtree;
      samples.push_back({predicted_tree, gt_tree, j});
      sample_log.push_back({{"trajectory_id", t.trajectory_id},
                            {"depth", j},
                            {"predicted", predicted_tree},
                            {"ground_truth", gt_tree}});

      acting.wm_thought = pred.rationale;
      rolled.push_back(std::move(acting));
      current = pred.observation;
    }
  }

  if (samples.empty()) throw ConfigError("InsufficientGroundTruth: no prediction samples");

  std::filesystem::create_directories(cfg.output_dir / "wm_eval");
  std::string log_payload;
  for (const json& entry : sample_log) {
    log_payload += entry.dump();
    log_payload += '\n';
  }
  util::write_file((cfg.output_dir / "wm_eval" / "samples.jsonl").string(), log_payload);

  improve::IntrinsicReport intrinsic = improve::intrinsic_eval(samples, *backends.judge);

  RunReport report;
  report.command = "wm_eval";
  report.counts["ground_truth_trajectories"] = static_cast<long>(ground_truth.size());
  report.counts["samples"] = static_cast<long>(samples.size());
  report.extra = improve::intrinsic_report_to_json(intrinsic);
  report.wall_clock_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - start)
                             .count();
  write_report(cfg, report);
  return report;
}

namespace {

long count_lines(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return -1;
  std::ifstream in(path);
  long n = 0;
  std::string line;
  while (std::getline(in, line))
    if (!util::trim(line).empty()) ++n;
  return n;
}

}  // namespace

int cmd_report(const RunConfig& cfg, std::string* summary_out) {
  int mismatches = 0;
  std::string summary;

  auto check = [&](const std::string& what, long expected, long actual) {
    bool ok = expected == actual;
    if (!ok) ++mismatches;
    summary += (ok ? "  ok: " : "  MISMATCH: ") + what + " stored=" + std::to_string(expected) +
               " derived=" + std::to_string(actual) + "\n";
  };

  std::filesystem::path reports = cfg.output_dir / "reports";
  if (!std::filesystem::is_directory(reports)) {
    if (summary_out) *summary_out = "no reports directory under " + cfg.output_dir.string() + "\n";
    return 1;
  }

  auto latest = latest_ledger_iteration(cfg);
  std::optional<IterationLedger> ledger;
  if (latest) ledger = load_ledger(cfg, *latest);

  for (const auto& entry : std::filesystem::directory_iterator(reports)) {
    json report = parse_json_file(entry.path());
    std::string command = report.value("command", "");
    summary += command + ":\n";
    const json& counts = report["counts"];

    if (command == "collect" || command == "synthesize") {
      char name[64];
      std::snprintf(name, sizeof name, "iter_%04ld_%s.jsonl", counts.value("iteration", 0L),
                    command == "collect" ? "real" : "synthetic");
      check("trajectories", counts.value("trajectories", -1L),
            count_lines(cfg.output_dir / "trajectories" / name));
    } else if (command == "emit_policy" || command == "emit_world") {
      char name[64];
      std::snprintf(name, sizeof name, "%s_iter%04ld.jsonl",
                    command == "emit_policy" ? "policy" : "world", counts.value("iteration", 0L));
      check("records", counts.value("records", -1L),
            count_lines(cfg.output_dir / "datasets" / name));
    } else if (command == "wmla") {
      check("tasks", counts.value("tasks", -1L),
            count_lines(cfg.output_dir / "trajectories" / "lookahead.jsonl"));
    } else if (command == "wm_eval") {
      check("samples", counts.value("samples", -1L),
            count_lines(cfg.output_dir / "wm_eval" / "samples.jsonl"));
    }
  }

  if (ledger) {
    summary += "ledger:\n";
    check("accepted unique ids", static_cast<long>(ledger->accepted.size()),
          static_cast<long>(
              std::set<std::string>(ledger->accepted.begin(), ledger->accepted.end()).size()));
  }

  if (summary_out) *summary_out = summary;
  return mismatches;
}

}  // namespace webtwin::harness
