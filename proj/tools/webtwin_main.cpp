#include <iostream>

#include "CLI11.hpp"
#include "webtwin/harness.hpp"
#include "webtwin/simweb.hpp"

using namespace webtwin;

namespace {

void print_report(const harness::RunReport& report) {
  std::cout << report.command << ": ";
  for (const auto& [key, value] : report.counts) std::cout << key << "=" << value << " ";
  for (const auto& [tag, rate] : report.success_rate)
    std::cout << "success[" << tag << "]=" << rate << " ";
  std::cout << "failures=" << report.failures << " wall_clock_ms=" << report.wall_clock_ms
            << std::endl;
}

int run_command(const std::string& config_file, const std::vector<std::string>& overrides,
                const std::vector<std::string>& roles,
                harness::RunReport (*fn)(const harness::RunConfig&, const harness::BackendSet&)) {
  harness::RunConfig cfg = harness::load_config(config_file, overrides);
  harness::BackendSet backends = harness::make_backends(cfg, roles);
  harness::RunReport report = fn(cfg, backends);
  print_report(report);
  return report.failures > 0 ? harness::kExitTaskFailures : harness::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"webtwin: self-improving web agent pipelines over a simulated web"};
  app.require_subcommand(1);

  std::string config_file = "config.json";
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_file, "Run configuration file (JSON)");
  app.add_option("--set", overrides, "Override a config value, e.g. --set wmla.k=1");

  auto* collect = app.add_subcommand("collect", "Sample real rollouts, judge, grow the ledger");
  auto* synthesize =
      app.add_subcommand("synthesize", "Generate synthetic rollouts for unsolved queries");
  auto* emit = app.add_subcommand("emit", "Write training records for one role");
  std::string emit_role;
  emit->add_option("--role", emit_role, "policy | world")->required();
  auto* wmla_cmd = app.add_subcommand("wmla", "Run look-ahead action selection over tasks");
  auto* wm_eval = app.add_subcommand("wm-eval", "Score generated observations against stored runs");
  auto* report_cmd = app.add_subcommand("report", "Re-derive report counts from persisted files");

  auto* simweb_cmd = app.add_subcommand("simweb", "Site utilities");
  auto* validate = simweb_cmd->add_subcommand("validate", "Validate site manifests and pages");
  std::string sites_dir_arg;
  validate->add_option("--sites", sites_dir_arg, "Sites directory (defaults to config sites_dir)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (collect->parsed())
      return run_command(config_file, overrides, {"policy", "judge"}, harness::cmd_collect);
    if (synthesize->parsed())
      return run_command(config_file, overrides, {"policy", "world", "judge"},
                         harness::cmd_synthesize);
    if (emit->parsed()) {
      harness::RunConfig cfg = harness::load_config(config_file, overrides);
      std::vector<std::string> roles;
      if (emit_role == "world" && cfg.emit_distill) roles.push_back("policy");
      harness::BackendSet backends = harness::make_backends(cfg, roles);
      harness::RunReport report = harness::cmd_emit(cfg, backends, emit_role);
      print_report(report);
      return report.failures > 0 ? harness::kExitTaskFailures : harness::kExitOk;
    }
    if (wmla_cmd->parsed()) {
      harness::RunConfig cfg = harness::load_config(config_file, overrides);
      std::vector<std::string> roles{"policy", "world"};
      if (cfg.wmla.scorer_kind == wmla::WmlaConfig::ScorerKind::Model) roles.push_back("scorer");
      harness::BackendSet backends = harness::make_backends(cfg, roles);
      harness::RunReport report = harness::cmd_wmla(cfg, backends);
      print_report(report);
      return report.failures > 0 ? harness::kExitTaskFailures : harness::kExitOk;
    }
    if (wm_eval->parsed())
      return run_command(config_file, overrides, {"world", "judge"}, harness::cmd_wm_eval);
    if (report_cmd->parsed()) {
      harness::RunConfig cfg = harness::load_config(config_file, overrides);
      std::string summary;
      int mismatches = harness::cmd_report(cfg, &summary);
      std::cout << summary;
      std::cout << (mismatches == 0 ? "report: all counts re-derived cleanly"
                                    : "report: count mismatches found")
                << std::endl;
      return mismatches == 0 ? harness::kExitOk : harness::kExitTaskFailures;
    }
    if (validate->parsed()) {
      std::filesystem::path dir;
      if (!sites_dir_arg.empty()) {
        dir = sites_dir_arg;
      } else {
        harness::RunConfig cfg = harness::load_config(config_file, overrides);
        dir = cfg.sites_dir;
      }
      auto sites = simweb::load_sites(dir);
      bool ok = true;
      for (const auto& [id, site] : sites) {
        simweb::ValidationReport report = simweb::validate_spec(site);
        std::cout << "site " << id << ": "
                  << (report.ok() ? "ok" : "errors found") << "\n";
        for (const auto& entry : report.entries) {
          std::cout << "  "
                    << (entry.level == simweb::ValidationEntry::Level::Error ? "error" : "warning")
                    << ": " << entry.message << "\n";
        }
        ok = ok && report.ok();
      }
      return ok ? harness::kExitOk : harness::kExitTaskFailures;
    }
  } catch (const harness::ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return harness::kExitConfigError;
  } catch (const simweb::SiteError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return harness::kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return harness::kExitTaskFailures;
  }
  return harness::kExitConfigError;
}
