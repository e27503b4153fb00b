// Builds the bundled demo: two sites, the task files, the run config, and
// replay scripts for every backend role. The scripts are produced by running
// the actual pipeline commands against deterministic scripted models and
// recording each (fingerprint, response) pair, so a later replay run takes
// exactly the same path.

#include <iostream>

#include "demo_brains.hpp"
#include "webtwin/harness.hpp"
#include "webtwin/util.hpp"

using namespace webtwin;

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: gen_demo_assets <demo-dir>\n";
    return 2;
  }
  std::filesystem::path demo_dir = argv[1];

  try {
    demo::write_demo_inputs(demo_dir);

    // Placeholder scripts so the config loads; replaced at the end.
    for (const char* name : {"policy.jsonl", "world.jsonl", "judge.jsonl"})
      util::write_file((demo_dir / "replay" / name).string(), "");

    auto sites = simweb::load_sites(demo_dir / "sites");
    for (const auto& [id, site] : sites) {
      simweb::ValidationReport report = simweb::validate_spec(site);
      if (!report.ok()) {
        std::cerr << "site " << id << " failed validation\n";
        for (const auto& e : report.entries) std::cerr << "  " << e.message << "\n";
        return 1;
      }
    }

    auto policy = std::make_shared<backend::RecordingBackend>(demo::make_policy_brain(sites));
    auto world = std::make_shared<backend::RecordingBackend>(demo::make_world_brain(sites));
    auto judge = std::make_shared<backend::RecordingBackend>(demo::make_judge_brain());

    harness::BackendSet set;
    set.policy = policy;
    set.world = world;
    set.judge = judge;

    std::filesystem::path scratch = demo_dir / ".gen_scratch";
    std::filesystem::remove_all(scratch);

    harness::RunConfig cfg = harness::load_config(demo_dir / "config.json",
                                                  {"output_dir=" + (scratch / "run").string()});
    cfg.backend_audit = false;

    // The same command sequence the acceptance pipeline replays.
    harness::cmd_collect(cfg, set);
    harness::cmd_synthesize(cfg, set);
    harness::cmd_emit(cfg, set, "policy");
    harness::cmd_emit(cfg, set, "world");
    harness::cmd_wmla(cfg, set);
    harness::cmd_wm_eval(cfg, set);

    // Greedy ablation (wmla.k=1) runs against the same scripts.
    harness::RunConfig greedy = harness::load_config(
        demo_dir / "config.json", {"output_dir=" + (scratch / "greedy").string(), "wmla.k=1"});
    greedy.backend_audit = false;
    harness::cmd_wmla(greedy, set);

    std::filesystem::remove_all(scratch);

    policy->save_script((demo_dir / "replay" / "policy.jsonl").string());
    world->save_script((demo_dir / "replay" / "world.jsonl").string());
    judge->save_script((demo_dir / "replay" / "judge.jsonl").string());

    std::cout << "demo assets written to " << demo_dir.string() << "\n"
              << "  policy responses: " << policy->recorded().size() << "\n"
              << "  world responses:  " << world->recorded().size() << "\n"
              << "  judge responses:  " << judge->recorded().size() << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "gen_demo_assets: " << e.what() << "\n";
    return 1;
  }
}
