#pragma once

// Deterministic stand-ins for the policy, world and judge models used to
// build the bundled demo replay scripts. Every brain is a pure function of
// the request, so replay files keyed by fingerprint stay consistent no
// matter how many pipeline runs get recorded.

#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "webtwin/backend.hpp"
#include "webtwin/simweb.hpp"

namespace webtwin::demo {

// Writes sites/, tasks.jsonl, tasks_wmla.jsonl and config.json under dir.
void write_demo_inputs(const std::filesystem::path& dir);

std::shared_ptr<backend::TextBackend> make_policy_brain(
    const std::map<std::string, simweb::SiteSpec>& sites);

std::shared_ptr<backend::TextBackend> make_world_brain(
    const std::map<std::string, simweb::SiteSpec>& sites);

std::shared_ptr<backend::TextBackend> make_judge_brain();

}  // namespace webtwin::demo
