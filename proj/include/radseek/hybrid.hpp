#pragma once

#include <string>
#include <vector>

#include "radseek/env.hpp"
#include "radseek/policy.hpp"
#include "radseek/scanner.hpp"

namespace radseek {

struct HybridConfig {
  ScanConfig scan;
  std::string checkpoint_path;

  static HybridConfig from_config(const KeyValueConfig& cfg);
};

// Per-episode outcome with the phase decomposition. The step cap is the
// environment horizon; phase-1 and phase-2 steps always sum to the env
// step counter.
struct EpisodeRecord {
  bool success = false;
  int total_steps = 0;
  int phase1_steps = 0;
  int phase2_steps = 0;
  int phase1_rounds = 0;
  bool phase1_resolved = false;  // false = degraded handoff
  Vec3 phase1_heading = Vec3::UnitX();
  double final_distance_mm = 0.0;
  int first_success_step = -1;
  double return_total = 0.0;
  Vec3 source_mm = Vec3::Zero();
  std::vector<TraceRow> trace;
};

// Scan first, then run the trained policy deterministically until success
// or the step cap. An unresolved scan is not fatal: the episode continues
// with the confidence-0 estimate and the degradation is recorded.
EpisodeRecord run_episode(Env& env, const PolicyNet& net,
                          const RunningNorm& norm, const HybridConfig& cfg,
                          std::uint64_t seed);

// Policy-only baseline: same loop without the scanning phase.
EpisodeRecord run_drl_episode(Env& env, const PolicyNet& net,
                              const RunningNorm& norm, std::uint64_t seed);

// Scanning-only baseline: repeated scan rounds, no policy. Scanning alone
// has no step budget of its own (its per-episode cost is reported, not
// capped), so the env horizon is lifted to max_rounds full rounds.
EpisodeRecord run_scan_episode(Env& env, const ScanConfig& scan,
                               std::uint64_t seed, int max_rounds = 60);

}  // namespace radseek
