#include "radseek/hybrid.hpp"

namespace radseek {

HybridConfig HybridConfig::from_config(const KeyValueConfig& cfg) {
  HybridConfig out;
  out.scan = ScanConfig::from_config(cfg);
  out.checkpoint_path = cfg.get_string("hybrid.checkpoint", "");
  return out;
}

namespace {

void finalize_record(const Env& env, EpisodeRecord& rec) {
  rec.success = env.succeeded();
  rec.total_steps = env.state().step;
  rec.phase2_steps = rec.total_steps - rec.phase1_steps;
  rec.final_distance_mm = env.distance_to_source();
  rec.first_success_step = env.first_success_step();
  rec.source_mm = env.source().position_mm;
  rec.trace = env.trace();
  for (const auto& row : rec.trace) {
    if (row.step > 0) rec.return_total += row.reward.total;
  }
}

void run_policy_until_done(Env& env, const PolicyNet& net,
                           const RunningNorm& norm) {
  Rng unused(0);
  while (!env.done()) {
    const Vec6 action = act(net, norm, env.observation(), true, unused);
    env.step(action);
  }
}

}  // namespace

EpisodeRecord run_episode(Env& env, const PolicyNet& net,
                          const RunningNorm& norm, const HybridConfig& cfg,
                          std::uint64_t seed) {
  env.reset(seed);
  EpisodeRecord rec;
  const Phase1Result phase1 = initialize_phase2(env, cfg.scan);
  rec.phase1_steps = phase1.steps_used;
  rec.phase1_rounds = phase1.rounds_used;
  rec.phase1_resolved = phase1.resolved;
  rec.phase1_heading = phase1.heading;
  run_policy_until_done(env, net, norm);
  finalize_record(env, rec);
  return rec;
}

EpisodeRecord run_drl_episode(Env& env, const PolicyNet& net,
                              const RunningNorm& norm, std::uint64_t seed) {
  env.reset(seed);
  EpisodeRecord rec;
  rec.phase1_resolved = true;  // no scanning phase to fail
  run_policy_until_done(env, net, norm);
  finalize_record(env, rec);
  return rec;
}

EpisodeRecord run_scan_episode(Env& env, const ScanConfig& scan,
                               std::uint64_t seed, int max_rounds) {
  env.reset(seed);
  EpisodeRecord rec;

  // Standalone scanning repeats the adaptive sweep: each sweep restarts at
  // alpha0 and narrows by gamma per round, so the grid never collapses for
  // good while the bearing to the source keeps changing on approach.
  // Uncertain rounds reorient without advancing, and a sweep that sees
  // only flat background points the probe at the next entry of a fixed
  // search table before sweeping again.
  ScanConfig cfg = scan;
  cfg.advance_on_unidentified = false;

  std::vector<Vec3> search_table;
  for (int pitch_step = 0; pitch_step < 3; ++pitch_step) {
    const double pitch = (pitch_step - 1) * 40.0 * M_PI / 180.0;
    for (int yaw_step = 0; yaw_step < 8; ++yaw_step) {
      const double yaw = yaw_step * 45.0 * M_PI / 180.0;
      search_table.push_back(Eigen::AngleAxisd(yaw, Vec3::UnitZ()) *
                             Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
                             Vec3::UnitX());
    }
  }

  int rounds_total = 0;
  std::size_t search_index = 0;
  while (!env.done() && rounds_total < max_rounds) {
    double alpha = cfg.alpha0_rad;
    int rounds = 0;
    bool flat = false;
    while (!env.done() && rounds_total < max_rounds) {
      RoundRecord round;
      try {
        round = scan_round(env, cfg, alpha);
      } catch (const ScanError&) {
        flat = true;  // sweep ran against the wrist cone: search on
        ++rounds_total;
        break;
      }
      alpha = round.alpha_next_rad;
      ++rounds;
      ++rounds_total;
      flat = round.raw.complete && round.contrast < cfg.min_contrast_cps;
      if (flat) break;
      if (round.identified && rounds >= cfg.base_rounds) break;
      if (rounds >= cfg.max_rounds) break;
    }
    if (flat && !env.done()) {
      env.step_pointing(search_table[search_index % search_table.size()]);
      ++search_index;
    }
  }
  rec.phase1_rounds = rounds_total;
  rec.phase1_steps = env.state().step;
  rec.phase1_resolved = true;
  finalize_record(env, rec);
  return rec;
}

}  // namespace radseek
