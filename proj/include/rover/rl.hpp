#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rover/agent.hpp"
#include "rover/types.hpp"

namespace rover::rl {

struct RolloutGroup {
    std::string seed_id;  // question id or partial-seed id
    Question question;
    std::vector<Trajectory> trajectories;  // |trajectories| = G

    std::size_t size() const { return trajectories.size(); }
};

struct AdvantageRecord {
    std::size_t trajectory_index = 0;
    std::size_t step_index = 0;  // 1-based, mirrors Step::index
    double advantage = 0.0;
    std::size_t trajectory_length = 0;
};

struct AdvantageOptions {
    double eps = 1e-6;             // added to the population std
    bool length_normalized = true; // divide by T_i (the recipe); false for ablations
};

/// Step-level advantages: A_{i,j} = (r_i - mean(R)) / ((std(R) + eps) * T_i),
/// identical for every step j of trajectory i. Population std. Throws
/// std::invalid_argument on groups smaller than 2 or unset rewards.
std::vector<AdvantageRecord> compute_advantages(const RolloutGroup& group,
                                                const AdvantageOptions& options = {});

enum class DropStrategy { Random, HeuristicShortestFirst };

struct FilterPolicy {
    bool drop_invalid = true;
    double band_low = 1.0 / 3.0;   // positives:negatives lower bound
    double band_high = 3.0;
    DropStrategy drop_strategy = DropStrategy::Random;
    double positive_threshold = 0.5;  // reward > threshold counts as positive
};

struct FilterStats {
    std::size_t dropped_invalid = 0;
    std::size_t dropped_ratio = 0;
    std::size_t kept = 0;
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

struct FilterResult {
    RolloutGroup group;
    FilterStats stats;

    bool empty() const { return group.trajectories.empty(); }
};

/// Drop invalid-termination trajectories, then bring positives:negatives
/// inside the band by dropping over-represented trajectories. Deterministic
/// under a fixed seed. An empty result is a legal outcome.
FilterResult filter_trajectories(const RolloutGroup& group, const FilterPolicy& policy,
                                 std::uint64_t rng_seed);

struct PartialSeed {
    std::string id;
    std::string origin_id;
    std::size_t prefix_length = 0;
    Trajectory prefix;  // frozen state; memory is rebuilt deterministically from it
};

/// Freeze prefixes of a finished trajectory as independent initial states.
/// Cut points must satisfy 1 <= p < T; throws std::invalid_argument otherwise.
std::vector<PartialSeed> spawn_partial_seeds(const Trajectory& traj,
                                             const std::vector<std::size_t>& cut_points,
                                             const EpisodeConfig& config);

/// Cut-point heuristic: steps right after a tool error or a memory cleanup,
/// at most `max_seeds` per origin, sampled uniformly under the seed.
std::vector<std::size_t> select_cut_points(const Trajectory& traj, std::uint64_t rng_seed,
                                           std::size_t max_seeds = 2);

struct BatchRecord {
    std::string group_id;
    std::size_t trajectory_index = 0;
    std::size_t step_index = 0;
    std::string state;        // rendered state the policy saw
    std::string action_text;  // the action segment of the response
    std::optional<double> old_logprob;
    double advantage = 0.0;
};

struct BatchMetadata {
    std::size_t group_size = 0;
    std::size_t groups_in = 0;
    std::size_t groups_contributing = 0;
    FilterStats filter;
    double reward_mean = 0.0;
    double reward_min = 0.0;
    double reward_max = 0.0;
};

struct TrainingBatch {
    std::vector<BatchRecord> records;
    BatchMetadata metadata;
};

using StateRenderer = std::function<std::string(const Trajectory&, std::size_t step_index)>;

/// Default state rendering: question plus the serialized prefix before the
/// step (deterministic, self-contained).
std::string default_state_rendering(const Trajectory& traj, std::size_t step_index);

/// filter -> advantages -> flatten. Records of filtered-out trajectories never
/// appear. Deterministic under a fixed seed.
TrainingBatch assemble_batch(const std::vector<RolloutGroup>& groups, const FilterPolicy& policy,
                             const AdvantageOptions& options, std::uint64_t rng_seed,
                             const StateRenderer& renderer = default_state_rendering);

/// loss = -mean_i min(rho_i * A_i, clip(rho_i, 1-eps, 1+eps) * A_i),
/// rho_i = exp(new_logp_i - old_logp_i). Throws std::invalid_argument when an
/// old log-prob is missing or sizes disagree.
double clipped_surrogate_loss(const TrainingBatch& batch, const std::vector<double>& new_logp,
                              double clip_eps);

json batch_record_to_json(const BatchRecord& record);
json batch_metadata_to_json(const BatchMetadata& metadata);

/// Line-delimited records to `path`, metadata alongside as `meta_path`.
void export_batch(const TrainingBatch& batch, const std::string& path,
                  const std::string& meta_path);

/// Call counters: the toy trainer is required to consume these exact
/// implementations, and the tests pin that via instrumentation.
struct CallCounters {
    std::atomic<std::uint64_t> advantage_calls{0};
    std::atomic<std::uint64_t> filter_calls{0};
    static CallCounters& instance();
};

}  // namespace rover::rl
