#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace thinkstage {

/// One training stage: outputs are capped at max_len tokens and each
/// question gets group_size rollouts, for `steps` training steps.
struct StageConfig {
  std::size_t index = 1;
  std::size_t max_len = 64;
  std::size_t group_size = 16;
  std::size_t steps = 100;

  friend bool operator==(const StageConfig&, const StageConfig&) = default;
};

struct Schedule {
  std::vector<StageConfig> stages;

  std::size_t total_steps() const noexcept;
};

/// Stage caps must leave room for the four tags, groups need two rollouts,
/// caps are nondecreasing and indices run 1..S.
void validate(const Schedule& schedule);

/// Signals that a step lies past the end of the schedule.
class ScheduleComplete : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

inline constexpr std::size_t kFullScaleLen = 4096;

/// Two stages (4096/d x 16, 8192/d x 8), 100 steps each, plus an optional
/// third (16384/d x 4). `scale_divisor` must divide 4096.
Schedule default_schedule(std::size_t scale_divisor, bool third_stage = false);

/// Stage containing 0-indexed `global_step`; throws ScheduleComplete past the
/// end.
const StageConfig& stage_at(std::size_t global_step, const Schedule& schedule);

}  // namespace thinkstage
