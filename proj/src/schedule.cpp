#include "thinkstage/schedule.hpp"

#include <string>

namespace thinkstage {

std::size_t Schedule::total_steps() const noexcept {
  std::size_t n = 0;
  for (const auto& s : stages) n += s.steps;
  return n;
}

void validate(const Schedule& schedule) {
  if (schedule.stages.empty()) throw std::invalid_argument("schedule has no stages");
  for (std::size_t i = 0; i < schedule.stages.size(); ++i) {
    const auto& s = schedule.stages[i];
    const std::string where = "stage " + std::to_string(i + 1) + ": ";
    if (s.index != i + 1) throw std::invalid_argument(where + "indices must be 1..S in order");
    if (s.group_size < 2) throw std::invalid_argument(where + "group_size must be >= 2");
    if (s.max_len < 8) throw std::invalid_argument(where + "max_len must be >= 8");
    if (s.steps == 0) throw std::invalid_argument(where + "steps must be positive");
    if (i > 0 && s.max_len < schedule.stages[i - 1].max_len)
      throw std::invalid_argument(where + "max_len must not decrease across stages");
  }
}

Schedule default_schedule(std::size_t scale_divisor, bool third_stage) {
  if (scale_divisor == 0 || kFullScaleLen % scale_divisor != 0)
    throw std::invalid_argument("scale divisor must divide 4096");
  const std::size_t base = kFullScaleLen / scale_divisor;
  Schedule s;
  s.stages.push_back({1, base, 16, 100});
  s.stages.push_back({2, 2 * base, 8, 100});
  if (third_stage) s.stages.push_back({3, 4 * base, 4, 100});
  validate(s);
  return s;
}

const StageConfig& stage_at(std::size_t global_step, const Schedule& schedule) {
  std::size_t end = 0;
  for (const auto& s : schedule.stages) {
    end += s.steps;
    if (global_step < end) return s;
  }
  throw ScheduleComplete("step " + std::to_string(global_step) + " is past the end of the schedule (" +
                         std::to_string(end) + " steps)");
}

}  // namespace thinkstage
