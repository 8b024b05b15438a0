#pragma once

// Learning-rate schedules live in the harness; optimizers only ever see the
// already-scheduled per-step value.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace miniopt::cli {

enum class ScheduleKind { Constant, Cosine, Linear };

struct Schedule {
  ScheduleKind kind = ScheduleKind::Cosine;
  double peak_lr = 1e-3;
  double warmup_frac = 0.01;  // fraction of total steps ramped linearly from 0

  void validate() const {
    if (!(peak_lr > 0.0)) throw std::invalid_argument("Schedule: peak_lr must be positive");
    if (warmup_frac < 0.0 || warmup_frac >= 1.0) {
      throw std::invalid_argument("Schedule: warmup fraction must be in [0, 1)");
    }
  }

  // step is 0-based; total >= 1. Cosine decays to peak / 10, linear to 0.
  double lr_at(long step, long total) const {
    const double warmup_steps = warmup_frac * static_cast<double>(total);
    if (warmup_steps > 0.0 && static_cast<double>(step) < warmup_steps) {
      return peak_lr * (static_cast<double>(step) + 1.0) / warmup_steps;
    }
    const double span = static_cast<double>(total) - warmup_steps;
    const double progress = span > 0.0 ? (static_cast<double>(step) - warmup_steps) / span : 1.0;
    switch (kind) {
      case ScheduleKind::Constant:
        return peak_lr;
      case ScheduleKind::Cosine: {
        const double min_lr = peak_lr / 10.0;
        return min_lr + 0.5 * (peak_lr - min_lr) * (1.0 + std::cos(std::numbers::pi * progress));
      }
      case ScheduleKind::Linear:
        return peak_lr * (1.0 - progress);
    }
    return peak_lr;
  }
};

inline ScheduleKind schedule_kind_from_string(const std::string& s) {
  if (s == "constant") return ScheduleKind::Constant;
  if (s == "cosine") return ScheduleKind::Cosine;
  if (s == "linear") return ScheduleKind::Linear;
  throw std::invalid_argument("unknown schedule kind '" + s + "'");
}

}  // namespace miniopt::cli
