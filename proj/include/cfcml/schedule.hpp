#pragma once
#include <cmath>

#include "cfcml/errors.hpp"

namespace cfcml::trainer {

struct ScheduleConfig {
    double lr0 = 5e-4;
    int warmup_epochs = 5;
    double decay_factor = 0.8;
    int decay_period = 5;
};

// Linear warm-up from zero over the first `warmup_epochs`, then a step decay
// by `decay_factor` after each completed `decay_period` epochs. Warm-up owns
// its epochs: with the defaults the rate stays at lr0 through epoch 10 and
// the first decayed value appears at epoch 11.
inline double lr_at(int epoch, const ScheduleConfig& cfg) {
    if (epoch < 1) throw ConfigError("epochs are 1-based");
    if (!(cfg.lr0 > 0.0)) throw ConfigError("lr0 must be positive");
    if (cfg.decay_factor <= 0.0 || cfg.decay_factor > 1.0)
        throw ConfigError("decay_factor must be in (0, 1]");
    if (cfg.decay_period < 1) throw ConfigError("decay_period must be >= 1");
    if (cfg.warmup_epochs > 0 && epoch <= cfg.warmup_epochs)
        return cfg.lr0 * static_cast<double>(epoch) / static_cast<double>(cfg.warmup_epochs);
    const int completed_periods = (epoch - cfg.warmup_epochs - 1) / cfg.decay_period;
    return cfg.lr0 * std::pow(cfg.decay_factor, completed_periods);
}

}  // namespace cfcml::trainer
