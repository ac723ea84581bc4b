#pragma once

#include <string>

#include "imbalab/diffusion.hpp"
#include "imbalab/nn.hpp"

namespace imbalab {

/// Trained-model file: layout, training objective, schedule parameters and
/// every parameter array. Little-endian binary; round-trips bit-exactly.
struct Checkpoint {
    nn::ModelParams params;
    diffusion::Objective objective = diffusion::Objective::velocity;
    int schedule_T = 1000;
    double schedule_beta_min = 1e-4;
    double schedule_beta_max = 0.02;

    diffusion::NoiseSchedule schedule() const {
        return diffusion::make_schedule(schedule_T, schedule_beta_min, schedule_beta_max);
    }
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

} // namespace imbalab
