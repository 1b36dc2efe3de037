#pragma once

#include <cstdint>
#include <string>

#include "maskmatch/param.hpp"
#include "maskmatch/tensor.hpp"

namespace maskmatch {

// Small U-shaped encoder-decoder: stride-2 conv encoder stages, a bottleneck
// conv, and a decoder that bilinearly upsamples and concatenates the skip
// feature from the matching encoder stage. No normalization layers; ReLU
// activations; logits come out at input resolution.
struct ModelConfig {
    int in_channels = 3;
    int num_classes = 4;
    int base_width = 16;
    int depth = 3;
    std::uint64_t seed = 0;
    bool recon_head = false;  // auxiliary image-reconstruction output

    void validate() const;
    int stage_width(int stage) const { return base_width << stage; }
    // Closed-form trainable element count for this architecture.
    std::int64_t expected_param_count() const;
};

// Deterministic Kaiming-style initialization: conv kernels drawn from
// N(0, sqrt(2/fan_in)) on a per-parameter stream derived from (seed, name),
// biases zero.
ParamSet init_model(const ModelConfig& config);

struct ForwardOut {
    Tensor logits;
    Tensor recon;  // defined only when requested and the head exists
};

Tensor forward(const ParamSet& params, const ModelConfig& config, const Tensor& images);
ForwardOut forward_full(const ParamSet& params, const ModelConfig& config, const Tensor& images,
                        bool want_recon);

// Convenience bundle of a config and its parameters.
struct SegNet {
    ModelConfig config;
    ParamSet params;

    Tensor forward(const Tensor& images) const {
        return maskmatch::forward(params, config, images);
    }
    ForwardOut forward_full(const Tensor& images, bool want_recon) const {
        return maskmatch::forward_full(params, config, images, want_recon);
    }
};

struct TeacherState {
    ParamSet params;
    Real ema_alpha = 0.999;
    std::int64_t step = 0;
};

TeacherState make_teacher(const ParamSet& student, Real ema_alpha);

// theta' <- alpha*theta' + (1-alpha)*theta for every parameter; increments
// the step counter. Student is untouched.
void ema_update(TeacherState& teacher, const ParamSet& student);

// --- checkpoint file --------------------------------------------------------

struct Checkpoint {
    ModelConfig config;
    ParamSet student;
    TeacherState teacher;
};

void save_checkpoint(const std::string& path, const ModelConfig& config, const ParamSet& student,
                     const TeacherState& teacher);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace maskmatch
