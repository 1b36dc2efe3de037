#include "maskmatch/segnet.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "maskmatch/rng.hpp"

namespace maskmatch {

void ModelConfig::validate() const {
    if (depth < 1) throw std::invalid_argument("ModelConfig: depth must be >= 1");
    if (base_width < 1) throw std::invalid_argument("ModelConfig: base_width must be >= 1");
    if (num_classes < 2) throw std::invalid_argument("ModelConfig: num_classes must be >= 2");
    if (in_channels < 1) throw std::invalid_argument("ModelConfig: in_channels must be >= 1");
}

std::int64_t ModelConfig::expected_param_count() const {
    auto conv = [](std::int64_t cout, std::int64_t cin, std::int64_t k) {
        return cout * cin * k * k + cout;
    };
    std::int64_t total = conv(stage_width(0), in_channels, 3);  // stem
    for (int s = 1; s <= depth; ++s) total += conv(stage_width(s), stage_width(s - 1), 3);
    total += conv(stage_width(depth), stage_width(depth), 3);  // bottleneck
    for (int s = depth; s >= 1; --s)
        total += conv(stage_width(s - 1), stage_width(s) + stage_width(s - 1), 3);
    total += conv(num_classes, stage_width(0), 1);  // head
    if (recon_head) total += conv(in_channels, stage_width(0), 1);
    return total;
}

namespace {

Tensor init_conv_kernel(std::uint64_t seed, const std::string& name, std::int64_t cout,
                        std::int64_t cin, std::int64_t k) {
    Rng rng = Rng::stream(seed, name);
    const Real stddev = std::sqrt(2.0 / static_cast<Real>(cin * k * k));
    std::vector<Real> data(static_cast<std::size_t>(cout * cin * k * k));
    for (auto& v : data) v = rng.normal(0.0, stddev);
    return Tensor::from_data({cout, cin, k, k}, std::move(data));
}

void add_conv(ParamSet& params, std::uint64_t seed, const std::string& name, std::int64_t cout,
              std::int64_t cin, std::int64_t k) {
    params.add(name + ".weight", init_conv_kernel(seed, name + ".weight", cout, cin, k));
    params.add(name + ".bias", Tensor::zeros({cout}));
}

Tensor conv_block(const ParamSet& p, const std::string& name, const Tensor& x, int stride,
                  int pad) {
    return conv2d(x, p.param(name + ".weight"), p.param(name + ".bias"), stride, pad);
}

}  // namespace

ParamSet init_model(const ModelConfig& config) {
    config.validate();
    ParamSet params;
    add_conv(params, config.seed, "stem", config.stage_width(0), config.in_channels, 3);
    for (int s = 1; s <= config.depth; ++s) {
        add_conv(params, config.seed, "enc" + std::to_string(s), config.stage_width(s),
                 config.stage_width(s - 1), 3);
    }
    add_conv(params, config.seed, "bottleneck", config.stage_width(config.depth),
             config.stage_width(config.depth), 3);
    for (int s = config.depth; s >= 1; --s) {
        add_conv(params, config.seed, "dec" + std::to_string(s), config.stage_width(s - 1),
                 config.stage_width(s) + config.stage_width(s - 1), 3);
    }
    add_conv(params, config.seed, "head", config.num_classes, config.stage_width(0), 1);
    if (config.recon_head) {
        add_conv(params, config.seed, "recon", config.in_channels, config.stage_width(0), 1);
    }
    return params;
}

ForwardOut forward_full(const ParamSet& params, const ModelConfig& config, const Tensor& images,
                        bool want_recon) {
    config.validate();
    if (images.rank() != 4 || images.dim(1) != config.in_channels) {
        throw std::invalid_argument("forward: expected [N," + std::to_string(config.in_channels) +
                                    ",H,W], got " + shape_str(images.shape()));
    }
    const std::int64_t h = images.dim(2), w = images.dim(3);
    const std::int64_t div = std::int64_t{1} << config.depth;
    if (h % div != 0 || w % div != 0) {
        throw std::invalid_argument("forward: H=" + std::to_string(h) + " W=" +
                                    std::to_string(w) + " must be divisible by 2^depth = " +
                                    std::to_string(div));
    }
    if (want_recon && !config.recon_head) {
        throw std::logic_error("forward: reconstruction output requested but the model "
                               "was built without a reconstruction head");
    }

    Tensor x = relu(conv_block(params, "stem", images, 1, 1));
    std::vector<Tensor> skips;
    skips.push_back(x);
    for (int s = 1; s <= config.depth; ++s) {
        x = relu(conv_block(params, "enc" + std::to_string(s), x, 2, 1));
        if (s < config.depth) skips.push_back(x);
    }
    x = relu(conv_block(params, "bottleneck", x, 1, 1));
    for (int s = config.depth; s >= 1; --s) {
        const std::int64_t th = h >> (s - 1), tw = w >> (s - 1);
        x = bilinear_resize(x, static_cast<int>(th), static_cast<int>(tw));
        x = concat_channels(x, skips[static_cast<std::size_t>(s - 1)]);
        x = relu(conv_block(params, "dec" + std::to_string(s), x, 1, 1));
    }
    ForwardOut out;
    out.logits = conv_block(params, "head", x, 1, 0);
    if (want_recon) out.recon = conv_block(params, "recon", x, 1, 0);
    return out;
}

Tensor forward(const ParamSet& params, const ModelConfig& config, const Tensor& images) {
    return forward_full(params, config, images, false).logits;
}

TeacherState make_teacher(const ParamSet& student, Real ema_alpha) {
    TeacherState t;
    t.params = student.clone();
    t.ema_alpha = ema_alpha;
    t.step = 0;
    return t;
}

void ema_update(TeacherState& teacher, const ParamSet& student) {
    if (teacher.params.size() != student.size()) {
        throw std::invalid_argument("ema_update: teacher has " +
                                    std::to_string(teacher.params.size()) + " params, student " +
                                    std::to_string(student.size()));
    }
    const Real a = teacher.ema_alpha;
    for (const auto& name : student.names()) {
        if (!teacher.params.contains(name)) {
            throw std::invalid_argument("ema_update: teacher missing parameter '" + name + "'");
        }
        Tensor& tp = teacher.params.param(name);
        const Tensor& sp = student.param(name);
        if (tp.shape() != sp.shape()) {
            throw std::invalid_argument("ema_update: shape mismatch for '" + name + "': " +
                                        shape_str(tp.shape()) + " vs " + shape_str(sp.shape()));
        }
        Real* t = tp.data();
        const Real* s = sp.data();
        const std::int64_t n = tp.numel();
        for (std::int64_t i = 0; i < n; ++i) t[i] = a * t[i] + (1.0 - a) * s[i];
    }
    teacher.step += 1;
}

}  // namespace maskmatch
