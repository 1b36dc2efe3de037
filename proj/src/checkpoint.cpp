#include <cstring>
#include <fstream>
#include <stdexcept>

#include "maskmatch/segnet.hpp"

// Checkpoint container: little-endian binary with a magic string, a format
// version, the model config, then student and teacher parameter sections.

namespace maskmatch {

namespace {

constexpr char kMagic[8] = {'M', 'M', 'C', 'K', 'P', 'T', '0', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr char kStudentTag[4] = {'S', 'T', 'U', 'D'};
constexpr char kTeacherTag[4] = {'T', 'C', 'H', 'R'};

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

void put_i64(std::ostream& os, std::int64_t v) { put_u64(os, static_cast<std::uint64_t>(v)); }

void put_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(os, bits);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

std::int64_t get_i64(std::istream& is) { return static_cast<std::int64_t>(get_u64(is)); }

double get_f64(std::istream& is) {
    const std::uint64_t bits = get_u64(is);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void put_params(std::ostream& os, const ParamSet& params) {
    put_u32(os, static_cast<std::uint32_t>(params.size()));
    for (const auto& name : params.names()) {
        const Tensor& t = params.param(name);
        put_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(os, static_cast<std::uint32_t>(t.shape().size()));
        for (auto e : t.shape()) put_i64(os, e);
        for (auto v : t.vec()) put_f64(os, v);
    }
}

ParamSet get_params(std::istream& is, const std::string& path) {
    ParamSet params;
    const std::uint32_t count = get_u32(is);
    for (std::uint32_t p = 0; p < count; ++p) {
        const std::uint32_t name_len = get_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const std::uint32_t rank = get_u32(is);
        std::vector<std::int64_t> shape(rank);
        std::int64_t numel = 1;
        for (auto& e : shape) {
            e = get_i64(is);
            numel *= e;
        }
        std::vector<Real> data(static_cast<std::size_t>(numel));
        for (auto& v : data) v = get_f64(is);
        if (!is) throw std::runtime_error("checkpoint: truncated file " + path);
        params.add(name, Tensor::from_data(std::move(shape), std::move(data)));
    }
    return params;
}

void check_matches_config(const ParamSet& params, const ModelConfig& config,
                          const std::string& path, const char* which) {
    ParamSet expect = init_model(config);
    if (expect.size() != params.size()) {
        throw std::runtime_error("checkpoint: " + std::string(which) + " section of " + path +
                                 " has " + std::to_string(params.size()) +
                                 " params, config expects " + std::to_string(expect.size()));
    }
    for (const auto& name : expect.names()) {
        if (!params.contains(name) ||
            params.param(name).shape() != expect.param(name).shape()) {
            throw std::runtime_error("checkpoint: " + path + " does not match the stored model "
                                     "config at parameter '" + name + "'");
        }
    }
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& config, const ParamSet& student,
                     const TeacherState& teacher) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    os.write(kMagic, 8);
    put_u32(os, kVersion);
    put_u32(os, static_cast<std::uint32_t>(config.in_channels));
    put_u32(os, static_cast<std::uint32_t>(config.num_classes));
    put_u32(os, static_cast<std::uint32_t>(config.base_width));
    put_u32(os, static_cast<std::uint32_t>(config.depth));
    put_u64(os, config.seed);
    os.put(config.recon_head ? 1 : 0);
    os.write(kStudentTag, 4);
    put_params(os, student);
    os.write(kTeacherTag, 4);
    put_f64(os, teacher.ema_alpha);
    put_u64(os, static_cast<std::uint64_t>(teacher.step));
    put_params(os, teacher.params);
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0) {
        throw std::runtime_error("checkpoint: " + path + " is not a checkpoint file");
    }
    const std::uint32_t version = get_u32(is);
    if (version != kVersion) {
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version) +
                                 " in " + path);
    }
    Checkpoint ckpt;
    ckpt.config.in_channels = static_cast<int>(get_u32(is));
    ckpt.config.num_classes = static_cast<int>(get_u32(is));
    ckpt.config.base_width = static_cast<int>(get_u32(is));
    ckpt.config.depth = static_cast<int>(get_u32(is));
    ckpt.config.seed = get_u64(is);
    ckpt.config.recon_head = is.get() != 0;

    char tag[4];
    is.read(tag, 4);
    if (!is || std::memcmp(tag, kStudentTag, 4) != 0) {
        throw std::runtime_error("checkpoint: missing student section in " + path);
    }
    ckpt.student = get_params(is, path);
    is.read(tag, 4);
    if (!is || std::memcmp(tag, kTeacherTag, 4) != 0) {
        throw std::runtime_error("checkpoint: missing teacher section in " + path);
    }
    ckpt.teacher.ema_alpha = get_f64(is);
    ckpt.teacher.step = static_cast<std::int64_t>(get_u64(is));
    ckpt.teacher.params = get_params(is, path);

    check_matches_config(ckpt.student, ckpt.config, path, "student");
    check_matches_config(ckpt.teacher.params, ckpt.config, path, "teacher");
    return ckpt;
}

}  // namespace maskmatch
