#include "maskmatch/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "maskmatch/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace maskmatch {

namespace {

// h,s,v in [0,1] -> rgb in [0,1]
void hsv_to_rgb(Real h, Real s, Real v, Real rgb[3]) {
    h = h - std::floor(h);
    const Real c = v * s;
    const Real hp = h * 6.0;
    const Real x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
    Real r = 0, g = 0, b = 0;
    if (hp < 1) {
        r = c; g = x;
    } else if (hp < 2) {
        r = x; g = c;
    } else if (hp < 3) {
        g = c; b = x;
    } else if (hp < 4) {
        g = x; b = c;
    } else if (hp < 5) {
        r = x; b = c;
    } else {
        r = c; b = x;
    }
    const Real m = v - c;
    rgb[0] = r + m;
    rgb[1] = g + m;
    rgb[2] = b + m;
}

// Base hue per foreground class. Neighbouring classes sit close enough that
// the per-instance +-0.1 jitter plus pixel noise makes color alone an
// unreliable cue.
Real class_hue(int cls) { return std::fmod(0.02 + 0.23 * static_cast<Real>(cls - 1), 1.0); }

// Low-frequency value noise: a coarse random grid bilinearly upsampled.
std::vector<Real> value_noise(Rng& rng, int h, int w, int grid) {
    std::vector<Real> coarse(static_cast<std::size_t>(grid) * grid);
    for (auto& v : coarse) v = rng.uniform();
    std::vector<Real> out(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
        const Real fy = (static_cast<Real>(y) + 0.5) / h * (grid - 1);
        const int y0 = std::min(static_cast<int>(fy), grid - 2);
        const Real wy = fy - y0;
        for (int x = 0; x < w; ++x) {
            const Real fx = (static_cast<Real>(x) + 0.5) / w * (grid - 1);
            const int x0 = std::min(static_cast<int>(fx), grid - 2);
            const Real wx = fx - x0;
            const Real top = coarse[static_cast<std::size_t>(y0) * grid + x0] * (1 - wx) +
                             coarse[static_cast<std::size_t>(y0) * grid + x0 + 1] * wx;
            const Real bot = coarse[static_cast<std::size_t>(y0 + 1) * grid + x0] * (1 - wx) +
                             coarse[static_cast<std::size_t>(y0 + 1) * grid + x0 + 1] * wx;
            out[static_cast<std::size_t>(y) * w + x] = top * (1 - wy) + bot * wy;
        }
    }
    return out;
}

struct Shape {
    int cls = 0;
    int kind = 0;  // 0 circle, 1 rectangle, 2 triangle
    Real cx = 0, cy = 0;
    Real r = 0;          // circle radius
    Real ax = 0, ay = 0; // rect half extents
    Real angle = 0;      // rect rotation
    Real vx[3] = {0, 0, 0}, vy[3] = {0, 0, 0};  // triangle vertices
    Real color[3] = {0, 0, 0};

    bool contains(Real x, Real y) const {
        if (kind == 0) {
            const Real dx = x - cx, dy = y - cy;
            return dx * dx + dy * dy <= r * r;
        }
        if (kind == 1) {
            const Real dx = x - cx, dy = y - cy;
            const Real ca = std::cos(angle), sa = std::sin(angle);
            const Real u = dx * ca + dy * sa;
            const Real v = -dx * sa + dy * ca;
            return std::fabs(u) <= ax && std::fabs(v) <= ay;
        }
        // triangle: point on the same side of all three edges
        Real sign = 0.0;
        for (int e = 0; e < 3; ++e) {
            const int f = (e + 1) % 3;
            const Real cross =
                (vx[f] - vx[e]) * (y - vy[e]) - (vy[f] - vy[e]) * (x - vx[e]);
            if (cross == 0.0) continue;
            if (sign == 0.0) {
                sign = cross > 0 ? 1.0 : -1.0;
            } else if ((cross > 0 ? 1.0 : -1.0) != sign) {
                return false;
            }
        }
        return true;
    }
};

Shape make_shape(Rng& rng, int classes, int h, int w) {
    Shape s;
    s.cls = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(classes - 1)));
    s.kind = (s.cls - 1) % 3;
    const Real extent = static_cast<Real>(std::min(h, w));
    s.cx = rng.uniform(0.12, 0.88) * w;
    s.cy = rng.uniform(0.12, 0.88) * h;
    const Real size = rng.uniform(0.09, 0.24) * extent;
    if (s.kind == 0) {
        s.r = size;
    } else if (s.kind == 1) {
        s.ax = size * rng.uniform(0.6, 1.4);
        s.ay = size * rng.uniform(0.6, 1.4);
        s.angle = rng.uniform(0.0, 3.14159265358979323846);
    } else {
        // triangle: three rays from the center, sorted angles keep it simple
        Real angles[3] = {rng.uniform(0.0, 6.2831853), rng.uniform(0.0, 6.2831853),
                          rng.uniform(0.0, 6.2831853)};
        std::sort(angles, angles + 3);
        // enforce some angular spread so triangles do not degenerate
        for (int i = 0; i < 3; ++i) {
            const Real rad = size * rng.uniform(0.75, 1.45);
            const Real a = angles[i] + 0.35 * static_cast<Real>(i);
            s.vx[i] = s.cx + rad * std::cos(a);
            s.vy[i] = s.cy + rad * std::sin(a);
        }
    }
    const Real hue = class_hue(s.cls) + rng.uniform(-0.1, 0.1);
    const Real sat = rng.uniform(0.5, 0.95);
    const Real val = rng.uniform(0.55, 0.95);
    hsv_to_rgb(hue, sat, val, s.color);
    return s;
}

void render_sample(Rng& rng, int classes, int h, int w, Image& image,
                   std::vector<std::uint8_t>& label) {
    image = Image::zeros(h, w);
    label.assign(static_cast<std::size_t>(h) * w, 0);

    // textured background: low-frequency hue/sat/val fields
    auto hue_field = value_noise(rng, h, w, 4);
    auto sat_field = value_noise(rng, h, w, 5);
    auto val_field = value_noise(rng, h, w, 7);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            Real rgb[3];
            hsv_to_rgb(hue_field[i], 0.12 + 0.45 * sat_field[i], 0.25 + 0.6 * val_field[i], rgb);
            for (int c = 0; c < 3; ++c) image.at(y, x, c) = rgb[c];
        }
    }

    const int count = 1 + static_cast<int>(rng.uniform_int(4));
    std::vector<Shape> shapes;
    shapes.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) shapes.push_back(make_shape(rng, classes, h, w));

    // painter's order: later shapes overwrite earlier ones; the label is the
    // exact rasterization of the same test used for the color
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Real px = static_cast<Real>(x) + 0.5;
            const Real py = static_cast<Real>(y) + 0.5;
            for (const Shape& s : shapes) {
                if (s.contains(px, py)) {
                    label[static_cast<std::size_t>(y) * w + x] =
                        static_cast<std::uint8_t>(s.cls);
                    for (int c = 0; c < 3; ++c) image.at(y, x, c) = s.color[c];
                }
            }
        }
    }

    // additive pixel noise, clamped
    for (auto& v : image.px) v = std::clamp(v + rng.normal(0.0, 0.05), 0.0, 1.0);
}

std::string sample_id(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "img_%05d", index);
    return buf;
}

json manifest_to_json(const DatasetManifest& m) {
    json j;
    j["classes"] = m.classes;
    j["height"] = m.height;
    j["width"] = m.width;
    j["labeled_count"] = m.labeled_count;
    j["unlabeled_count"] = m.unlabeled_count;
    j["val_count"] = m.val_count;
    j["seed"] = m.seed;
    j["splits"]["labeled"] = m.labeled_ids;
    j["splits"]["unlabeled"] = m.unlabeled_ids;
    j["splits"]["val"] = m.val_ids;
    return j;
}

}  // namespace

Split split_from_string(const std::string& name) {
    if (name == "labeled") return Split::kLabeled;
    if (name == "unlabeled") return Split::kUnlabeled;
    if (name == "val") return Split::kVal;
    throw std::invalid_argument("unknown split '" + name + "' (labeled|unlabeled|val)");
}

std::string split_name(Split split) {
    switch (split) {
        case Split::kLabeled: return "labeled";
        case Split::kUnlabeled: return "unlabeled";
        case Split::kVal: return "val";
    }
    return "?";
}

DatasetManifest generate_dataset(int classes, int height, int width, int labeled, int unlabeled,
                                 int val, std::uint64_t seed, const std::string& out_dir) {
    if (height < 32 || width < 32) {
        throw std::invalid_argument("generate_dataset: H and W must be >= 32, got " +
                                    std::to_string(height) + "x" + std::to_string(width));
    }
    if (classes < 2 || classes > 8) {
        throw std::invalid_argument("generate_dataset: classes must be in [2,8], got " +
                                    std::to_string(classes));
    }
    if (labeled < 1 || unlabeled < 0 || val < 0) {
        throw std::invalid_argument("generate_dataset: invalid counts M=" +
                                    std::to_string(labeled) + " N=" + std::to_string(unlabeled) +
                                    " V=" + std::to_string(val));
    }

    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "images", ec);
    fs::create_directories(fs::path(out_dir) / "labels", ec);
    if (ec || !fs::is_directory(fs::path(out_dir) / "images")) {
        throw std::runtime_error("generate_dataset: cannot create output directory " + out_dir);
    }

    DatasetManifest m;
    m.classes = classes;
    m.height = height;
    m.width = width;
    m.labeled_count = labeled;
    m.unlabeled_count = unlabeled;
    m.val_count = val;
    m.seed = seed;
    m.root_dir = out_dir;

    const int total = labeled + unlabeled + val;
    Image image;
    std::vector<std::uint8_t> label;
    for (int i = 0; i < total; ++i) {
        const std::string id = sample_id(i);
        Rng rng = Rng::stream(seed, "image", static_cast<std::uint64_t>(i));
        render_sample(rng, classes, height, width, image, label);
        write_ppm((fs::path(out_dir) / "images" / (id + ".ppm")).string(), image);
        write_pgm((fs::path(out_dir) / "labels" / (id + ".pgm")).string(), height, width, label);
        if (i < labeled) {
            m.labeled_ids.push_back(id);
        } else if (i < labeled + unlabeled) {
            m.unlabeled_ids.push_back(id);
        } else {
            m.val_ids.push_back(id);
        }
    }

    std::ofstream os(fs::path(out_dir) / "manifest.json");
    if (!os) throw std::runtime_error("generate_dataset: cannot write manifest in " + out_dir);
    os << manifest_to_json(m).dump(2) << "\n";
    return m;
}

DatasetManifest load_manifest(const std::string& dir) {
    std::ifstream is(fs::path(dir) / "manifest.json");
    if (!is) throw std::runtime_error("load_manifest: missing " + dir + "/manifest.json");
    json j;
    is >> j;
    DatasetManifest m;
    m.classes = j.at("classes").get<int>();
    m.height = j.at("height").get<int>();
    m.width = j.at("width").get<int>();
    m.labeled_count = j.at("labeled_count").get<int>();
    m.unlabeled_count = j.at("unlabeled_count").get<int>();
    m.val_count = j.at("val_count").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.labeled_ids = j.at("splits").at("labeled").get<std::vector<std::string>>();
    m.unlabeled_ids = j.at("splits").at("unlabeled").get<std::vector<std::string>>();
    m.val_ids = j.at("splits").at("val").get<std::vector<std::string>>();
    m.root_dir = dir;
    return m;
}

namespace {

std::vector<std::uint8_t> load_label_file(const DatasetManifest& manifest, const std::string& id) {
    int h = 0, w = 0;
    auto label = read_pgm((fs::path(manifest.root_dir) / "labels" / (id + ".pgm")).string(), h, w);
    if (h != manifest.height || w != manifest.width) {
        throw std::runtime_error("dataset: label " + id + " has size " + std::to_string(w) + "x" +
                                 std::to_string(h) + ", manifest says " +
                                 std::to_string(manifest.width) + "x" +
                                 std::to_string(manifest.height));
    }
    return label;
}

}  // namespace

std::vector<SegSample> load_split(const DatasetManifest& manifest, Split split) {
    const std::vector<std::string>* ids = nullptr;
    switch (split) {
        case Split::kLabeled: ids = &manifest.labeled_ids; break;
        case Split::kUnlabeled: ids = &manifest.unlabeled_ids; break;
        case Split::kVal: ids = &manifest.val_ids; break;
    }
    std::vector<SegSample> samples;
    samples.reserve(ids->size());
    for (const auto& id : *ids) {
        SegSample s;
        s.id = id;
        s.image = read_ppm((fs::path(manifest.root_dir) / "images" / (id + ".ppm")).string());
        if (split != Split::kUnlabeled) s.label = load_label_file(manifest, id);
        samples.push_back(std::move(s));
    }
    return samples;
}

std::vector<std::uint8_t> load_withheld_label(const DatasetManifest& manifest,
                                              const std::string& id) {
    return load_label_file(manifest, id);
}

// --- PPM / PGM ---------------------------------------------------------------

namespace {

int next_pnm_int(std::istream& is) {
    int c = is.get();
    while (c != EOF && (std::isspace(c) || c == '#')) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = is.get();
        }
        c = is.get();
    }
    int v = 0;
    bool any = false;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        any = true;
        c = is.get();
    }
    if (!any) throw std::runtime_error("PNM: malformed header");
    return v;
}

std::uint8_t to_byte(Real v) {
    const Real scaled = std::clamp(v, 0.0, 1.0) * 255.0;
    return static_cast<std::uint8_t>(std::lround(scaled));
}

}  // namespace

void write_ppm(const std::string& path, const Image& image) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_ppm: cannot open " + path);
    os << "P6\n" << image.w << " " << image.h << "\n255\n";
    std::vector<std::uint8_t> bytes(image.px.size());
    for (std::size_t i = 0; i < image.px.size(); ++i) bytes[i] = to_byte(image.px[i]);
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
    if (!os) throw std::runtime_error("write_ppm: write failed for " + path);
}

Image read_ppm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_ppm: cannot open " + path);
    char m0 = static_cast<char>(is.get()), m1 = static_cast<char>(is.get());
    if (m0 != 'P' || m1 != '6') throw std::runtime_error("read_ppm: " + path + " is not P6");
    const int w = next_pnm_int(is);
    const int h = next_pnm_int(is);
    const int maxval = next_pnm_int(is);
    if (maxval != 255) throw std::runtime_error("read_ppm: only maxval 255 supported");
    Image image = Image::zeros(h, w);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(h) * w * 3);
    is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!is) throw std::runtime_error("read_ppm: truncated file " + path);
    for (std::size_t i = 0; i < bytes.size(); ++i)
        image.px[i] = static_cast<Real>(bytes[i]) / 255.0;
    return image;
}

void write_pgm(const std::string& path, int h, int w, const std::vector<std::uint8_t>& values) {
    if (values.size() != static_cast<std::size_t>(h) * w) {
        throw std::invalid_argument("write_pgm: value count does not match size");
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_pgm: cannot open " + path);
    os << "P5\n" << w << " " << h << "\n255\n";
    os.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size()));
    if (!os) throw std::runtime_error("write_pgm: write failed for " + path);
}

std::vector<std::uint8_t> read_pgm(const std::string& path, int& h, int& w) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_pgm: cannot open " + path);
    char m0 = static_cast<char>(is.get()), m1 = static_cast<char>(is.get());
    if (m0 != 'P' || m1 != '5') throw std::runtime_error("read_pgm: " + path + " is not P5");
    w = next_pnm_int(is);
    h = next_pnm_int(is);
    const int maxval = next_pnm_int(is);
    if (maxval != 255) throw std::runtime_error("read_pgm: only maxval 255 supported");
    std::vector<std::uint8_t> values(static_cast<std::size_t>(h) * w);
    is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size()));
    if (!is) throw std::runtime_error("read_pgm: truncated file " + path);
    return values;
}

Tensor images_to_tensor(const std::vector<Image>& images) {
    if (images.empty()) throw std::invalid_argument("images_to_tensor: empty batch");
    const int h = images[0].h, w = images[0].w;
    const std::int64_t n = static_cast<std::int64_t>(images.size());
    Tensor t = Tensor::zeros({n, 3, h, w});
    Real* d = t.data();
    for (std::int64_t i = 0; i < n; ++i) {
        const Image& im = images[static_cast<std::size_t>(i)];
        if (im.h != h || im.w != w) {
            throw std::invalid_argument("images_to_tensor: mixed sizes in batch");
        }
        for (int c = 0; c < 3; ++c) {
            Real* plane = d + (i * 3 + c) * h * w;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) plane[y * w + x] = im.at(y, x, c);
        }
    }
    return t;
}

Image tensor_to_image(const Tensor& batch, int index) {
    const std::int64_t h = batch.dim(2), w = batch.dim(3);
    Image im = Image::zeros(static_cast<int>(h), static_cast<int>(w));
    const Real* d = batch.data();
    for (int c = 0; c < 3; ++c) {
        const Real* plane = d + (index * 3 + c) * h * w;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) im.at(y, x, c) = plane[y * w + x];
    }
    return im;
}

}  // namespace maskmatch
