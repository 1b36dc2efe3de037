#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "maskmatch/tensor.hpp"

namespace maskmatch {

// Row-major HWC image with values in [0,1].
struct Image {
    int h = 0;
    int w = 0;
    std::vector<Real> px;

    static Image zeros(int h, int w) {
        Image im;
        im.h = h;
        im.w = w;
        im.px.assign(static_cast<std::size_t>(h) * w * 3, 0.0);
        return im;
    }
    Real& at(int y, int x, int c) { return px[(static_cast<std::size_t>(y) * w + x) * 3 + c]; }
    Real at(int y, int x, int c) const {
        return px[(static_cast<std::size_t>(y) * w + x) * 3 + c];
    }
};

struct SegSample {
    std::string id;
    Image image;
    std::optional<std::vector<std::uint8_t>> label;  // H*W class ids, absent for unlabeled
};

struct DatasetManifest {
    int classes = 0;
    int height = 0;
    int width = 0;
    int labeled_count = 0;
    int unlabeled_count = 0;
    int val_count = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> labeled_ids;
    std::vector<std::string> unlabeled_ids;
    std::vector<std::string> val_ids;
    std::string root_dir;
};

enum class Split { kLabeled, kUnlabeled, kVal };

Split split_from_string(const std::string& name);
std::string split_name(Split split);

// Writes images/<id>.ppm, labels/<id>.pgm and manifest.json under out_dir.
// Content is a pure function of the arguments; the same seed reproduces the
// directory byte for byte. Labels exist on disk for every split; the
// unlabeled split simply does not surface them through load_split.
DatasetManifest generate_dataset(int classes, int height, int width, int labeled, int unlabeled,
                                 int val, std::uint64_t seed, const std::string& out_dir);

DatasetManifest load_manifest(const std::string& dir);

std::vector<SegSample> load_split(const DatasetManifest& manifest, Split split);

// Ground truth for an unlabeled sample; diagnostics only, never training.
std::vector<std::uint8_t> load_withheld_label(const DatasetManifest& manifest,
                                              const std::string& id);

// --- PPM / PGM (binary, 8-bit) ----------------------------------------------

void write_ppm(const std::string& path, const Image& image);
Image read_ppm(const std::string& path);
void write_pgm(const std::string& path, int h, int w, const std::vector<std::uint8_t>& values);
std::vector<std::uint8_t> read_pgm(const std::string& path, int& h, int& w);

// --- batching helpers ---------------------------------------------------------

Tensor images_to_tensor(const std::vector<Image>& images);
Image tensor_to_image(const Tensor& batch, int index);

}  // namespace maskmatch
