#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gohsp/tensor.hpp"

namespace gohsp {

// Flat image classification dataset: one normalized image per row.
struct Dataset {
    Tensor images; // N x pixel_count
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
    void validate() const;
};

// Channel means/stds used to normalize 32x32 RGB pixel data after /255
// scaling; recorded in reports so numbers are reproducible.
inline constexpr std::array<double, 3> kCifarMean{0.4914, 0.4822, 0.4465};
inline constexpr std::array<double, 3> kCifarStd{0.2470, 0.2435, 0.2616};

// One binary batch file: 3073-byte records (label byte + 3072 channel-major
// RGB bytes). Wrong record arithmetic or a label > 9 -> FormatError.
Dataset load_cifar10_file(const std::string& path);

// Concatenates data_batch_1.bin .. data_batch_5.bin from a directory.
Dataset load_cifar10(const std::string& dir);

// Deterministic class-conditional Gaussian blobs: per-class mean pixels drawn
// from N(0,1), unit-variance noise, labels assigned round-robin.
Dataset gen_synthetic(std::uint64_t seed, std::size_t classes, std::size_t samples,
                      std::size_t pixels = 3072);

// Fixed-index split: the last tenth (rounded down) becomes validation.
std::pair<Dataset, Dataset> split_train_val(const Dataset& d);

// Rows [begin, end) as an independent dataset.
Dataset slice_batch(const Dataset& d, std::size_t begin, std::size_t end);

// Accuracy of classifying eval samples by the nearest class centroid fitted
// on fit samples — a linear-probe sanity floor. The one-argument form fits
// and evaluates on the same data.
double nearest_centroid_accuracy(const Dataset& fit, const Dataset& eval);
double nearest_centroid_accuracy(const Dataset& d);

} // namespace gohsp
