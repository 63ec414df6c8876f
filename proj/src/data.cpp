#include "gohsp/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "gohsp/errors.hpp"
#include "gohsp/rng.hpp"

namespace gohsp {

namespace {

constexpr std::size_t kCifarPixels = 3072; // 3 channels x 32 x 32
constexpr std::size_t kCifarRecord = kCifarPixels + 1;

std::string msg(const char* fmt, const std::string& path, std::size_t a, std::size_t b = 0) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), fmt, path.c_str(), a, b);
    return buf;
}

} // namespace

void Dataset::validate() const {
    if (images.rows() != labels.size())
        throw DimensionError("dataset image rows do not match label count");
    for (int y : labels)
        if (y < 0) throw DataError("dataset contains a negative label");
}

Dataset load_cifar10_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open data file: " + path);
    std::vector<unsigned char> raw((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    if (raw.empty() || raw.size() % kCifarRecord != 0)
        throw FormatError(msg("%s: size %zu is not a multiple of the 3073-byte record", path,
                              raw.size()));
    const std::size_t n = raw.size() / kCifarRecord;

    Dataset d;
    d.images = Tensor({n, kCifarPixels});
    d.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned char* rec = raw.data() + i * kCifarRecord;
        if (rec[0] > 9)
            throw FormatError(msg("%s: record %zu has label %zu out of range", path, i, rec[0]));
        d.labels[i] = static_cast<int>(rec[0]);
        for (std::size_t p = 0; p < kCifarPixels; ++p) {
            const std::size_t channel = p / 1024;
            const double x = static_cast<double>(rec[1 + p]) / 255.0;
            d.images.at(i, p) = (x - kCifarMean[channel]) / kCifarStd[channel];
        }
    }
    return d;
}

Dataset load_cifar10(const std::string& dir) {
    Dataset all;
    std::vector<Dataset> parts;
    std::size_t total = 0;
    for (int b = 1; b <= 5; ++b) {
        parts.push_back(load_cifar10_file(dir + "/data_batch_" + std::to_string(b) + ".bin"));
        total += parts.back().size();
    }
    all.images = Tensor({total, kCifarPixels});
    all.labels.reserve(total);
    std::size_t row = 0;
    for (const Dataset& part : parts) {
        for (std::size_t i = 0; i < part.size(); ++i, ++row) {
            for (std::size_t p = 0; p < kCifarPixels; ++p)
                all.images.at(row, p) = part.images.at(i, p);
            all.labels.push_back(part.labels[i]);
        }
    }
    return all;
}

Dataset gen_synthetic(std::uint64_t seed, std::size_t classes, std::size_t samples,
                      std::size_t pixels) {
    if (classes < 2) throw ConfigError("synthetic data needs at least 2 classes");
    if (samples == 0) throw ConfigError("synthetic data needs at least 1 sample");
    if (pixels == 0) throw ConfigError("synthetic data needs at least 1 pixel");

    Rng rng(seed);
    Tensor means({classes, pixels});
    for (double& v : means.vec()) v = rng.normal();

    Dataset d;
    d.images = Tensor({samples, pixels});
    d.labels.resize(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        const std::size_t c = i % classes;
        d.labels[i] = static_cast<int>(c);
        for (std::size_t p = 0; p < pixels; ++p)
            d.images.at(i, p) = means.at(c, p) + rng.normal();
    }
    return d;
}

std::pair<Dataset, Dataset> split_train_val(const Dataset& d) {
    d.validate();
    const std::size_t n = d.size();
    const std::size_t n_val = n / 10;
    return {slice_batch(d, 0, n - n_val), slice_batch(d, n - n_val, n)};
}

Dataset slice_batch(const Dataset& d, std::size_t begin, std::size_t end) {
    if (begin > end || end > d.size()) throw IndexError("batch slice out of range");
    const std::size_t pixels = d.images.cols();
    Dataset out;
    out.images = Tensor({end - begin, pixels});
    out.labels.assign(d.labels.begin() + static_cast<std::ptrdiff_t>(begin),
                      d.labels.begin() + static_cast<std::ptrdiff_t>(end));
    for (std::size_t i = begin; i < end; ++i)
        for (std::size_t p = 0; p < pixels; ++p) out.images.at(i - begin, p) = d.images.at(i, p);
    return out;
}

double nearest_centroid_accuracy(const Dataset& fit, const Dataset& eval) {
    fit.validate();
    eval.validate();
    if (fit.size() == 0 || eval.size() == 0)
        throw ContractError("nearest_centroid_accuracy needs samples");
    if (fit.images.cols() != eval.images.cols())
        throw DimensionError("fit/eval pixel widths disagree");
    const std::size_t pixels = fit.images.cols();
    const int classes = *std::max_element(fit.labels.begin(), fit.labels.end()) + 1;

    Tensor centroid({static_cast<std::size_t>(classes), pixels});
    std::vector<std::size_t> counts(static_cast<std::size_t>(classes), 0);
    for (std::size_t i = 0; i < fit.size(); ++i) {
        const auto c = static_cast<std::size_t>(fit.labels[i]);
        ++counts[c];
        for (std::size_t p = 0; p < pixels; ++p) centroid.at(c, p) += fit.images.at(i, p);
    }
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] == 0) continue;
        for (std::size_t p = 0; p < pixels; ++p)
            centroid.at(c, p) /= static_cast<double>(counts[c]);
    }

    std::size_t hits = 0;
    for (std::size_t i = 0; i < eval.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        int arg = 0;
        for (int c = 0; c < classes; ++c) {
            double dist = 0.0;
            for (std::size_t p = 0; p < pixels; ++p) {
                const double diff =
                    eval.images.at(i, p) - centroid.at(static_cast<std::size_t>(c), p);
                dist += diff * diff;
            }
            if (dist < best) {
                best = dist;
                arg = c;
            }
        }
        if (arg == eval.labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(eval.size());
}

double nearest_centroid_accuracy(const Dataset& d) {
    return nearest_centroid_accuracy(d, d);
}

} // namespace gohsp
