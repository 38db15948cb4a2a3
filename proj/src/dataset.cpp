#include "fedlex/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>

#include "fedlex/error.hpp"
#include "fedlex/random.hpp"

namespace fedlex {

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
    Dataset out;
    out.classes = classes;
    out.inputs = Matrix(indices.size(), inputs.cols);
    out.labels.reserve(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        auto src = inputs.row(indices[i]);
        std::copy(src.begin(), src.end(), out.inputs.row(i).begin());
        out.labels.push_back(labels[indices[i]]);
    }
    return out;
}

Batch Dataset::batch(const std::vector<std::size_t>& indices) const {
    Dataset sub = subset(indices);
    return Batch{std::move(sub.inputs), std::move(sub.labels)};
}

std::vector<std::size_t> Dataset::histogram() const {
    std::vector<std::size_t> h(static_cast<std::size_t>(classes), 0);
    for (int y : labels) ++h[static_cast<std::size_t>(y)];
    return h;
}

Dataset gen_synthetic(int classes, std::size_t dim, std::size_t per_class, double separation, std::uint64_t seed) {
    if (classes < 2) throw ConfigError("classes", "synthetic data needs at least 2 classes");
    if (dim == 0) throw ConfigError("dim", "must be positive");
    if (per_class < 10) throw ConfigError("per_class", "synthetic data needs at least 10 samples per class");
    if (!(separation >= 0.0) || !std::isfinite(separation))
        throw ConfigError("separation", "must be a finite non-negative number");

    auto rng = make_rng(seed, Stream::Data);
    std::normal_distribution<double> normal(0.0, 1.0);

    const auto k = static_cast<std::size_t>(classes);
    Matrix means(k, dim);
    if (k <= dim) {
        for (std::size_t c = 0; c < k; ++c) means(c, c) = separation;
    } else {
        for (std::size_t c = 0; c < k; ++c) {
            double norm = 0.0;
            for (auto& v : means.row(c)) {
                v = normal(rng);
                norm += v * v;
            }
            norm = std::sqrt(norm);
            for (auto& v : means.row(c)) v *= separation / norm;
        }
    }

    Dataset ds;
    ds.classes = classes;
    ds.inputs = Matrix(k * per_class, dim);
    ds.labels.reserve(k * per_class);
    std::size_t r = 0;
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < per_class; ++i, ++r) {
            auto row = ds.inputs.row(r);
            for (std::size_t j = 0; j < dim; ++j) row[j] = means(c, j) + normal(rng);
            ds.labels.push_back(static_cast<int>(c));
        }
    }
    return ds;
}

namespace {

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::uint32_t be32(const std::vector<unsigned char>& bytes, std::size_t at, const std::filesystem::path& path) {
    if (at + 4 > bytes.size()) throw FormatError(path.string() + ": truncated header");
    return (std::uint32_t{bytes[at]} << 24) | (std::uint32_t{bytes[at + 1]} << 16) |
           (std::uint32_t{bytes[at + 2]} << 8) | std::uint32_t{bytes[at + 3]};
}

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
    const auto images = read_all(images_path);
    const auto labels = read_all(labels_path);

    if (be32(images, 0, images_path) != kImageMagic)
        throw FormatError(images_path.string() + ": bad magic number, expected 0x00000803");
    if (be32(labels, 0, labels_path) != kLabelMagic)
        throw FormatError(labels_path.string() + ": bad magic number, expected 0x00000801");

    const std::size_t n = be32(images, 4, images_path);
    const std::size_t rows = be32(images, 8, images_path);
    const std::size_t cols = be32(images, 12, images_path);
    const std::size_t n_labels = be32(labels, 4, labels_path);

    const std::size_t dim = rows * cols;
    if (images.size() != 16 + n * dim)
        throw FormatError(images_path.string() + ": expected " + std::to_string(16 + n * dim) + " bytes, found " +
                          std::to_string(images.size()));
    if (labels.size() != 8 + n_labels)
        throw FormatError(labels_path.string() + ": expected " + std::to_string(8 + n_labels) + " bytes, found " +
                          std::to_string(labels.size()));
    if (n != n_labels)
        throw FormatError("image count " + std::to_string(n) + " does not match label count " +
                          std::to_string(n_labels));
    if (n == 0) throw FormatError(images_path.string() + ": no samples");

    Dataset ds;
    ds.inputs = Matrix(n, dim);
    for (std::size_t i = 0; i < n * dim; ++i) ds.inputs.data[i] = images[16 + i] / 255.0;
    ds.labels.resize(n);
    int max_label = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ds.labels[i] = labels[8 + i];
        max_label = std::max(max_label, ds.labels[i]);
    }
    ds.classes = max_label + 1;
    return ds;
}

}  // namespace fedlex
