#include "fedlex/param_vector.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "fedlex/error.hpp"

namespace fedlex {

std::size_t LayerSlot::size() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Layout::Layout(std::vector<LayerSlot> slots) : slots_(std::move(slots)) {
    std::size_t expected = 0;
    for (const auto& s : slots_) {
        if (s.offset != expected) throw ShapeError("layout slots must be contiguous: " + s.name);
        expected += s.size();
    }
    total_ = expected;
}

std::size_t Layout::append(std::string name, std::vector<std::size_t> shape) {
    LayerSlot slot{std::move(name), total_, std::move(shape)};
    total_ += slot.size();
    slots_.push_back(std::move(slot));
    return slots_.size() - 1;
}

ParamVector::ParamVector(std::shared_ptr<const Layout> layout, double fill)
    : layout_(std::move(layout)), values_(layout_ ? layout_->total() : 0, fill) {
    if (!layout_) throw ShapeError("ParamVector requires a layout");
}

ParamVector::ParamVector(std::shared_ptr<const Layout> layout, std::vector<double> values)
    : layout_(std::move(layout)), values_(std::move(values)) {
    if (!layout_) throw ShapeError("ParamVector requires a layout");
    if (values_.size() != layout_->total())
        throw ShapeError("ParamVector: " + std::to_string(values_.size()) + " values for a layout of " +
                         std::to_string(layout_->total()));
}

std::span<double> ParamVector::slot(std::size_t index) {
    const auto& s = layout_->slots().at(index);
    return std::span<double>(values_).subspan(s.offset, s.size());
}

std::span<const double> ParamVector::slot(std::size_t index) const {
    const auto& s = layout_->slots().at(index);
    return std::span<const double>(values_).subspan(s.offset, s.size());
}

bool ParamVector::same_layout(const ParamVector& other) const {
    if (layout_ == other.layout_) return true;
    if (!layout_ || !other.layout_) return false;
    return *layout_ == *other.layout_;
}

bool ParamVector::operator==(const ParamVector& other) const {
    return same_layout(other) && values_ == other.values_;
}

void require_same_layout(const ParamVector& a, const ParamVector& b, const char* op) {
    if (!a.same_layout(b)) throw ShapeError(std::string(op) + ": layout mismatch");
}

namespace {

template <typename F>
ParamVector zip(const ParamVector& a, const ParamVector& b, const char* op, F f) {
    require_same_layout(a, b, op);
    ParamVector out = ParamVector::zeros_like(a);
    auto x = a.values();
    auto y = b.values();
    auto z = out.values();
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = f(x[i], y[i]);
    return out;
}

}  // namespace

ParamVector add(const ParamVector& a, const ParamVector& b) {
    return zip(a, b, "add", [](double x, double y) { return x + y; });
}

ParamVector subtract(const ParamVector& a, const ParamVector& b) {
    return zip(a, b, "subtract", [](double x, double y) { return x - y; });
}

ParamVector hadamard(const ParamVector& a, const ParamVector& b) {
    return zip(a, b, "hadamard", [](double x, double y) { return x * y; });
}

ParamVector scale(const ParamVector& a, double k) {
    ParamVector out = a;
    for (double& v : out.values()) v *= k;
    return out;
}

void add_scaled(ParamVector& dst, const ParamVector& src, double k) {
    require_same_layout(dst, src, "add_scaled");
    auto d = dst.values();
    auto s = src.values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += k * s[i];
}

double variance_across(std::span<const ParamVector> vectors) {
    if (vectors.empty()) throw InvalidInput("variance_across: no vectors");
    for (const auto& v : vectors) require_same_layout(vectors.front(), v, "variance_across");
    const std::size_t m = vectors.front().size();
    if (m == 0) return 0.0;
    const double k = static_cast<double>(vectors.size());

    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double mean = 0.0;
        for (const auto& v : vectors) mean += v[i];
        mean /= k;
        double ss = 0.0;
        for (const auto& v : vectors) {
            const double d = v[i] - mean;
            ss += d * d;
        }
        total += ss / k;
    }
    return total / static_cast<double>(m);
}

double max_abs(const ParamVector& a) {
    double m = 0.0;
    for (double v : a.values()) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace fedlex
