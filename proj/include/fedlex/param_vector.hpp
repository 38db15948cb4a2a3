#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fedlex {

// One named tensor inside a flat parameter vector.
struct LayerSlot {
    std::string name;
    std::size_t offset = 0;
    std::vector<std::size_t> shape;

    std::size_t size() const;
    bool operator==(const LayerSlot&) const = default;
};

// Maps the flat array of a ParamVector onto layer tensors. Slots are
// contiguous and in order; total() is the sum of slot sizes.
class Layout {
public:
    Layout() = default;
    explicit Layout(std::vector<LayerSlot> slots);

    // Appends a slot at the current end and returns its index.
    std::size_t append(std::string name, std::vector<std::size_t> shape);

    const std::vector<LayerSlot>& slots() const noexcept { return slots_; }
    std::size_t total() const noexcept { return total_; }

    bool operator==(const Layout& other) const { return slots_ == other.slots_; }

private:
    std::vector<LayerSlot> slots_;
    std::size_t total_ = 0;
};

// Flat vector of model parameters (or gradients, deltas, guidance values)
// tagged with the layout it was built for. Copies are deep for values and
// share the immutable layout.
class ParamVector {
public:
    ParamVector() = default;
    explicit ParamVector(std::shared_ptr<const Layout> layout, double fill = 0.0);
    ParamVector(std::shared_ptr<const Layout> layout, std::vector<double> values);

    static ParamVector zeros_like(const ParamVector& other) { return ParamVector(other.layout_); }
    static ParamVector filled_like(const ParamVector& other, double v) { return ParamVector(other.layout_, v); }

    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }
    const std::vector<double>& raw() const noexcept { return values_; }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    const Layout& layout() const { return *layout_; }
    const std::shared_ptr<const Layout>& layout_ptr() const noexcept { return layout_; }

    // Views onto one slot of the layout.
    std::span<double> slot(std::size_t index);
    std::span<const double> slot(std::size_t index) const;

    bool same_layout(const ParamVector& other) const;

    // Bitwise value equality plus layout equality.
    bool operator==(const ParamVector& other) const;

private:
    std::shared_ptr<const Layout> layout_;
    std::vector<double> values_;
};

// Throws ShapeError when the two vectors were built for different layouts.
void require_same_layout(const ParamVector& a, const ParamVector& b, const char* op);

ParamVector add(const ParamVector& a, const ParamVector& b);
ParamVector subtract(const ParamVector& a, const ParamVector& b);
ParamVector scale(const ParamVector& a, double k);
ParamVector hadamard(const ParamVector& a, const ParamVector& b);

// dst += k * src
void add_scaled(ParamVector& dst, const ParamVector& src, double k);

// Population variance of each coordinate across the given vectors,
// averaged over coordinates. Zero for a single vector.
double variance_across(std::span<const ParamVector> vectors);

double max_abs(const ParamVector& a);

}  // namespace fedlex
