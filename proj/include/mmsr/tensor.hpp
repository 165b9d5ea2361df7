#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmsr/errors.hpp"

namespace mmsr {

// Dense row-major tensor of doubles. Rank is 1..3 in practice:
// {n} vectors, {H,W} images, {C,H,W} feature maps.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, double fill = 0.0);
    static Tensor scalar(double v);

    int size() const { return static_cast<int>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }

    double& operator[](int i) { return data[static_cast<size_t>(i)]; }
    double operator[](int i) const { return data[static_cast<size_t>(i)]; }

    // {H,W} access
    double& at(int i, int j) { return data[static_cast<size_t>(i) * shape[1] + j]; }
    double at(int i, int j) const { return data[static_cast<size_t>(i) * shape[1] + j]; }
    // {C,H,W} access
    double& at(int c, int i, int j) {
        return data[(static_cast<size_t>(c) * shape[1] + i) * shape[2] + j];
    }
    double at(int c, int i, int j) const {
        return data[(static_cast<size_t>(c) * shape[1] + i) * shape[2] + j];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool all_finite() const;
    std::string shape_str() const;
};

// 2D scalar patch; the unit every loss and network consumes.
// Normalized patches lie in [-1, 1] (enforced at the pipeline boundary).
struct ImagePatch {
    int height = 0;
    int width = 0;
    std::vector<double> data;

    ImagePatch() = default;
    ImagePatch(int h, int w, double fill = 0.0);
    static ImagePatch from_tensor(const Tensor& t);
    Tensor to_tensor() const;        // {H,W}
    Tensor to_chw() const;           // {1,H,W}

    double& at(int i, int j) { return data[static_cast<size_t>(i) * width + j]; }
    double at(int i, int j) const { return data[static_cast<size_t>(i) * width + j]; }
    int size() const { return height * width; }
};

// Deterministic integer-driven RNG stream. All randomness in the project
// goes through this wrapper so sampling never depends on
// implementation-defined distribution code.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

    std::uint64_t next_u64();
    // uniform in [0, n)
    std::uint64_t next_index(std::uint64_t n);
    // uniform in [0, 1)
    double next_double();
    // uniform in [lo, hi)
    double next_uniform(double lo, double hi);
    // standard normal (Box-Muller on the integer stream, no spare caching
    // so the full generator state is the single 64-bit word)
    double next_normal();

    std::uint64_t state() const { return state_; }
    void set_state(std::uint64_t s) { state_ = s; }

private:
    std::uint64_t state_;
};

} // namespace mmsr
