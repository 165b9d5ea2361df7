#include "mmsr/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace mmsr {

Tensor::Tensor(std::vector<int> s, double fill) : shape(std::move(s)) {
    size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw ShapeError("non-positive tensor dimension");
        n *= static_cast<size_t>(d);
    }
    data.assign(n, fill);
}

Tensor Tensor::scalar(double v) {
    Tensor t({1});
    t.data[0] = v;
    return t;
}

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ")";
    return os.str();
}

ImagePatch::ImagePatch(int h, int w, double fill) : height(h), width(w) {
    if (h <= 0 || w <= 0) throw ShapeError("non-positive patch dimension");
    data.assign(static_cast<size_t>(h) * w, fill);
}

ImagePatch ImagePatch::from_tensor(const Tensor& t) {
    ImagePatch p;
    if (t.rank() == 2) {
        p.height = t.dim(0);
        p.width = t.dim(1);
    } else if (t.rank() == 3 && t.dim(0) == 1) {
        p.height = t.dim(1);
        p.width = t.dim(2);
    } else {
        throw ShapeError("expected {H,W} or {1,H,W} tensor, got " + t.shape_str());
    }
    p.data = t.data;
    return p;
}

Tensor ImagePatch::to_tensor() const {
    Tensor t({height, width});
    t.data = data;
    return t;
}

Tensor ImagePatch::to_chw() const {
    Tensor t({1, height, width});
    t.data = data;
    return t;
}

// splitmix64; a fixed, platform-independent integer recurrence
std::uint64_t Rng::next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t Rng::next_index(std::uint64_t n) {
    // modulo reduction; bias is negligible for the n used here and the
    // result is identical on every platform
    return n ? next_u64() % n : 0;
}

double Rng::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
}

double Rng::next_normal() {
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

} // namespace mmsr
