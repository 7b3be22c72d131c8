#pragma once

#include <cstddef>
#include <cstdlib>
#include <initializer_list>
#include <new>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace jigsawssl {

// 64-byte-aligned storage. Eigen's vectorized kernels peel loops based on
// the runtime address, so unaligned heap buffers make summation order (and
// thus the last ulp) depend on allocator state; fixed alignment keeps every
// run bit-identical.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::size_t kAlign = 64;

    AlignedAllocator() noexcept = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) {
        void* p = std::aligned_alloc(kAlign, ((n * sizeof(T) + kAlign - 1) / kAlign) * kAlign);
        if (!p) throw std::bad_alloc();
        return static_cast<T*>(p);
    }
    void deallocate(T* p, std::size_t) noexcept { std::free(p); }

    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using AlignedDoubles = std::vector<double, AlignedAllocator<double>>;

// Dense row-major double tensor. Shapes are small vectors of extents; all of
// the network math below runs on doubles so finite-difference checks stay
// well inside tolerance.
struct Tensor {
    std::vector<int> shape;
    AlignedDoubles data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(count(shape), 0.0) {}

    static std::size_t count(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) {
            if (d < 0) throw std::invalid_argument("Tensor: negative extent");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    std::size_t numel() const { return data.size(); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    int rank() const { return static_cast<int>(shape.size()); }

    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }
    void zero() { fill(0.0); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }
};

}  // namespace jigsawssl
