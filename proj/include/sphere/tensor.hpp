#pragma once

// Minimal dense n-dimensional array used by the rank simulator: row-major
// storage with slice/concatenate along arbitrary dimensions.

#include <complex>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace sphere {

template <class T>
struct NdArray {
    std::vector<std::size_t> shape;
    std::vector<T> data;

    NdArray() = default;
    explicit NdArray(std::vector<std::size_t> s) : shape(std::move(s)) {
        data.assign(numel(), T{});
    }
    NdArray(std::vector<std::size_t> s, std::vector<T> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != numel()) throw std::invalid_argument("NdArray: size mismatch");
    }

    std::size_t rank() const { return shape.size(); }
    std::size_t numel() const {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return n;
    }

    std::vector<std::size_t> strides() const {
        std::vector<std::size_t> s(shape.size(), 1);
        for (std::size_t d = shape.size(); d-- > 1;) s[d - 1] = s[d] * shape[d];
        return s;
    }

    T& at(const std::vector<std::size_t>& idx) {
        return data[flat_index(idx)];
    }
    const T& at(const std::vector<std::size_t>& idx) const {
        return data[flat_index(idx)];
    }

    std::size_t flat_index(const std::vector<std::size_t>& idx) const {
        std::size_t f = 0, stride = 1;
        for (std::size_t d = shape.size(); d-- > 0;) {
            f += idx[d] * stride;
            stride *= shape[d];
        }
        return f;
    }
};

// Contiguous sub-array [start, start+len) along one dimension.
template <class T>
NdArray<T> slice_dim(const NdArray<T>& a, std::size_t dim, std::size_t start,
                     std::size_t len) {
    if (dim >= a.rank() || start + len > a.shape[dim])
        throw std::invalid_argument("slice_dim: out of range");
    std::vector<std::size_t> oshape = a.shape;
    oshape[dim] = len;
    NdArray<T> out(oshape);

    std::size_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < dim; ++d) outer *= a.shape[d];
    for (std::size_t d = dim + 1; d < a.rank(); ++d) inner *= a.shape[d];
    const std::size_t in_block = a.shape[dim] * inner;
    const std::size_t out_block = len * inner;
    for (std::size_t o = 0; o < outer; ++o)
        std::copy(a.data.begin() + o * in_block + start * inner,
                  a.data.begin() + o * in_block + (start + len) * inner,
                  out.data.begin() + o * out_block);
    return out;
}

// Concatenate along one dimension; all other extents must agree.
template <class T>
NdArray<T> concat_dim(const std::vector<NdArray<T>>& parts, std::size_t dim) {
    if (parts.empty()) throw std::invalid_argument("concat_dim: empty input");
    std::vector<std::size_t> oshape = parts.front().shape;
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p.rank() != oshape.size()) throw std::invalid_argument("concat_dim: rank mismatch");
        for (std::size_t d = 0; d < oshape.size(); ++d)
            if (d != dim && p.shape[d] != oshape[d])
                throw std::invalid_argument("concat_dim: shape mismatch");
        total += p.shape[dim];
    }
    oshape[dim] = total;
    NdArray<T> out(oshape);

    std::size_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < dim; ++d) outer *= oshape[d];
    for (std::size_t d = dim + 1; d < oshape.size(); ++d) inner *= oshape[d];
    const std::size_t out_block = total * inner;
    std::size_t offset = 0;
    for (const auto& p : parts) {
        const std::size_t in_block = p.shape[dim] * inner;
        for (std::size_t o = 0; o < outer; ++o)
            std::copy(p.data.begin() + o * in_block, p.data.begin() + (o + 1) * in_block,
                      out.data.begin() + o * out_block + offset);
        offset += in_block;
    }
    return out;
}

template <class T>
void add_into(NdArray<T>& acc, const NdArray<T>& x) {
    if (acc.shape != x.shape) throw std::invalid_argument("add_into: shape mismatch");
    for (std::size_t k = 0; k < acc.data.size(); ++k) acc.data[k] += x.data[k];
}

}  // namespace sphere
