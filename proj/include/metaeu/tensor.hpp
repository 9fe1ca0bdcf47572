#pragma once
// Dense row-major matrix of 64-bit reals. Value semantics; shapes are part
// of every operation's contract and mismatches throw dim_error.

#include "metaeu/error.hpp"
#include "metaeu/rng.hpp"

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace metaeu {

struct Tensor2 {
    int64_t rows = 0;
    int64_t cols = 0;
    std::vector<double> data; // rows*cols, row-major

    Tensor2() = default;
    Tensor2(int64_t r, int64_t c) : rows(r), cols(c), data(static_cast<size_t>(r * c), 0.0) {}

    static Tensor2 zeros(int64_t r, int64_t c) { return Tensor2(r, c); }

    static Tensor2 from_rows(std::initializer_list<std::initializer_list<double>> rws) {
        Tensor2 t(static_cast<int64_t>(rws.size()),
                  rws.size() ? static_cast<int64_t>(rws.begin()->size()) : 0);
        int64_t i = 0;
        for (const auto& row : rws) {
            if (static_cast<int64_t>(row.size()) != t.cols)
                throw Error("dim_error", "ragged initializer");
            int64_t j = 0;
            for (double v : row) t.at(i, j++) = v;
            ++i;
        }
        return t;
    }

    static Tensor2 uniform(int64_t r, int64_t c, double lo, double hi, Rng& rng) {
        Tensor2 t(r, c);
        for (auto& v : t.data) v = rng.uniform(lo, hi);
        return t;
    }

    double& at(int64_t i, int64_t j) { return data[static_cast<size_t>(i * cols + j)]; }
    double at(int64_t i, int64_t j) const { return data[static_cast<size_t>(i * cols + j)]; }

    double* row(int64_t i) { return data.data() + i * cols; }
    const double* row(int64_t i) const { return data.data() + i * cols; }

    size_t size() const { return data.size(); }
    bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

} // namespace metaeu
