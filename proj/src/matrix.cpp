#include "prosub/matrix.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <thread>

namespace prosub {

Matrix::Matrix(size_t rows, size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), v_(std::move(values)) {
    if (v_.size() != rows_ * cols_) {
        throw std::invalid_argument("Matrix: values length does not match rows*cols");
    }
}

bool Matrix::all_finite() const {
    for (double x : v_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

Matrix Matrix::take_rows(const std::vector<size_t>& idx) const {
    Matrix out(idx.size(), cols_);
    for (size_t i = 0; i < idx.size(); ++i) {
        const double* src = row(idx[i]);
        double* dst = out.row(i);
        for (size_t j = 0; j < cols_; ++j) dst[j] = src[j];
    }
    return out;
}

int matmul_threads() {
    static const int n = [] {
        if (const char* env = std::getenv("PROSUB_THREADS")) {
            int v = std::atoi(env);
            if (v >= 1) return v;
        }
        unsigned hw = std::thread::hardware_concurrency();
        return hw == 0 ? 1 : static_cast<int>(hw > 4 ? 4 : hw);
    }();
    return n;
}

namespace {

// Each worker owns a contiguous row range of the output, so the result is
// identical for any thread count.
template <typename Fn>
void parallel_rows(size_t rows, size_t flops, Fn&& fn) {
    int threads = matmul_threads();
    if (threads <= 1 || flops < (1u << 20) || rows < 2) {
        fn(0, rows);
        return;
    }
    size_t nt = std::min<size_t>(threads, rows);
    std::vector<std::thread> pool;
    pool.reserve(nt);
    size_t chunk = (rows + nt - 1) / nt;
    for (size_t t = 0; t < nt; ++t) {
        size_t lo = t * chunk;
        size_t hi = std::min(rows, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    for (auto& th : pool) th.join();
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dims differ");
    Matrix c(a.rows(), b.cols());
    const size_t inner = a.cols(), n = b.cols();
    parallel_rows(a.rows(), a.rows() * inner * n, [&](size_t lo, size_t hi) {
        for (size_t i = lo; i < hi; ++i) {
            double* ci = c.row(i);
            const double* ai = a.row(i);
            for (size_t k = 0; k < inner; ++k) {
                const double aik = ai[k];
                const double* bk = b.row(k);
                for (size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
            }
        }
    });
    return c;
}

Matrix matmul_transb(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw std::invalid_argument("matmul_transb: inner dims differ");
    Matrix c(a.rows(), b.rows());
    const size_t inner = a.cols(), n = b.rows();
    parallel_rows(a.rows(), a.rows() * inner * n, [&](size_t lo, size_t hi) {
        for (size_t i = lo; i < hi; ++i) {
            const double* ai = a.row(i);
            double* ci = c.row(i);
            for (size_t j = 0; j < n; ++j) {
                const double* bj = b.row(j);
                double s = 0.0;
                for (size_t k = 0; k < inner; ++k) s += ai[k] * bj[k];
                ci[j] = s;
            }
        }
    });
    return c;
}

Matrix matmul_transa(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw std::invalid_argument("matmul_transa: inner dims differ");
    Matrix c(a.cols(), b.cols());
    const size_t m = a.rows(), n = b.cols();
    parallel_rows(a.cols(), m * a.cols() * n, [&](size_t lo, size_t hi) {
        for (size_t i = 0; i < m; ++i) {
            const double* ai = a.row(i);
            const double* bi = b.row(i);
            for (size_t k = lo; k < hi; ++k) {
                const double aik = ai[k];
                double* ck = c.row(k);
                for (size_t j = 0; j < n; ++j) ck[j] += aik * bi[j];
            }
        }
    });
    return c;
}

}  // namespace prosub
