#pragma once

#include "sesa/dataset.hpp"

#include <cstdint>

namespace sesa {

/// Single-head projections. wq and wk are d x k, wv is d x d so that the
/// attended values live in data space.
struct AttentionParams {
    Matrix wq;
    Matrix wk;
    Matrix wv;

    Eigen::Index dk() const { return wq.cols(); }
    Eigen::Index dim() const { return wv.rows(); }
    void validate() const;

    static AttentionParams zeros(Eigen::Index d, Eigen::Index k);
    /// Entries uniform in [-1/sqrt(d), 1/sqrt(d)] drawn from CounterRng(seed)
    /// in the order wq, wk, wv (column-major within each).
    static AttentionParams random(Eigen::Index d, Eigen::Index k, std::uint64_t seed);
};

/// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& m);

struct AttentionOutput {
    Matrix output;   // n x d
    Matrix weights;  // n x n, empty unless requested
};

/// Attention over rows: A = softmax((x wq)(x wk)^T / sqrt(k)), output = A (x wv).
/// Rows are processed in blocks of `block_rows` so the full n x n weight
/// matrix is only materialized when `keep_weights` is set.
AttentionOutput attention_forward(const Matrix& x, const AttentionParams& p, bool keep_weights = true,
                                  Eigen::Index block_rows = 4096);

/// Replaces cells flagged in `provenance` with the attention output and
/// keeps every other cell of `filled` untouched.
Matrix refine(const Matrix& filled, const AttentionParams& p, const Mask& provenance,
              Eigen::Index block_rows = 4096);

Imputed refine(const Imputed& filled, const AttentionParams& p, Eigen::Index block_rows = 4096);

}  // namespace sesa
