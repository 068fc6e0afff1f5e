#include "sesa/attention.hpp"

#include "sesa/error.hpp"
#include "sesa/random.hpp"

#include <algorithm>
#include <cmath>

namespace sesa {

void AttentionParams::validate() const {
    if (wq.cols() < 1 || wq.cols() != wk.cols()) {
        throw InputError("attention: wq and wk must share a column count k >= 1");
    }
    if (wv.rows() != wv.cols()) throw InputError("attention: wv must be square");
    if (wq.rows() != wv.rows() || wk.rows() != wv.rows()) {
        throw InputError("attention: projection row counts must all equal d");
    }
}

AttentionParams AttentionParams::zeros(Eigen::Index d, Eigen::Index k) {
    return {Matrix::Zero(d, k), Matrix::Zero(d, k), Matrix::Zero(d, d)};
}

AttentionParams AttentionParams::random(Eigen::Index d, Eigen::Index k, std::uint64_t seed) {
    CounterRng rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(d));
    auto fill = [&](Matrix& m) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = rng.uniform(-bound, bound);
        }
    };
    AttentionParams p = zeros(d, k);
    fill(p.wq);
    fill(p.wk);
    fill(p.wv);
    return p;
}

Matrix softmax_rows(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const double top = m.row(i).maxCoeff();
        double sum = 0.0;
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            out(i, j) = std::exp(m(i, j) - top);
            sum += out(i, j);
        }
        out.row(i) /= sum;
    }
    return out;
}

AttentionOutput attention_forward(const Matrix& x, const AttentionParams& p, bool keep_weights,
                                  Eigen::Index block_rows) {
    p.validate();
    if (x.cols() != p.dim()) {
        throw InputError("attention_forward: input has " + std::to_string(x.cols()) + " columns, parameters expect " +
                         std::to_string(p.dim()));
    }
    const Eigen::Index n = x.rows();
    const double scale = 1.0 / std::sqrt(static_cast<double>(p.dk()));
    const Matrix q = x * p.wq;
    const Matrix k = x * p.wk;
    const Matrix v = x * p.wv;
    AttentionOutput out;
    out.output.resize(n, x.cols());
    if (keep_weights) out.weights.resize(n, n);
    const Eigen::Index step = std::max<Eigen::Index>(1, block_rows);
    for (Eigen::Index start = 0; start < n; start += step) {
        const Eigen::Index len = std::min(step, n - start);
        const Matrix a = softmax_rows(scale * q.middleRows(start, len) * k.transpose());
        out.output.middleRows(start, len).noalias() = a * v;
        if (keep_weights) out.weights.middleRows(start, len) = a;
    }
    return out;
}

Matrix refine(const Matrix& filled, const AttentionParams& p, const Mask& provenance, Eigen::Index block_rows) {
    if (provenance.rows() != filled.rows() || provenance.cols() != filled.cols()) {
        throw InputError("refine: provenance shape does not match data");
    }
    Matrix out = filled;
    if (provenance.count() == 0) return out;
    const Matrix y = attention_forward(filled, p, false, block_rows).output;
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        for (Eigen::Index i = 0; i < out.rows(); ++i) {
            if (provenance(i, j)) out(i, j) = y(i, j);
        }
    }
    return out;
}

Imputed refine(const Imputed& filled, const AttentionParams& p, Eigen::Index block_rows) {
    return {refine(filled.values, p, filled.provenance, block_rows), filled.provenance};
}

}  // namespace sesa
