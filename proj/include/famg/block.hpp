#pragma once

#include <optional>
#include <vector>

#include "csr.hpp"
#include "operator.hpp"
#include "types.hpp"

namespace famg {

// 2D grid of optional CSR blocks. Absent blocks are structural zeros.
struct BlockSystem {
    std::vector<index_t> row_dims;
    std::vector<index_t> col_dims;
    std::vector<std::optional<CsrMatrix>> blocks;  // row-major, row_dims.size() x col_dims.size()

    BlockSystem() = default;
    BlockSystem(std::vector<index_t> rd, std::vector<index_t> cd)
        : row_dims(std::move(rd)), col_dims(std::move(cd)),
          blocks(row_dims.size() * col_dims.size()) {}

    index_t block_rows() const { return static_cast<index_t>(row_dims.size()); }
    index_t block_cols() const { return static_cast<index_t>(col_dims.size()); }

    const std::optional<CsrMatrix>& at(index_t bi, index_t bj) const {
        return blocks[static_cast<std::size_t>(bi) * col_dims.size() + bj];
    }

    void set_block(index_t bi, index_t bj, CsrMatrix B) {
        if (B.nrows != row_dims[bi] || B.ncols != col_dims[bj])
            throw dimension_error("BlockSystem::set_block: block (" + std::to_string(bi) + "," +
                                  std::to_string(bj) + ") is " + std::to_string(B.nrows) + "x" +
                                  std::to_string(B.ncols) + ", expected " +
                                  std::to_string(row_dims[bi]) + "x" + std::to_string(col_dims[bj]));
        blocks[static_cast<std::size_t>(bi) * col_dims.size() + bj] = std::move(B);
    }

    index_t total_rows() const {
        index_t s = 0;
        for (index_t d : row_dims) s += d;
        return s;
    }
    index_t total_cols() const {
        index_t s = 0;
        for (index_t d : col_dims) s += d;
        return s;
    }

    // Flattens by row stitching; block column groups appear in order, so the
    // result is already canonical.
    CsrMatrix flatten() const {
        CsrMatrix F;
        F.nrows = total_rows();
        F.ncols = total_cols();
        F.row_offsets.assign(static_cast<std::size_t>(F.nrows) + 1, 0);

        std::vector<index_t> col_off(col_dims.size() + 1, 0);
        for (std::size_t j = 0; j < col_dims.size(); ++j) col_off[j + 1] = col_off[j] + col_dims[j];

        index_t grow = 0;
        for (index_t bi = 0; bi < block_rows(); ++bi) {
            for (index_t r = 0; r < row_dims[bi]; ++r, ++grow) {
                for (index_t bj = 0; bj < block_cols(); ++bj) {
                    const std::optional<CsrMatrix>& B = at(bi, bj);
                    if (!B) continue;
                    for (index_t k = B->row_offsets[r]; k < B->row_offsets[r + 1]; ++k) {
                        F.col_indices.push_back(col_off[bj] + B->col_indices[k]);
                        F.values.push_back(B->values[k]);
                    }
                }
                F.row_offsets[static_cast<std::size_t>(grow) + 1] =
                    static_cast<index_t>(F.col_indices.size());
            }
        }
        return F;
    }

    // y = block-matrix times x, without flattening
    void apply(const DenseVector& x, DenseVector& y) const {
        check_dims(x.size(), static_cast<std::size_t>(total_cols()), "BlockSystem apply");
        y.assign(static_cast<std::size_t>(total_rows()), 0.0);
        std::vector<index_t> col_off(col_dims.size() + 1, 0);
        for (std::size_t j = 0; j < col_dims.size(); ++j) col_off[j + 1] = col_off[j] + col_dims[j];
        index_t row_base = 0;
        for (index_t bi = 0; bi < block_rows(); ++bi) {
            for (index_t bj = 0; bj < block_cols(); ++bj) {
                const std::optional<CsrMatrix>& B = at(bi, bj);
                if (!B) continue;
                for (index_t r = 0; r < B->nrows; ++r) {
                    double s = 0.0;
                    for (index_t k = B->row_offsets[r]; k < B->row_offsets[r + 1]; ++k)
                        s += B->values[k] * x[col_off[bj] + B->col_indices[k]];
                    y[row_base + r] += s;
                }
            }
            row_base += row_dims[bi];
        }
    }
};

struct BlockOperator final : LinearOperator {
    const BlockSystem& B;
    explicit BlockOperator(const BlockSystem& B_) : B(B_) {
        if (B.total_rows() != B.total_cols())
            throw dimension_error("BlockOperator: system not square");
    }
    index_t dim() const override { return B.total_rows(); }
    void apply(const DenseVector& x, DenseVector& y) const override { B.apply(x, y); }
};

}  // namespace famg
