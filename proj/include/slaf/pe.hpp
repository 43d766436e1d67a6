#pragma once

#include "slaf/common.hpp"
#include <cmath>

namespace slaf {

// Fixed sinusoidal positional encodings:
//   PE(pos, 2d)   = sin(pos / 10000^(2d/d_model))
//   PE(pos, 2d+1) = cos(pos / 10000^(2d/d_model))
// Computed in double and cast to the working scalar. Positions are 0-based
// internally; a 1-based position p in schedule arithmetic maps to row p-1.

template <typename S>
Mat<S> positional_encoding_vector(int pos, int d_model) {
    SLAF_CHECK(pos >= 0, "positional_encoding: negative position ", pos);
    SLAF_CHECK(d_model >= 2 && d_model % 2 == 0, "positional_encoding: d_model must be even, got ", d_model);
    Mat<S> v(1, d_model);
    for (int d = 0; d < d_model / 2; ++d) {
        double freq = std::pow(10000.0, 2.0 * d / d_model);
        v(0, 2 * d) = static_cast<S>(std::sin(pos / freq));
        v(0, 2 * d + 1) = static_cast<S>(std::cos(pos / freq));
    }
    return v;
}

template <typename S>
struct PETable {
    Mat<S> table; // max_positions x d_model

    PETable() = default;
    PETable(int max_positions, int d_model) : table(max_positions, d_model) {
        for (int pos = 0; pos < max_positions; ++pos)
            table.row(pos) = positional_encoding_vector<S>(pos, d_model).row(0);
    }

    Mat<S> row(int pos) const {
        SLAF_CHECK(pos >= 0 && pos < table.rows(),
                   "positional_encoding: position ", pos, " outside table of ", table.rows(), " rows");
        return table.row(pos);
    }

    // rows [start, start+len), as a matrix
    Mat<S> rows(int start, int len) const {
        SLAF_CHECK(start >= 0 && len >= 0 && start + len <= table.rows(),
                   "positional_encoding: row range [", start, ",", start + len,
                   ") outside table of ", table.rows(), " rows");
        return table.middleRows(start, len);
    }
};

} // namespace slaf
