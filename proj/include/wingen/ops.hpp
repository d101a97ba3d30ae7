#pragma once

#include <cstdint>
#include <vector>

#include "wingen/tape.hpp"

// Differentiable operations on tape variables. Matrices are row-major [rows x cols];
// "rows" ops treat the last axis as the row.
namespace wingen::ops {

Var matmul(Var a, Var b);
/// a * b^T without materializing the transpose.
Var matmul_nt(Var a, Var b);
Var transpose(Var a);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_const(Var a, double c);
/// Multiplies every element of `a` by the single element of `s`.
Var scale_by(Var a, Var s);
/// x[N x D] + row[1 x D] broadcast over rows.
Var add_row(Var x, Var row);
/// x[N x D] * row[1 x D] broadcast over rows.
Var mul_row(Var x, Var row);

Var square(Var a);
Var gelu(Var a);
Var silu(Var a);

Var layer_norm_rows(Var x, double eps = 1e-6);
Var softmax_rows(Var a);
/// Softmax restricted to entries with allow[r * cols + c] != 0. Rows without any
/// allowed entry produce all zeros.
Var masked_softmax_rows(Var a, const std::vector<std::uint8_t>& allow);

/// Rotates consecutive pairs (2p, 2p+1) of row r by angles[r][p].
Var rotary(Var x, const DenseArray& angles);

Var slice_rows(Var a, std::size_t r0, std::size_t r1);
Var slice_cols(Var a, std::size_t c0, std::size_t c1);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
/// Row gather; index -1 yields a zero row.
Var gather_rows(Var a, const std::vector<long>& index);
Var reshape(Var a, Shape shape);

Var sum(Var a);
Var mean(Var a);
/// sum_i w_i * a_i for a constant weight array of the same size.
Var weighted_sum(Var a, const DenseArray& w);

}  // namespace wingen::ops
