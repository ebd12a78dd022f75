#pragma once

#include <span>
#include <vector>

#include "driftlab/ad/rng.hpp"
#include "driftlab/ad/tensor.hpp"

namespace driftlab::ad {

// Rank-2 product [m x k] x [k x n] -> [m x n].
Tensor matmul(const Tensor& a, const Tensor& b);

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor tanh(const Tensor& x);

// x: [rows x n], bias: any shape with n elements; bias is added to every row.
Tensor add_bias(const Tensor& x, const Tensor& bias);
// Repeats a single row ([1 x n] or [n]) `count` times -> [count x n].
Tensor broadcast_rows(const Tensor& row, std::size_t count);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Both normalize over the last dimension.
Tensor softmax(const Tensor& logits);
Tensor log_softmax(const Tensor& logits);

// Dot-product attention per row b: weights softmax_j(query[b] . keys[j][b]),
// result sum_j weight_j * keys[j][b]. query and every key are [B x d].
Tensor attention(const Tensor& query, const std::vector<Tensor>& keys);

// Mean over rows of -log_softmax(logits)[row, targets[row]].
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets);

// Gumbel(0, 1) draws g = -log(-log(u)), u clamped to [1e-12, 1 - 1e-12].
std::vector<double> sample_gumbel(Rng& rng, std::size_t n);

// Straight-through Gumbel-softmax over the last dimension, with caller
// supplied noise (one value per logit). Forward emits the exact one-hot of
// argmax((logits + noise) / tau); backward differentiates
// softmax((logits + noise) / tau) instead.
Tensor gumbel_softmax_st(const Tensor& logits, double tau, std::span<const double> noise);
Tensor gumbel_softmax_st(const Tensor& logits, double tau, Rng& rng);

// Index of the first maximal entry in each last-dimension slice.
std::vector<int> argmax_rows(const Tensor& x);

}  // namespace driftlab::ad
