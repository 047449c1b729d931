#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "saivla/matrix.hpp"

namespace saivla {

// One 3-way categorical distribution over {-1, 0, +1}, in that index order.
struct ProbVector3 {
    double p_minus = 0.0;
    double p_zero = 0.0;
    double p_plus = 0.0;

    double operator[](std::size_t i) const {
        return i == 0 ? p_minus : (i == 1 ? p_zero : p_plus);
    }
    bool normalized(double tol = 1e-6) const;
};

ProbVector3 make_prob3(double pm, double pz, double pp);

// Temperature softmax with max-subtraction. tau > 0, logits finite.
std::vector<double> softmax_temp(const std::vector<double>& logits, double tau);
ProbVector3 softmax_temp3(const std::array<double, 3>& logits, double tau);

// Row-wise LayerNorm convention used everywhere in this project:
// population variance, eps inside the square root.
std::vector<double> layer_norm(const std::vector<double>& x,
                               const std::vector<double>& gamma,
                               const std::vector<double>& beta, double eps = 1e-5);
// In-place per-row variant for matrices (shared gamma/beta across rows).
void layer_norm_rows(Matrix& m, const std::vector<double>& gamma,
                     const std::vector<double>& beta, double eps = 1e-5);

// Shannon entropy in nats; 0*ln(0) := 0. Input must be a probability vector
// (entries in [0,1], sum within 1e-6 of 1).
double entropy(const std::vector<double>& p);
double entropy(const ProbVector3& p);

// KL(p || q) in nats with q clamped to a 1e-12 floor. q is treated as a
// constant (stop-gradient target semantics).
double kl_div(const std::vector<double>& p, const std::vector<double>& q);
double kl_div(const ProbVector3& p, const ProbVector3& q);

double sigmoid(double x);

}  // namespace saivla
