#pragma once

// Closed-form error bounds for the truncated target-network algorithm.

#include "dtl/error.hpp"

#include <cmath>
#include <string>

namespace dtl {

struct BoundInputs {
    double gamma = 0.9;
    int T = 1;
    long long K = 1; ///< may exceed int range at very small alpha
    double alpha = 1e-3;
    int t_alpha = 1;
    double lambda_min = 1.0;
    double e_approx = 0.0;
    double init_gap = 0.0; ///< ‖Q̂₀ − Q*‖∞
};

struct BoundTerms {
    double e1 = 0.0; ///< fixed-point iteration error γ^T·init_gap
    double e2 = 0.0; ///< inner-loop bias
    double e3 = 0.0; ///< inner-loop variance
    double e4 = 0.0; ///< function approximation error
    double total = 0.0;
    bool stepsize_warning = false; ///< α > λ_min (1 − γ)² / 130
};

/// E[‖Q̂_T − Q*‖∞] <= E1 + E2 + E3 + E4 with
///   E1 = γ^T ‖Q̂₀ − Q*‖∞
///   E2 = 2 (1 − λ_min α)^((K − t_α − 1)/2) / (λ_min^(1/2) (1 − γ)²)
///   E3 = 24 √(α (t_α + 1)) / (λ_min (1 − γ)²)
///   E4 = E_approx / (1 − γ)
/// Requires K >= t_α + 1; an out-of-range α only raises the warning flag.
inline BoundTerms theorem1_bound(const BoundInputs& b) {
    if (b.K < b.t_alpha + 1)
        throw PreconditionError("theorem1_bound: K = " + std::to_string(b.K) + " is below t_alpha + 1 = " +
                                std::to_string(b.t_alpha + 1));
    if (!(b.gamma > 0.0 && b.gamma < 1.0) || !(b.lambda_min > 0.0) || !(b.alpha > 0.0) || b.T < 0)
        throw PreconditionError("theorem1_bound: need gamma in (0,1), lambda_min > 0, alpha > 0, T >= 0");
    const double one_minus_gamma_sq = (1.0 - b.gamma) * (1.0 - b.gamma);
    BoundTerms out;
    out.e1 = std::pow(b.gamma, b.T) * b.init_gap;
    out.e2 = 2.0 * std::pow(1.0 - b.lambda_min * b.alpha, 0.5 * double(b.K - b.t_alpha - 1)) /
             (std::sqrt(b.lambda_min) * one_minus_gamma_sq);
    out.e3 = 24.0 * std::sqrt(b.alpha * (b.t_alpha + 1)) / (b.lambda_min * one_minus_gamma_sq);
    out.e4 = b.e_approx / (1.0 - b.gamma);
    out.total = out.e1 + out.e2 + out.e3 + out.e4;
    out.stepsize_warning = b.alpha > b.lambda_min * (1.0 - b.gamma) * (1.0 - b.gamma) / 130.0;
    return out;
}

/// Mean-square inner-loop bound, valid for k >= t_α + 1:
///   4/(λ_min (1−γ)²) (1 − λ_min α)^(k − t_α − 1) + 520/(λ_min² (1−γ)²) α (t_α + 1)
inline double inner_loop_bound(long long k, double alpha, int t_alpha, double lambda_min, double gamma) {
    if (k < t_alpha + 1)
        throw PreconditionError("inner_loop_bound: k must be at least t_alpha + 1");
    const double one_minus_gamma_sq = (1.0 - gamma) * (1.0 - gamma);
    return 4.0 / (lambda_min * one_minus_gamma_sq) * std::pow(1.0 - lambda_min * alpha, double(k - t_alpha - 1)) +
           520.0 / (lambda_min * lambda_min * one_minus_gamma_sq) * alpha * (t_alpha + 1);
}

} // namespace dtl
