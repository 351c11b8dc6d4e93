// Independent reference implementations used only by tests. Nothing here
// shares code with the library paths it checks.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace oracle {

struct Block {
    std::size_t a_start = 0, b_start = 0, len = 0;
};

/// Enumerates every (i, j) start pair and extends the run directly.
inline Block brute_longest(const std::u32string& a, const std::u32string& b) {
    Block best;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) {
            std::size_t k = 0;
            while (i + k < a.size() && j + k < b.size() && a[i + k] == b[j + k]) ++k;
            const bool longer = k > best.len;
            const bool tie_earlier = k == best.len && k > 0 &&
                                     (i < best.a_start || (i == best.a_start && j < best.b_start));
            if (longer || tie_earlier) best = Block{i, j, k};
        }
    }
    if (best.len == 0) return Block{};
    return best;
}

/// Plain recursion on substring copies.
inline std::size_t brute_total(const std::u32string& a, const std::u32string& b) {
    if (a.empty() || b.empty()) return 0;
    const Block m = brute_longest(a, b);
    if (m.len == 0) return 0;
    return m.len + brute_total(a.substr(0, m.a_start), b.substr(0, m.b_start)) +
           brute_total(a.substr(m.a_start + m.len), b.substr(m.b_start + m.len));
}

/// Central-difference gradient of `loss` with respect to every element of
/// `params`, evaluated in place.
inline std::vector<double> central_difference(std::span<double> params, const std::function<double()>& loss,
                                              double h = 1e-4) {
    std::vector<double> g(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + h;
        const double up = loss();
        params[i] = saved - h;
        const double down = loss();
        params[i] = saved;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

/// max_i |a_i - n_i| / max(|a_i|, |n_i|, floor). The floor keeps near-zero
/// entries from dominating through cancellation noise.
inline double max_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                                 double floor = 1e-6) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
        worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
    }
    return worst;
}

struct TensorCheck {
    std::string name;
    double max_rel_error = 0.0;
};

/// Compares each analytic gradient tensor against central differences of
/// `loss` taken through the matching weight tensor. `weights` and `grads`
/// must list tensors in the same order.
template <typename ParamListT>
std::vector<TensorCheck> check_gradients(const ParamListT& weights, const ParamListT& grads,
                                         const std::function<double()>& loss, double h = 1e-4) {
    std::vector<TensorCheck> out;
    for (std::size_t t = 0; t < weights.size(); ++t) {
        const auto numeric = central_difference(weights[t].values, loss, h);
        out.push_back({weights[t].name, max_relative_error(grads[t].values, numeric)});
    }
    return out;
}

inline double worst(const std::vector<TensorCheck>& checks) {
    double w = 0.0;
    for (const auto& c : checks) w = std::max(w, c.max_rel_error);
    return w;
}

}  // namespace oracle
