#pragma once
// Scoring: minimum-cost Hungarian assignment, Hungarian-matched clustering
// accuracy on the All/Known/Novel subsets, and the closed-form category-count
// bound diagnostics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "selex/labels.hpp"
#include "selex/matrix.hpp"

namespace selex {

struct AssignmentResult {
    // pairs (row, col) over the original matrix, rows ascending; padded
    // rows/cols of rectangular inputs are dropped.
    std::vector<std::pair<int, int>> mapping;
    double total_cost = 0.0;
};

// Minimum-total-cost perfect matching, O(n^3) shortest augmenting paths with
// potentials. Rectangular inputs are padded square with a constant strictly
// larger than every entry; integer-valued costs stay exact throughout.
inline AssignmentResult hungarian(const Matrix& cost) {
    if (cost.rows == 0 || cost.cols == 0)
        throw std::invalid_argument("hungarian: empty cost matrix");
    if (!cost.all_finite())
        throw std::invalid_argument("hungarian: non-finite cost entry");

    const std::size_t n = std::max(cost.rows, cost.cols);
    double pad = 0.0;
    for (double v : cost.data) pad = std::max(pad, std::abs(v));
    pad = pad + 1.0;
    Matrix a(n, n, pad);
    for (std::size_t i = 0; i < cost.rows; ++i)
        for (std::size_t j = 0; j < cost.cols; ++j) a.at(i, j) = cost.at(i, j);

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            std::size_t i0 = p[j0], j1 = 0;
            double delta = inf;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double cur = a.at(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    AssignmentResult res;
    for (std::size_t j = 1; j <= n; ++j) {
        std::size_t i = p[j];
        if (i == 0) continue;
        if (i - 1 < cost.rows && j - 1 < cost.cols)
            res.mapping.emplace_back(static_cast<int>(i - 1), static_cast<int>(j - 1));
    }
    std::sort(res.mapping.begin(), res.mapping.end());
    for (auto [r, c] : res.mapping) res.total_cost += cost.at(r, c);
    return res;
}

struct AccuracyReport {
    double acc_all = 0.0;
    std::optional<double> acc_known;
    std::optional<double> acc_novel;
    std::size_t n_all = 0, n_known = 0, n_novel = 0;
    std::size_t correct_all = 0, correct_known = 0, correct_novel = 0;
};

// Hungarian-matched clustering accuracy. One optimal cluster->category
// matching is computed on all rows (counts negated, so integer-exact) and the
// same matching scores the Known and Novel subsets. Subsets with no rows are
// reported as absent.
inline AccuracyReport cluster_accuracy(const std::vector<int>& pred,
                                       const std::vector<int>& truth,
                                       const std::function<bool(int)>& known_of) {
    if (pred.size() != truth.size() || pred.empty())
        throw std::invalid_argument("cluster_accuracy: bad prediction/truth lengths");
    int max_id = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] < 0 || truth[i] < 0)
            throw std::invalid_argument("cluster_accuracy: negative id");
        max_id = std::max({max_id, pred[i], truth[i]});
    }
    const std::size_t d = static_cast<std::size_t>(max_id) + 1;
    Matrix w(d, d, 0.0);
    for (std::size_t i = 0; i < pred.size(); ++i) w.at(pred[i], truth[i]) += 1.0;

    Matrix neg(d, d, 0.0);
    for (std::size_t i = 0; i < d * d; ++i) neg.data[i] = -w.data[i];
    AssignmentResult match = hungarian(neg);
    std::vector<int> cluster_to_cat(d, -1);
    for (auto [r, c] : match.mapping) cluster_to_cat[r] = c;

    AccuracyReport rep;
    rep.n_all = pred.size();
    for (std::size_t i = 0; i < pred.size(); ++i) {
        bool correct = cluster_to_cat[pred[i]] == truth[i];
        rep.correct_all += correct;
        if (known_of(truth[i])) {
            ++rep.n_known;
            rep.correct_known += correct;
        } else {
            ++rep.n_novel;
            rep.correct_novel += correct;
        }
    }
    rep.acc_all = static_cast<double>(rep.correct_all) / rep.n_all;
    if (rep.n_known > 0)
        rep.acc_known = static_cast<double>(rep.correct_known) / rep.n_known;
    if (rep.n_novel > 0)
        rep.acc_novel = static_cast<double>(rep.correct_novel) / rep.n_novel;
    return rep;
}

// Accuracy over the unlabeled rows only, per the category-discovery protocol.
inline AccuracyReport gcd_accuracy(const std::vector<int>& assignment,
                                   const LabelInfo& l) {
    if (assignment.size() != l.n())
        throw std::invalid_argument("gcd_accuracy: assignment length mismatch");
    std::vector<int> pred, truth;
    for (std::size_t i = 0; i < l.n(); ++i) {
        if (l.labeled_mask[i]) continue;
        pred.push_back(assignment[i]);
        truth.push_back(l.labels[i]);
    }
    if (pred.empty()) throw std::invalid_argument("gcd_accuracy: no unlabeled rows");
    return cluster_accuracy(pred, truth, [&](int c) { return l.is_known(c); });
}

struct BoundsInput {
    std::size_t n = 0;
    std::size_t k = 0;

    void validate() const {
        if (k < 2) throw std::invalid_argument("BoundsInput: k < 2");
        if (n < k) throw std::invalid_argument("BoundsInput: n < k");
    }
};

// Supervised discrepancy bound over all labels: S_K = K * ln(N/K).
inline double s_bound(const BoundsInput& b) {
    b.validate();
    return static_cast<double>(b.k) *
           std::log(static_cast<double>(b.n) / static_cast<double>(b.k));
}

// Residual of the halving identity S_K = 2 * S_{K/2} - K * ln 2 (zero up to
// rounding for every even K).
inline double k2_residual(const BoundsInput& b) {
    b.validate();
    if (b.k % 2 != 0) throw std::invalid_argument("k2_residual: k must be even");
    double k_half = static_cast<double>(b.k) / 2.0;  // formula is valid down to K/2 = 1
    double s_half = k_half * std::log(static_cast<double>(b.n) / k_half);
    return s_bound(b) - (2.0 * s_half - static_cast<double>(b.k) * std::log(2.0));
}

struct UnsupBounds {
    double u_full = 0.0;        // K(K+1)/2 * ln(N/K), both categories unobserved
    double u_restricted = 0.0;  // K * ln(N/K), same-category pairs only
};

inline UnsupBounds u_bounds(const BoundsInput& b) {
    b.validate();
    UnsupBounds r;
    r.u_restricted = s_bound(b);
    // Written as ratio * u_restricted so u_full / u_restricted is (K+1)/2
    // exactly in floating point.
    r.u_full = (static_cast<double>(b.k + 1) / 2.0) * r.u_restricted;
    return r;
}

}  // namespace selex
