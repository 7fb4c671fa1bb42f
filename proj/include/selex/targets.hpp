#pragma once
// Target matrices for the self-expertise losses: the hierarchy-derived
// negativity weights y_ij, the radius-based variant, label smoothing against
// the identity target, and the per-level supervised positive masks.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "selex/hssk.hpp"
#include "selex/labels.hpp"
#include "selex/matrix.hpp"

namespace selex {

enum class TargetKind { unsup_raw, unsup_smoothed, identity, sup_mask };

enum class Normalization { none, max, row };

struct SmoothingConfig {
    double alpha = 0.5;
    Normalization normalization = Normalization::none;

    void validate() const {
        if (!(alpha >= 0.0 && alpha <= 1.0))
            throw std::invalid_argument("SmoothingConfig: alpha outside [0,1]");
    }
};

struct TargetMatrix {
    Matrix values;
    TargetKind kind = TargetKind::unsup_raw;
    int level = -1;  // set for sup_mask targets
};

namespace detail {

inline void apply_normalization(Matrix& y, Normalization norm, std::size_t depth) {
    if (norm == Normalization::none) return;
    const std::size_t n = y.rows;
    if (norm == Normalization::max) {
        double cap = 1.0 - std::ldexp(1.0, -static_cast<int>(depth));  // 1 - 2^-L
        if (cap <= 0.0) return;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) y.at(i, j) /= cap;
        return;
    }
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += y.at(i, j);
        if (s == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) y.at(i, j) /= s;
    }
}

}  // namespace detail

// y_ij = sum_k 1(c_i^k != c_j^k) / 2^k over the hierarchy levels, y_ii = 1:
// pairs that disagree at fine levels are strict negatives, pairs that only
// disagree at coarse levels carry most of their weight as uncertainty.
inline TargetMatrix unsup_target_from_hierarchy(const Hierarchy& h,
                                                Normalization norm = Normalization::none) {
    if (h.levels.empty())
        throw std::invalid_argument("unsup_target_from_hierarchy: empty hierarchy");
    const std::size_t n = h.n();
    TargetMatrix t;
    t.kind = TargetKind::unsup_raw;
    t.values = Matrix(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        t.values.at(i, i) = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            double y = 0.0;
            double w = 0.5;
            for (const auto& lv : h.levels) {
                if (lv.assignment[i] != lv.assignment[j]) y += w;
                w *= 0.5;
            }
            t.values.at(i, j) = y;
            t.values.at(j, i) = y;
        }
    }
    detail::apply_normalization(t.values, norm, h.depth());
    return t;
}

// Alg.-6 geometric variant: y_ij = sum_k 1(d_ij > r_i^k) / 2^k with r_i^k the
// radius of sample i's level-k cluster. Row-specific radii make this
// asymmetric; `symmetrize` averages it with its transpose.
inline TargetMatrix unsup_target_from_radii(const Matrix& e, const Hierarchy& h,
                                            bool symmetrize = false,
                                            Normalization norm = Normalization::none) {
    if (h.levels.empty())
        throw std::invalid_argument("unsup_target_from_radii: empty hierarchy");
    if (h.n() != e.rows)
        throw std::invalid_argument("unsup_target_from_radii: row count mismatch");
    for (const auto& lv : h.levels)
        if (lv.radii.empty())
            throw std::invalid_argument("unsup_target_from_radii: missing radii");

    const std::size_t n = e.rows;
    TargetMatrix t;
    t.kind = TargetKind::unsup_raw;
    t.values = Matrix(n, n, 0.0);
    Matrix d2 = pairwise_sq_dist(e, e);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) {
                t.values.at(i, i) = 1.0;
                continue;
            }
            double y = 0.0;
            double w = 0.5;
            for (const auto& lv : h.levels) {
                double r = lv.radii[lv.assignment[i]];
                if (d2.at(i, j) > r * r) y += w;
                w *= 0.5;
            }
            t.values.at(i, j) = y;
        }
    }
    if (symmetrize) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                double avg = 0.5 * (t.values.at(i, j) + t.values.at(j, i));
                t.values.at(i, j) = avg;
                t.values.at(j, i) = avg;
            }
    }
    detail::apply_normalization(t.values, norm, h.depth());
    return t;
}

// Label smoothing: Y_hat = alpha * Y + (1 - alpha) * I.
inline TargetMatrix smooth_target(const TargetMatrix& y, const SmoothingConfig& cfg) {
    cfg.validate();
    if (y.kind != TargetKind::unsup_raw)
        throw std::invalid_argument("smooth_target: expected an unsup_raw target");
    TargetMatrix t;
    t.kind = TargetKind::unsup_smoothed;
    const std::size_t n = y.values.rows;
    t.values = Matrix(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double id = (i == j) ? 1.0 : 0.0;
            t.values.at(i, j) = cfg.alpha * y.values.at(i, j) + (1.0 - cfg.alpha) * id;
        }
    return t;
}

// Positive-pair mask for supervised contrastive learning. Level 0 uses the
// ground-truth labels of labeled rows only; level k >= 1 marks co-members of
// the level-k pseudo-label clusters. Diagonal is always 1.
inline TargetMatrix sup_positive_mask(const Hierarchy& h, int level, const LabelInfo& l) {
    if (level < 0 || level > static_cast<int>(h.levels.size()))
        throw std::invalid_argument("sup_positive_mask: level out of range");
    const std::size_t n = h.n();
    if (l.n() != n) throw std::invalid_argument("sup_positive_mask: label count mismatch");

    TargetMatrix t;
    t.kind = TargetKind::sup_mask;
    t.level = level;
    t.values = Matrix(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        t.values.at(i, i) = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            bool pos;
            if (level == 0)
                pos = l.labeled_mask[i] && l.labeled_mask[j] && l.labels[i] == l.labels[j];
            else
                pos = h.levels[level - 1].assignment[i] == h.levels[level - 1].assignment[j];
            if (pos) {
                t.values.at(i, j) = 1.0;
                t.values.at(j, i) = 1.0;
            }
        }
    }
    return t;
}

}  // namespace selex
