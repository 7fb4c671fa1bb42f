#pragma once
// Self-expertise losses over an embedding matrix: entrywise BCE between
// temperature-scaled cosine logits and the (smoothed) hierarchy target, the
// per-level dimension-sliced supervised contrastive terms, their lambda-mix,
// and the analytic gradient with respect to the embeddings (pseudo-labels and
// targets held fixed).

#include <cmath>
#include <cstddef>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <vector>

#include "selex/hssk.hpp"
#include "selex/labels.hpp"
#include "selex/matrix.hpp"
#include "selex/targets.hpp"

namespace selex {

enum class UnsupTargetVariant { pseudo_label, radius };

struct LossConfig {
    double lambda = 0.35;
    double tau_unsup = 0.35;
    double tau_sup = 0.1;
    double eps = 1e-7;  // clamp for logarithms
    SmoothingConfig smoothing;
    UnsupTargetVariant target_variant = UnsupTargetVariant::pseudo_label;
    bool use_smoothed_target = true;  // BCE against Y_hat rather than raw Y
    bool symmetrize_radius = false;

    void validate() const {
        if (!(lambda >= 0.0 && lambda <= 1.0))
            throw std::invalid_argument("LossConfig: lambda outside [0,1]");
        if (!(tau_unsup > 0.0) || !(tau_sup > 0.0))
            throw std::invalid_argument("LossConfig: temperatures must be positive");
        if (!(eps > 0.0 && eps <= 1e-3))
            throw std::invalid_argument("LossConfig: eps outside (0, 1e-3]");
        smoothing.validate();
    }
};

// Slice width for hierarchy level k: the first D/2^k dimensions, at least 1.
inline std::size_t slice_width(std::size_t d, int level) {
    if (level <= 0) return d;
    std::size_t w = level < 64 ? (d >> level) : 0;
    return w > 0 ? w : 1;
}

struct LossReport {
    double l_use = 0.0;
    std::vector<double> l_s_per_level;  // index k = 0..L
    double l_sse = 0.0;
    double l_se = 0.0;
    std::optional<Matrix> gradient;
};

namespace detail {

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace detail

// P_ij = logistic(cos(z_i, z_j) / tau) on row-normalized embeddings. Zero rows
// are treated as orthogonal to everything (cosine 0) and warned about.
inline Matrix similarity_logits(const Matrix& e, const LossConfig& cfg) {
    cfg.validate();
    NormalizeResult nr = normalize_rows(e);
    if (nr.zero_rows > 0)
        std::cerr << "selex: warning: " << nr.zero_rows
                  << " zero row(s) treated as orthogonal in similarity_logits\n";
    const std::size_t n = e.rows;
    Matrix p(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        p.at(i, i) = detail::logistic(1.0 / cfg.tau_unsup);
        for (std::size_t j = i + 1; j < n; ++j) {
            double v = detail::logistic(dot(nr.m.row(i), nr.m.row(j)) / cfg.tau_unsup);
            p.at(i, j) = v;
            p.at(j, i) = v;
        }
    }
    if (nr.zero_rows > 0) {
        for (std::size_t i = 0; i < n; ++i) {
            if (row_norm(e.row(i)) != 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                p.at(i, j) = 0.5;
                p.at(j, i) = 0.5;
            }
        }
    }
    return p;
}

// Mean binary cross entropy over all N^2 entries (off-diagonal pairs plus the
// diagonal), with probabilities clamped to [eps, 1-eps].
inline double l_use(const Matrix& p, const TargetMatrix& y_hat, const LossConfig& cfg) {
    cfg.validate();
    if (!p.same_shape(y_hat.values) || p.rows != p.cols)
        throw std::invalid_argument("l_use: shape mismatch");
    const std::size_t n = p.rows;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double pp = std::min(1.0 - cfg.eps, std::max(cfg.eps, p.at(i, j)));
            double y = y_hat.values.at(i, j);
            total += -(y * std::log(pp) + (1.0 - y) * std::log(1.0 - pp));
        }
    return total / static_cast<double>(n * n);
}

struct SupconResult {
    double value = 0.0;
    std::size_t anchor_count = 0;  // anchors with at least one positive
};

// Mean-of-log supervised contrastive loss on the row-normalized slice of the
// first `width` dimensions. Anchors without positives are skipped; with no
// anchors at all the loss is 0.
inline SupconResult supcon_level(const Matrix& e, const TargetMatrix& mask,
                                 std::size_t width, const LossConfig& cfg) {
    cfg.validate();
    if (mask.values.rows != e.rows || mask.values.cols != e.rows)
        throw std::invalid_argument("supcon_level: mask shape mismatch");
    const std::size_t n = e.rows;
    NormalizeResult nr = normalize_rows(slice_dims(e, width));
    const double inv_tau = 1.0 / cfg.tau_sup;

    Matrix s(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double v = dot(nr.m.row(i), nr.m.row(j));
            s.at(i, j) = v;
            s.at(j, i) = v;
        }

    SupconResult out;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t pos = 0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i && mask.values.at(i, j) != 0.0) ++pos;
        if (pos == 0) continue;
        ++out.anchor_count;

        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < n; ++a)
            if (a != i) mx = std::max(mx, s.at(i, a) * inv_tau);
        double sum = 0.0;
        for (std::size_t a = 0; a < n; ++a)
            if (a != i) sum += std::exp(s.at(i, a) * inv_tau - mx);
        double lse = mx + std::log(sum);

        double anchor = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i && mask.values.at(i, j) != 0.0)
                anchor += s.at(i, j) * inv_tau - lse;
        total += -anchor / static_cast<double>(pos);
    }
    if (out.anchor_count > 0) out.value = total / static_cast<double>(out.anchor_count);
    return out;
}

namespace detail {

inline TargetMatrix unsup_target(const Matrix& e, const Hierarchy& h,
                                 const LossConfig& cfg) {
    TargetMatrix raw =
        cfg.target_variant == UnsupTargetVariant::pseudo_label
            ? unsup_target_from_hierarchy(h, cfg.smoothing.normalization)
            : unsup_target_from_radii(e, h, cfg.symmetrize_radius,
                                      cfg.smoothing.normalization);
    return cfg.use_smoothed_target ? smooth_target(raw, cfg.smoothing) : raw;
}

}  // namespace detail

// L_SSE = 1/2 * sum_{k=0}^{L} L_s^k / 2^k, where k = 0 uses the ground-truth
// mask on the full embedding and level k uses the level-k pseudo-label mask on
// the first D/2^k dimensions.
inline std::pair<double, std::vector<double>> l_sse(const Matrix& e, const Hierarchy& h,
                                                    const LabelInfo& l,
                                                    const LossConfig& cfg) {
    cfg.validate();
    const int levels = static_cast<int>(h.levels.size());
    std::vector<double> per_level;
    per_level.reserve(levels + 1);
    double total = 0.0;
    double w = 1.0;
    for (int k = 0; k <= levels; ++k) {
        TargetMatrix mask = sup_positive_mask(h, k, l);
        SupconResult r = supcon_level(e, mask, slice_width(e.cols, k), cfg);
        per_level.push_back(r.value);
        total += r.value * w;
        w *= 0.5;
    }
    return {0.5 * total, per_level};
}

// L_SE = (1 - lambda) * L_USE + lambda * L_SSE.
inline LossReport l_se(const Matrix& e, const Hierarchy& h, const LabelInfo& l,
                       const LossConfig& cfg) {
    cfg.validate();
    LossReport rep;
    Matrix p = similarity_logits(e, cfg);
    TargetMatrix y_hat = detail::unsup_target(e, h, cfg);
    rep.l_use = l_use(p, y_hat, cfg);
    auto [sse, per_level] = l_sse(e, h, l, cfg);
    rep.l_sse = sse;
    rep.l_s_per_level = std::move(per_level);
    rep.l_se = (1.0 - cfg.lambda) * rep.l_use + cfg.lambda * rep.l_sse;
    if (!std::isfinite(rep.l_se)) throw std::runtime_error("l_se: non-finite loss");
    return rep;
}

// Analytic d L_SE / d e with hierarchy assignments and targets treated as
// constants. The chain rule runs through the temperature-scaled cosine
// similarities, row normalization, and the per-level dimension slices.
inline LossReport l_se_with_grad(const Matrix& e, const Hierarchy& h, const LabelInfo& l,
                                 const LossConfig& cfg) {
    cfg.validate();
    const std::size_t n = e.rows;
    const std::size_t d = e.cols;
    LossReport rep;
    Matrix grad(n, d, 0.0);

    // --- unsupervised branch ---
    NormalizeResult nr = normalize_rows(e);
    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) norms[i] = row_norm(e.row(i));

    Matrix p(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        p.at(i, i) = detail::logistic(1.0 / cfg.tau_unsup);
        for (std::size_t j = i + 1; j < n; ++j) {
            double c = (norms[i] == 0.0 || norms[j] == 0.0)
                           ? 0.0
                           : dot(nr.m.row(i), nr.m.row(j));
            double v = detail::logistic(c / cfg.tau_unsup);
            p.at(i, j) = v;
            p.at(j, i) = v;
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (norms[i] == 0.0)
            for (std::size_t j = 0; j < n; ++j) {
                p.at(i, j) = 0.5;
                p.at(j, i) = 0.5;
            }

    TargetMatrix y_hat = detail::unsup_target(e, h, cfg);
    rep.l_use = l_use(p, y_hat, cfg);

    const double unsup_w = (1.0 - cfg.lambda) / (static_cast<double>(n * n) * cfg.tau_unsup);
    if (unsup_w != 0.0) {
        // dL/dcos_ij = w * (P - Y); clamped entries contribute nothing.
        Matrix g(n, n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double pp = p.at(i, j);
                if (pp < cfg.eps || pp > 1.0 - cfg.eps) continue;
                g.at(i, j) = unsup_w * (pp - y_hat.values.at(i, j));
            }
        for (std::size_t i = 0; i < n; ++i) {
            if (norms[i] == 0.0) continue;
            std::vector<double> gu(d, 0.0);
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i || norms[j] == 0.0) continue;  // cos_ii is constant
                double c = g.at(i, j) + g.at(j, i);
                if (c == 0.0) continue;
                auto uj = nr.m.row(j);
                for (std::size_t t = 0; t < d; ++t) gu[t] += c * uj[t];
            }
            auto ui = nr.m.row(i);
            double proj = 0.0;
            for (std::size_t t = 0; t < d; ++t) proj += ui[t] * gu[t];
            auto gr = grad.row(i);
            for (std::size_t t = 0; t < d; ++t) gr[t] += (gu[t] - proj * ui[t]) / norms[i];
        }
    }

    // --- supervised branch, level by level ---
    const int levels = static_cast<int>(h.levels.size());
    rep.l_s_per_level.reserve(levels + 1);
    double sse_total = 0.0;
    double level_w = 1.0;  // 2^-k
    for (int k = 0; k <= levels; ++k) {
        TargetMatrix mask = sup_positive_mask(h, k, l);
        const std::size_t w = slice_width(d, k);
        Matrix v = slice_dims(e, w);
        NormalizeResult vs = normalize_rows(v);
        std::vector<double> vnorm(n);
        for (std::size_t i = 0; i < n; ++i) vnorm[i] = row_norm(v.row(i));

        Matrix s(n, n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                double val = dot(vs.m.row(i), vs.m.row(j));
                s.at(i, j) = val;
                s.at(j, i) = val;
            }

        std::vector<std::size_t> pos_count(n, 0);
        std::size_t anchors = 0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j)
                if (j != i && mask.values.at(i, j) != 0.0) ++pos_count[i];
            if (pos_count[i] > 0) ++anchors;
        }

        double value = 0.0;
        if (anchors > 0) {
            const double inv_tau = 1.0 / cfg.tau_sup;
            const double coef = cfg.lambda * 0.5 * level_w / static_cast<double>(anchors);
            Matrix q(n, n, 0.0);  // dL_SE/ds_ij from this level (anchor rows)
            for (std::size_t i = 0; i < n; ++i) {
                if (pos_count[i] == 0) continue;
                double mx = -std::numeric_limits<double>::infinity();
                for (std::size_t a = 0; a < n; ++a)
                    if (a != i) mx = std::max(mx, s.at(i, a) * inv_tau);
                double sum = 0.0;
                for (std::size_t a = 0; a < n; ++a)
                    if (a != i) sum += std::exp(s.at(i, a) * inv_tau - mx);
                double lse = mx + std::log(sum);

                double anchor = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    if (j == i) continue;
                    double softmax = std::exp(s.at(i, j) * inv_tau - lse);
                    double pos_term =
                        mask.values.at(i, j) != 0.0
                            ? 1.0 / static_cast<double>(pos_count[i])
                            : 0.0;
                    q.at(i, j) = coef * inv_tau * (softmax - pos_term);
                    if (mask.values.at(i, j) != 0.0)
                        anchor += s.at(i, j) * inv_tau - lse;
                }
                value += -anchor / static_cast<double>(pos_count[i]);
            }
            value /= static_cast<double>(anchors);

            for (std::size_t i = 0; i < n; ++i) {
                if (vnorm[i] == 0.0) continue;
                std::vector<double> gu(w, 0.0);
                for (std::size_t j = 0; j < n; ++j) {
                    if (j == i || vnorm[j] == 0.0) continue;
                    double c = q.at(i, j) + q.at(j, i);
                    if (c == 0.0) continue;
                    auto uj = vs.m.row(j);
                    for (std::size_t t = 0; t < w; ++t) gu[t] += c * uj[t];
                }
                auto ui = vs.m.row(i);
                double proj = 0.0;
                for (std::size_t t = 0; t < w; ++t) proj += ui[t] * gu[t];
                auto gr = grad.row(i);
                for (std::size_t t = 0; t < w; ++t)
                    gr[t] += (gu[t] - proj * ui[t]) / vnorm[i];
            }
        }
        rep.l_s_per_level.push_back(value);
        sse_total += value * level_w;
        level_w *= 0.5;
    }
    rep.l_sse = 0.5 * sse_total;
    rep.l_se = (1.0 - cfg.lambda) * rep.l_use + cfg.lambda * rep.l_sse;
    if (!std::isfinite(rep.l_se)) throw std::runtime_error("l_se: non-finite loss");
    rep.gradient = std::move(grad);
    return rep;
}

inline Matrix grad_l_se(const Matrix& e, const Hierarchy& h, const LabelInfo& l,
                        const LossConfig& cfg) {
    return *l_se_with_grad(e, h, l, cfg).gradient;
}

}  // namespace selex
