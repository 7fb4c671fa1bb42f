#pragma once
// Hierarchical Semi-Supervised K-means: starting from a BSSK base level at
// ground-truth granularity, known and novel prototypes are halved separately
// level after level until only the seen/unseen split remains. Every sample's
// level-(k+1) label is the group of its level-k cluster, so the levels form a
// tree by construction and never mix known with novel descendants.

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <vector>

#include "selex/bssk.hpp"
#include "selex/labels.hpp"
#include "selex/matrix.hpp"
#include "selex/rng.hpp"

namespace selex {

struct HierarchyLevel {
    std::vector<int> assignment;  // length N, pseudo-label per sample
    Matrix centers;               // label_count x D
    std::vector<int> sizes;
    std::vector<double> radii;
    int label_count = 0;
    int known_label_count = 0;
    int cluster_size = 0;  // nominal C at this level (0 in unbalanced mode)
};

struct Hierarchy {
    std::vector<HierarchyLevel> levels;  // levels[0] is level 1 (finest)
    int base_k = 0;
    // projections[i] maps level-(i+1) label ids to level-(i+2) label ids
    std::vector<std::vector<int>> projections;

    std::size_t depth() const { return levels.size(); }
    std::size_t n() const { return levels.empty() ? 0 : levels[0].assignment.size(); }
};

inline std::vector<int> level_counts(const Hierarchy& h) {
    std::vector<int> out;
    out.reserve(h.levels.size());
    for (const auto& lv : h.levels) out.push_back(lv.label_count);
    return out;
}

// Map from level-`level` label ids to level-(level+1) ids (1-based levels).
inline const std::vector<int>& project_labels(const Hierarchy& h, int level) {
    if (level < 1 || level >= static_cast<int>(h.levels.size()))
        throw std::invalid_argument("project_labels: level out of range");
    return h.projections[level - 1];
}

namespace detail {

// Plain k-means over a handful of prototype vectors: deterministic
// farthest-point seeding, Lloyd iterations with empty-group repair, groups
// relabeled by smallest member prototype id.
inline std::vector<int> prototype_kmeans(const Matrix& protos, int groups, Rng& rng,
                                         int iters = 20) {
    const int p = static_cast<int>(protos.rows);
    if (groups < 1 || groups > p)
        throw std::invalid_argument("prototype_kmeans: bad group count");
    std::vector<int> assign(p, 0);
    if (groups == 1) return assign;
    if (groups == p) {
        for (int i = 0; i < p; ++i) assign[i] = i;
        return assign;
    }

    std::vector<int> seeds;
    seeds.push_back(static_cast<int>(rng.uniform_int(p)));
    std::vector<double> min_d(p, std::numeric_limits<double>::infinity());
    while (static_cast<int>(seeds.size()) < groups) {
        int last = seeds.back();
        for (int i = 0; i < p; ++i)
            min_d[i] = std::min(min_d[i], sq_dist(protos.row(i), protos.row(last)));
        int far = 0;
        for (int i = 1; i < p; ++i)
            if (min_d[i] > min_d[far]) far = i;
        seeds.push_back(far);
    }

    Matrix centers(groups, protos.cols);
    for (int g = 0; g < groups; ++g)
        for (std::size_t j = 0; j < protos.cols; ++j)
            centers.at(g, j) = protos.at(seeds[g], j);

    for (int it = 0; it < iters; ++it) {
        bool changed = false;
        for (int i = 0; i < p; ++i) {
            int best = 0;
            double bd = sq_dist(protos.row(i), centers.row(0));
            for (int g = 1; g < groups; ++g) {
                double d = sq_dist(protos.row(i), centers.row(g));
                if (d < bd) {
                    bd = d;
                    best = g;
                }
            }
            if (assign[i] != best) changed = true;
            assign[i] = best;
        }
        std::vector<int> count(groups, 0);
        for (int i = 0; i < p; ++i) ++count[assign[i]];
        for (int g = 0; g < groups; ++g) {
            if (count[g] > 0) continue;
            // Repair: steal the farthest member of the largest group.
            int big = 0;
            for (int x = 1; x < groups; ++x)
                if (count[x] > count[big]) big = x;
            int steal = -1;
            double worst = -1.0;
            for (int i = 0; i < p; ++i) {
                if (assign[i] != big) continue;
                double d = sq_dist(protos.row(i), centers.row(big));
                if (d > worst) {
                    worst = d;
                    steal = i;
                }
            }
            assign[steal] = g;
            --count[big];
            ++count[g];
            changed = true;
        }
        centers = Matrix(groups, protos.cols, 0.0);
        for (int i = 0; i < p; ++i)
            for (std::size_t j = 0; j < protos.cols; ++j)
                centers.at(assign[i], j) += protos.at(i, j);
        for (int g = 0; g < groups; ++g)
            for (std::size_t j = 0; j < protos.cols; ++j) centers.at(g, j) /= count[g];
        if (!changed && it > 0) break;
    }

    // Canonical group ids: ascending order of smallest member prototype.
    std::vector<int> first_member(groups, p);
    for (int i = p - 1; i >= 0; --i) first_member[assign[i]] = i;
    std::vector<int> order(groups);
    for (int g = 0; g < groups; ++g) order[g] = g;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return first_member[a] < first_member[b]; });
    std::vector<int> relabel(groups);
    for (int rank = 0; rank < groups; ++rank) relabel[order[rank]] = rank;
    for (int i = 0; i < p; ++i) assign[i] = relabel[assign[i]];
    return assign;
}

// Per-level centers, sizes, radii from a fixed assignment. Labels with no
// members fall back to the mean of their constituent prototype centers.
inline void level_stats(const Matrix& e, HierarchyLevel& lv,
                        const Matrix& proto_centers, const std::vector<int>& proto_group) {
    const int g = lv.label_count;
    lv.centers = Matrix(g, e.cols, 0.0);
    lv.sizes.assign(g, 0);
    lv.radii.assign(g, 0.0);
    for (std::size_t i = 0; i < e.rows; ++i) {
        int c = lv.assignment[i];
        ++lv.sizes[c];
        auto src = e.row(i);
        for (std::size_t j = 0; j < e.cols; ++j) lv.centers.at(c, j) += src[j];
    }
    for (int c = 0; c < g; ++c) {
        if (lv.sizes[c] > 0) {
            for (std::size_t j = 0; j < e.cols; ++j) lv.centers.at(c, j) /= lv.sizes[c];
            continue;
        }
        int protos = 0;
        for (std::size_t pi = 0; pi < proto_group.size(); ++pi) {
            if (proto_group[pi] != c) continue;
            ++protos;
            for (std::size_t j = 0; j < e.cols; ++j)
                lv.centers.at(c, j) += proto_centers.at(pi, j);
        }
        if (protos > 0)
            for (std::size_t j = 0; j < e.cols; ++j) lv.centers.at(c, j) /= protos;
    }
    for (std::size_t i = 0; i < e.rows; ++i) {
        int c = lv.assignment[i];
        double d = std::sqrt(sq_dist(e.row(i), lv.centers.row(c)));
        if (d > lv.radii[c]) lv.radii[c] = d;
    }
}

}  // namespace detail

// Alg. 5. Level 1 is BSSK at ground-truth granularity with C = floor(N/K);
// each following level groups the known-side prototypes into floor(known/2)
// clusters and the novel side into floor(novel/2), projects every sample onto
// its prototype's group, and doubles C. A side that reaches one group stops
// splitting; the loop ends at the 2-label seen/unseen level.
inline Hierarchy build_hierarchy(const Matrix& e, const LabelInfo& l, BsskConfig cfg) {
    if (cfg.k < 2) throw std::invalid_argument("build_hierarchy: k < 2");
    const int known = static_cast<int>(l.known_categories.size());
    const int novel = cfg.k - known;
    if (novel == 0)
        std::cerr << "selex: warning: no novel categories; hierarchy covers known"
                     " prototypes only\n";

    if (cfg.balanced && !cfg.cluster_size)
        cfg.cluster_size = static_cast<int>(e.rows) / cfg.k;

    Hierarchy h;
    h.base_k = cfg.k;

    ClusterModel base = bssk(e, l, cfg);
    HierarchyLevel lv1;
    lv1.assignment = base.assignment;
    lv1.centers = base.centers;
    lv1.sizes = base.sizes;
    lv1.radii = base.radii;
    lv1.label_count = cfg.k;
    lv1.known_label_count = known;
    lv1.cluster_size = cfg.balanced ? *cfg.cluster_size : 0;
    h.levels.push_back(std::move(lv1));

    Rng rng(mix_seed(cfg.seed, 0x48535349ULL));  // hierarchy-phase stream
    int known_g = known;
    int novel_g = novel;
    int c_size = cfg.balanced ? *cfg.cluster_size : 0;

    while (known_g > 1 || novel_g > 1) {
        const HierarchyLevel& prev = h.levels.back();
        int next_known = known_g > 1 ? known_g / 2 : known_g;
        int next_novel = novel_g > 1 ? novel_g / 2 : novel_g;
        if (next_known + next_novel < 2) break;  // one-sided hierarchy bottoms out

        std::vector<int> proj(prev.label_count, 0);
        if (known_g > 0) {
            Matrix kp(known_g, e.cols);
            for (int i = 0; i < known_g; ++i)
                for (std::size_t j = 0; j < e.cols; ++j) kp.at(i, j) = prev.centers.at(i, j);
            std::vector<int> g = detail::prototype_kmeans(kp, next_known, rng);
            for (int i = 0; i < known_g; ++i) proj[i] = g[i];
        }
        if (novel_g > 0) {
            Matrix np(novel_g, e.cols);
            for (int i = 0; i < novel_g; ++i)
                for (std::size_t j = 0; j < e.cols; ++j)
                    np.at(i, j) = prev.centers.at(known_g + i, j);
            std::vector<int> g = detail::prototype_kmeans(np, next_novel, rng);
            for (int i = 0; i < novel_g; ++i) proj[known_g + i] = next_known + g[i];
        }

        c_size *= 2;
        HierarchyLevel lv;
        lv.label_count = next_known + next_novel;
        lv.known_label_count = next_known;
        lv.cluster_size = c_size;
        lv.assignment.resize(e.rows);
        for (std::size_t i = 0; i < e.rows; ++i)
            lv.assignment[i] = proj[prev.assignment[i]];
        detail::level_stats(e, lv, prev.centers, proj);

        h.projections.push_back(std::move(proj));
        h.levels.push_back(std::move(lv));
        known_g = next_known;
        novel_g = next_novel;
    }
    return h;
}

}  // namespace selex
