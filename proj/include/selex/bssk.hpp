#pragma once
// Balanced Semi-Supervised K-means: seeded center initialization, novel-center
// refinement, capacity-C cluster balancing with a stable-matching guarantee,
// and the final semi-supervised k-means pass.
//
// Clusters 0..known-1 correspond one-to-one to the known categories in
// ascending category-id order; labeled rows are pinned to their category's
// cluster during every assignment step.

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <limits>
#include <optional>
#include <queue>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "selex/labels.hpp"
#include "selex/matrix.hpp"
#include "selex/rng.hpp"

namespace selex {

struct BsskConfig {
    int k = 0;
    std::optional<int> cluster_size;  // C; required when balanced
    int n_iter_refine = 10;
    int n_iter_final = 50;
    bool balanced = true;
    std::uint64_t seed = 0;

    void validate(const LabelInfo& l) const {
        if (k < static_cast<int>(l.known_categories.size()))
            throw std::invalid_argument("BsskConfig: k smaller than known category count");
        if (k < 1) throw std::invalid_argument("BsskConfig: k < 1");
        if (balanced && !cluster_size)
            throw std::invalid_argument("BsskConfig: balanced mode requires cluster_size");
        if (cluster_size && *cluster_size < 1)
            throw std::invalid_argument("BsskConfig: cluster_size < 1");
        if (n_iter_refine < 0 || n_iter_final < 0)
            throw std::invalid_argument("BsskConfig: negative iteration count");
        if (balanced && cluster_size) {
            std::size_t n = l.n();
            int lo = static_cast<int>(n / k);
            int hi = static_cast<int>((n + k - 1) / k);
            if (*cluster_size != lo && *cluster_size != hi)
                std::cerr << "selex: warning: cluster_size " << *cluster_size
                          << " is neither floor(n/k)=" << lo << " nor ceil(n/k)=" << hi
                          << "\n";
        }
    }
};

struct ClusterModel {
    Matrix centers;               // K x D
    std::vector<int> assignment;  // length N (empty right after init_centers)
    int known_cluster_count = 0;
    std::vector<int> sizes;       // length K
    std::vector<double> radii;    // length K, max member distance to center
    int balance_overflow = 0;     // samples that could not be placed (N > K*C)

    int k() const { return static_cast<int>(centers.rows); }
};

// Cluster id reserved for a known category (clusters mirror the sorted
// known-category list).
inline int known_cluster_of(const LabelInfo& l, int category) {
    auto it = std::lower_bound(l.known_categories.begin(), l.known_categories.end(),
                               category);
    if (it == l.known_categories.end() || *it != category)
        throw std::invalid_argument("known_cluster_of: category is not known");
    return static_cast<int>(it - l.known_categories.begin());
}

namespace detail {

// Pin targets for every row: cluster id for labeled rows, -1 otherwise.
inline std::vector<int> pin_targets(const LabelInfo& l) {
    std::vector<int> pins(l.n(), -1);
    for (std::size_t i = 0; i < l.n(); ++i)
        if (l.labeled_mask[i]) pins[i] = known_cluster_of(l, l.labels[i]);
    return pins;
}

inline void recompute_stats(const Matrix& e, ClusterModel& m) {
    int k = m.k();
    m.sizes.assign(k, 0);
    m.radii.assign(k, 0.0);
    for (std::size_t i = 0; i < e.rows; ++i) {
        int c = m.assignment[i];
        ++m.sizes[c];
        double d = std::sqrt(sq_dist(e.row(i), m.centers.row(c)));
        if (d > m.radii[c]) m.radii[c] = d;
    }
}

// Mean of the member rows; clusters with no members keep their old center.
inline void update_centers(const Matrix& e, ClusterModel& m, int first_cluster) {
    int k = m.k();
    std::vector<int> count(k, 0);
    Matrix sum(k, e.cols, 0.0);
    for (std::size_t i = 0; i < e.rows; ++i) {
        int c = m.assignment[i];
        ++count[c];
        auto src = e.row(i);
        auto dst = sum.row(c);
        for (std::size_t j = 0; j < e.cols; ++j) dst[j] += src[j];
    }
    for (int c = first_cluster; c < k; ++c) {
        if (count[c] == 0) continue;
        for (std::size_t j = 0; j < e.cols; ++j)
            m.centers.at(c, j) = sum.at(c, j) / count[c];
    }
}

}  // namespace detail

// Nearest-center assignment; optional pins force selected rows to a fixed
// cluster. Ties go to the lowest cluster index. Sizes and radii are refreshed.
inline ClusterModel assign_nearest(const Matrix& e, ClusterModel m,
                                   const std::vector<int>* pins = nullptr) {
    if (!m.centers.all_finite())
        throw std::invalid_argument("assign_nearest: non-finite centers");
    int k = m.k();
    m.assignment.assign(e.rows, 0);
    for (std::size_t i = 0; i < e.rows; ++i) {
        if (pins && (*pins)[i] >= 0) {
            m.assignment[i] = (*pins)[i];
            continue;
        }
        int best = 0;
        double best_d = sq_dist(e.row(i), m.centers.row(0));
        for (int c = 1; c < k; ++c) {
            double d = sq_dist(e.row(i), m.centers.row(c));
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        m.assignment[i] = best;
    }
    detail::recompute_stats(e, m);
    return m;
}

// Capacity-C balancing. Over-full clusters keep their C closest members
// (pinned members are always kept) and release the rest; released samples are
// then matched by deferred acceptance: each proposes to clusters in ascending
// distance order, and a full cluster accepts a strictly closer proposer by
// releasing its farthest unpinned member. The result is a stable matching:
// no sample strictly prefers a cluster that has room or holds a strictly
// farther member. When N > K*C some samples cannot be placed; they keep their
// nearest cluster and are counted in balance_overflow.
inline ClusterModel balance_clusters(const Matrix& e, ClusterModel m, int c_size,
                                     const std::vector<int>* pins = nullptr) {
    if (c_size < 1) throw std::invalid_argument("balance_clusters: c_size < 1");
    if (m.assignment.size() != e.rows)
        throw std::invalid_argument("balance_clusters: missing assignment");
    const int k = m.k();
    const std::size_t n = e.rows;

    Matrix dist = pairwise_sq_dist(e, m.centers);
    auto pinned = [&](std::size_t i) { return pins && (*pins)[i] >= 0; };

    std::vector<std::vector<int>> members(k);
    for (std::size_t i = 0; i < n; ++i) members[m.assignment[i]].push_back(static_cast<int>(i));

    std::vector<int> free_rows;
    for (int c = 0; c < k; ++c) {
        auto& mem = members[c];
        if (static_cast<int>(mem.size()) <= c_size) continue;
        std::stable_sort(mem.begin(), mem.end(), [&](int a, int b) {
            bool pa = pinned(a), pb = pinned(b);
            if (pa != pb) return pa;  // pinned members are never released
            if (dist.at(a, c) != dist.at(b, c)) return dist.at(a, c) < dist.at(b, c);
            return a < b;
        });
        while (static_cast<int>(mem.size()) > c_size && !pinned(mem.back())) {
            free_rows.push_back(mem.back());
            mem.pop_back();
        }
    }
    std::sort(free_rows.begin(), free_rows.end());

    // Preference lists (ascending distance, then cluster id) per free sample.
    std::vector<std::vector<int>> prefs(n);
    std::vector<std::size_t> pref_pos(n, 0);
    auto build_prefs = [&](int r) {
        auto& p = prefs[r];
        p.resize(k);
        for (int c = 0; c < k; ++c) p[c] = c;
        std::stable_sort(p.begin(), p.end(), [&](int a, int b) {
            if (dist.at(r, a) != dist.at(r, b)) return dist.at(r, a) < dist.at(r, b);
            return a < b;
        });
    };

    using Proposal = std::tuple<double, int, int>;  // (distance, row, cluster)
    std::priority_queue<Proposal, std::vector<Proposal>, std::greater<>> queue;
    std::vector<char> is_free(n, 0);
    auto push_head = [&](int r) {
        if (pref_pos[r] >= prefs[r].size()) return;
        int c = prefs[r][pref_pos[r]];
        queue.emplace(dist.at(r, c), r, c);
    };
    for (int r : free_rows) {
        is_free[r] = 1;
        build_prefs(r);
        push_head(r);
    }

    while (!queue.empty()) {
        auto [d, r, c] = queue.top();
        queue.pop();
        if (!is_free[r] || pref_pos[r] >= prefs[r].size() || prefs[r][pref_pos[r]] != c)
            continue;  // stale entry
        auto& mem = members[c];
        if (static_cast<int>(mem.size()) < c_size) {
            mem.push_back(r);
            is_free[r] = 0;
            continue;
        }
        // Farthest displaceable member (largest distance, then largest row id).
        int worst = -1;
        for (int x : mem) {
            if (pinned(x)) continue;
            if (worst < 0 || dist.at(x, c) > dist.at(worst, c) ||
                (dist.at(x, c) == dist.at(worst, c) && x > worst))
                worst = x;
        }
        if (worst >= 0 && d < dist.at(worst, c)) {
            mem.erase(std::find(mem.begin(), mem.end(), worst));
            mem.push_back(r);
            is_free[r] = 0;
            is_free[worst] = 1;
            if (prefs[worst].empty()) {
                // Kept member displaced for the first time: proposes from the top.
                build_prefs(worst);
                pref_pos[worst] = 0;
            } else {
                // Prior proposer: its head is the cluster that just rejected it.
                ++pref_pos[worst];
            }
            push_head(worst);
        } else {
            ++pref_pos[r];
            push_head(r);
        }
    }

    m.balance_overflow = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!is_free[i]) continue;
        ++m.balance_overflow;  // only possible when N > K*C
        int best = 0;
        for (int c = 1; c < k; ++c)
            if (dist.at(i, c) < dist.at(i, best)) best = c;
        members[best].push_back(static_cast<int>(i));
    }
    if (m.balance_overflow > 0)
        std::cerr << "selex: warning: " << m.balance_overflow
                  << " sample(s) exceed total cluster capacity\n";

    for (int c = 0; c < k; ++c)
        for (int r : members[c]) m.assignment[r] = c;
    detail::recompute_stats(e, m);
    return m;
}

struct StabilityResult {
    bool stable = true;
    int sample = -1;   // witness: this sample ...
    int cluster = -1;  // ... strictly prefers this cluster, which would take it
};

// Blocking-pair scan (samples ascending, clusters ascending). A pair (i, c)
// blocks iff i is strictly closer to c than to its own cluster and c either
// has spare capacity or holds a member strictly farther from its center.
inline StabilityResult is_stable_matching(const Matrix& e, const ClusterModel& m,
                                          int c_size) {
    if (m.assignment.size() != e.rows)
        throw std::invalid_argument("is_stable_matching: missing assignment");
    const int k = m.k();
    Matrix dist = pairwise_sq_dist(e, m.centers);

    std::vector<int> sizes(k, 0);
    std::vector<double> max_member(k, -1.0);
    for (std::size_t i = 0; i < e.rows; ++i) {
        int c = m.assignment[i];
        ++sizes[c];
        max_member[c] = std::max(max_member[c], dist.at(i, c));
    }
    for (std::size_t i = 0; i < e.rows; ++i) {
        double own = dist.at(i, m.assignment[i]);
        for (int c = 0; c < k; ++c) {
            if (c == m.assignment[i]) continue;
            double d = dist.at(i, c);
            if (d >= own) continue;
            if (sizes[c] < c_size || max_member[c] > d)
                return {false, static_cast<int>(i), c};
        }
    }
    return {true, -1, -1};
}

// Alg. 1 seeding: known-category centers are labeled means; novel centers are
// drawn from unlabeled rows, each claiming (excluding) the C nearest
// still-available rows around it so centers stay spaced apart. In unbalanced
// mode the exclusion is skipped and novel centers are plain uniform draws
// without replacement.
inline ClusterModel init_centers(const Matrix& e, const LabelInfo& l,
                                 const BsskConfig& cfg) {
    cfg.validate(l);
    l.validate();
    if (l.n() != e.rows) throw std::invalid_argument("init_centers: label/row mismatch");

    const int n_known = static_cast<int>(l.known_categories.size());
    const int n_novel = cfg.k - n_known;
    ClusterModel m;
    m.centers = Matrix(cfg.k, e.cols, 0.0);
    m.known_cluster_count = n_known;

    for (int ci = 0; ci < n_known; ++ci) {
        int cat = l.known_categories[ci];
        int count = 0;
        for (std::size_t i = 0; i < e.rows; ++i) {
            if (!l.labeled_mask[i] || l.labels[i] != cat) continue;
            ++count;
            auto src = e.row(i);
            for (std::size_t j = 0; j < e.cols; ++j) m.centers.at(ci, j) += src[j];
        }
        if (count == 0)
            throw std::runtime_error("init_centers: known category " +
                                     std::to_string(cat) + " has no labeled rows");
        for (std::size_t j = 0; j < e.cols; ++j) m.centers.at(ci, j) /= count;
    }
    if (n_novel == 0) return m;

    Rng rng(cfg.seed);
    std::vector<char> excluded(e.rows, 0);

    if (cfg.balanced) {
        const int c_size = *cfg.cluster_size;
        auto exclude_nearest = [&](std::span<const double> center) {
            std::vector<std::pair<double, int>> order;
            order.reserve(e.rows);
            for (std::size_t i = 0; i < e.rows; ++i)
                if (!excluded[i])
                    order.emplace_back(sq_dist(e.row(i), center), static_cast<int>(i));
            std::sort(order.begin(), order.end());
            int take = std::min<int>(c_size, static_cast<int>(order.size()));
            for (int t = 0; t < take; ++t) excluded[order[t].second] = 1;
        };
        for (int ci = 0; ci < n_known; ++ci) exclude_nearest(m.centers.row(ci));
        for (int j = 0; j < n_novel; ++j) {
            std::vector<int> pool;
            for (std::size_t i = 0; i < e.rows; ++i)
                if (!l.labeled_mask[i] && !excluded[i]) pool.push_back(static_cast<int>(i));
            if (pool.empty())
                throw std::runtime_error(
                    "init_centers: candidate pool exhausted with " +
                    std::to_string(n_novel - j) + " novel center(s) still required");
            int pick = pool[rng.uniform_int(pool.size())];
            auto src = e.row(pick);
            for (std::size_t d = 0; d < e.cols; ++d) m.centers.at(n_known + j, d) = src[d];
            exclude_nearest(e.row(pick));
        }
    } else {
        std::vector<int> pool;
        for (std::size_t i = 0; i < e.rows; ++i)
            if (!l.labeled_mask[i]) pool.push_back(static_cast<int>(i));
        if (static_cast<int>(pool.size()) < n_novel)
            throw std::runtime_error("init_centers: fewer unlabeled rows than novel centers");
        for (int j = 0; j < n_novel; ++j) {
            std::size_t idx = rng.uniform_int(pool.size());
            int pick = pool[idx];
            pool.erase(pool.begin() + idx);
            auto src = e.row(pick);
            for (std::size_t d = 0; d < e.cols; ++d) m.centers.at(n_known + j, d) = src[d];
        }
    }
    return m;
}

// Alg. 2: alternate assignment (and balancing, when on) with center updates
// restricted to novel clusters; known-category centers stay fixed.
inline ClusterModel refine_novel_centers(const Matrix& e, const LabelInfo& l,
                                         ClusterModel m, const BsskConfig& cfg) {
    auto pins = detail::pin_targets(l);
    if (m.known_cluster_count == m.k() || cfg.n_iter_refine == 0) {
        m = assign_nearest(e, std::move(m), &pins);
        if (cfg.balanced) m = balance_clusters(e, std::move(m), *cfg.cluster_size, &pins);
        return m;
    }
    std::vector<int> prev;
    for (int it = 0; it < cfg.n_iter_refine; ++it) {
        m = assign_nearest(e, std::move(m), &pins);
        if (cfg.balanced) m = balance_clusters(e, std::move(m), *cfg.cluster_size, &pins);
        if (m.assignment == prev) break;
        prev = m.assignment;
        detail::update_centers(e, m, m.known_cluster_count);
    }
    detail::recompute_stats(e, m);
    return m;
}

struct BsskTrace {
    std::vector<double> sse_per_round;  // within-cluster SSE after each final round
};

// Alg. 4: init -> novel-center refinement -> traditional semi-supervised
// k-means over all centers, with labeled rows pinned throughout.
inline ClusterModel bssk(const Matrix& e, const LabelInfo& l, const BsskConfig& cfg,
                         BsskTrace* trace = nullptr) {
    ClusterModel m = init_centers(e, l, cfg);
    m = refine_novel_centers(e, l, std::move(m), cfg);

    auto pins = detail::pin_targets(l);
    std::vector<int> prev = m.assignment;
    for (int it = 0; it < cfg.n_iter_final; ++it) {
        m = assign_nearest(e, std::move(m), &pins);
        if (cfg.balanced) m = balance_clusters(e, std::move(m), *cfg.cluster_size, &pins);
        detail::update_centers(e, m, 0);
        if (trace) {
            double sse = 0.0;
            for (std::size_t i = 0; i < e.rows; ++i)
                sse += sq_dist(e.row(i), m.centers.row(m.assignment[i]));
            trace->sse_per_round.push_back(sse);
        }
        if (m.assignment == prev) break;
        prev = m.assignment;
    }
    detail::recompute_stats(e, m);
    return m;
}

}  // namespace selex
