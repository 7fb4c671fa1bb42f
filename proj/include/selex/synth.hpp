#pragma once
// Synthetic hierarchical benchmark data: leaf categories sit at the tips of a
// recursive binary tree in embedding space (coarser splits farther apart),
// plus the labeled/unlabeled category-discovery split construction.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "selex/labels.hpp"
#include "selex/matrix.hpp"
#include "selex/rng.hpp"

namespace selex {

struct SyntheticSpec {
    int depth = 3;             // K = 2^depth leaf categories
    int samples_per_leaf = 40;
    int dims = 8;
    double separation = 2.0;   // split offset scale per tree level
    double noise_sigma = 0.25;
    std::uint64_t seed = 0;

    void validate() const {
        if (depth < 1) throw std::invalid_argument("SyntheticSpec: depth < 1");
        if (depth >= 31) throw std::invalid_argument("SyntheticSpec: depth too large");
        if (dims < depth) throw std::invalid_argument("SyntheticSpec: dims < depth");
        if (samples_per_leaf < 1)
            throw std::invalid_argument("SyntheticSpec: samples_per_leaf < 1");
        if (!(separation > 0.0))
            throw std::invalid_argument("SyntheticSpec: separation must be positive");
        if (!(noise_sigma >= 0.0))
            throw std::invalid_argument("SyntheticSpec: negative noise_sigma");
    }
};

// Center of leaf category `leaf`: level v (1 = coarsest) moves the point by
// +/- separation * 2^(depth-v) along axis v-1, sign taken from the leaf id's
// bit (depth-v). Siblings end up closer than cousins at every level.
inline std::vector<double> synthetic_leaf_center(const SyntheticSpec& spec, int leaf) {
    std::vector<double> c(spec.dims, 0.0);
    for (int v = 1; v <= spec.depth; ++v) {
        int bit = (leaf >> (spec.depth - v)) & 1;
        double offset = spec.separation * std::ldexp(1.0, spec.depth - v);
        c[v - 1] = bit ? offset : -offset;
    }
    return c;
}

struct SyntheticData {
    Matrix embeddings;
    LabelInfo labels;  // fully labeled; run make_split for the GCD setting
};

inline SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    const int k = 1 << spec.depth;
    const std::size_t n = static_cast<std::size_t>(k) * spec.samples_per_leaf;

    SyntheticData out;
    out.embeddings = Matrix(n, spec.dims);
    out.labels.labels.resize(n);
    out.labels.labeled_mask.assign(n, true);
    out.labels.k_total = k;
    out.labels.known_categories.resize(k);
    for (int c = 0; c < k; ++c) out.labels.known_categories[c] = c;

    Rng rng(spec.seed);
    std::size_t row = 0;
    for (int leaf = 0; leaf < k; ++leaf) {
        std::vector<double> center = synthetic_leaf_center(spec, leaf);
        for (int s = 0; s < spec.samples_per_leaf; ++s, ++row) {
            out.labels.labels[row] = leaf;
            auto dst = out.embeddings.row(row);
            for (int d = 0; d < spec.dims; ++d)
                dst[d] = center[d] + spec.noise_sigma * rng.normal();
        }
    }
    return out;
}

// Builds the category-discovery split: floor(K * known_fraction) categories
// are drawn as known (seeded), and within each known category
// floor(count * labeled_fraction) rows, at least one, become labeled.
inline LabelInfo make_split(const LabelInfo& l, double known_fraction,
                            double labeled_fraction, std::uint64_t seed) {
    if (!(known_fraction > 0.0 && known_fraction <= 1.0))
        throw std::invalid_argument("make_split: known_fraction outside (0,1]");
    if (!(labeled_fraction > 0.0 && labeled_fraction <= 1.0))
        throw std::invalid_argument("make_split: labeled_fraction outside (0,1]");
    const int k = l.k_total;
    const int n_known = static_cast<int>(k * known_fraction);
    if (n_known < 1)
        throw std::invalid_argument("make_split: known_fraction selects no category");

    std::vector<std::vector<int>> rows_of(k);
    for (std::size_t i = 0; i < l.n(); ++i) rows_of[l.labels[i]].push_back(static_cast<int>(i));
    for (int c = 0; c < k; ++c)
        if (rows_of[c].empty())
            throw std::invalid_argument("make_split: category " + std::to_string(c) +
                                        " has no rows");

    Rng rng(seed);
    std::vector<int> pool(k);
    for (int c = 0; c < k; ++c) pool[c] = c;
    std::vector<int> known;
    for (int t = 0; t < n_known; ++t) {
        std::size_t idx = rng.uniform_int(pool.size());
        known.push_back(pool[idx]);
        pool.erase(pool.begin() + idx);
    }
    std::sort(known.begin(), known.end());

    LabelInfo out;
    out.labels = l.labels;
    out.k_total = k;
    out.known_categories = known;
    out.labeled_mask.assign(l.n(), false);
    for (int cat : known) {
        auto& rows = rows_of[cat];
        int m = static_cast<int>(rows.size() * labeled_fraction);
        if (m < 1) m = 1;
        std::vector<int> cand = rows;
        for (int t = 0; t < m; ++t) {
            std::size_t idx = rng.uniform_int(cand.size());
            out.labeled_mask[cand[idx]] = true;
            cand.erase(cand.begin() + idx);
        }
    }
    out.validate();
    return out;
}

}  // namespace selex
