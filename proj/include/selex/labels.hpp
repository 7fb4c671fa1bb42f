#pragma once
// Ground-truth label bookkeeping for the category-discovery setting:
// every sample has a category id, some samples carry a visible label,
// and labeled samples may only belong to known categories.

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace selex {

struct LabelInfo {
    std::vector<int> labels;          // length N, category id per sample
    std::vector<bool> labeled_mask;   // length N
    std::vector<int> known_categories;  // sorted, unique
    int k_total = 0;

    std::size_t n() const { return labels.size(); }

    bool is_known(int category) const {
        return std::binary_search(known_categories.begin(), known_categories.end(),
                                  category);
    }

    std::size_t labeled_count() const {
        std::size_t c = 0;
        for (bool b : labeled_mask) c += b ? 1 : 0;
        return c;
    }

    void validate() const {
        if (labels.empty()) throw std::invalid_argument("LabelInfo: empty labels");
        if (labeled_mask.size() != labels.size())
            throw std::invalid_argument("LabelInfo: mask length mismatch");
        if (k_total < 1) throw std::invalid_argument("LabelInfo: k_total < 1");
        if (known_categories.empty())
            throw std::invalid_argument("LabelInfo: no known categories");
        if (!std::is_sorted(known_categories.begin(), known_categories.end()))
            throw std::invalid_argument("LabelInfo: known_categories not sorted");
        for (int c : known_categories)
            if (c < 0 || c >= k_total)
                throw std::invalid_argument("LabelInfo: known category id " +
                                            std::to_string(c) + " out of range");
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] < 0 || labels[i] >= k_total)
                throw std::invalid_argument("LabelInfo: label out of range at row " +
                                            std::to_string(i));
            if (labeled_mask[i] && !is_known(labels[i]))
                throw std::invalid_argument(
                    "LabelInfo: labeled row of a novel category at row " +
                    std::to_string(i));
        }
    }
};

}  // namespace selex
