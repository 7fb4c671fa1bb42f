#pragma once
// Desk-scale alternating optimization: each epoch re-extracts the pseudo-label
// hierarchy from the current embeddings, then runs plain gradient descent on
// the combined loss with targets held fixed, backing the step size off by
// halving whenever a step would increase the loss.

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "selex/bssk.hpp"
#include "selex/eval.hpp"
#include "selex/hssk.hpp"
#include "selex/labels.hpp"
#include "selex/loss.hpp"
#include "selex/matrix.hpp"
#include "selex/rng.hpp"

namespace selex {

struct TrainConfig {
    int epochs = 5;
    int steps_per_epoch = 30;
    double learning_rate = 1e-3;
    int max_backoff = 40;  // halvings tried before accepting a stalled step
    LossConfig loss;
    BsskConfig bssk;
    std::uint64_t seed = 0;

    void validate() const {
        if (epochs < 0) throw std::invalid_argument("TrainConfig: negative epochs");
        if (steps_per_epoch < 0)
            throw std::invalid_argument("TrainConfig: negative steps_per_epoch");
        if (!(learning_rate > 0.0))
            throw std::invalid_argument("TrainConfig: learning_rate must be positive");
        if (max_backoff < 0) throw std::invalid_argument("TrainConfig: negative max_backoff");
        loss.validate();
    }
};

struct EpochMetrics {
    int epoch = 0;
    double l_use = 0.0;
    double l_sse = 0.0;
    double l_se = 0.0;
    double acc_all = 0.0;
    std::optional<double> acc_known;
    std::optional<double> acc_novel;
    std::vector<double> step_losses;  // accepted l_se after each step
    int backoff_count = 0;            // halvings used across the epoch
};

struct TrainResult {
    Matrix embeddings;
    Hierarchy hierarchy;
    std::vector<EpochMetrics> epochs;
};

// Runs the full loop. epochs = 0 evaluates the baseline hierarchy and losses
// without touching the embeddings.
inline TrainResult run_selex(const Matrix& e0, const LabelInfo& l, const TrainConfig& tc) {
    tc.validate();
    l.validate();
    if (l.n() != e0.rows) throw std::invalid_argument("run_selex: label/row mismatch");

    TrainResult res;
    res.embeddings = e0;

    const int rounds = std::max(tc.epochs, 1);
    for (int ep = 1; ep <= rounds; ++ep) {
        BsskConfig bc = tc.bssk;
        bc.seed = mix_seed(tc.seed, static_cast<std::uint64_t>(ep));
        Hierarchy h = build_hierarchy(res.embeddings, l, bc);

        EpochMetrics em;
        em.epoch = tc.epochs == 0 ? 0 : ep;

        LossReport rep = tc.epochs == 0
                             ? l_se(res.embeddings, h, l, tc.loss)
                             : l_se_with_grad(res.embeddings, h, l, tc.loss);
        const int steps = tc.epochs == 0 ? 0 : tc.steps_per_epoch;
        for (int step = 0; step < steps; ++step) {
            if (!std::isfinite(rep.l_se))
                throw std::runtime_error("run_selex: non-finite loss at epoch " +
                                         std::to_string(ep) + " step " +
                                         std::to_string(step));
            double lr = tc.learning_rate;
            Matrix candidate = res.embeddings;
            LossReport next;
            bool accepted = false;
            for (int attempt = 0; attempt <= tc.max_backoff; ++attempt) {
                candidate = res.embeddings;
                const Matrix& g = *rep.gradient;
                for (std::size_t t = 0; t < candidate.data.size(); ++t)
                    candidate.data[t] -= lr * g.data[t];
                next = l_se_with_grad(candidate, h, l, tc.loss);
                if (std::isfinite(next.l_se) && next.l_se <= rep.l_se) {
                    accepted = true;
                    break;
                }
                ++em.backoff_count;
                lr *= 0.5;
            }
            if (!accepted) break;  // stationary up to step-size resolution
            res.embeddings = std::move(candidate);
            rep = std::move(next);
            em.step_losses.push_back(rep.l_se);
        }

        em.l_use = rep.l_use;
        em.l_sse = rep.l_sse;
        em.l_se = rep.l_se;
        AccuracyReport acc = gcd_accuracy(h.levels.front().assignment, l);
        em.acc_all = acc.acc_all;
        em.acc_known = acc.acc_known;
        em.acc_novel = acc.acc_novel;
        res.epochs.push_back(std::move(em));
        if (ep == rounds) res.hierarchy = std::move(h);
        if (tc.epochs == 0) break;
    }
    return res;
}

}  // namespace selex
