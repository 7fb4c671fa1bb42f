#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "selex/hssk.hpp"
#include "selex/loss.hpp"
#include "selex/rng.hpp"
#include "selex/synth.hpp"

using namespace selex;

namespace {

Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(rows.size(), rows.begin()->size());
    std::size_t i = 0;
    for (const auto& r : rows) {
        std::size_t j = 0;
        for (double v : r) m.at(i, j++) = v;
        ++i;
    }
    return m;
}

Hierarchy hand_hierarchy(std::vector<std::vector<int>> level_assignments) {
    Hierarchy h;
    for (auto& a : level_assignments) {
        HierarchyLevel level;
        level.assignment = a;
        int mx = 0;
        for (int x : a) mx = std::max(mx, x);
        level.label_count = mx + 1;
        level.known_label_count = 1;
        level.radii.assign(level.label_count, 0.0);
        h.levels.push_back(std::move(level));
    }
    h.base_k = h.levels.front().label_count;
    return h;
}

// Random small instance with a clustering-derived hierarchy, for gradient and
// identity checks.
struct Instance {
    Matrix e;
    LabelInfo l;
    Hierarchy h;
};

Instance random_instance(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    Instance inst;
    inst.e = Matrix(n, d);
    for (double& v : inst.e.data) v = rng.normal();
    // Four categories, first two known, one labeled row each.
    const int k = 4;
    inst.l.k_total = k;
    inst.l.known_categories = {0, 1};
    inst.l.labels.resize(n);
    inst.l.labeled_mask.assign(n, false);
    for (std::size_t i = 0; i < n; ++i) inst.l.labels[i] = static_cast<int>(i % k);
    inst.l.labeled_mask[0] = true;
    inst.l.labels[0] = 0;
    inst.l.labeled_mask[1] = true;
    inst.l.labels[1] = 1;
    BsskConfig cfg;
    cfg.k = k;
    cfg.cluster_size = static_cast<int>(n) / k;
    if (*cfg.cluster_size < 1) cfg.cluster_size = 1;
    cfg.seed = seed;
    inst.h = build_hierarchy(inst.e, inst.l, cfg);
    return inst;
}

double fd_gradient_entry(const Instance& inst, const LossConfig& cfg, std::size_t i,
                         std::size_t j, double step) {
    Matrix up = inst.e, down = inst.e;
    up.at(i, j) += step;
    down.at(i, j) -= step;
    double hi = l_se(up, inst.h, inst.l, cfg).l_se;
    double lo = l_se(down, inst.h, inst.l, cfg).l_se;
    return (hi - lo) / (2.0 * step);
}

}  // namespace

TEST_CASE("similarity_logits closed forms") {
    LossConfig cfg;
    cfg.tau_unsup = 1.0;

    Matrix same = from_rows({{2.0, 0.0}, {3.0, 0.0}});
    Matrix p = similarity_logits(same, cfg);
    CHECK(p.at(0, 1) == Catch::Approx(0.7310585786300049).epsilon(1e-12));
    CHECK(p.at(0, 0) == Catch::Approx(0.7310585786300049).epsilon(1e-12));

    Matrix ortho = from_rows({{1.0, 0.0}, {0.0, 5.0}});
    CHECK(similarity_logits(ortho, cfg).at(0, 1) == 0.5);

    Matrix anti = from_rows({{1.0, 0.0}, {-2.0, 0.0}});
    CHECK(similarity_logits(anti, cfg).at(0, 1) ==
          Catch::Approx(0.2689414213699951).epsilon(1e-12));

    cfg.tau_unsup = 0.35;
    Matrix pp = similarity_logits(same, cfg);
    CHECK(pp.at(1, 1) == Catch::Approx(1.0 / (1.0 + std::exp(-1.0 / 0.35))));
}

TEST_CASE("l_use closed forms") {
    LossConfig cfg;

    // Hard targets met exactly: loss collapses to the eps clamp residue.
    Matrix p(2, 2, 0.0);
    p.at(0, 0) = 1.0;
    p.at(1, 1) = 1.0;
    TargetMatrix y;
    y.values = p;
    CHECK(l_use(p, y, cfg) <= 1e-6);

    // Fair coin: single entry p = y = 0.5 contributes ln 2.
    Matrix half(1, 1, 0.5);
    TargetMatrix yh;
    yh.values = Matrix(1, 1, 0.5);
    CHECK(l_use(half, yh, cfg) == Catch::Approx(std::log(2.0)).epsilon(1e-12));

    // Identical rows at tau=1 against target 0.
    double p_same = 1.0 / (1.0 + std::exp(-1.0));
    Matrix ps(1, 1, p_same);
    TargetMatrix y0;
    y0.values = Matrix(1, 1, 0.0);
    CHECK(l_use(ps, y0, cfg) == Catch::Approx(-std::log(1.0 - p_same)).epsilon(1e-10));
    CHECK(-std::log(1.0 - p_same) == Catch::Approx(1.3132616875182228).epsilon(1e-10));

    Matrix wrong(1, 2, 0.5);
    CHECK_THROWS_AS(l_use(wrong, y0, cfg), std::invalid_argument);
}

TEST_CASE("supcon_level closed forms") {
    LossConfig cfg;
    cfg.tau_sup = 1.0;

    // Three identical unit vectors, every pair positive: -ln(1/2) per term.
    Matrix e3 = from_rows({{1.0, 0.0}, {1.0, 0.0}, {1.0, 0.0}});
    TargetMatrix all;
    all.values = Matrix(3, 3, 1.0);
    SupconResult r = supcon_level(e3, all, 2, cfg);
    CHECK(r.anchor_count == 3);
    CHECK(r.value == Catch::Approx(std::log(2.0)).epsilon(1e-12));

    // No positives anywhere: vacuous zero with no anchors.
    TargetMatrix id;
    id.values = Matrix(3, 3, 0.0);
    for (int i = 0; i < 3; ++i) id.values.at(i, i) = 1.0;
    SupconResult none = supcon_level(e3, id, 2, cfg);
    CHECK(none.anchor_count == 0);
    CHECK(none.value == 0.0);

    // Two identical positives plus an orthogonal negative.
    Matrix mix = from_rows({{1.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}});
    TargetMatrix pair;
    pair.values = Matrix(3, 3, 0.0);
    for (int i = 0; i < 3; ++i) pair.values.at(i, i) = 1.0;
    pair.values.at(0, 1) = 1.0;
    pair.values.at(1, 0) = 1.0;
    SupconResult two = supcon_level(mix, pair, 2, cfg);
    CHECK(two.anchor_count == 2);
    CHECK(two.value == Catch::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-12));
}

TEST_CASE("slice widths") {
    CHECK(slice_width(768, 0) == 768);
    CHECK(slice_width(768, 3) == 96);
    CHECK(slice_width(8, 3) == 1);
    CHECK(slice_width(8, 5) == 1);  // floors at one dimension
}

TEST_CASE("l_sse expands as half the weighted level sum") {
    Instance inst = random_instance(12, 6, 5);
    LossConfig cfg;
    auto [total, per_level] = l_sse(inst.e, inst.h, inst.l, cfg);
    REQUIRE(per_level.size() == inst.h.levels.size() + 1);
    double expect = 0.0;
    double w = 1.0;
    for (double v : per_level) {
        expect += v * w;
        w *= 0.5;
    }
    expect *= 0.5;
    CHECK(total == Catch::Approx(expect).margin(1e-15));

    // Cross-check each level against supcon_level directly.
    for (std::size_t k = 0; k < per_level.size(); ++k) {
        TargetMatrix mask = sup_positive_mask(inst.h, static_cast<int>(k), inst.l);
        SupconResult r =
            supcon_level(inst.e, mask, slice_width(inst.e.cols, static_cast<int>(k)), cfg);
        CHECK(per_level[k] == r.value);
    }
}

TEST_CASE("l_se is the lambda mix of its branches") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Instance inst = random_instance(8 + seed % 5, 4 + seed % 3, seed);
        LossConfig cfg;
        cfg.lambda = 0.35;
        LossReport rep = l_se(inst.e, inst.h, inst.l, cfg);

        Matrix p = similarity_logits(inst.e, cfg);
        TargetMatrix y = smooth_target(unsup_target_from_hierarchy(inst.h), cfg.smoothing);
        double use = l_use(p, y, cfg);
        auto [sse, _] = l_sse(inst.e, inst.h, inst.l, cfg);
        CHECK(std::abs(rep.l_se - ((1.0 - 0.35) * use + 0.35 * sse)) <= 1e-12);
        CHECK(rep.l_use == use);
        CHECK(rep.l_sse == sse);
    }
}

TEST_CASE("lambda endpoints") {
    Instance inst = random_instance(10, 5, 77);
    LossConfig zero;
    zero.lambda = 0.0;
    LossReport r0 = l_se(inst.e, inst.h, inst.l, zero);
    CHECK(r0.l_se == r0.l_use);

    LossConfig one;
    one.lambda = 1.0;
    LossReport r1 = l_se(inst.e, inst.h, inst.l, one);
    CHECK(r1.l_se == r1.l_sse);
}

TEST_CASE("loss values are invariant to positive row scaling") {
    Instance inst = random_instance(9, 6, 31);
    LossConfig cfg;
    LossReport base = l_se(inst.e, inst.h, inst.l, cfg);

    Matrix scaled = inst.e;
    for (std::size_t j = 0; j < scaled.cols; ++j) {
        scaled.at(2, j) *= 7.5;
        scaled.at(5, j) *= 0.003;
    }
    LossReport after = l_se(scaled, inst.h, inst.l, cfg);
    CHECK(std::abs(base.l_use - after.l_use) <= 1e-10);
    CHECK(std::abs(base.l_sse - after.l_sse) <= 1e-10);
    CHECK(std::abs(base.l_se - after.l_se) <= 1e-10);
    for (std::size_t k = 0; k < base.l_s_per_level.size(); ++k)
        CHECK(std::abs(base.l_s_per_level[k] - after.l_s_per_level[k]) <= 1e-10);
}

TEST_CASE("analytic gradient matches central finite differences") {
    const double step = 1e-5;
    for (std::uint64_t seed = 100; seed < 106; ++seed) {
        std::size_t n = 8 + seed % 9;   // up to 16
        std::size_t d = 4 + seed % 5;   // up to 8
        Instance inst = random_instance(n, d, seed);
        LossConfig cfg;
        Matrix g = grad_l_se(inst.e, inst.h, inst.l, cfg);
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                double fd = fd_gradient_entry(inst, cfg, i, j, step);
                double denom = std::max(1.0, std::abs(g.at(i, j)));
                worst = std::max(worst, std::abs(fd - g.at(i, j)) / denom);
            }
        INFO("seed " << seed << " worst relative error " << worst);
        CHECK(worst <= 1e-5);
    }
}

TEST_CASE("gradient matches finite differences with the radius target variant") {
    Instance inst = random_instance(10, 5, 222);
    LossConfig cfg;
    cfg.target_variant = UnsupTargetVariant::radius;
    Matrix g = grad_l_se(inst.e, inst.h, inst.l, cfg);
    double worst = 0.0;
    for (std::size_t i = 0; i < inst.e.rows; ++i)
        for (std::size_t j = 0; j < inst.e.cols; ++j) {
            double fd = fd_gradient_entry(inst, cfg, i, j, 1e-5);
            worst = std::max(worst,
                             std::abs(fd - g.at(i, j)) / std::max(1.0, std::abs(g.at(i, j))));
        }
    CHECK(worst <= 1e-5);
}

TEST_CASE("gradient vanishes when every off-diagonal target is met") {
    // Two rows whose cosine hits sigma^-1(Y_hat_01) exactly; lambda = 0 keeps
    // only the BCE branch, whose off-diagonal residual is then zero.
    LossConfig cfg;
    cfg.lambda = 0.0;
    cfg.smoothing.alpha = 0.5;
    Hierarchy h = hand_hierarchy({{0, 1}});
    // y_01 = 0.5 raw, smoothed to 0.25.
    double target = 0.25;
    double c = cfg.tau_unsup * std::log(target / (1.0 - target));
    REQUIRE(std::abs(c) < 1.0);
    Matrix e = from_rows({{1.0, 0.0}, {c, std::sqrt(1.0 - c * c)}});

    LabelInfo l;
    l.labels = {0, 1};
    l.labeled_mask = {true, false};
    l.known_categories = {0};
    l.k_total = 2;

    Matrix g = grad_l_se(e, h, l, cfg);
    double norm = 0.0;
    for (double v : g.data) norm += v * v;
    CHECK(std::sqrt(norm) <= 1e-8);
}

TEST_CASE("l_se rejects non-finite inputs via the divergence guard") {
    Instance inst = random_instance(6, 4, 9);
    inst.e.at(0, 0) = std::numeric_limits<double>::infinity();
    LossConfig cfg;
    CHECK_THROWS_AS(l_se(inst.e, inst.h, inst.l, cfg), std::runtime_error);
}

TEST_CASE("gradient-bearing report agrees with the plain report") {
    Instance inst = random_instance(11, 6, 444);
    LossConfig cfg;
    LossReport plain = l_se(inst.e, inst.h, inst.l, cfg);
    LossReport with_grad = l_se_with_grad(inst.e, inst.h, inst.l, cfg);
    CHECK(plain.l_use == with_grad.l_use);
    CHECK(plain.l_sse == with_grad.l_sse);
    CHECK(plain.l_se == with_grad.l_se);
    REQUIRE(with_grad.gradient.has_value());
    CHECK(with_grad.gradient->rows == inst.e.rows);
    CHECK(with_grad.gradient->cols == inst.e.cols);
}
