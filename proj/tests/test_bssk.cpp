#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "selex/bssk.hpp"
#include "selex/rng.hpp"

using namespace selex;

namespace {

Matrix points_1d(std::initializer_list<double> xs) {
    Matrix m(xs.size(), 1);
    std::size_t i = 0;
    for (double x : xs) m.at(i++, 0) = x;
    return m;
}

// The running 4-point instance: values (0, 1, 10, 11), row 0 labeled with the
// single known category.
struct FourPoints {
    Matrix e = points_1d({0.0, 1.0, 10.0, 11.0});
    LabelInfo l;
    BsskConfig cfg;

    FourPoints() {
        l.labels = {0, 0, 1, 1};
        l.labeled_mask = {true, false, false, false};
        l.known_categories = {0};
        l.k_total = 2;
        cfg.k = 2;
        cfg.cluster_size = 2;
        cfg.seed = 7;
    }
};

Matrix random_matrix(std::size_t n, std::size_t d, Rng& rng, double scale = 1.0) {
    Matrix m(n, d);
    for (double& v : m.data) v = scale * rng.normal();
    return m;
}

// Total within-cluster squared distance.
double sse(const Matrix& e, const ClusterModel& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < e.rows; ++i)
        s += sq_dist(e.row(i), m.centers.row(m.assignment[i]));
    return s;
}

}  // namespace

TEST_CASE("init_centers: known means plus exclusion-based novel draw") {
    FourPoints f;
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL, 99ULL}) {
        f.cfg.seed = seed;
        ClusterModel m = init_centers(f.e, f.l, f.cfg);
        CHECK(m.assignment.empty());
        CHECK(m.known_cluster_count == 1);
        CHECK(m.centers.at(0, 0) == 0.0);  // mean of labeled rows {0}
        // C=2 nearest rows to the known center (values 0 and 1) are excluded,
        // so the novel center comes from {10, 11}.
        double novel = m.centers.at(1, 0);
        CHECK((novel == 10.0 || novel == 11.0));
    }
    f.cfg.seed = 42;
    ClusterModel a = init_centers(f.e, f.l, f.cfg);
    ClusterModel b = init_centers(f.e, f.l, f.cfg);
    CHECK(a.centers.data == b.centers.data);
}

TEST_CASE("init_centers: all categories known and labeled means no random draw") {
    Matrix e = points_1d({0.0, 2.0, 10.0, 12.0});
    LabelInfo l;
    l.labels = {0, 0, 1, 1};
    l.labeled_mask = {true, true, true, true};
    l.known_categories = {0, 1};
    l.k_total = 2;
    BsskConfig cfg;
    cfg.k = 2;
    cfg.cluster_size = 2;

    for (std::uint64_t seed : {1ULL, 5ULL}) {
        cfg.seed = seed;
        ClusterModel m = init_centers(e, l, cfg);
        CHECK(m.centers.at(0, 0) == 1.0);
        CHECK(m.centers.at(1, 0) == 11.0);
    }
}

TEST_CASE("init_centers error paths") {
    FourPoints f;
    LabelInfo bad = f.l;
    bad.labeled_mask = {false, false, false, false};
    CHECK_THROWS(init_centers(f.e, bad, f.cfg));  // no labeled rows for category 0

    BsskConfig small = f.cfg;
    small.k = 0;
    CHECK_THROWS_AS(init_centers(f.e, f.l, small), std::invalid_argument);

    BsskConfig no_c = f.cfg;
    no_c.cluster_size.reset();
    CHECK_THROWS_AS(init_centers(f.e, f.l, no_c), std::invalid_argument);

    // Unbalanced draw needs enough unlabeled rows.
    Matrix tiny = points_1d({0.0, 1.0});
    LabelInfo tl;
    tl.labels = {0, 0};
    tl.labeled_mask = {true, true};
    tl.known_categories = {0};
    tl.k_total = 3;
    BsskConfig ub;
    ub.k = 3;
    ub.balanced = false;
    CHECK_THROWS_AS(init_centers(tiny, tl, ub), std::runtime_error);
}

TEST_CASE("assign_nearest examples") {
    // Equidistant point goes to the lowest cluster index among the closest.
    ClusterModel m;
    m.centers = points_1d({10.0, 1.0, 10.0, -1.0});
    m = assign_nearest(points_1d({0.0}), m);
    CHECK(m.assignment == std::vector<int>{1});

    ClusterModel two;
    two.centers = points_1d({0.0, 10.0});
    two = assign_nearest(points_1d({1.0, 9.0}), two);
    CHECK(two.assignment == std::vector<int>{0, 1});
    CHECK(two.sizes == std::vector<int>{1, 1});

    ClusterModel one;
    one.centers = points_1d({5.0});
    one = assign_nearest(points_1d({-3.0, 0.0, 20.0}), one);
    CHECK(one.assignment == std::vector<int>{0, 0, 0});
}

TEST_CASE("balance_clusters hand trace") {
    Matrix e = points_1d({0.0, 1.0, 2.0, 9.0});
    ClusterModel m;
    m.centers = points_1d({0.0, 10.0});
    m = assign_nearest(e, m);
    CHECK(m.assignment == std::vector<int>{0, 0, 0, 1});

    ClusterModel b = balance_clusters(e, m, 2);
    CHECK(b.assignment == std::vector<int>{0, 0, 1, 1});
    CHECK(b.sizes == std::vector<int>{2, 2});
    CHECK(is_stable_matching(e, b, 2).stable);
}

TEST_CASE("balance_clusters keeps an already balanced assignment") {
    Matrix e = points_1d({0.0, 1.0, 9.0, 10.0});
    ClusterModel m;
    m.centers = points_1d({0.5, 9.5});
    m = assign_nearest(e, m);
    std::vector<int> before = m.assignment;
    ClusterModel b = balance_clusters(e, m, 2);
    CHECK(b.assignment == before);
}

TEST_CASE("balance_clusters resolves the far-sparse-cluster corner stably") {
    // A released sample whose only sparse option is far away displaces the
    // farthest member of a nearer full cluster instead of pairing unstably.
    Matrix e = points_1d({0.0, 4.0, 17.0});
    ClusterModel m;
    m.centers = points_1d({0.0, 10.0, 100.0});
    m = assign_nearest(e, m);
    CHECK(m.assignment == std::vector<int>{0, 0, 1});

    ClusterModel b = balance_clusters(e, m, 1);
    CHECK(b.assignment == std::vector<int>{0, 1, 2});
    CHECK(is_stable_matching(e, b, 1).stable);
}

TEST_CASE("balance_clusters overflow path when N > K*C") {
    Matrix e = points_1d({0.0, 1.0, 2.0});
    ClusterModel m;
    m.centers = points_1d({0.0});
    m = assign_nearest(e, m);
    ClusterModel b = balance_clusters(e, m, 2);
    CHECK(b.balance_overflow == 1);
    CHECK(b.assignment == std::vector<int>{0, 0, 0});  // nearest-any fallback
}

TEST_CASE("stability property on random nearest-assignment instances") {
    Rng rng(314);
    for (int trial = 0; trial < 200; ++trial) {
        int k = 2 + static_cast<int>(rng.uniform_int(7));
        int c = 1 + static_cast<int>(rng.uniform_int(5));
        int d = 1 + static_cast<int>(rng.uniform_int(4));
        std::size_t n = static_cast<std::size_t>(k) * c;
        Matrix e = random_matrix(n, d, rng);
        ClusterModel m;
        m.centers = random_matrix(k, d, rng, 1.5);
        m = assign_nearest(e, m);
        ClusterModel b = balance_clusters(e, m, c);
        CHECK(b.sizes == std::vector<int>(k, c));
        auto st = is_stable_matching(e, b, c);
        INFO("trial " << trial << " witness " << st.sample << "," << st.cluster);
        CHECK(st.stable);
    }
}

TEST_CASE("is_stable_matching witness on a hand-built violation") {
    Matrix e = points_1d({0.0, 1.0, 2.0, 9.0});
    ClusterModel m;
    m.centers = points_1d({0.0, 10.0});
    m.assignment = {0, 0, 0, 0};  // value 9 marooned away from its cluster
    detail::recompute_stats(e, m);
    auto st = is_stable_matching(e, m, 2);
    CHECK_FALSE(st.stable);
    CHECK(st.sample == 3);  // the row holding value 9
    CHECK(st.cluster == 1);
}

TEST_CASE("is_stable_matching is vacuously true for a single cluster") {
    Matrix e = points_1d({0.0, 5.0, 50.0});
    ClusterModel m;
    m.centers = points_1d({2.0});
    m = assign_nearest(e, m);
    CHECK(is_stable_matching(e, m, 1).stable);
}

TEST_CASE("refine_novel_centers pulls the novel center to its mean") {
    FourPoints f;
    f.cfg.n_iter_refine = 5;
    ClusterModel m = init_centers(f.e, f.l, f.cfg);
    m = refine_novel_centers(f.e, f.l, m, f.cfg);
    CHECK(m.centers.at(0, 0) == 0.0);   // known center untouched
    CHECK(m.centers.at(1, 0) == 10.5);  // mean of {10, 11}
    CHECK(m.assignment == std::vector<int>{0, 0, 1, 1});
}

TEST_CASE("refine_novel_centers with zero novel clusters refreshes assignment only") {
    Matrix e = points_1d({0.0, 2.0, 10.0, 12.0});
    LabelInfo l;
    l.labels = {0, 0, 1, 1};
    l.labeled_mask = {true, true, true, true};
    l.known_categories = {0, 1};
    l.k_total = 2;
    BsskConfig cfg;
    cfg.k = 2;
    cfg.cluster_size = 2;
    ClusterModel m = init_centers(e, l, cfg);
    Matrix centers_before = m.centers;
    m = refine_novel_centers(e, l, m, cfg);
    CHECK(m.centers.data == centers_before.data);
    CHECK(m.assignment == std::vector<int>{0, 0, 1, 1});
}

TEST_CASE("refine_novel_centers reaches a fixed point") {
    FourPoints f;
    f.cfg.n_iter_refine = 3;
    ClusterModel m = refine_novel_centers(f.e, f.l, init_centers(f.e, f.l, f.cfg), f.cfg);
    BsskConfig more = f.cfg;
    more.n_iter_refine = 50;
    ClusterModel m2 = refine_novel_centers(f.e, f.l, init_centers(f.e, f.l, f.cfg), more);
    CHECK(m.assignment == m2.assignment);
    CHECK(m.centers.data == m2.centers.data);
}

TEST_CASE("bssk solves the 4-point instance optimally") {
    FourPoints f;
    ClusterModel m = bssk(f.e, f.l, f.cfg);
    CHECK(m.assignment == std::vector<int>{0, 0, 1, 1});
    CHECK(m.centers.at(0, 0) == 0.5);
    CHECK(m.centers.at(1, 0) == 10.5);
    CHECK(m.sizes == std::vector<int>{2, 2});

    // Independent oracle: brute force over balanced 2+2 partitions with row 0
    // pinned to cluster 0.
    double best = 1e300;
    std::vector<int> best_assign;
    for (int p1 = 1; p1 < 4; ++p1) {
        std::vector<int> assign(4, 1);
        assign[0] = 0;
        assign[p1] = 0;
        double centers[2] = {0.0, 0.0};
        int counts[2] = {0, 0};
        for (int i = 0; i < 4; ++i) {
            centers[assign[i]] += f.e.at(i, 0);
            ++counts[assign[i]];
        }
        centers[0] /= counts[0];
        centers[1] /= counts[1];
        double total = 0.0;
        for (int i = 0; i < 4; ++i) {
            double d = f.e.at(i, 0) - centers[assign[i]];
            total += d * d;
        }
        if (total < best) {
            best = total;
            best_assign = assign;
        }
    }
    CHECK(m.assignment == best_assign);
    CHECK(sse(f.e, m) == best);
}

TEST_CASE("bssk with N = K and C = 1 gives singleton clusters") {
    Matrix e = points_1d({0.0, 5.0, 11.0, 20.0});
    LabelInfo l;
    l.labels = {0, 1, 2, 3};
    l.labeled_mask = {true, false, false, false};
    l.known_categories = {0};
    l.k_total = 4;
    BsskConfig cfg;
    cfg.k = 4;
    cfg.cluster_size = 1;
    cfg.seed = 3;
    ClusterModel m = bssk(e, l, cfg);
    CHECK(m.sizes == std::vector<int>(4, 1));
    CHECK(sse(e, m) == 0.0);
    for (double r : m.radii) CHECK(r == 0.0);
}

TEST_CASE("bssk unbalanced mode on a long-tail instance") {
    // Head category with 12 rows, tail categories with 2 each.
    std::vector<double> xs;
    std::vector<int> labels;
    for (int i = 0; i < 12; ++i) {
        xs.push_back(0.0 + 0.01 * i);
        labels.push_back(0);
    }
    for (int c = 1; c < 4; ++c)
        for (int i = 0; i < 2; ++i) {
            xs.push_back(10.0 * c + 0.01 * i);
            labels.push_back(c);
        }
    Matrix e(xs.size(), 1);
    for (std::size_t i = 0; i < xs.size(); ++i) e.at(i, 0) = xs[i];
    LabelInfo l;
    l.labels = labels;
    l.labeled_mask.assign(xs.size(), false);
    for (int i = 0; i < 6; ++i) l.labeled_mask[i] = true;
    l.known_categories = {0};
    l.k_total = 4;

    BsskConfig cfg;
    cfg.k = 4;
    cfg.balanced = false;
    cfg.seed = 12;
    BsskTrace trace;
    ClusterModel m = bssk(e, l, cfg, &trace);

    int total = 0;
    for (int s : m.sizes) total += s;
    CHECK(total == static_cast<int>(e.rows));
    // Unequal sizes are expected here.
    CHECK(*std::max_element(m.sizes.begin(), m.sizes.end()) >
          *std::min_element(m.sizes.begin(), m.sizes.end()));
    // Monotone distortion in the unbalanced final stage.
    for (std::size_t t = 1; t < trace.sse_per_round.size(); ++t)
        CHECK(trace.sse_per_round[t] <= trace.sse_per_round[t - 1] + 1e-12);
}

TEST_CASE("bssk pins labeled rows and is deterministic") {
    Rng data_rng(88);
    const int k = 4, c = 5, d = 3;
    const std::size_t n = k * c;
    Matrix e = random_matrix(n, d, data_rng, 2.0);
    LabelInfo l;
    l.labels.resize(n);
    l.labeled_mask.assign(n, false);
    for (std::size_t i = 0; i < n; ++i) l.labels[i] = static_cast<int>(i) / c;
    for (std::size_t i = 0; i < n; i += 2)
        if (l.labels[i] < 2) l.labeled_mask[i] = true;
    l.known_categories = {0, 1};
    l.k_total = k;

    BsskConfig cfg;
    cfg.k = k;
    cfg.cluster_size = c;
    cfg.seed = 5;
    ClusterModel m1 = bssk(e, l, cfg);
    ClusterModel m2 = bssk(e, l, cfg);
    CHECK(m1.assignment == m2.assignment);
    CHECK(m1.centers.data == m2.centers.data);
    CHECK(m1.sizes == std::vector<int>(k, c));
    for (std::size_t i = 0; i < n; ++i)
        if (l.labeled_mask[i])
            CHECK(m1.assignment[i] == known_cluster_of(l, l.labels[i]));
}
