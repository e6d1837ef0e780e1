#include "oodkit/error.hpp"
#include "oodkit/evaluation.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace oodkit;
using namespace oodkit::eval;

namespace {

struct RandomSet {
    std::vector<double> scores;
    std::vector<bool> labels;
};

RandomSet random_set(std::mt19937_64& rng, bool with_ties) {
    std::uniform_int_distribution<int> size(4, 60), level(0, 6);
    std::normal_distribution<double> g;
    RandomSet s;
    const int n = size(rng);
    for (int i = 0; i < n; ++i) {
        s.scores.push_back(with_ties ? static_cast<double>(level(rng)) : g(rng));
        s.labels.push_back(i % 3 == 0 ? true : (i % 3 == 1 ? false : g(rng) > 0.3));
    }
    return s;
}

}  // namespace

TEST_CASE("labeling rules") {
    const std::vector<double> d1 = {0.96, 0.97, 0.80};
    const auto fixed = label(d1, LabelRule::fixed(0.95));
    CHECK(fixed.is_ood == std::vector<bool>{false, false, true});

    const std::vector<double> d2 = {0.96, 0.90, 0.85};
    const auto autol = label(d2, LabelRule::automatic());
    CHECK(autol.fell_back);
    CHECK(autol.threshold == 0.80);
    CHECK(autol.is_ood == std::vector<bool>{false, false, false});

    const auto strict = label(d1, LabelRule::automatic());
    CHECK_FALSE(strict.fell_back);
    CHECK(strict.threshold == 0.95);

    const std::vector<double> d3 = {0.1, 0.2, 0.3, 0.4};
    const auto med = label(d3, LabelRule::median());
    CHECK(med.threshold == doctest::Approx(0.25));
    CHECK(med.n_ood() == 2);

    CHECK_THROWS_WITH_AS(label(std::vector<double>{}, LabelRule::automatic()), doctest::Contains("NoImages"), Error);
    CHECK_THROWS_AS(LabelRule::fixed(1.0), Error);
}

TEST_CASE("auto labeling keeps two ID images whenever two reach the fallback floor") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.5, 1.0);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> d(8);
        for (auto& v : d) v = u(rng);
        const auto l = label(d, LabelRule::automatic());
        const auto floor_count = std::count_if(d.begin(), d.end(), [](double v) { return v >= 0.80; });
        if (floor_count >= 2) CHECK(l.n_id() >= 2);
    }
}

TEST_CASE("auroc examples and pair-counting oracle") {
    const std::vector<double> s = {0.1, 0.2, 0.8, 0.9};
    const std::vector<bool> y = {false, false, true, true};
    CHECK(auroc(s, y) == 1.0);
    CHECK(auroc(std::vector<double>(4, 3.0), y) == 0.5);
    CHECK_THROWS_WITH_AS(auroc(s, std::vector<bool>(4, true)), doctest::Contains("DegenerateLabels"), Error);

    std::mt19937_64 rng(2);
    for (int t = 0; t < 100; ++t) {
        const auto r = random_set(rng, t % 2 == 0);
        CHECK(std::abs(auroc(r.scores, r.labels) - oracle::auroc_pairs(r.scores, r.labels)) <= 1e-12);
    }
}

TEST_CASE("auprc examples and threshold-sweep oracle") {
    const std::vector<bool> y = {false, false, true, true};
    CHECK(auprc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, y) == 1.0);
    CHECK(auprc(std::vector<double>{0.4, 0.3, 0.2, 0.1}, std::vector<bool>{false, false, false, true}) == 0.25);
    CHECK_THROWS_WITH_AS(auprc(std::vector<double>{1, 2}, std::vector<bool>{false, false}), doctest::Contains("NoPositives"),
                         Error);

    std::mt19937_64 rng(3);
    for (int t = 0; t < 100; ++t) {
        const auto r = random_set(rng, t % 2 == 0);
        CHECK(std::abs(auprc(r.scores, r.labels) - oracle::ap_sweep(r.scores, r.labels)) <= 1e-12);
    }
}

TEST_CASE("fpr at tpr examples and enumeration oracle") {
    const auto perfect = fpr_at_tpr(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<bool>{false, false, true, true});
    CHECK(perfect.fpr == 0.0);
    CHECK(perfect.threshold == 0.8);

    const auto sweep = fpr_at_tpr(std::vector<double>{3, 2, 1, 2.5}, std::vector<bool>{true, true, true, false});
    CHECK(sweep.threshold == 1.0);
    CHECK(sweep.fpr == 1.0);

    const auto flat = fpr_at_tpr(std::vector<double>(5, 0.4), std::vector<bool>{true, false, true, false, false});
    CHECK(flat.threshold == 0.4);
    CHECK(flat.tpr == 1.0);
    CHECK(flat.fpr == 1.0);

    std::mt19937_64 rng(4);
    for (int t = 0; t < 100; ++t) {
        const auto r = random_set(rng, t % 2 == 0);
        const auto got = fpr_at_tpr(r.scores, r.labels, 0.9);
        const auto [fpr, thr] = oracle::fpr_enum(r.scores, r.labels, 0.9);
        CHECK(got.fpr == fpr);
        CHECK(got.threshold == thr);
    }
}

TEST_CASE("ranking metrics are invariant to strictly increasing transforms") {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 50; ++t) {
        const auto r = random_set(rng, t % 2 == 0);
        std::vector<double> mapped;
        for (double s : r.scores) mapped.push_back(std::exp(s / 4.0) * 3.0 + 1.0);
        CHECK(auroc(mapped, r.labels) == auroc(r.scores, r.labels));
        CHECK(auprc(mapped, r.labels) == auprc(r.scores, r.labels));
        CHECK(fpr_at_tpr(mapped, r.labels).fpr == fpr_at_tpr(r.scores, r.labels).fpr);
        if (t % 2 == 1) {
            std::vector<double> neg;
            for (double s : r.scores) neg.push_back(-s);
            CHECK(auroc(r.scores, r.labels) + auroc(neg, r.labels) == doctest::Approx(1.0).epsilon(1e-15));
        }
    }
}

TEST_CASE("pearson correlation") {
    std::vector<double> x = {1, 2, 3, 4, 5};
    std::vector<double> y, z;
    for (double v : x) {
        y.push_back(2 * v + 1);
        z.push_back(-v);
    }
    const auto c = pearson(x, y);
    CHECK(c.r == doctest::Approx(1.0));
    CHECK(c.p < 1e-12);
    CHECK(pearson(x, z).r == doctest::Approx(-1.0));
    CHECK_THROWS_WITH_AS(pearson(x, std::vector<double>(5, 1.0)), doctest::Contains("ZeroVariance"), Error);
    CHECK_THROWS_WITH_AS(pearson(std::vector<double>{1, 2}, std::vector<double>{3, 4}), doctest::Contains("TooFewPoints"),
                         Error);

    std::mt19937_64 rng(20);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> a(20), b(20);
        for (int i = 0; i < 20; ++i) {
            a[static_cast<std::size_t>(i)] = g(rng);
            b[static_cast<std::size_t>(i)] = 0.3 * a[static_cast<std::size_t>(i)] + g(rng);
        }
        const auto got = pearson(a, b);
        const auto [r, p] = oracle::pearson(a, b);
        CHECK(std::abs(got.r - static_cast<double>(r)) <= 1e-10);
        CHECK(std::abs(got.p - static_cast<double>(p)) <= 1e-8);
    }
}

TEST_CASE("student t cdf agrees with the closed-form series") {
    for (int nu : {1, 2, 3, 4, 7, 10, 25}) {
        for (double t : {-4.0, -1.3, -0.2, 0.0, 0.5, 1.96, 3.3}) {
            CHECK(std::abs(student_t_cdf(t, nu) - static_cast<double>(oracle::student_t_cdf(t, nu))) <= 1e-12);
        }
    }
}

TEST_CASE("paired t-test") {
    const std::vector<double> a = {2, 3, 4, 6};
    const std::vector<double> b = {1, 2, 3, 4};
    const auto g = paired_t_test(a, b, Alternative::Greater);
    CHECK(g.t == doctest::Approx(5.0));
    CHECK(g.df == 3);
    const double ref = 1.0 - static_cast<double>(oracle::student_t_cdf(5.0L, 3));
    CHECK(std::abs(g.p - ref) <= 1e-12);
    CHECK(g.p < 0.05);

    const auto l = paired_t_test(a, b, Alternative::Less);
    const auto two = paired_t_test(a, b, Alternative::TwoSided);
    CHECK(std::abs(two.p - 2 * std::min(g.p, l.p)) <= 1e-12);
    CHECK(std::abs(g.p + l.p - 1.0) <= 1e-12);

    CHECK_THROWS_WITH_AS(paired_t_test(a, a, Alternative::Less), doctest::Contains("ZeroVariance"), Error);
    CHECK_THROWS_WITH_AS(paired_t_test(a, std::vector<double>{1, 2}, Alternative::Less), doctest::Contains("LengthMismatch"),
                         Error);
}

TEST_CASE("reject_at_tpr on a six-image fixture") {
    const std::vector<ScoredImage> imgs = {
        {"a", 0.1, 0.97, 2.0, 0.99, {}}, {"b", 0.2, 0.96, 3.0, 0.98, {}}, {"c", 0.3, 0.98, 1.0, 0.97, {}},
        {"d", 0.8, 0.60, 20.0, 0.5, {}}, {"e", 0.9, 0.50, 30.0, 0.4, {}}, {"f", 0.7, 0.90, 9.0, 0.8, {}},
    };
    const auto labels = label(imgs, LabelRule::fixed(0.95));
    const auto r = reject_at_tpr(imgs, labels.is_ood, 0.90);
    CHECK(r.threshold == 0.7);
    CHECK(r.n_rejected == 3);
    CHECK(r.n_rejected_ood == 3);
    const double all_dsc = (0.97 + 0.96 + 0.98 + 0.60 + 0.50 + 0.90) / 6.0;
    const double kept_dsc = (0.97 + 0.96 + 0.98) / 3.0;
    CHECK(r.delta_dsc > 0.0);
    CHECK(std::abs(r.delta_dsc - (kept_dsc - all_dsc)) <= 1e-12);
    CHECK(std::abs(*r.delta_hd - ((2.0 + 3.0 + 1.0) / 3.0 - 65.0 / 6.0)) <= 1e-12);
    CHECK(std::abs(*r.delta_nsd - ((0.99 + 0.98 + 0.97) / 3.0 - 4.64 / 6.0)) <= 1e-12);

    // tpr = 1 rejects at the minimum positive score.
    const auto full = reject_at_tpr(imgs, labels.is_ood, 1.0);
    CHECK(full.threshold == 0.7);
}

TEST_CASE("reject_at_tpr degenerate cases") {
    std::vector<ScoredImage> same = {{"a", 1.0, 0.5, {}, {}, {}}, {"b", 1.0, 0.99, {}, {}, {}}, {"c", 1.0, 0.98, {}, {}, {}}};
    const auto labels = label(same, LabelRule::fixed(0.95));
    CHECK_THROWS_WITH_AS(reject_at_tpr(same, labels.is_ood), doctest::Contains("EverythingRejected"), Error);

    std::vector<ScoredImage> flat = {{"a", 0.1, 0.9, 5.0, 0.5, {}}, {"b", 0.2, 0.9, 5.0, 0.5, {}},
                                     {"c", 0.9, 0.9, 5.0, 0.5, {}}};
    const std::vector<bool> y = {false, false, true};
    const auto r = reject_at_tpr(flat, y);
    CHECK(r.delta_dsc == 0.0);
    CHECK(*r.delta_hd == 0.0);
    CHECK(*r.delta_nsd == 0.0);

    flat[1].hd.reset();
    CHECK_FALSE(reject_at_tpr(flat, y).delta_hd.has_value());
}

TEST_CASE("evaluate assembles a detection report") {
    std::vector<ScoredImage> imgs;
    for (int i = 0; i < 10; ++i) {
        const double dsc = i < 6 ? 0.97 : 0.6 - 0.05 * i;
        imgs.push_back({"i" + std::to_string(i), static_cast<double>(i), dsc, 10.0 * i, 1.0 - 0.05 * i, {}});
    }
    const auto rep = evaluate(imgs, LabelRule::automatic(), 1.5);
    CHECK(rep.n_id == 6);
    CHECK(rep.n_ood == 4);
    CHECK(rep.auroc == 1.0);
    CHECK(rep.auprc == 1.0);
    CHECK(rep.fpr90 == 0.0);
    CHECK(rep.seconds == 1.5);
    REQUIRE(rep.pcc_dsc.has_value());
    CHECK(rep.pcc_dsc->r < 0.0);
    REQUIRE(rep.pcc_hd.has_value());
    CHECK(rep.pcc_hd->r == doctest::Approx(1.0));

    for (auto& im : imgs) im.dsc = 0.99;
    CHECK_THROWS_WITH_AS(evaluate(imgs, LabelRule::automatic()), doctest::Contains("n_ood = 0"), Error);
}
