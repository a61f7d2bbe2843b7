#include <harim/meta_eval.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

using namespace harim;

namespace {

AnnotatedPair make_pair(std::string id, std::string system, SummaryKind kind, double factuality) {
    AnnotatedPair p;
    p.id = std::move(id);
    p.article = "article";
    p.summary = "summary";
    p.system = std::move(system);
    p.kind = kind;
    p.judgments[Criterion::factuality] = factuality;
    return p;
}

struct Fixture {
    std::vector<AnnotatedPair> pairs;
    std::vector<double> human;
};

Fixture random_fixture(std::mt19937_64& gen, std::size_t n, std::size_t systems = 4) {
    Fixture f;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double h = std::round(u(gen) * 3.0) / 3.0;
        f.human.push_back(h);
        f.pairs.push_back(make_pair("p" + std::to_string(i), "sys" + std::to_string(i % systems),
                                    i % 3 == 0 ? SummaryKind::extractive : SummaryKind::abstractive, h));
    }
    return f;
}

/// Indices of `pairs` in ascending id order.
std::vector<std::size_t> id_order(const std::vector<AnnotatedPair>& pairs) {
    std::vector<std::size_t> idx(pairs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return pairs[a].id < pairs[b].id; });
    return idx;
}

ScoreTable table_from(const std::string& name, const std::vector<AnnotatedPair>& pairs,
                      const std::vector<double>& values) {
    ScoreTable t(name);
    for (std::size_t i = 0; i < pairs.size(); ++i) t.insert(pairs[i].id, values[i]);
    return t;
}

}  // namespace

TEST(SegmentCorrelation, IdentityAndNegation) {
    std::mt19937_64 gen(1);
    const auto f = random_fixture(gen, 40);
    std::vector<double> neg(f.human.size());
    std::transform(f.human.begin(), f.human.end(), neg.begin(), [](double v) { return -v; });
    const auto same = table_from("same", f.pairs, f.human);
    const auto flipped = table_from("neg", f.pairs, neg);
    for (auto c : kAllCoefficients) {
        const auto r = segment_correlation(same, f.pairs, Criterion::factuality, c);
        EXPECT_NEAR(r.value, 1.0, 1e-15);
        EXPECT_EQ(r.n, 40u);
        EXPECT_EQ(r.level, Level::segment);
        EXPECT_NEAR(segment_correlation(flipped, f.pairs, Criterion::factuality, c).value, -1.0, 1e-15);
    }
}

TEST(SegmentCorrelation, FiftyPairOracle) {
    std::mt19937_64 gen(50);
    const auto f = random_fixture(gen, 50);
    const auto metric = oracle::random_vector(gen, 50, false);
    const auto r = segment_correlation(table_from("m", f.pairs, metric), f.pairs, Criterion::factuality,
                                       Coefficient::kendall_tau);
    EXPECT_EQ(r.value, oracle::kendall_tau_b(metric, f.human));
}

TEST(SegmentCorrelation, OrderInvariant) {
    std::mt19937_64 gen(2);
    auto f = random_fixture(gen, 30);
    const auto metric = oracle::random_vector(gen, 30, false);
    const auto table = table_from("m", f.pairs, metric);
    const double before = segment_correlation(table, f.pairs, Criterion::factuality, Coefficient::kendall_tau).value;
    std::shuffle(f.pairs.begin(), f.pairs.end(), gen);
    EXPECT_EQ(segment_correlation(table, f.pairs, Criterion::factuality, Coefficient::kendall_tau).value, before);
    for (auto c : {Coefficient::spearman_r, Coefficient::pearson_rho}) {
        const double v = segment_correlation(table, f.pairs, Criterion::factuality, c).value;
        std::shuffle(f.pairs.begin(), f.pairs.end(), gen);
        EXPECT_EQ(segment_correlation(table, f.pairs, Criterion::factuality, c).value, v);
    }
}

TEST(SegmentCorrelation, SplitFilter) {
    std::mt19937_64 gen(3);
    const auto f = random_fixture(gen, 30);
    const auto metric = oracle::random_vector(gen, 30, false);
    const auto table = table_from("m", f.pairs, metric);
    const auto r = segment_correlation(table, f.pairs, Criterion::factuality, Coefficient::pearson_rho,
                                       SplitFilter::parse("kind=abstractive"));
    EXPECT_EQ(r.n, 20u);
    EXPECT_EQ(r.split, "kind=abstractive");
    std::vector<double> m, h;
    for (std::size_t i : id_order(f.pairs))
        if (i % 3 != 0) {
            m.push_back(metric[i]);
            h.push_back(f.human[i]);
        }
    EXPECT_EQ(r.value, pearson_rho(m, h));
    EXPECT_EQ(SplitFilter::parse("system=sys1").describe(), "system=sys1");
    EXPECT_THROW(SplitFilter::parse("kind=poem"), ValidationError);
    EXPECT_THROW(SplitFilter::parse("length=3"), ValidationError);
    EXPECT_THROW(SplitFilter::parse("abstractive"), ValidationError);
    EXPECT_THROW(segment_correlation(table, f.pairs, Criterion::factuality, Coefficient::pearson_rho,
                                     SplitFilter::parse("kind=reference")),
                 ValidationError);
}

TEST(SegmentCorrelation, JoinFailures) {
    std::mt19937_64 gen(4);
    const auto f = random_fixture(gen, 10);
    auto table = table_from("m", f.pairs, oracle::random_vector(gen, 10, false));
    table.insert("stranger", 0.5);
    try {
        segment_correlation(table, f.pairs, Criterion::factuality, Coefficient::kendall_tau);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("stranger"), std::string::npos);
    }
    ScoreTable partial("partial");
    partial.insert("p0", 1.0);
    partial.insert("p1", 2.0);
    EXPECT_THROW(segment_correlation(partial, f.pairs, Criterion::factuality, Coefficient::kendall_tau),
                 ValidationError);
    EXPECT_THROW(segment_correlation(table_from("m", f.pairs, f.human), f.pairs, Criterion::fluency,
                                     Coefficient::kendall_tau),
                 ValidationError);
}

TEST(SystemCorrelation, MatchesGroupByOracle) {
    std::mt19937_64 gen(5);
    const auto f = random_fixture(gen, 64, 8);
    const auto metric = oracle::random_vector(gen, 64, false);
    const auto table = table_from("m", f.pairs, metric);
    std::vector<std::string> labels;
    std::vector<double> sorted_metric, sorted_human;
    for (std::size_t i : id_order(f.pairs)) {
        labels.push_back(f.pairs[i].system);
        sorted_metric.push_back(metric[i]);
        sorted_human.push_back(f.human[i]);
    }
    const auto expected = oracle::group_means(labels, sorted_metric, sorted_human);
    const auto means = system_means(table, f.pairs, Criterion::factuality);
    ASSERT_EQ(means.systems.size(), expected.size());
    std::vector<double> em, eh;
    for (std::size_t i = 0; i < means.systems.size(); ++i) {
        const auto& [m, h] = expected.at(means.systems[i]);
        EXPECT_EQ(means.metric[i], m);
        EXPECT_EQ(means.human[i], h);
        em.push_back(m);
        eh.push_back(h);
    }
    const auto r = system_correlation(table, f.pairs, Criterion::factuality, Coefficient::kendall_tau);
    EXPECT_EQ(r.n, 8u);
    EXPECT_EQ(r.value, oracle::kendall_tau_b(em, eh));
}

TEST(SystemCorrelation, TwoSystemsAndDegenerate) {
    std::vector<AnnotatedPair> pairs{make_pair("a1", "A", SummaryKind::abstractive, 0.2),
                                     make_pair("a2", "A", SummaryKind::abstractive, 0.4),
                                     make_pair("b1", "B", SummaryKind::abstractive, 0.9)};
    const auto table = table_from("m", pairs, {1.0, 2.0, 5.0});
    EXPECT_EQ(system_correlation(table, pairs, Criterion::factuality, Coefficient::kendall_tau).value, 1.0);
    std::vector<AnnotatedPair> single(pairs.begin(), pairs.begin() + 2);
    EXPECT_THROW(system_correlation(table_from("m", single, {1.0, 2.0}), single, Criterion::factuality,
                                    Coefficient::kendall_tau),
                 DegenerateError);
}

TEST(SystemCorrelation, WithinSystemOrderInvariant) {
    std::mt19937_64 gen(6);
    auto f = random_fixture(gen, 40, 5);
    const auto table = table_from("m", f.pairs, oracle::random_vector(gen, 40, false));
    const auto before = system_correlation(table, f.pairs, Criterion::factuality, Coefficient::pearson_rho).value;
    std::shuffle(f.pairs.begin(), f.pairs.end(), gen);
    EXPECT_EQ(system_correlation(table, f.pairs, Criterion::factuality, Coefficient::pearson_rho).value, before);
}

TEST(MetricMatrix, Basics) {
    std::mt19937_64 gen(7);
    const auto f = random_fixture(gen, 20);
    const auto x = oracle::random_vector(gen, 20, false);
    std::vector<double> neg(x.size());
    std::transform(x.begin(), x.end(), neg.begin(), [](double v) { return -v; });

    std::vector<ScoreTable> one{table_from("x", f.pairs, x)};
    const auto m1 = metric_metric_matrix(one, Coefficient::pearson_rho);
    EXPECT_EQ(m1.values, (std::vector<std::vector<double>>{{1.0}}));

    std::vector<ScoreTable> two{table_from("x", f.pairs, x), table_from("nx", f.pairs, neg)};
    EXPECT_EQ(metric_metric_matrix(two, Coefficient::kendall_tau).values[0][1], -1.0);

    std::vector<std::vector<double>> cols{x, oracle::random_vector(gen, 20, false), oracle::random_vector(gen, 20, true)};
    std::vector<ScoreTable> three;
    for (std::size_t i = 0; i < 3; ++i) three.push_back(table_from("m" + std::to_string(i), f.pairs, cols[i]));
    three[2].insert("extra", 0.0);
    const auto m3 = metric_metric_matrix(three, Coefficient::spearman_r);
    EXPECT_EQ(m3.shared_ids, 20u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(m3.values[i][i], 1.0);
        for (std::size_t j = 0; j < 3; ++j) {
            EXPECT_EQ(m3.values[i][j], m3.values[j][i]);
            if (i != j) {
                EXPECT_EQ(m3.values[i][j], spearman_r(cols[i], cols[j]));
            }
        }
    }

    ScoreTable disjoint("d");
    disjoint.insert("nobody", 1.0);
    std::vector<ScoreTable> none{one[0], disjoint};
    EXPECT_THROW(metric_metric_matrix(none, Coefficient::kendall_tau), ValidationError);
}

TEST(PermTest, IdenticalTablesGivePOne) {
    std::mt19937_64 gen(8);
    const auto f = random_fixture(gen, 30);
    const auto t = table_from("a", f.pairs, oracle::random_vector(gen, 30, false));
    PermTestConfig cfg;
    cfg.n_permutations = 200;
    const auto r = perm_input_test(t, t, f.pairs, cfg);
    EXPECT_EQ(r.observed_gap, 0.0);
    EXPECT_EQ(r.p_value, 1.0);
}

TEST(PermTest, PerfectVersusAntiCorrelated) {
    std::mt19937_64 gen(9);
    const auto f = random_fixture(gen, 30);
    std::vector<double> anti(f.human.size());
    std::transform(f.human.begin(), f.human.end(), anti.begin(), [](double v) { return -v; });
    PermTestConfig cfg;
    const auto r = perm_input_test(table_from("good", f.pairs, f.human), table_from("bad", f.pairs, anti), f.pairs, cfg);
    EXPECT_NEAR(r.observed_gap, 2.0, 1e-12);
    EXPECT_LT(r.p_value, 0.05);
    EXPECT_EQ(r.n_permutations, 1000u);
}

TEST(PermTest, SeededDeterminism) {
    std::mt19937_64 gen(10);
    const auto f = random_fixture(gen, 25);
    const auto a = table_from("a", f.pairs, oracle::random_vector(gen, 25, false));
    const auto b = table_from("b", f.pairs, oracle::random_vector(gen, 25, false));
    PermTestConfig cfg;
    cfg.seed = 77;
    cfg.n_permutations = 300;
    EXPECT_EQ(perm_input_test(a, b, f.pairs, cfg), perm_input_test(a, b, f.pairs, cfg));
    const auto first = perm_input_test(a, b, f.pairs, cfg);
    cfg.seed = 78;
    const auto other = perm_input_test(a, b, f.pairs, cfg);
    EXPECT_EQ(other.observed_gap, first.observed_gap);
    EXPECT_EQ(other.seed, 78u);
}

TEST(PermTest, SymmetricInArguments) {
    std::mt19937_64 gen(11);
    const auto f = random_fixture(gen, 25);
    const auto a = table_from("a", f.pairs, oracle::random_vector(gen, 25, false));
    const auto b = table_from("b", f.pairs, oracle::random_vector(gen, 25, false));
    PermTestConfig cfg;
    cfg.n_permutations = 300;
    const auto ab = perm_input_test(a, b, f.pairs, cfg);
    const auto ba = perm_input_test(b, a, f.pairs, cfg);
    EXPECT_EQ(ab.observed_gap, -ba.observed_gap);
    EXPECT_EQ(ab.p_value, ba.p_value);
}

TEST(PermTest, DegenerateRoundsAreResampled) {
    // With 3 examples and a tied human vector some swap patterns make a
    // metric constant; those rounds are resampled, not counted.
    std::vector<double> human{0.0, 1.0, 1.0}, a{1.0, 1.0, 2.0}, b{1.0, 2.0, 1.0};
    const auto r = perm_input_test(a, b, human, Coefficient::pearson_rho, 100, 3);
    EXPECT_GT(r.n_rejected, 0u);
    EXPECT_EQ(r.n_permutations, 100u);
    // Always degenerate: constant human judgments.
    std::vector<double> flat{1.0, 1.0, 1.0};
    EXPECT_THROW(perm_input_test(a, b, flat, Coefficient::kendall_tau, 10, 0), DegenerateError);
    EXPECT_THROW(perm_input_test(a, b, human, Coefficient::kendall_tau, 0, 0), ValidationError);
}

TEST(PermTest, SignificanceGrid) {
    std::mt19937_64 gen(12);
    const auto f = random_fixture(gen, 40);
    std::vector<double> anti(f.human.size());
    std::transform(f.human.begin(), f.human.end(), anti.begin(), [](double v) { return -v; });
    std::vector<ScoreTable> tables{table_from("good", f.pairs, f.human), table_from("good2", f.pairs, f.human),
                                   table_from("bad", f.pairs, anti)};
    PermTestConfig cfg;
    cfg.n_permutations = 200;
    const auto g = significance_grid(tables, f.pairs, cfg);
    EXPECT_EQ(g.results.size(), 3u);
    EXPECT_EQ(g.significant, (std::vector<std::vector<int>>{{0, 0, 1}, {0, 0, 1}, {1, 1, 0}}));
    std::ostringstream os;
    write_grid(os, g);
    EXPECT_EQ(os.str(), "metric\tgood\tgood2\tbad\ngood\t0\t0\t1\ngood2\t0\t0\t1\nbad\t1\t1\t0\n");
}
