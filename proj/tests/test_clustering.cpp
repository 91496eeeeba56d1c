#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "edc2rag/clustering.hpp"
#include "oracle.hpp"

using namespace edc2rag;

namespace {

RetrievedSet make_docs(int n) {
    std::vector<Document> docs;
    for (int i = 0; i < n; ++i) {
        Document d;
        d.id = "d" + std::to_string(i + 1);
        d.rank = i + 1;
        docs.push_back(std::move(d));
    }
    return RetrievedSet("q", std::move(docs));
}

struct RandomInstance {
    RetrievedSet docs;
    EmbeddingMap embeddings;
    EmbeddingVector query;
};

RandomInstance random_instance(std::mt19937_64& gen, int n, bool inject_ties) {
    const std::size_t dims = 2 + gen() % 6;
    std::uniform_real_distribution<double> coord(-3.0, 3.0);
    auto random_vec = [&] {
        std::vector<double> v(dims);
        double norm = 0;
        for (auto& x : v) {
            x = coord(gen);
            norm += x * x;
        }
        if (norm == 0) v[0] = 1.0;
        return v;
    };

    std::vector<std::vector<double>> vectors;
    std::vector<double> qv = random_vec();
    for (int i = 0; i < n; ++i) {
        if (inject_ties && i > 0 && gen() % 4 == 0) {
            vectors.push_back(vectors[gen() % vectors.size()]);  // duplicate embedding
        } else if (inject_ties && gen() % 8 == 0) {
            vectors.push_back(qv);  // doc identical to the query
        } else {
            vectors.push_back(random_vec());
        }
    }

    RandomInstance inst{make_docs(n), {}, EmbeddingVector(qv)};
    for (int i = 0; i < n; ++i) {
        inst.embeddings.emplace("d" + std::to_string(i + 1), EmbeddingVector(vectors[i]));
    }
    return inst;
}

void check_partition(const Clustering& clustering, const RetrievedSet& docs) {
    std::set<std::string> seen;
    for (const auto& cluster : clustering.clusters) {
        REQUIRE(!cluster.member_ids.empty());
        CHECK(std::find(cluster.member_ids.begin(), cluster.member_ids.end(),
                        cluster.root_id) != cluster.member_ids.end());
        for (const auto& id : cluster.member_ids) {
            CHECK(seen.insert(id).second);
        }
    }
    CHECK(seen.size() == docs.size());
}

}  // namespace

TEST_CASE("plan_sizes matches the documented schedules") {
    CHECK(plan_sizes(20, 3, 20).sizes == std::vector<int>{3, 6, 11});
    CHECK(plan_sizes(20, 20, 20).sizes == std::vector<int>{20});
    CHECK(plan_sizes(1, 3, std::nullopt).sizes == std::vector<int>{1});
    CHECK(plan_sizes(100, 3, std::nullopt).sizes == std::vector<int>{3, 6, 12, 24, 48, 7});
    // capped at 20 the same input needs one more call
    CHECK(plan_sizes(100, 3, 20).sizes == std::vector<int>{3, 6, 12, 20, 20, 20, 19});
}

TEST_CASE("plan_sizes tail merging") {
    CHECK(plan_sizes(20, 6, 20).sizes == std::vector<int>{6, 12, 2});
    CHECK(plan_sizes(20, 6, 20, 2).sizes == std::vector<int>{6, 14});
    // a tail above the threshold is kept
    CHECK(plan_sizes(20, 1, 20, 2).sizes == std::vector<int>{1, 2, 4, 8, 5});
    // a single cluster is never merged away
    CHECK(plan_sizes(2, 3, 20, 5).sizes == std::vector<int>{2});
}

TEST_CASE("plan_sizes rejects invalid input") {
    CHECK_THROWS_AS(plan_sizes(0, 3, 20), std::invalid_argument);
    CHECK_THROWS_AS(plan_sizes(5, 0, 20), std::invalid_argument);
}

TEST_CASE("dynamic clustering: single document") {
    std::mt19937_64 gen(1);
    auto inst = random_instance(gen, 1, false);
    const Clustering c = dynamic_cluster(inst.docs, inst.embeddings, inst.query, 3, 20);
    REQUIRE(c.clusters.size() == 1);
    CHECK(c.clusters[0].root_id == "d1");
    CHECK(c.clusters[0].member_ids == std::vector<std::string>{"d1"});
}

TEST_CASE("dynamic clustering: document equal to the query becomes the first root") {
    RetrievedSet docs = make_docs(4);
    EmbeddingMap embeddings;
    embeddings.emplace("d1", EmbeddingVector({0.0, 1.0}));
    embeddings.emplace("d2", EmbeddingVector({1.0, 0.0}));
    embeddings.emplace("d3", EmbeddingVector({0.5, 0.5}));
    embeddings.emplace("d4", EmbeddingVector({-1.0, 0.2}));
    const EmbeddingVector query({1.0, 0.0});
    const Clustering c = dynamic_cluster(docs, embeddings, query, 2, 20);
    CHECK(c.clusters[0].root_id == "d2");
}

TEST_CASE("dynamic clustering: two tight groups split cleanly") {
    RetrievedSet docs = make_docs(6);
    EmbeddingMap embeddings;
    embeddings.emplace("d1", EmbeddingVector({1.0, 0.01}));
    embeddings.emplace("d2", EmbeddingVector({0.99, 0.02}));
    embeddings.emplace("d3", EmbeddingVector({1.01, -0.01}));
    embeddings.emplace("d4", EmbeddingVector({0.01, 1.0}));
    embeddings.emplace("d5", EmbeddingVector({0.02, 0.98}));
    embeddings.emplace("d6", EmbeddingVector({-0.01, 1.02}));
    const EmbeddingVector query({1.0, 0.005});

    const Clustering c = dynamic_cluster(docs, embeddings, query, 3, 20);
    REQUIRE(c.clusters.size() == 2);
    const std::set<std::string> first(c.clusters[0].member_ids.begin(),
                                      c.clusters[0].member_ids.end());
    const std::set<std::string> second(c.clusters[1].member_ids.begin(),
                                       c.clusters[1].member_ids.end());
    CHECK(first == std::set<std::string>{"d1", "d2", "d3"});
    CHECK(second == std::set<std::string>{"d4", "d5", "d6"});
    CHECK(c.clusters[0].index == 1);
    CHECK(c.clusters[1].index == 2);
}

TEST_CASE("dynamic clustering: missing embedding is reported with the id") {
    RetrievedSet docs = make_docs(2);
    EmbeddingMap embeddings;
    embeddings.emplace("d1", EmbeddingVector({1.0, 0.0}));
    const EmbeddingVector query({1.0, 0.0});
    CHECK_THROWS_WITH_AS(dynamic_cluster(docs, embeddings, query, 2, 20),
                         "missing embedding for document: d2", std::invalid_argument);
}

TEST_CASE("dynamic clustering equals the brute-force transcription") {
    std::mt19937_64 gen(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + static_cast<int>(gen() % 8);
        const int tau = 1 + static_cast<int>(gen() % (n + 2));
        std::optional<int> lambda;
        if (gen() % 2 == 0) lambda = std::max(tau, 1 + static_cast<int>(gen() % (2 * n)));
        auto inst = random_instance(gen, n, true);

        const Clustering actual =
            dynamic_cluster(inst.docs, inst.embeddings, inst.query, tau, lambda);

        std::vector<oracle::Doc> pool;
        for (const auto& doc : inst.docs.documents()) {
            pool.push_back({doc.id, doc.rank, inst.embeddings.at(doc.id).values()});
        }
        const auto expected = oracle::cluster(pool, inst.query.values(), tau, lambda);

        REQUIRE(actual.clusters.size() == expected.size());
        for (std::size_t k = 0; k < expected.size(); ++k) {
            CHECK(actual.clusters[k].root_id == expected[k].root_id);
            CHECK(actual.clusters[k].member_ids == expected[k].member_ids);
        }
    }
}

TEST_CASE("dynamic clustering realizes plan_sizes for every tau and cap") {
    std::mt19937_64 gen(5);
    for (int n : {1, 2, 3, 5, 8, 13, 21, 34, 64}) {
        auto inst = random_instance(gen, n, false);
        for (int tau = 1; tau <= n; ++tau) {
            for (std::optional<int> lambda : {std::optional<int>{}, std::optional<int>{20}}) {
                if (lambda && *lambda < tau) continue;
                const Clustering c =
                    dynamic_cluster(inst.docs, inst.embeddings, inst.query, tau, lambda);
                const SizePlan plan = plan_sizes(n, tau, lambda);
                REQUIRE(c.clusters.size() == plan.sizes.size());
                for (std::size_t k = 0; k < plan.sizes.size(); ++k) {
                    CHECK(static_cast<int>(c.clusters[k].member_ids.size()) == plan.sizes[k]);
                }
                check_partition(c, inst.docs);
            }
        }
    }
}

TEST_CASE("root optimality: each root maximizes query similarity among remaining docs") {
    std::mt19937_64 gen(6);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + static_cast<int>(gen() % 16);
        auto inst = random_instance(gen, n, true);
        const Clustering c = dynamic_cluster(inst.docs, inst.embeddings, inst.query, 3, 20);

        std::set<std::string> used;
        for (const auto& cluster : c.clusters) {
            const double root_sim =
                cosine_similarity(inst.query, inst.embeddings.at(cluster.root_id));
            for (const auto& doc : inst.docs.documents()) {
                if (used.count(doc.id)) continue;
                CHECK(cosine_similarity(inst.query, inst.embeddings.at(doc.id)) <=
                      root_sim + 1e-12);
            }
            for (const auto& id : cluster.member_ids) used.insert(id);
        }
    }
}

TEST_CASE("average clustering splits rank-contiguous blocks") {
    const Clustering c = average_cluster(make_docs(20), 3);
    REQUIRE(c.clusters.size() == 3);
    CHECK(c.clusters[0].member_ids.size() == 7);
    CHECK(c.clusters[1].member_ids.size() == 7);
    CHECK(c.clusters[2].member_ids.size() == 6);
    CHECK(c.clusters[0].member_ids.front() == "d1");
    CHECK(c.clusters[0].member_ids.back() == "d7");
    CHECK(c.clusters[1].member_ids.front() == "d8");
    CHECK(c.clusters[2].member_ids.front() == "d15");
    CHECK(c.clusters[2].member_ids.back() == "d20");
    for (const auto& cluster : c.clusters) {
        CHECK(cluster.root_id == cluster.member_ids.front());  // lowest rank in the block
    }
}

TEST_CASE("average clustering edges") {
    const Clustering singletons = average_cluster(make_docs(4), 4);
    REQUIRE(singletons.clusters.size() == 4);
    for (const auto& cluster : singletons.clusters) CHECK(cluster.member_ids.size() == 1);

    const Clustering one = average_cluster(make_docs(5), 1);
    REQUIRE(one.clusters.size() == 1);
    CHECK(one.clusters[0].member_ids.size() == 5);

    CHECK_THROWS_AS(average_cluster(make_docs(3), 4), std::invalid_argument);
    CHECK_THROWS_AS(average_cluster(make_docs(3), 0), std::invalid_argument);
}

TEST_CASE("random clustering respects sizes, seed determinism, and differs across seeds") {
    const RetrievedSet docs = make_docs(20);
    SizePlan plan;
    plan.sizes = {3, 6, 11};

    const Clustering a = random_cluster(docs, plan, 99);
    const Clustering b = random_cluster(docs, plan, 99);
    CHECK(clustering_to_json(a).dump() == clustering_to_json(b).dump());
    check_partition(a, docs);
    for (std::size_t k = 0; k < plan.sizes.size(); ++k) {
        CHECK(static_cast<int>(a.clusters[k].member_ids.size()) == plan.sizes[k]);
    }

    const Clustering c = random_cluster(docs, plan, 100);
    CHECK(clustering_to_json(a).dump() != clustering_to_json(c).dump());

    SizePlan whole;
    whole.sizes = {20};
    const Clustering single = random_cluster(docs, whole, 1);
    CHECK(single.clusters.size() == 1);

    SizePlan bad;
    bad.sizes = {3, 3};
    CHECK_THROWS_AS(random_cluster(docs, bad, 1), std::invalid_argument);
}

TEST_CASE("intra-class consistency") {
    Clustering clustering;
    clustering.clusters.push_back({1, "a", {"a", "b"}});
    clustering.clusters.push_back({2, "c", {"c", "d"}});

    std::map<std::string, std::string> labels{
        {"a", "useful"}, {"b", "useful"}, {"c", "useful"}, {"d", "useful"}};
    // pairs (a,b) and (c,d) co-clustered out of C(4,2)=6
    CHECK(intra_class_consistency(clustering, labels, "useful") ==
          doctest::Approx(2.0 / 6.0));

    Clustering one;
    one.clusters.push_back({1, "a", {"a", "b", "c", "d"}});
    CHECK(intra_class_consistency(one, labels, "useful") == doctest::Approx(1.0));

    Clustering spread;
    spread.clusters.push_back({1, "a", {"a"}});
    spread.clusters.push_back({2, "b", {"b"}});
    spread.clusters.push_back({3, "c", {"c", "d"}});
    std::map<std::string, std::string> two{{"a", "useful"}, {"b", "useful"}};
    CHECK(intra_class_consistency(spread, two, "useful") == doctest::Approx(0.0));

    std::map<std::string, std::string> lone{{"a", "useful"}};
    CHECK_THROWS_AS(intra_class_consistency(clustering, lone, "useful"), std::invalid_argument);
}

TEST_CASE("intra-class consistency ignores cluster index relabeling") {
    std::map<std::string, std::string> labels{
        {"a", "x"}, {"b", "x"}, {"c", "x"}, {"d", "x"}, {"e", "y"}};
    Clustering base;
    base.clusters.push_back({1, "a", {"a", "b"}});
    base.clusters.push_back({2, "c", {"c", "d", "e"}});

    Clustering relabeled;
    relabeled.clusters.push_back({7, "c", {"c", "d", "e"}});
    relabeled.clusters.push_back({3, "a", {"a", "b"}});

    CHECK(intra_class_consistency(base, labels, "x") ==
          doctest::Approx(intra_class_consistency(relabeled, labels, "x")));
}

TEST_CASE("random baseline consistency") {
    CHECK(random_baseline_consistency(3) == doctest::Approx(1.0 / 3.0));
    CHECK(random_baseline_consistency(7) == doctest::Approx(1.0 / 7.0));
    CHECK(random_baseline_consistency(1) == doctest::Approx(1.0));
    CHECK_THROWS_AS(random_baseline_consistency(0), std::invalid_argument);
}

TEST_CASE("clustering JSON round-trip is lossless") {
    std::mt19937_64 gen(8);
    auto inst = random_instance(gen, 12, false);
    const Clustering c = dynamic_cluster(inst.docs, inst.embeddings, inst.query, 3, 20);
    const auto j = clustering_to_json(c);
    CHECK(j["query_id"] == "q");
    CHECK(j["strategy"] == "dynamic");
    const Clustering back = clustering_from_json(j);
    CHECK(clustering_to_json(back).dump() == j.dump());
}
