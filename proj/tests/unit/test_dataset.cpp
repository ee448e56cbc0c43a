#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <set>

#include "support/wavgen.hpp"
#include "voicescreen/dataset.hpp"

using namespace voicescreen;

namespace {

data::LabeledSet make_set(std::size_t n_neg, std::size_t n_pos,
                          const std::string& prefix = "s") {
    data::LabeledSet set;
    for (std::size_t i = 0; i < n_neg + n_pos; ++i) {
        data::Sample s;
        s.sample_id = prefix + std::to_string(i);
        s.participant_id = prefix + "p" + std::to_string(i);
        s.label = i < n_neg ? 0 : 1;
        set.items.push_back(std::move(s));
    }
    return set;
}

std::multiset<std::string> ids_of(const data::LabeledSet& set) {
    std::multiset<std::string> out;
    for (const auto& s : set.items) out.insert(s.sample_id);
    return out;
}

} // namespace

TEST_CASE("stratified split preserves class balance within one sample") {
    const auto all = make_set(50, 50);
    data::SplitSpec spec;
    spec.train_frac = 0.7;
    spec.val_frac = 0.15;
    spec.test_frac = 0.15;
    spec.seed = 99;
    spec.stratified = true;

    const auto result = data::split(all, spec);
    CHECK(result.train.size() == 70);
    CHECK(std::llabs(long(result.train.n_positive()) - 35) <= 1);
    CHECK(std::llabs(long(result.train.n_negative()) - 35) <= 1);
    CHECK(std::llabs(long(result.val.n_positive()) - 8) <= 1);
    CHECK(std::llabs(long(result.test.n_positive()) - 7) <= 1);
}

TEST_CASE("same seed reproduces the split, different seed changes it") {
    const auto all = make_set(60, 40);
    data::SplitSpec spec;
    spec.seed = 7;
    const auto a = data::split(all, spec);
    const auto b = data::split(all, spec);
    CHECK(ids_of(a.train) == ids_of(b.train));
    CHECK(ids_of(a.val) == ids_of(b.val));
    CHECK(ids_of(a.test) == ids_of(b.test));

    spec.seed = 8;
    const auto c = data::split(all, spec);
    CHECK(ids_of(a.train) != ids_of(c.train));
}

TEST_CASE("samples sharing a participant are co-located") {
    data::LabeledSet all;
    for (int i = 0; i < 40; ++i) {
        data::Sample s;
        s.sample_id = "s" + std::to_string(i);
        s.participant_id = "p" + std::to_string(i / 2); // pairs
        s.label = i % 2;
        all.items.push_back(s);
    }
    data::SplitSpec spec;
    spec.seed = 3;
    const auto result = data::split(all, spec);

    std::map<std::string, std::string> where;
    const auto fill = [&](const data::LabeledSet& set, const char* name) {
        for (const auto& s : set.items) where[s.participant_id + s.sample_id] = name;
    };
    fill(result.train, "train");
    fill(result.val, "val");
    fill(result.test, "test");
    for (int i = 0; i < 40; i += 2) {
        const std::string p = "p" + std::to_string(i / 2);
        CHECK(where[p + "s" + std::to_string(i)] ==
              where[p + "s" + std::to_string(i + 1)]);
    }
}

TEST_CASE("split rejects a class smaller than the number of splits") {
    const auto all = make_set(50, 2);
    data::SplitSpec spec;
    spec.stratified = true;
    CHECK_THROWS_AS(data::split(all, spec), data::EmptyClass);
}

TEST_CASE("rebalance reproduces the published counts") {
    const auto train = make_set(243, 72, "tr");
    const auto val = make_set(152, 142, "va");
    const auto [new_train, new_val] = data::rebalance(train, val, 214, 5);
    CHECK(new_train.n_negative() == 243);
    CHECK(new_train.n_positive() == 214);
    CHECK(new_val.n_negative() == 152);
    CHECK(new_val.n_positive() == 0);
}

TEST_CASE("rebalance identity and failure cases") {
    const auto train = make_set(10, 5, "tr");
    const auto val = make_set(8, 6, "va");

    SECTION("target equal to current positives is the identity") {
        const auto [t, v] = data::rebalance(train, val, 5, 1);
        CHECK(ids_of(t) == ids_of(train));
        CHECK(ids_of(v) == ids_of(val));
    }
    SECTION("insufficient positives") {
        CHECK_THROWS_AS(data::rebalance(train, val, 12, 1),
                        data::InsufficientPositives);
    }
}

TEST_CASE("rebalance conserves the sample multiset and spares the test set") {
    detail::Rng rng(31);
    for (int rep = 0; rep < 20; ++rep) {
        const auto all = make_set(30 + rng.below(40), 20 + rng.below(30));
        data::SplitSpec spec;
        spec.seed = rng.next_u64();
        const auto result = data::split(all, spec);

        const auto val_pos = result.val.n_positive();
        const auto target = result.train.n_positive() + rng.below(val_pos + 1);
        const auto [t, v] = data::rebalance(result.train, result.val, target,
                                            rng.next_u64());
        CHECK(t.n_positive() == target);

        auto combined = ids_of(t);
        for (const auto& id : ids_of(v)) combined.insert(id);
        for (const auto& id : ids_of(result.test)) combined.insert(id);
        CHECK(combined == ids_of(all));

        CHECK(ids_of(result.test) == ids_of(result.test)); // untouched object
        CHECK(t.n_negative() == result.train.n_negative());
        CHECK(v.n_negative() == result.val.n_negative());
    }
}

TEST_CASE("split manifest round trip") {
    const auto all = make_set(12, 8);
    data::SplitSpec spec;
    spec.seed = 13;
    const auto result = data::split(all, spec);

    testsupport::TempDir dir("splits");
    const auto path = (dir.path() / "splits.csv").string();
    data::write_split_manifest(path, result);
    const auto assignment = data::read_split_manifest(path);
    REQUIRE(assignment.size() == all.items.size());
    for (const auto& s : result.train.items) {
        CHECK(assignment.at(s.sample_id) == "train");
    }
    for (const auto& s : result.test.items) {
        CHECK(assignment.at(s.sample_id) == "test");
    }
}

TEST_CASE("degenerate split fractions are rejected") {
    data::SplitSpec spec;
    spec.train_frac = 0.7;
    spec.val_frac = 0.2;
    spec.test_frac = 0.2;
    CHECK_THROWS_AS(spec.validate(), DataError);
    spec.val_frac = 0.0;
    spec.test_frac = 0.3;
    CHECK_NOTHROW(spec.validate());
}
