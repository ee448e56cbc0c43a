#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "voicescreen/detail/csv.hpp"
#include "voicescreen/detail/rng.hpp"
#include "voicescreen/error.hpp"

namespace voicescreen::data {

class EmptyClass : public DataError {
public:
    using DataError::DataError;
};

class InsufficientPositives : public DataError {
public:
    using DataError::DataError;
};

struct SplitSpec {
    double train_frac = 0.7;
    double val_frac = 0.15;
    double test_frac = 0.15;
    std::uint64_t seed = 0;
    bool stratified = true;

    // val_frac may be zero (a plain train/test split); train and test must
    // be non-degenerate and the three must sum to 1.
    void validate() const {
        if (!(train_frac > 0.0 && train_frac < 1.0))
            throw DataError("train fraction must be in (0,1)");
        if (!(test_frac > 0.0 && test_frac < 1.0))
            throw DataError("test fraction must be in (0,1)");
        if (!(val_frac >= 0.0 && val_frac < 1.0))
            throw DataError("val fraction must be in [0,1)");
        if (std::fabs(train_frac + val_frac + test_frac - 1.0) > 1e-12)
            throw DataError("split fractions must sum to 1");
    }
};

struct Sample {
    std::string sample_id;
    std::string participant_id;
    std::string feature_ref; // path or tag resolved by the consumer
    int label = 0;           // 1 positive, 0 negative
};

struct LabeledSet {
    std::vector<Sample> items;

    std::size_t n_positive() const {
        std::size_t n = 0;
        for (const auto& s : items) n += (s.label == 1);
        return n;
    }
    std::size_t n_negative() const { return items.size() - n_positive(); }
    std::size_t size() const { return items.size(); }
};

struct SplitResult {
    LabeledSet train, val, test;
};

namespace detail_split {

struct Unit {
    std::string participant_id;
    std::vector<std::size_t> indices; // into the source item list
    int label = 0;                    // positive if any member is positive
};

inline std::vector<Unit> group_by_participant(const LabeledSet& all) {
    std::map<std::string, Unit> grouped;
    for (std::size_t i = 0; i < all.items.size(); ++i) {
        const auto& s = all.items[i];
        // empty participant id: every sample is its own unit
        const std::string key =
            s.participant_id.empty() ? ("\x01sample:" + s.sample_id)
                                     : s.participant_id;
        auto& unit = grouped[key];
        unit.participant_id = key;
        unit.indices.push_back(i);
        unit.label |= (s.label == 1);
    }
    std::vector<Unit> units;
    units.reserve(grouped.size());
    for (auto& [key, unit] : grouped) units.push_back(std::move(unit));
    return units; // map iteration: already sorted by key, canonical order
}

// Cumulative-rounding sample quotas for (train, val, test).
inline std::array<std::size_t, 3> quotas(std::size_t n, const SplitSpec& spec) {
    const auto t1 = std::size_t(std::llround(spec.train_frac * double(n)));
    const auto t2 = std::size_t(
        std::llround((spec.train_frac + spec.val_frac) * double(n)));
    return {t1, t2 - t1, n - t2};
}

// Greedy fill: units go to train until its quota is met, then val, then
// test. Singleton units hit quotas exactly; multi-sample units may overshoot
// by at most unit_size - 1 (participant grouping takes precedence).
inline void allocate(const std::vector<Unit>& units,
                     const std::array<std::size_t, 3>& quota,
                     const LabeledSet& all, SplitResult& out) {
    LabeledSet* const targets[3] = {&out.train, &out.val, &out.test};
    std::size_t filled[3] = {0, 0, 0};
    for (const auto& unit : units) {
        std::size_t dest = 2;
        for (std::size_t s = 0; s < 3; ++s) {
            if (filled[s] < quota[s]) {
                dest = s;
                break;
            }
        }
        for (std::size_t idx : unit.indices) {
            targets[dest]->items.push_back(all.items[idx]);
        }
        filled[dest] += unit.indices.size();
    }
}

} // namespace detail_split

// Deterministic, optionally stratified split with participant-level
// grouping: all samples of one participant land in the same split.
inline SplitResult split(const LabeledSet& all, const SplitSpec& spec) {
    spec.validate();
    if (all.items.empty()) throw DataError("split: empty input set");

    auto units = detail_split::group_by_participant(all);
    detail::Rng rng(spec.seed);

    SplitResult out;
    if (spec.stratified) {
        const int n_splits = spec.val_frac > 0.0 ? 3 : 2;
        const std::size_t sample_counts[2] = {all.n_negative(), all.n_positive()};
        for (int cls : {0, 1}) {
            if (sample_counts[std::size_t(cls)] < std::size_t(n_splits))
                throw EmptyClass("class " + std::to_string(cls) + " has " +
                                 std::to_string(sample_counts[std::size_t(cls)]) +
                                 " samples, fewer than the " +
                                 std::to_string(n_splits) + " splits");
        }
        // stratify at unit granularity; mixed-label units count as positive
        std::vector<detail_split::Unit> by_class[2];
        std::size_t class_samples[2] = {0, 0};
        for (auto& u : units) {
            class_samples[u.label] += u.indices.size();
            by_class[u.label].push_back(std::move(u));
        }
        // negatives first, then positives, one shuffled allocation per class
        for (int cls : {0, 1}) {
            detail::shuffle(by_class[cls], rng);
            const auto quota = detail_split::quotas(class_samples[cls], spec);
            detail_split::allocate(by_class[cls], quota, all, out);
        }
    } else {
        detail::shuffle(units, rng);
        const auto quota = detail_split::quotas(all.items.size(), spec);
        detail_split::allocate(units, quota, all, out);
    }
    return out;
}

// Move exactly (target_train_pos - train positives) positive samples from
// the validation set into training, chosen deterministically by seed.
// Negatives and the test set are never touched.
inline std::pair<LabeledSet, LabeledSet> rebalance(const LabeledSet& train,
                                                   const LabeledSet& val,
                                                   std::size_t target_train_pos,
                                                   std::uint64_t seed = 0) {
    const std::size_t have = train.n_positive();
    if (target_train_pos < have)
        throw DataError("rebalance: training set already has " +
                        std::to_string(have) +
                        " positives, more than target " +
                        std::to_string(target_train_pos));
    const std::size_t need = target_train_pos - have;
    if (need == 0) return {train, val};

    std::vector<std::size_t> val_pos;
    for (std::size_t i = 0; i < val.items.size(); ++i) {
        if (val.items[i].label == 1) val_pos.push_back(i);
    }
    if (val_pos.size() < need)
        throw InsufficientPositives(
            "rebalance: need " + std::to_string(need) +
            " positives from validation, only " +
            std::to_string(val_pos.size()) + " available");

    detail::Rng rng(seed);
    detail::shuffle(val_pos, rng);
    val_pos.resize(need);
    std::vector<bool> moved(val.items.size(), false);
    for (std::size_t i : val_pos) moved[i] = true;

    LabeledSet new_train = train;
    LabeledSet new_val;
    for (std::size_t i = 0; i < val.items.size(); ++i) {
        if (moved[i]) new_train.items.push_back(val.items[i]);
        else new_val.items.push_back(val.items[i]);
    }
    return {new_train, new_val};
}

// Split manifest CSV (sample_id, split), the auditable record of a run.
inline void write_split_manifest(const std::string& path,
                                 const SplitResult& splits) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write split manifest: " + path);
    detail::write_csv_row(out, {"sample_id", "split"});
    const auto dump = [&](const LabeledSet& set, const char* name) {
        for (const auto& s : set.items) {
            detail::write_csv_row(out, {s.sample_id, name});
        }
    };
    dump(splits.train, "train");
    dump(splits.val, "val");
    dump(splits.test, "test");
}

inline std::map<std::string, std::string> read_split_manifest(
    const std::string& path) {
    const auto rows = detail::read_csv_file(path);
    std::map<std::string, std::string> assignment;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i == 0 && !rows[i].empty() && rows[i][0] == "sample_id") continue;
        if (rows[i].size() < 2)
            throw DataError("malformed split manifest row in " + path);
        if (!assignment.emplace(rows[i][0], rows[i][1]).second)
            throw DataError("duplicate sample_id '" + rows[i][0] + "' in " + path);
    }
    return assignment;
}

} // namespace voicescreen::data
