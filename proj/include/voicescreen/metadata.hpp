#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "voicescreen/detail/csv.hpp"
#include "voicescreen/error.hpp"

namespace voicescreen::meta {

class UnknownCategory : public DataError {
public:
    using DataError::DataError;
};

class UnparseableAge : public DataError {
public:
    using DataError::DataError;
};

enum class Gender { female, male, other };

// Questionnaire condition codes collapse into six categories.
enum class MedicalCategory {
    high_blood_pressure,
    pulmonary,
    cardiovascular,
    cancer,
    diabetes,
    other,
};

inline constexpr int kMedicalCategoryCount = 6;

enum class SmokingCategory {
    non_smoker,
    ex_smoker,
    one_to_ten_per_day,
    eleven_plus_per_day,
    prefer_not_to_say,
};

inline constexpr int kSmokingCategoryCount = 5;

// Raw manifest row, one per audio sample.
struct ParticipantRecord {
    std::string participant_id;
    Gender gender = Gender::other;
    std::string age_field; // "40-49", "pnts", or an exact number
    std::vector<std::string> medical_history;
    std::string smoking;
    std::vector<std::string> symptoms;
    bool hospitalized = false;
    int covid_test = 0; // label: 1 positive, 0 negative
};

struct EncodedRecord {
    std::vector<double> features;
    int label = 0;
    int schema_version = 0;
};

namespace detail_meta {

inline std::string squeeze(std::string_view raw) {
    std::string out;
    for (char c : raw) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '+')
            out.push_back(char(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

inline void warn(std::vector<std::string>* warnings, std::string msg) {
    if (warnings) warnings->push_back(std::move(msg));
    else std::fprintf(stderr, "warning: %s\n", msg.c_str());
}

} // namespace detail_meta

// Condition-code table; unknown codes fall through to `other` with a warning.
inline MedicalCategory categorize_medical(
    std::string_view code, std::vector<std::string>* warnings = nullptr) {
    const std::string c = detail_meta::squeeze(code);
    if (c == "hpb" || c == "hbp") return MedicalCategory::high_blood_pressure;
    if (c == "asthma" || c == "lung" || c == "copd" || c == "cystic")
        return MedicalCategory::pulmonary;
    if (c == "heart" || c == "valvular" || c == "otherheart")
        return MedicalCategory::cardiovascular;
    if (c == "cancer") return MedicalCategory::cancer;
    if (c == "diabetes") return MedicalCategory::diabetes;
    if (c == "pnts" || c == "longterm" || c == "hiv" || c == "angina")
        return MedicalCategory::other;
    detail_meta::warn(warnings, "unknown medical-history code '" +
                                    std::string(code) + "' mapped to other");
    return MedicalCategory::other;
}

// Smoking merges: smoked-once folds into non-smoker, 11-20 and 21+ fold into
// a single 11-plus group.
inline SmokingCategory encode_smoking(std::string_view raw) {
    const std::string c = detail_meta::squeeze(raw);
    if (c == "nonsmoker" || c == "never" || c == "non") return SmokingCategory::non_smoker;
    if (c == "ltonce" || c == "itonce" || c == "once" || c == "smokedonce")
        return SmokingCategory::non_smoker;
    if (c == "exsmoker" || c == "ex") return SmokingCategory::ex_smoker;
    if (c == "1to10" || c == "110" || c == "110cigarettesperday" ||
        c == "1to10cigarettesperday")
        return SmokingCategory::one_to_ten_per_day;
    if (c == "11to20" || c == "1120" || c == "1120cigarettesperday" ||
        c == "11to20cigarettesperday")
        return SmokingCategory::eleven_plus_per_day;
    if (c == "21+" || c == "21plus" || c == "21+cigarettesperday" ||
        c == "21" || c == "21cigarettesperday")
        return SmokingCategory::eleven_plus_per_day;
    if (c == "pnts" || c == "prefernottosay")
        return SmokingCategory::prefer_not_to_say;
    throw UnknownCategory("unknown smoking category '" + std::string(raw) + "'");
}

// Age midpoint in years: "40-49" -> 44.5, exact numbers pass through,
// "pnts" -> nullopt (imputation or rejection decided by the caller).
inline std::optional<double> parse_age_midpoint(std::string_view raw) {
    const std::string c = detail_meta::squeeze(raw);
    if (c == "pnts" || c == "prefernottosay") return std::nullopt;
    const auto dash = std::string_view(raw).find('-');
    const auto parse_num = [&](std::string_view s) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(std::string(s), &used);
        } catch (const std::exception&) {
            throw UnparseableAge("cannot parse age field '" + std::string(raw) + "'");
        }
        // allow surrounding whitespace only
        for (std::size_t i = used; i < s.size(); ++i) {
            if (!std::isspace(static_cast<unsigned char>(s[i])))
                throw UnparseableAge("cannot parse age field '" +
                                     std::string(raw) + "'");
        }
        return v;
    };
    if (dash != std::string_view::npos && dash > 0) {
        const double lo = parse_num(std::string_view(raw).substr(0, dash));
        const double hi = parse_num(std::string_view(raw).substr(dash + 1));
        return 0.5 * (lo + hi);
    }
    return parse_num(raw);
}

// Frozen encoding layout. Fitted on the training split only: symptom
// vocabulary, age min-max bounds, and the mean age used to impute
// positive-labeled "prefer not to say" rows.
struct EncodingSchema {
    int schema_version = 1;
    std::vector<std::string> symptom_vocab; // sorted, deduplicated
    double age_min = 0.0;
    double age_max = 1.0;
    double age_mean = 0.0;

    std::size_t feature_width() const {
        return 3 + kMedicalCategoryCount + kSmokingCategoryCount +
               symptom_vocab.size() + 2;
    }

    std::vector<std::string> column_names() const {
        std::vector<std::string> names = {
            "gender_female", "gender_male", "gender_other",
            "med_high_blood_pressure", "med_pulmonary", "med_cardiovascular",
            "med_cancer", "med_diabetes", "med_other",
            "smoking_non_smoker", "smoking_ex_smoker", "smoking_1_10_per_day",
            "smoking_11_plus_per_day", "smoking_prefer_not_to_say"};
        for (const auto& s : symptom_vocab) names.push_back("symptom_" + s);
        names.push_back("age");
        names.push_back("hospitalized");
        return names;
    }
};

namespace detail_meta {

inline bool is_none(std::string_view code) {
    const std::string c = squeeze(code);
    return c.empty() || c == "none";
}

} // namespace detail_meta

// Rejection rule from the metadata preprocessing: unknown age with a
// negative label drops the row.
inline bool rejected_by_age_rule(const ParticipantRecord& rec) {
    return !parse_age_midpoint(rec.age_field).has_value() && rec.covid_test == 0;
}

inline EncodingSchema fit_schema(std::span<const ParticipantRecord> train_rows,
                                 std::vector<std::string>* warnings = nullptr) {
    EncodingSchema schema;
    std::set<std::string> vocab;
    double age_sum = 0.0;
    std::size_t age_count = 0;
    double age_min = 0.0, age_max = 0.0;
    bool have_age = false;

    for (const auto& rec : train_rows) {
        if (rejected_by_age_rule(rec)) {
            detail_meta::warn(warnings,
                              "row for participant '" + rec.participant_id +
                                  "' should have been rejected before schema fit");
            continue;
        }
        for (const auto& s : rec.symptoms) {
            if (!detail_meta::is_none(s)) vocab.insert(detail_meta::squeeze(s));
        }
        const auto mid = parse_age_midpoint(rec.age_field);
        if (mid) {
            age_sum += *mid;
            ++age_count;
            if (!have_age) {
                age_min = age_max = *mid;
                have_age = true;
            } else {
                age_min = std::min(age_min, *mid);
                age_max = std::max(age_max, *mid);
            }
        }
    }

    schema.symptom_vocab.assign(vocab.begin(), vocab.end());
    if (age_count > 0) {
        schema.age_mean = age_sum / double(age_count);
        schema.age_min = age_min;
        schema.age_max = age_max;
    }
    return schema;
}

// Normalized age in [0, 1] or nullopt when the row is rejected
// (unknown age + negative label). Positive-labeled unknown ages are imputed
// with the training mean.
inline std::optional<double> encode_age(const std::string& raw, int label,
                                        const EncodingSchema& schema) {
    const auto mid = parse_age_midpoint(raw);
    double age = 0.0;
    if (!mid) {
        if (label == 0) return std::nullopt;
        age = schema.age_mean;
    } else {
        age = *mid;
    }
    const double span = schema.age_max - schema.age_min;
    if (span <= 0.0) return 0.0;
    return std::clamp((age - schema.age_min) / span, 0.0, 1.0);
}

// Fixed-order vector: gender one-hot (3), medical multi-hot (6), smoking
// one-hot (5), symptom multi-hot, age, hospitalized. nullopt == row rejected.
inline std::optional<EncodedRecord> encode_record(
    const ParticipantRecord& rec, const EncodingSchema& schema,
    std::vector<std::string>* warnings = nullptr) {
    const auto age = encode_age(rec.age_field, rec.covid_test, schema);
    if (!age) return std::nullopt;

    EncodedRecord out;
    out.schema_version = schema.schema_version;
    out.label = rec.covid_test;
    out.features.assign(schema.feature_width(), 0.0);

    std::size_t base = 0;
    out.features[base + std::size_t(rec.gender)] = 1.0;
    base += 3;

    for (const auto& code : rec.medical_history) {
        if (detail_meta::is_none(code)) continue;
        const auto cat = categorize_medical(code, warnings);
        out.features[base + std::size_t(cat)] = 1.0;
    }
    base += kMedicalCategoryCount;

    out.features[base + std::size_t(encode_smoking(rec.smoking))] = 1.0;
    base += kSmokingCategoryCount;

    for (const auto& code : rec.symptoms) {
        if (detail_meta::is_none(code)) continue;
        const std::string key = detail_meta::squeeze(code);
        const auto it = std::lower_bound(schema.symptom_vocab.begin(),
                                         schema.symptom_vocab.end(), key);
        if (it == schema.symptom_vocab.end() || *it != key) {
            detail_meta::warn(warnings, "symptom '" + std::string(code) +
                                            "' absent from frozen schema; "
                                            "left all-zero");
            continue;
        }
        const auto idx = std::size_t(it - schema.symptom_vocab.begin());
        out.features[base + idx] = 1.0;
    }
    base += schema.symptom_vocab.size();

    out.features[base++] = *age;
    out.features[base++] = rec.hospitalized ? 1.0 : 0.0;
    return out;
}

// -------------------------------------------------------------------------
// Manifest CSV: participant_id, audio_path, gender, age, medical_history
// (semicolon-separated), smoking, symptoms (semicolon-separated),
// hospitalized, covid_test.

struct ManifestRow {
    ParticipantRecord record;
    std::string audio_path;
    std::string sample_id; // participant_id + row ordinal, unique per manifest
};

namespace detail_meta {

inline std::vector<std::string> split_semicolons(const std::string& field) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : field) {
        if (c == ';') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

inline Gender parse_gender(std::string_view raw) {
    const std::string c = squeeze(raw);
    if (c == "female" || c == "f") return Gender::female;
    if (c == "male" || c == "m") return Gender::male;
    return Gender::other;
}

inline std::optional<bool> parse_yes_no(std::string_view raw) {
    const std::string c = squeeze(raw);
    if (c == "yes" || c == "y" || c == "1" || c == "true") return true;
    if (c == "no" || c == "n" || c == "0" || c == "false") return false;
    return std::nullopt;
}

inline std::optional<int> parse_label(std::string_view raw) {
    const std::string c = squeeze(raw);
    if (c == "positive" || c == "1" || c == "pos") return 1;
    if (c == "negative" || c == "0" || c == "neg") return 0;
    return std::nullopt;
}

} // namespace detail_meta

inline constexpr const char* kManifestHeader[] = {
    "participant_id", "audio_path", "gender", "age", "medical_history",
    "smoking", "symptoms", "hospitalized", "covid_test"};

// Parse + ingest-time validation. Rows without a usable label are rejected
// (the label is mandatory); rows hitting the age rejection rule are dropped
// here too so splits and encodings always agree on the population.
inline std::vector<ManifestRow> load_manifest(
    const std::string& path, std::vector<std::string>* warnings = nullptr) {
    const auto rows = detail::read_csv_file(path);
    if (rows.empty()) throw DataError("manifest is empty: " + path);

    std::size_t start = 0;
    if (!rows[0].empty() && rows[0][0] == "participant_id") start = 1;

    std::vector<ManifestRow> out;
    std::size_t row_counter = 0;
    for (std::size_t i = start; i < rows.size(); ++i) {
        const auto& fields = rows[i];
        if (fields.size() < 9) {
            detail_meta::warn(warnings, "manifest row " + std::to_string(i + 1) +
                                            " has too few columns; skipped");
            continue;
        }
        ManifestRow row;
        row.record.participant_id = fields[0];
        row.audio_path = fields[1];
        row.record.gender = detail_meta::parse_gender(fields[2]);
        row.record.age_field = fields[3];
        row.record.medical_history = detail_meta::split_semicolons(fields[4]);
        row.record.smoking = fields[5];
        row.record.symptoms = detail_meta::split_semicolons(fields[6]);

        const auto hosp = detail_meta::parse_yes_no(fields[7]);
        const auto label = detail_meta::parse_label(fields[8]);
        if (!label) {
            detail_meta::warn(warnings,
                              "manifest row " + std::to_string(i + 1) +
                                  " has no usable covid_test label; rejected");
            continue;
        }
        row.record.hospitalized = hosp.value_or(false);
        if (!hosp) {
            detail_meta::warn(warnings, "manifest row " + std::to_string(i + 1) +
                                            " hospitalized field unreadable; "
                                            "treated as no");
        }
        row.record.covid_test = *label;
        if (rejected_by_age_rule(row.record)) {
            detail_meta::warn(warnings,
                              "manifest row " + std::to_string(i + 1) +
                                  " dropped: age withheld and tested negative");
            continue;
        }
        row.sample_id = fields[0] + "_" + std::to_string(row_counter++);
        out.push_back(std::move(row));
    }
    return out;
}

// Encoded matrix CSV with a header naming each schema column.
inline void write_encoded_csv(std::ostream& out,
                              const std::vector<std::string>& sample_ids,
                              const std::vector<EncodedRecord>& records,
                              const EncodingSchema& schema) {
    std::vector<std::string> header = {"sample_id"};
    for (const auto& c : schema.column_names()) header.push_back(c);
    header.push_back("label");
    detail::write_csv_row(out, header);
    for (std::size_t i = 0; i < records.size(); ++i) {
        std::vector<std::string> fields = {sample_ids[i]};
        for (double v : records[i].features)
            fields.push_back(detail::format_double(v));
        fields.push_back(std::to_string(records[i].label));
        detail::write_csv_row(out, fields);
    }
}

} // namespace voicescreen::meta
