#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "voicescreen/audio.hpp"
#include "voicescreen/dataset.hpp"
#include "voicescreen/dsp.hpp"
#include "voicescreen/eval.hpp"
#include "voicescreen/feature_io.hpp"
#include "voicescreen/metadata.hpp"
#include "voicescreen/models/artifact.hpp"

namespace voicescreen::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

class MissingFeatures : public DataError {
public:
    using DataError::DataError;
};

namespace fs = std::filesystem;

namespace detail_cli {

inline std::string sanitize_id(const std::string& id) {
    std::string out = id;
    for (char& c : out) {
        if (c == '/' || c == '\\' || c == ':') c = '_';
    }
    return out;
}

inline std::string feature_path(const std::string& dir,
                                const std::string& sample_id,
                                dsp::FeatureKind kind) {
    return (fs::path(dir) / (sanitize_id(sample_id) + "." +
                             dsp::feature_kind_name(kind) + ".vxf"))
        .string();
}

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create directory: " + dir);
}

inline void add_dsp_options(CLI::App* cmd, dsp::DspConfig& cfg) {
    cmd->add_option("--frame-len", cfg.frame_len, "analysis frame length, samples");
    cmd->add_option("--hop-len", cfg.hop_len, "frame hop, samples");
    cmd->add_option("--fft-size", cfg.fft_size, "FFT size (power of two)");
    cmd->add_option("--n-mels", cfg.n_mels, "mel filter count");
    cmd->add_option("--n-mfcc", cfg.n_mfcc, "MFCC coefficient count");
    cmd->add_option("--fmin", cfg.fmin_hz, "mel range lower edge, Hz");
    cmd->add_option("--fmax", cfg.fmax_hz, "mel range upper edge, Hz");
    cmd->add_option("--preemphasis", cfg.preemphasis, "pre-emphasis coefficient");
    cmd->add_option("--log-floor", cfg.log_floor, "additive epsilon before ln");
}

inline void print_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
}

// Small fixed-size worker pool; results land at their row index so output
// order never depends on scheduling.
template <typename Fn>
inline void parallel_rows(std::size_t n, Fn&& fn) {
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned workers = unsigned(std::min<std::size_t>(hw, n));
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n;
                 i = next.fetch_add(1)) {
                fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace detail_cli

// ---------------------------------------------------------------------
// extract: manifest rows -> one feature file per requested kind per sample.
// Per-row failures are logged, not fatal; only a fully failed run exits
// nonzero.

struct ExtractOptions {
    std::string manifest;
    std::string out_dir;
    std::vector<std::string> kinds = {"mfcc", "log_mel"};
    dsp::DspConfig dsp_cfg;
};

inline int cmd_extract(const ExtractOptions& opt) {
    opt.dsp_cfg.validate();
    std::vector<std::string> warnings;
    const auto rows = meta::load_manifest(opt.manifest, &warnings);
    detail_cli::print_warnings(warnings);
    if (rows.empty()) {
        std::fprintf(stderr, "error: no input rows in %s\n", opt.manifest.c_str());
        return kExitData;
    }
    std::vector<dsp::FeatureKind> kinds;
    for (const auto& k : opt.kinds) {
        if (k == "mfcc") kinds.push_back(dsp::FeatureKind::mfcc);
        else if (k == "log_mel") kinds.push_back(dsp::FeatureKind::log_mel);
        else throw DataError("unknown feature kind '" + k + "'");
    }
    detail_cli::ensure_dir(opt.out_dir);

    const fs::path manifest_dir = fs::path(opt.manifest).parent_path();
    struct RowResult {
        bool ok = false;
        std::string reason;
    };
    std::vector<RowResult> results(rows.size());

    detail_cli::parallel_rows(rows.size(), [&](std::size_t i) {
        const auto& row = rows[i];
        try {
            fs::path audio_path(row.audio_path);
            if (audio_path.is_relative() && !manifest_dir.empty() &&
                !fs::exists(audio_path)) {
                audio_path = manifest_dir / audio_path;
            }
            auto buf = audio::load_wav_file(audio_path.string());
            buf = audio::resample(buf, audio::kCanonicalRateHz);
            buf = audio::peak_normalize(buf);
            for (const auto kind : kinds) {
                const auto fm = kind == dsp::FeatureKind::mfcc
                                    ? dsp::mfcc(buf, opt.dsp_cfg)
                                    : dsp::log_mel_spectrogram(buf, opt.dsp_cfg);
                io::write_feature_file(
                    detail_cli::feature_path(opt.out_dir, row.sample_id, kind),
                    fm);
            }
            results[i].ok = true;
        } catch (const std::exception& e) {
            results[i].reason = e.what();
        }
    });

    std::size_t failures = 0;
    {
        std::ofstream log((fs::path(opt.out_dir) / "extraction_log.csv").string());
        detail::write_csv_row(log, {"sample_id", "status", "reason"});
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (!results[i].ok) ++failures;
            detail::write_csv_row(log, {rows[i].sample_id,
                                        results[i].ok ? "ok" : "failed",
                                        results[i].reason});
        }
    }
    std::printf("extracted %zu/%zu rows (%zu failed), %zu kinds -> %s\n",
                rows.size() - failures, rows.size(), failures, kinds.size(),
                opt.out_dir.c_str());
    if (failures == rows.size()) {
        std::fprintf(stderr, "error: every manifest row failed extraction\n");
        return kExitData;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------
// split: stratified, participant-grouped, optionally rebalanced.

struct SplitOptions {
    std::string manifest;
    std::string out_path;
    data::SplitSpec spec;
    long rebalance_train_pos = -1; // <0 disables
};

inline data::LabeledSet labeled_set_from_manifest(
    const std::vector<meta::ManifestRow>& rows) {
    data::LabeledSet set;
    for (const auto& row : rows) {
        set.items.push_back({row.sample_id, row.record.participant_id,
                             row.audio_path, row.record.covid_test});
    }
    return set;
}

inline int cmd_split(const SplitOptions& opt) {
    std::vector<std::string> warnings;
    const auto rows = meta::load_manifest(opt.manifest, &warnings);
    detail_cli::print_warnings(warnings);
    if (rows.empty()) {
        std::fprintf(stderr, "error: no input rows in %s\n", opt.manifest.c_str());
        return kExitData;
    }
    auto result = data::split(labeled_set_from_manifest(rows), opt.spec);
    if (opt.rebalance_train_pos >= 0) {
        auto [train, val] =
            data::rebalance(result.train, result.val,
                            std::size_t(opt.rebalance_train_pos), opt.spec.seed);
        result.train = std::move(train);
        result.val = std::move(val);
    }
    data::write_split_manifest(opt.out_path, result);
    std::printf(
        "split %zu samples -> train %zu (%zu pos), val %zu (%zu pos), "
        "test %zu (%zu pos) -> %s\n",
        rows.size(), result.train.size(), result.train.n_positive(),
        result.val.size(), result.val.n_positive(), result.test.size(),
        result.test.n_positive(), opt.out_path.c_str());
    return kExitOk;
}

// ---------------------------------------------------------------------
// encode: fit the schema on the training split, emit the encoded matrix.

struct EncodeOptions {
    std::string manifest;
    std::string splits;
    std::string out_dir;
    bool fit_all = false; // explicit opt-in; fitting on everything leaks
};

inline int cmd_encode(const EncodeOptions& opt) {
    std::vector<std::string> warnings;
    const auto rows = meta::load_manifest(opt.manifest, &warnings);
    if (rows.empty()) {
        detail_cli::print_warnings(warnings);
        std::fprintf(stderr, "error: no input rows in %s\n", opt.manifest.c_str());
        return kExitData;
    }

    std::vector<meta::ParticipantRecord> fit_rows;
    if (opt.fit_all) {
        for (const auto& row : rows) fit_rows.push_back(row.record);
    } else {
        if (opt.splits.empty())
            throw DataError(
                "encode needs --splits to fit the schema on the training rows "
                "only (or pass --fit-all explicitly)");
        const auto assignment = data::read_split_manifest(opt.splits);
        for (const auto& row : rows) {
            const auto it = assignment.find(row.sample_id);
            if (it != assignment.end() && it->second == "train")
                fit_rows.push_back(row.record);
        }
        if (fit_rows.empty())
            throw DataError("no training rows found for schema fitting");
    }

    const auto schema = meta::fit_schema(fit_rows, &warnings);

    std::vector<std::string> ids;
    std::vector<meta::EncodedRecord> encoded;
    for (const auto& row : rows) {
        auto enc = meta::encode_record(row.record, schema, &warnings);
        if (!enc) continue; // rejected rows were already dropped at ingest
        ids.push_back(row.sample_id);
        encoded.push_back(std::move(*enc));
    }
    detail_cli::print_warnings(warnings);

    detail_cli::ensure_dir(opt.out_dir);
    {
        std::ofstream out((fs::path(opt.out_dir) / "encoded.csv").string());
        meta::write_encoded_csv(out, ids, encoded, schema);
    }
    {
        std::ofstream out((fs::path(opt.out_dir) / "schema.json").string());
        out << models::schema_to_json(schema).dump(2) << '\n';
    }
    std::printf("encoded %zu rows x %zu features -> %s\n", encoded.size(),
                schema.feature_width(), opt.out_dir.c_str());
    return kExitOk;
}

// ---------------------------------------------------------------------
// train

struct TrainOptions {
    std::string manifest;
    std::string splits;
    std::string features_dir; // lstm / cnn
    std::string encoded_csv;  // logreg / svm
    std::string out_dir;
    std::string model_kind = "logreg";
    std::uint64_t seed = 0;
    dsp::DspConfig dsp_cfg; // must match the extracted features

    // shared training knobs
    int epochs = 50;
    int batch_size = 32;
    double lr = 1e-4;

    // model-specific
    int lstm_hidden = 128;
    int lstm_seq_len = 300;
    double clip_norm = 5.0;
    int cnn_conv1 = 8;
    int cnn_conv2 = 16;
    int cnn_patch = 64;
    double svm_c = 1.0;
    double svm_gamma = 0.0; // auto
    double svm_tol = 1e-3;
    double logreg_l2 = 0.0;
    int logreg_epochs = 2000;
    double logreg_lr = 0.5;
};

inline nlohmann::json train_options_to_json(const TrainOptions& o) {
    return {{"manifest", o.manifest},
            {"splits", o.splits},
            {"features_dir", o.features_dir},
            {"encoded_csv", o.encoded_csv},
            {"out_dir", o.out_dir},
            {"model_kind", o.model_kind},
            {"seed", o.seed},
            {"dsp", models::dsp_config_to_json(o.dsp_cfg)},
            {"epochs", o.epochs},
            {"batch_size", o.batch_size},
            {"lr", o.lr},
            {"lstm_hidden", o.lstm_hidden},
            {"lstm_seq_len", o.lstm_seq_len},
            {"clip_norm", o.clip_norm},
            {"cnn_conv1", o.cnn_conv1},
            {"cnn_conv2", o.cnn_conv2},
            {"cnn_patch", o.cnn_patch},
            {"svm_c", o.svm_c},
            {"svm_gamma", o.svm_gamma},
            {"svm_tol", o.svm_tol},
            {"logreg_l2", o.logreg_l2},
            {"logreg_epochs", o.logreg_epochs},
            {"logreg_lr", o.logreg_lr}};
}

inline TrainOptions train_options_from_json(const nlohmann::json& j) {
    TrainOptions o;
    o.manifest = j.at("manifest").get<std::string>();
    o.splits = j.at("splits").get<std::string>();
    o.features_dir = j.at("features_dir").get<std::string>();
    o.encoded_csv = j.at("encoded_csv").get<std::string>();
    o.out_dir = j.at("out_dir").get<std::string>();
    o.model_kind = j.at("model_kind").get<std::string>();
    o.seed = j.at("seed").get<std::uint64_t>();
    o.dsp_cfg = models::dsp_config_from_json(j.at("dsp"));
    o.epochs = j.at("epochs").get<int>();
    o.batch_size = j.at("batch_size").get<int>();
    o.lr = j.at("lr").get<double>();
    o.lstm_hidden = j.at("lstm_hidden").get<int>();
    o.lstm_seq_len = j.at("lstm_seq_len").get<int>();
    o.clip_norm = j.at("clip_norm").get<double>();
    o.cnn_conv1 = j.at("cnn_conv1").get<int>();
    o.cnn_conv2 = j.at("cnn_conv2").get<int>();
    o.cnn_patch = j.at("cnn_patch").get<int>();
    o.svm_c = j.at("svm_c").get<double>();
    o.svm_gamma = j.at("svm_gamma").get<double>();
    o.svm_tol = j.at("svm_tol").get<double>();
    o.logreg_l2 = j.at("logreg_l2").get<double>();
    o.logreg_epochs = j.at("logreg_epochs").get<int>();
    o.logreg_lr = j.at("logreg_lr").get<double>();
    return o;
}

namespace detail_cli {

struct SplitRows {
    std::vector<meta::ManifestRow> train, val, test;
};

inline SplitRows partition_rows(const std::vector<meta::ManifestRow>& rows,
                                const std::string& splits_path) {
    const auto assignment = data::read_split_manifest(splits_path);
    SplitRows out;
    for (const auto& row : rows) {
        const auto it = assignment.find(row.sample_id);
        if (it == assignment.end()) continue;
        if (it->second == "train") out.train.push_back(row);
        else if (it->second == "val") out.val.push_back(row);
        else if (it->second == "test") out.test.push_back(row);
        else throw DataError("unknown split '" + it->second + "' for sample " +
                             row.sample_id);
    }
    return out;
}

// Load one feature matrix per row; a missing file is a MissingFeatures
// error naming the kind (features must be extracted before training).
inline std::vector<dsp::FeatureMatrix> load_features(
    const std::vector<meta::ManifestRow>& rows, const std::string& dir,
    dsp::FeatureKind kind, const dsp::DspConfig& expected_cfg) {
    const auto expected_hash = detail::hex_digest(expected_cfg.hash());
    std::vector<dsp::FeatureMatrix> out;
    out.reserve(rows.size());
    for (const auto& row : rows) {
        const auto path = feature_path(dir, row.sample_id, kind);
        if (!fs::exists(path))
            throw MissingFeatures(
                std::string("missing ") + dsp::feature_kind_name(kind) +
                " features for sample " + row.sample_id + " (expected " + path +
                "); run `extract` with kind " + dsp::feature_kind_name(kind));
        auto fm = io::read_feature_file(path);
        if (detail::hex_digest(fm.config_hash) != expected_hash)
            throw DataError("feature file " + path +
                            " was extracted under a different DSP "
                            "configuration; re-run extract");
        out.push_back(std::move(fm));
    }
    return out;
}

inline std::vector<int> labels_of(const std::vector<meta::ManifestRow>& rows) {
    std::vector<int> labels;
    labels.reserve(rows.size());
    for (const auto& row : rows) labels.push_back(row.record.covid_test);
    return labels;
}

inline void write_history_csv(const std::string& path,
                              const std::vector<nn::EpochStat>& history) {
    std::ofstream out(path);
    detail::write_csv_row(out, {"epoch", "loss", "accuracy"});
    for (const auto& h : history) {
        detail::write_csv_row(out, {std::to_string(h.epoch),
                                    detail::format_double(h.loss),
                                    detail::format_double(h.accuracy)});
    }
}

// Encoded matrix lookup for the metadata models.
struct EncodedTable {
    std::map<std::string, std::pair<std::vector<double>, int>> by_id;
    std::size_t width = 0;
};

inline EncodedTable load_encoded_csv(const std::string& path) {
    const auto rows = detail::read_csv_file(path);
    if (rows.size() < 2) throw DataError("encoded matrix is empty: " + path);
    EncodedTable table;
    table.width = rows[0].size() - 2; // sample_id ... label
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != rows[0].size())
            throw DataError("ragged encoded matrix row in " + path);
        std::vector<double> features(table.width);
        for (std::size_t c = 0; c < table.width; ++c)
            features[c] = std::stod(r[c + 1]);
        table.by_id[r[0]] = {std::move(features), std::stoi(r.back())};
    }
    return table;
}

} // namespace detail_cli

inline int cmd_train(const TrainOptions& opt) {
    std::vector<std::string> warnings;
    const auto rows = meta::load_manifest(opt.manifest, &warnings);
    detail_cli::print_warnings(warnings);
    const auto parts = detail_cli::partition_rows(rows, opt.splits);
    if (parts.train.empty()) throw DataError("training split is empty");

    detail_cli::ensure_dir(opt.out_dir);
    const fs::path out_dir(opt.out_dir);
    {
        std::ofstream cfg_out((out_dir / "run_config.json").string());
        cfg_out << train_options_to_json(opt).dump(2) << '\n';
    }
    fs::copy_file(opt.splits, out_dir / "splits.csv",
                  fs::copy_options::overwrite_existing);

    const auto train_labels = detail_cli::labels_of(parts.train);
    std::vector<nn::EpochStat> history;
    models::ModelArtifact artifact;

    if (opt.model_kind == "lstm") {
        if (opt.features_dir.empty())
            throw MissingFeatures("lstm training needs --features-dir with "
                                  "extracted mfcc features");
        const auto feats = detail_cli::load_features(
            parts.train, opt.features_dir, dsp::FeatureKind::mfcc, opt.dsp_cfg);
        models::LstmConfig mc{.input_dim = opt.dsp_cfg.n_mfcc,
                              .hidden_dim = opt.lstm_hidden,
                              .seq_len = opt.lstm_seq_len,
                              .seed = opt.seed};
        std::vector<models::LstmSequence> seqs;
        seqs.reserve(feats.size());
        for (const auto& fm : feats)
            seqs.push_back(models::prepare_sequence(fm, mc));
        models::LstmTrainConfig tc{.epochs = opt.epochs,
                                   .batch_size = opt.batch_size,
                                   .adam = {.lr = opt.lr},
                                   .clip_norm = opt.clip_norm,
                                   .shuffle_seed = opt.seed};
        const auto model =
            models::lstm_train_bptt(seqs, train_labels, mc, tc, &history);
        artifact = models::pack_lstm(model, opt.dsp_cfg, opt.seed);
    } else if (opt.model_kind == "cnn") {
        if (opt.features_dir.empty())
            throw MissingFeatures("cnn training needs --features-dir with "
                                  "extracted log_mel features");
        const auto feats = detail_cli::load_features(parts.train,
                                                     opt.features_dir,
                                                     dsp::FeatureKind::log_mel,
                                                     opt.dsp_cfg);
        models::CnnConfig mc{.input_h = opt.cnn_patch,
                             .input_w = opt.cnn_patch,
                             .conv1_filters = opt.cnn_conv1,
                             .conv2_filters = opt.cnn_conv2,
                             .seed = opt.seed};
        std::vector<std::vector<double>> patches;
        patches.reserve(feats.size());
        for (const auto& fm : feats)
            patches.push_back(models::make_patch(fm, mc.input_h, mc.input_w));
        const auto stats = models::fit_patch_stats(patches);
        for (auto& p : patches) models::standardize(p, stats);
        models::CnnTrainConfig tc{.epochs = opt.epochs,
                                  .batch_size = opt.batch_size,
                                  .adam = {.lr = opt.lr},
                                  .shuffle_seed = opt.seed};
        const auto model =
            models::cnn_train(patches, train_labels, mc, tc, stats, &history);
        artifact = models::pack_cnn(model, opt.dsp_cfg, opt.seed);
    } else if (opt.model_kind == "logreg" || opt.model_kind == "svm") {
        if (opt.encoded_csv.empty())
            throw MissingFeatures(opt.model_kind +
                                  " training needs --encoded with the encoded "
                                  "metadata matrix; run `encode` first");
        const auto table = detail_cli::load_encoded_csv(opt.encoded_csv);
        const fs::path schema_path =
            fs::path(opt.encoded_csv).parent_path() / "schema.json";
        if (!fs::exists(schema_path))
            throw MissingFeatures("schema.json not found next to " +
                                  opt.encoded_csv);
        nlohmann::json schema_json;
        std::ifstream(schema_path.string()) >> schema_json;
        const auto schema = models::schema_from_json(schema_json);

        std::vector<std::vector<double>> x;
        std::vector<int> y;
        for (const auto& row : parts.train) {
            const auto it = table.by_id.find(row.sample_id);
            if (it == table.by_id.end())
                throw MissingFeatures("sample " + row.sample_id +
                                      " missing from encoded matrix");
            x.push_back(it->second.first);
            y.push_back(it->second.second);
        }
        if (opt.model_kind == "logreg") {
            const auto model = models::logreg_train(
                x, y,
                {.epochs = opt.logreg_epochs, .lr = opt.logreg_lr,
                 .l2 = opt.logreg_l2},
                &history);
            artifact = models::pack_logreg(model, schema, opt.seed);
        } else {
            std::vector<std::string> svm_warnings;
            const auto model = models::svm_train_smo(
                x, y, {.c = opt.svm_c, .gamma = opt.svm_gamma, .tol = opt.svm_tol},
                &svm_warnings);
            detail_cli::print_warnings(svm_warnings);
            artifact = models::pack_svm(model, schema, opt.seed);
        }
        fs::copy_file(schema_path, out_dir / "schema.json",
                      fs::copy_options::overwrite_existing);
    } else {
        throw DataError("unknown model kind '" + opt.model_kind + "'");
    }

    models::save_artifact((out_dir / "model.vsm").string(), artifact);
    detail_cli::write_history_csv((out_dir / "training_log.csv").string(),
                                  history);
    std::printf("trained %s on %zu samples -> %s\n", opt.model_kind.c_str(),
                parts.train.size(), (out_dir / "model.vsm").string().c_str());
    return kExitOk;
}

// ---------------------------------------------------------------------
// evaluate

struct EvaluateOptions {
    std::string artifact;
    std::string manifest;
    std::string splits;
    std::string split = "test";
    std::string features_dir;
    std::string encoded_csv;
    std::string out_dir;
    std::string model_name; // defaults to the artifact kind
};

inline int cmd_evaluate(const EvaluateOptions& opt) {
    if (opt.split == "train")
        throw DataError("evaluate never reads the training split");
    std::vector<std::string> warnings;
    const auto rows = meta::load_manifest(opt.manifest, &warnings);
    detail_cli::print_warnings(warnings);
    const auto parts = detail_cli::partition_rows(rows, opt.splits);
    const auto& eval_rows = opt.split == "val" ? parts.val : parts.test;
    if (eval_rows.empty())
        throw DataError("split '" + opt.split + "' is empty");

    const models::Predictor predictor(models::load_artifact(opt.artifact));

    std::vector<double> scores;
    std::vector<int> preds, labels;
    if (predictor.wants_audio_features()) {
        if (opt.features_dir.empty())
            throw MissingFeatures("evaluate needs --features-dir for this model");
        const auto feats = detail_cli::load_features(
            eval_rows, opt.features_dir, predictor.feature_kind(),
            predictor.dsp_config());
        for (std::size_t i = 0; i < eval_rows.size(); ++i) {
            const auto p = predictor.predict_features(feats[i]);
            scores.push_back(p.score);
            preds.push_back(p.label);
            labels.push_back(eval_rows[i].record.covid_test);
        }
    } else {
        if (opt.encoded_csv.empty())
            throw MissingFeatures("evaluate needs --encoded for this model");
        const auto table = detail_cli::load_encoded_csv(opt.encoded_csv);
        for (const auto& row : eval_rows) {
            const auto it = table.by_id.find(row.sample_id);
            if (it == table.by_id.end())
                throw MissingFeatures("sample " + row.sample_id +
                                      " missing from encoded matrix");
            const auto p = predictor.predict_encoded(it->second.first);
            scores.push_back(p.score);
            preds.push_back(p.label);
            labels.push_back(row.record.covid_test);
        }
    }

    const std::string name =
        opt.model_name.empty() ? models::model_kind_name(predictor.kind())
                               : opt.model_name;
    const auto report = eval::evaluate(name, scores, preds, labels);

    detail_cli::ensure_dir(opt.out_dir);
    const fs::path out_dir(opt.out_dir);
    eval::write_report_json((out_dir / "eval_report.json").string(), report);
    {
        std::ofstream roc_out((out_dir / "roc.csv").string());
        eval::write_roc_csv(roc_out, report.curve);
    }
    const auto fmt = [](const std::optional<double>& v) {
        return v ? detail::format_double(*v) : std::string("n/a");
    };
    std::printf(
        "evaluated %s on %zu samples: accuracy %s, sensitivity %s, "
        "specificity %s, auc %.4f -> %s\n",
        name.c_str(), labels.size(), fmt(report.scalar_metrics.accuracy).c_str(),
        fmt(report.scalar_metrics.sensitivity).c_str(),
        fmt(report.scalar_metrics.specificity).c_str(), report.curve.auc,
        opt.out_dir.c_str());
    return kExitOk;
}

// ---------------------------------------------------------------------
// predict: one sample, audio or metadata.

struct PredictOptions {
    std::string artifact;
    std::string audio_path;
    std::string manifest;
    std::string sample_id;
};

inline int cmd_predict(const PredictOptions& opt) {
    const models::Predictor predictor(models::load_artifact(opt.artifact));
    models::Prediction pred;
    if (!opt.audio_path.empty()) {
        auto buf = audio::load_wav_file(opt.audio_path);
        buf = audio::resample(buf, audio::kCanonicalRateHz);
        buf = audio::peak_normalize(buf);
        const auto& cfg = predictor.dsp_config();
        const auto fm = predictor.feature_kind() == dsp::FeatureKind::mfcc
                            ? dsp::mfcc(buf, cfg)
                            : dsp::log_mel_spectrogram(buf, cfg);
        pred = predictor.predict_features(fm);
    } else if (!opt.manifest.empty() && !opt.sample_id.empty()) {
        std::vector<std::string> warnings;
        const auto rows = meta::load_manifest(opt.manifest, &warnings);
        const auto it = std::find_if(rows.begin(), rows.end(),
                                     [&](const meta::ManifestRow& r) {
                                         return r.sample_id == opt.sample_id;
                                     });
        if (it == rows.end())
            throw DataError("sample '" + opt.sample_id + "' not in manifest");
        pred = predictor.predict_record(it->record, &warnings);
        detail_cli::print_warnings(warnings);
    } else {
        throw DataError("predict needs --audio or --manifest plus --sample-id");
    }
    std::printf("probability=%.6f label=%d\n", pred.probability, pred.label);
    return kExitOk;
}

// ---------------------------------------------------------------------
// report: comparison table + combined ROC SVG over several eval reports.

struct ReportOptions {
    std::vector<std::string> report_paths;
    std::string out_dir;
};

inline int cmd_report(const ReportOptions& opt) {
    if (opt.report_paths.empty())
        throw DataError("report needs at least one eval_report.json");
    std::vector<eval::EvalReport> reports;
    for (const auto& path : opt.report_paths) {
        reports.push_back(eval::read_report_json(path));
    }
    detail_cli::ensure_dir(opt.out_dir);
    const fs::path out_dir(opt.out_dir);
    const std::string table = eval::comparison_table(reports);
    {
        std::ofstream out((out_dir / "comparison.txt").string());
        out << table;
    }
    {
        std::ofstream out((out_dir / "roc.svg").string());
        out << eval::roc_svg(reports);
    }
    std::fputs(table.c_str(), stdout);
    std::printf("-> %s\n", opt.out_dir.c_str());
    return kExitOk;
}

// ---------------------------------------------------------------------
// dispatch

inline int run(const std::vector<std::string>& args) {
    CLI::App app{"voicescreen: respiratory-voice screening pipeline"};
    app.require_subcommand(1);

    ExtractOptions extract_opt;
    auto* extract = app.add_subcommand(
        "extract", "decode audio and write MFCC / log-mel feature files");
    extract->add_option("--manifest", extract_opt.manifest)->required();
    extract->add_option("--out-dir", extract_opt.out_dir)->required();
    extract->add_option("--kinds", extract_opt.kinds,
                        "feature kinds: mfcc, log_mel")
        ->delimiter(',');
    detail_cli::add_dsp_options(extract, extract_opt.dsp_cfg);

    SplitOptions split_opt;
    auto* split = app.add_subcommand(
        "split", "deterministic stratified train/val/test split");
    split->add_option("--manifest", split_opt.manifest)->required();
    split->add_option("--out", split_opt.out_path)->required();
    split->add_option("--seed", split_opt.spec.seed)->required();
    split->add_option("--train-frac", split_opt.spec.train_frac);
    split->add_option("--val-frac", split_opt.spec.val_frac);
    split->add_option("--test-frac", split_opt.spec.test_frac);
    split->add_flag_function(
        "--no-stratify",
        [&](std::int64_t) { split_opt.spec.stratified = false; },
        "disable stratification");
    split->add_option("--rebalance-train-pos", split_opt.rebalance_train_pos,
                      "move validation positives into training until this "
                      "count is reached");

    EncodeOptions encode_opt;
    auto* encode = app.add_subcommand(
        "encode", "one-hot encode participant metadata");
    encode->add_option("--manifest", encode_opt.manifest)->required();
    encode->add_option("--splits", encode_opt.splits);
    encode->add_option("--out-dir", encode_opt.out_dir)->required();
    encode->add_flag("--fit-all", encode_opt.fit_all,
                     "fit the schema on every row (leaks test statistics)");

    TrainOptions train_opt;
    std::string train_config_path;
    auto* train = app.add_subcommand("train", "train one of the four models");
    train->add_option("--config", train_config_path,
                      "run config JSON; overrides every other flag");
    train->add_option("--manifest", train_opt.manifest);
    train->add_option("--splits", train_opt.splits);
    train->add_option("--features-dir", train_opt.features_dir);
    train->add_option("--encoded", train_opt.encoded_csv);
    train->add_option("--out-dir", train_opt.out_dir);
    train->add_option("--model", train_opt.model_kind,
                      "logreg | svm | lstm | cnn");
    auto* train_seed = train->add_option("--seed", train_opt.seed);
    train->add_option("--epochs", train_opt.epochs);
    train->add_option("--batch-size", train_opt.batch_size);
    train->add_option("--lr", train_opt.lr);
    train->add_option("--lstm-hidden", train_opt.lstm_hidden);
    train->add_option("--lstm-seq-len", train_opt.lstm_seq_len);
    train->add_option("--clip-norm", train_opt.clip_norm);
    train->add_option("--cnn-conv1", train_opt.cnn_conv1);
    train->add_option("--cnn-conv2", train_opt.cnn_conv2);
    train->add_option("--cnn-patch", train_opt.cnn_patch);
    train->add_option("--svm-c", train_opt.svm_c);
    train->add_option("--svm-gamma", train_opt.svm_gamma);
    train->add_option("--svm-tol", train_opt.svm_tol);
    train->add_option("--logreg-l2", train_opt.logreg_l2);
    train->add_option("--logreg-epochs", train_opt.logreg_epochs);
    train->add_option("--logreg-lr", train_opt.logreg_lr);
    detail_cli::add_dsp_options(train, train_opt.dsp_cfg);

    EvaluateOptions eval_opt;
    auto* evaluate = app.add_subcommand(
        "evaluate", "score a trained model on a held-out split");
    evaluate->add_option("--artifact", eval_opt.artifact)->required();
    evaluate->add_option("--manifest", eval_opt.manifest)->required();
    evaluate->add_option("--splits", eval_opt.splits)->required();
    evaluate->add_option("--split", eval_opt.split, "val | test");
    evaluate->add_option("--features-dir", eval_opt.features_dir);
    evaluate->add_option("--encoded", eval_opt.encoded_csv);
    evaluate->add_option("--out-dir", eval_opt.out_dir)->required();
    evaluate->add_option("--name", eval_opt.model_name,
                         "model name used in reports");

    PredictOptions predict_opt;
    auto* predict = app.add_subcommand(
        "predict", "score a single recording or metadata row");
    predict->add_option("--artifact", predict_opt.artifact)->required();
    predict->add_option("--audio", predict_opt.audio_path);
    predict->add_option("--manifest", predict_opt.manifest);
    predict->add_option("--sample-id", predict_opt.sample_id);

    ReportOptions report_opt;
    auto* report = app.add_subcommand(
        "report", "comparison table and combined ROC plot");
    report->add_option("reports", report_opt.report_paths,
                       "eval_report.json files")
        ->required();
    report->add_option("--out-dir", report_opt.out_dir)->required();

    std::vector<const char*> argv;
    argv.push_back("voicescreen");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(int(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (extract->parsed()) return cmd_extract(extract_opt);
        if (split->parsed()) return cmd_split(split_opt);
        if (encode->parsed()) return cmd_encode(encode_opt);
        if (train->parsed()) {
            if (!train_config_path.empty()) {
                nlohmann::json j;
                std::ifstream in(train_config_path);
                if (!in) throw DataError("cannot open run config: " +
                                         train_config_path);
                in >> j;
                return cmd_train(train_options_from_json(j));
            }
            if (train_seed->count() == 0) {
                std::fprintf(stderr, "error: train requires --seed\n");
                return kExitUsage;
            }
            if (train_opt.manifest.empty() || train_opt.splits.empty() ||
                train_opt.out_dir.empty()) {
                std::fprintf(stderr,
                             "error: train requires --manifest, --splits and "
                             "--out-dir (or --config)\n");
                return kExitUsage;
            }
            return cmd_train(train_opt);
        }
        if (evaluate->parsed()) return cmd_evaluate(eval_opt);
        if (predict->parsed()) return cmd_predict(predict_opt);
        if (report->parsed()) return cmd_report(report_opt);
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    }
    return kExitUsage;
}

inline int run(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args);
}

} // namespace voicescreen::cli
