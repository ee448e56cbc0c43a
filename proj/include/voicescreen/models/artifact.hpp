#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "voicescreen/detail/binio.hpp"
#include "voicescreen/detail/sha256.hpp"
#include "voicescreen/dsp.hpp"
#include "voicescreen/metadata.hpp"
#include "voicescreen/models/cnn.hpp"
#include "voicescreen/models/logreg.hpp"
#include "voicescreen/models/lstm.hpp"
#include "voicescreen/models/svm.hpp"
#include "voicescreen/tensor.hpp"

namespace voicescreen::models {

class FeatureKindMismatch : public DataError {
public:
    using DataError::DataError;
};

enum class ModelKind { logreg, svm, lstm, cnn };

inline const char* model_kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::logreg: return "logreg";
        case ModelKind::svm: return "svm";
        case ModelKind::lstm: return "lstm";
        case ModelKind::cnn: return "cnn";
    }
    return "unknown";
}

inline ModelKind model_kind_from_name(const std::string& name) {
    if (name == "logreg") return ModelKind::logreg;
    if (name == "svm") return ModelKind::svm;
    if (name == "lstm") return ModelKind::lstm;
    if (name == "cnn") return ModelKind::cnn;
    throw DataError("unknown model kind '" + name + "'");
}

// ---------------------------------------------------------------------
// JSON round trips for the configs an artifact has to carry.

inline nlohmann::json dsp_config_to_json(const dsp::DspConfig& cfg) {
    return {{"frame_len", cfg.frame_len},   {"hop_len", cfg.hop_len},
            {"fft_size", cfg.fft_size},     {"n_mels", cfg.n_mels},
            {"n_mfcc", cfg.n_mfcc},         {"fmin_hz", cfg.fmin_hz},
            {"fmax_hz", cfg.fmax_hz},       {"preemphasis", cfg.preemphasis},
            {"log_floor", cfg.log_floor}};
}

inline dsp::DspConfig dsp_config_from_json(const nlohmann::json& j) {
    dsp::DspConfig cfg;
    cfg.frame_len = j.at("frame_len").get<int>();
    cfg.hop_len = j.at("hop_len").get<int>();
    cfg.fft_size = j.at("fft_size").get<int>();
    cfg.n_mels = j.at("n_mels").get<int>();
    cfg.n_mfcc = j.at("n_mfcc").get<int>();
    cfg.fmin_hz = j.at("fmin_hz").get<double>();
    cfg.fmax_hz = j.at("fmax_hz").get<double>();
    cfg.preemphasis = j.at("preemphasis").get<double>();
    cfg.log_floor = j.at("log_floor").get<double>();
    cfg.validate();
    return cfg;
}

inline nlohmann::json schema_to_json(const meta::EncodingSchema& s) {
    return {{"schema_version", s.schema_version},
            {"symptom_vocab", s.symptom_vocab},
            {"age_min", s.age_min},
            {"age_max", s.age_max},
            {"age_mean", s.age_mean}};
}

inline meta::EncodingSchema schema_from_json(const nlohmann::json& j) {
    meta::EncodingSchema s;
    s.schema_version = j.at("schema_version").get<int>();
    s.symptom_vocab = j.at("symptom_vocab").get<std::vector<std::string>>();
    s.age_min = j.at("age_min").get<double>();
    s.age_max = j.at("age_max").get<double>();
    s.age_mean = j.at("age_mean").get<double>();
    return s;
}

// ---------------------------------------------------------------------
// Self-describing artifact file:
//   "VSM1" | u32 header bytes | header JSON | float64 LE parameter blob.
// The header carries the model kind, all configs, and a tensor manifest
// (name/shape/offset) describing the blob.

struct ModelArtifact {
    ModelKind kind = ModelKind::logreg;
    nlohmann::json config;
    int schema_version = 1;
    std::string dsp_config_hash; // hex, empty for metadata models
    std::uint64_t seed = 0;
    std::vector<nn::TensorSpec> tensors;
    std::vector<double> blob;
};

inline constexpr char kArtifactMagic[4] = {'V', 'S', 'M', '1'};

inline std::string serialize_artifact(const ModelArtifact& art) {
    nlohmann::json header;
    header["format"] = "VSM1";
    header["kind"] = model_kind_name(art.kind);
    header["config"] = art.config;
    header["schema_version"] = art.schema_version;
    header["dsp_config_hash"] = art.dsp_config_hash;
    header["seed"] = art.seed;
    auto& tensors = header["tensors"];
    tensors = nlohmann::json::array();
    for (const auto& t : art.tensors) {
        tensors.push_back(
            {{"name", t.name}, {"shape", t.shape}, {"offset", t.offset}});
    }
    const std::string header_text = header.dump();

    std::string out;
    out.append(kArtifactMagic, 4);
    detail::put_u32(out, std::uint32_t(header_text.size()));
    out += header_text;
    for (double v : art.blob) detail::put_f64(out, v);
    return out;
}

inline ModelArtifact deserialize_artifact(std::span<const std::uint8_t> bytes,
                                          const std::string& origin = {}) {
    detail::ByteReader r(bytes.data(), bytes.size());
    char magic[4];
    r.bytes(magic, 4, "artifact magic");
    if (std::memcmp(magic, kArtifactMagic, 4) != 0)
        throw DataError("bad model artifact magic: " + origin);
    const std::uint32_t header_len = r.u32("header length");
    std::string header_text(header_len, '\0');
    r.bytes(header_text.data(), header_len, "artifact header");

    ModelArtifact art;
    const auto header = nlohmann::json::parse(header_text);
    art.kind = model_kind_from_name(header.at("kind").get<std::string>());
    art.config = header.at("config");
    art.schema_version = header.at("schema_version").get<int>();
    art.dsp_config_hash = header.at("dsp_config_hash").get<std::string>();
    art.seed = header.at("seed").get<std::uint64_t>();
    std::size_t total = 0;
    for (const auto& t : header.at("tensors")) {
        nn::TensorSpec spec;
        spec.name = t.at("name").get<std::string>();
        spec.shape = t.at("shape").get<std::vector<std::size_t>>();
        spec.offset = t.at("offset").get<std::size_t>();
        total = std::max(total, spec.offset + spec.size());
        art.tensors.push_back(std::move(spec));
    }
    if (r.remaining() != total * 8)
        throw DataError("artifact blob size mismatch: " + origin);
    art.blob.resize(total);
    for (double& v : art.blob) v = r.f64("parameter");
    return art;
}

inline void save_artifact(const std::string& path, const ModelArtifact& art) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write model artifact: " + path);
    const std::string blob = serialize_artifact(art);
    out.write(blob.data(), std::streamsize(blob.size()));
    if (!out) throw DataError("short write on model artifact: " + path);
}

inline ModelArtifact load_artifact(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model artifact: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return deserialize_artifact(bytes, path);
}

// ---------------------------------------------------------------------
// Per-model packing.

inline ModelArtifact pack_logreg(const LogRegModel& model,
                                 const meta::EncodingSchema& schema,
                                 std::uint64_t seed) {
    ModelArtifact art;
    art.kind = ModelKind::logreg;
    art.schema_version = schema.schema_version;
    art.seed = seed;
    art.config = {{"l2", model.l2}, {"schema", schema_to_json(schema)}};
    art.tensors = {{"weights", {model.weights.size()}, 0},
                   {"bias", {1}, model.weights.size()}};
    art.blob = model.weights;
    art.blob.push_back(model.bias);
    return art;
}

inline std::pair<LogRegModel, meta::EncodingSchema> unpack_logreg(
    const ModelArtifact& art) {
    LogRegModel model;
    const auto& w = art.tensors.at(0);
    model.weights.assign(art.blob.begin() + long(w.offset),
                         art.blob.begin() + long(w.offset + w.size()));
    model.bias = art.blob.at(art.tensors.at(1).offset);
    model.l2 = art.config.at("l2").get<double>();
    return {model, schema_from_json(art.config.at("schema"))};
}

inline ModelArtifact pack_svm(const SvmModel& model,
                              const meta::EncodingSchema& schema,
                              std::uint64_t seed) {
    ModelArtifact art;
    art.kind = ModelKind::svm;
    art.schema_version = schema.schema_version;
    art.seed = seed;
    const std::size_t n_sv = model.support_vectors.size();
    const std::size_t dim = n_sv ? model.support_vectors[0].size() : 0;
    art.config = {{"c", model.c},
                  {"gamma", model.gamma},
                  {"bias", model.bias},
                  {"converged", model.converged},
                  {"dual_objective", model.dual_objective},
                  {"link_scale", model.link_scale},
                  {"link_offset", model.link_offset},
                  {"n_features", dim},
                  {"schema", schema_to_json(schema)}};
    art.tensors = {{"support_vectors", {n_sv, dim}, 0},
                   {"alpha", {n_sv}, n_sv * dim},
                   {"sv_labels", {n_sv}, n_sv * dim + n_sv}};
    art.blob.reserve(n_sv * dim + 2 * n_sv);
    for (const auto& sv : model.support_vectors) {
        art.blob.insert(art.blob.end(), sv.begin(), sv.end());
    }
    art.blob.insert(art.blob.end(), model.sv_alpha.begin(), model.sv_alpha.end());
    for (int y : model.sv_label) art.blob.push_back(double(y));
    return art;
}

inline std::pair<SvmModel, meta::EncodingSchema> unpack_svm(
    const ModelArtifact& art) {
    SvmModel model;
    model.c = art.config.at("c").get<double>();
    model.gamma = art.config.at("gamma").get<double>();
    model.bias = art.config.at("bias").get<double>();
    model.converged = art.config.at("converged").get<bool>();
    model.dual_objective = art.config.at("dual_objective").get<double>();
    model.link_scale = art.config.at("link_scale").get<double>();
    model.link_offset = art.config.at("link_offset").get<double>();
    const auto& sv = art.tensors.at(0);
    const std::size_t n_sv = sv.shape.at(0);
    const std::size_t dim = sv.shape.at(1);
    for (std::size_t s = 0; s < n_sv; ++s) {
        model.support_vectors.emplace_back(
            art.blob.begin() + long(sv.offset + s * dim),
            art.blob.begin() + long(sv.offset + (s + 1) * dim));
    }
    const auto& alpha = art.tensors.at(1);
    model.sv_alpha.assign(art.blob.begin() + long(alpha.offset),
                          art.blob.begin() + long(alpha.offset + n_sv));
    const auto& labels = art.tensors.at(2);
    for (std::size_t s = 0; s < n_sv; ++s) {
        model.sv_label.push_back(int(art.blob.at(labels.offset + s)));
    }
    return {model, schema_from_json(art.config.at("schema"))};
}

inline ModelArtifact pack_lstm(const LstmModel& model,
                               const dsp::DspConfig& dsp_cfg,
                               std::uint64_t seed) {
    ModelArtifact art;
    art.kind = ModelKind::lstm;
    art.seed = seed;
    art.dsp_config_hash = detail::hex_digest(dsp_cfg.hash());
    art.config = {{"input_dim", model.cfg.input_dim},
                  {"hidden_dim", model.cfg.hidden_dim},
                  {"seq_len", model.cfg.seq_len},
                  {"init_seed", model.cfg.seed},
                  {"dsp", dsp_config_to_json(dsp_cfg)}};
    art.tensors = model.tensor_specs();
    art.blob = model.params;
    return art;
}

inline std::pair<LstmModel, dsp::DspConfig> unpack_lstm(
    const ModelArtifact& art) {
    LstmModel model;
    model.cfg.input_dim = art.config.at("input_dim").get<int>();
    model.cfg.hidden_dim = art.config.at("hidden_dim").get<int>();
    model.cfg.seq_len = art.config.at("seq_len").get<int>();
    model.cfg.seed = art.config.at("init_seed").get<std::uint64_t>();
    model.params = art.blob;
    if (model.params.size() != LstmModel::param_count_for(model.cfg))
        throw DataError("lstm artifact parameter count mismatch");
    return {model, dsp_config_from_json(art.config.at("dsp"))};
}

inline ModelArtifact pack_cnn(const CnnModel& model,
                              const dsp::DspConfig& dsp_cfg,
                              std::uint64_t seed) {
    ModelArtifact art;
    art.kind = ModelKind::cnn;
    art.seed = seed;
    art.dsp_config_hash = detail::hex_digest(dsp_cfg.hash());
    art.config = {{"input_h", model.cfg.input_h},
                  {"input_w", model.cfg.input_w},
                  {"conv1_filters", model.cfg.conv1_filters},
                  {"conv2_filters", model.cfg.conv2_filters},
                  {"init_seed", model.cfg.seed},
                  {"patch_mean", model.stats.mean},
                  {"patch_std", model.stats.std_dev},
                  {"dsp", dsp_config_to_json(dsp_cfg)}};
    art.tensors = model.tensor_specs();
    art.blob = model.params;
    return art;
}

inline std::pair<CnnModel, dsp::DspConfig> unpack_cnn(const ModelArtifact& art) {
    CnnModel model;
    model.cfg.input_h = art.config.at("input_h").get<int>();
    model.cfg.input_w = art.config.at("input_w").get<int>();
    model.cfg.conv1_filters = art.config.at("conv1_filters").get<int>();
    model.cfg.conv2_filters = art.config.at("conv2_filters").get<int>();
    model.cfg.seed = art.config.at("init_seed").get<std::uint64_t>();
    model.stats.mean = art.config.at("patch_mean").get<double>();
    model.stats.std_dev = art.config.at("patch_std").get<double>();
    model.params = art.blob;
    if (model.params.size() != CnnModel::param_count_for(model.cfg))
        throw DataError("cnn artifact parameter count mismatch");
    return {model, dsp_config_from_json(art.config.at("dsp"))};
}

// ---------------------------------------------------------------------
// Uniform predict surface.

struct Prediction {
    double probability = 0.0; // of the positive class
    int label = 0;            // 1 iff probability >= 0.5
    double score = 0.0;       // ranking score (SVM: raw decision value)
};

// A loaded artifact ready to predict on whichever input kind it declares.
class Predictor {
public:
    explicit Predictor(ModelArtifact art) : art_(std::move(art)) {
        switch (art_.kind) {
            case ModelKind::logreg: {
                auto [m, s] = unpack_logreg(art_);
                logreg_ = std::move(m);
                schema_ = std::move(s);
                break;
            }
            case ModelKind::svm: {
                auto [m, s] = unpack_svm(art_);
                svm_ = std::move(m);
                schema_ = std::move(s);
                break;
            }
            case ModelKind::lstm: {
                auto [m, d] = unpack_lstm(art_);
                lstm_ = std::move(m);
                dsp_cfg_ = d;
                break;
            }
            case ModelKind::cnn: {
                auto [m, d] = unpack_cnn(art_);
                cnn_ = std::move(m);
                dsp_cfg_ = d;
                break;
            }
        }
    }

    ModelKind kind() const { return art_.kind; }
    const ModelArtifact& artifact() const { return art_; }
    const meta::EncodingSchema& schema() const { return schema_; }
    const dsp::DspConfig& dsp_config() const { return dsp_cfg_; }

    bool wants_audio_features() const {
        return art_.kind == ModelKind::lstm || art_.kind == ModelKind::cnn;
    }

    dsp::FeatureKind feature_kind() const {
        if (art_.kind == ModelKind::lstm) return dsp::FeatureKind::mfcc;
        if (art_.kind == ModelKind::cnn) return dsp::FeatureKind::log_mel;
        throw FeatureKindMismatch("metadata models take encoded records, "
                                  "not audio features");
    }

    Prediction predict_features(const dsp::FeatureMatrix& fm) const {
        if (!wants_audio_features())
            throw FeatureKindMismatch(
                std::string(model_kind_name(art_.kind)) +
                " model expects encoded metadata, got audio features");
        if (fm.kind != feature_kind())
            throw FeatureKindMismatch(
                std::string(model_kind_name(art_.kind)) + " model expects " +
                dsp::feature_kind_name(feature_kind()) + " features, got " +
                dsp::feature_kind_name(fm.kind));
        if (detail::hex_digest(fm.config_hash) != art_.dsp_config_hash)
            throw DataError("feature file was extracted under a different "
                            "DSP configuration than the model");
        if (art_.kind == ModelKind::lstm) {
            const auto p = lstm_.probabilities(fm);
            return finish(p[1], p[1]);
        }
        auto patch = make_patch(fm, cnn_.cfg.input_h, cnn_.cfg.input_w);
        standardize(patch, cnn_.stats);
        const auto p = cnn_.probabilities(patch);
        return finish(p[1], p[1]);
    }

    Prediction predict_encoded(std::span<const double> features) const {
        if (wants_audio_features())
            throw FeatureKindMismatch(
                std::string(model_kind_name(art_.kind)) +
                " model expects audio features, got encoded metadata");
        if (features.size() != schema_.feature_width())
            throw nn::ShapeMismatch(
                "encoded record width " + std::to_string(features.size()) +
                " does not match schema width " +
                std::to_string(schema_.feature_width()));
        if (art_.kind == ModelKind::logreg) {
            const double p = logreg_.prob(features);
            return finish(p, logreg_.score(features));
        }
        const double decision = svm_.decision(features);
        const double p = nn::sigmoid(svm_.link_scale * decision +
                                     svm_.link_offset);
        return finish(p, decision);
    }

    Prediction predict_record(const meta::ParticipantRecord& rec,
                              std::vector<std::string>* warnings = nullptr) const {
        const auto enc = meta::encode_record(rec, schema_, warnings);
        if (!enc)
            throw DataError("record rejected by the age rule; nothing to score");
        return predict_encoded(enc->features);
    }

private:
    static Prediction finish(double probability, double score) {
        Prediction p;
        p.probability = probability;
        p.label = probability >= 0.5 ? 1 : 0;
        p.score = score;
        return p;
    }

    ModelArtifact art_;
    meta::EncodingSchema schema_;
    dsp::DspConfig dsp_cfg_;
    LogRegModel logreg_;
    SvmModel svm_;
    LstmModel lstm_;
    CnnModel cnn_;
};

} // namespace voicescreen::models
