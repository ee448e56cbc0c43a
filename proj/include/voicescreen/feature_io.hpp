#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "voicescreen/detail/binio.hpp"
#include "voicescreen/detail/csv.hpp"
#include "voicescreen/dsp.hpp"
#include "voicescreen/error.hpp"

namespace voicescreen::io {

// Flat little-endian feature file:
//   magic "VXF1" | u32 kind | u32 rows | u32 cols | 32-byte config hash |
//   rows*cols float64, row-major.
inline constexpr char kFeatureMagic[4] = {'V', 'X', 'F', '1'};

inline std::string serialize_feature_matrix(const dsp::FeatureMatrix& fm) {
    std::string out;
    out.reserve(48 + fm.data.size() * 8);
    out.append(kFeatureMagic, 4);
    detail::put_u32(out, static_cast<std::uint32_t>(fm.kind));
    detail::put_u32(out, static_cast<std::uint32_t>(fm.rows));
    detail::put_u32(out, static_cast<std::uint32_t>(fm.cols));
    out.append(reinterpret_cast<const char*>(fm.config_hash.data()),
               fm.config_hash.size());
    for (double v : fm.data) detail::put_f64(out, v);
    return out;
}

inline dsp::FeatureMatrix deserialize_feature_matrix(
    std::span<const std::uint8_t> bytes, const std::string& origin = {}) {
    detail::ByteReader r(bytes.data(), bytes.size());
    char magic[4];
    r.bytes(magic, 4, "magic");
    if (std::memcmp(magic, kFeatureMagic, 4) != 0)
        throw DataError("bad feature file magic: " + origin);
    dsp::FeatureMatrix fm;
    const std::uint32_t kind = r.u32("kind");
    if (kind > 1) throw DataError("unknown feature kind: " + origin);
    fm.kind = static_cast<dsp::FeatureKind>(kind);
    fm.rows = r.u32("rows");
    fm.cols = r.u32("cols");
    r.bytes(fm.config_hash.data(), fm.config_hash.size(), "config hash");
    if (fm.rows == 0 || fm.cols == 0)
        throw DataError("empty feature matrix: " + origin);
    fm.data.resize(fm.rows * fm.cols);
    for (double& v : fm.data) v = r.f64("feature value");
    return fm;
}

inline void write_feature_file(const std::string& path,
                               const dsp::FeatureMatrix& fm) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write feature file: " + path);
    const std::string blob = serialize_feature_matrix(fm);
    out.write(blob.data(), std::streamsize(blob.size()));
    if (!out) throw DataError("short write on feature file: " + path);
}

inline dsp::FeatureMatrix read_feature_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open feature file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return deserialize_feature_matrix(bytes, path);
}

// Human-inspectable export: one CSV row per frame.
inline void write_feature_csv(std::ostream& out, const dsp::FeatureMatrix& fm) {
    for (std::size_t r = 0; r < fm.rows; ++r) {
        std::vector<std::string> fields;
        fields.reserve(fm.cols);
        for (std::size_t c = 0; c < fm.cols; ++c) {
            fields.push_back(detail::format_double(fm.at(r, c)));
        }
        detail::write_csv_row(out, fields);
    }
}

inline void write_feature_csv_file(const std::string& path,
                                   const dsp::FeatureMatrix& fm) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write feature CSV: " + path);
    write_feature_csv(out, fm);
}

} // namespace voicescreen::io
