#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "voicescreen/detail/csv.hpp"
#include "voicescreen/error.hpp"

namespace voicescreen::eval {

class LengthMismatch : public DataError {
public:
    using DataError::DataError;
};

class SingleClass : public DataError {
public:
    using DataError::DataError;
};

struct ConfusionMatrix {
    std::uint64_t tn = 0, fp = 0, fn = 0, tp = 0;

    std::uint64_t total() const { return tn + fp + fn + tp; }
};

inline ConfusionMatrix confusion(const std::vector<int>& preds,
                                 const std::vector<int>& labels) {
    if (preds.size() != labels.size() || preds.empty())
        throw LengthMismatch("confusion: " + std::to_string(preds.size()) +
                             " predictions vs " + std::to_string(labels.size()) +
                             " labels");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (labels[i] == 1) {
            (preds[i] == 1 ? cm.tp : cm.fn)++;
        } else {
            (preds[i] == 1 ? cm.fp : cm.tn)++;
        }
    }
    return cm;
}

// Rates with zero denominators come back empty rather than as a silent 0.
struct Metrics {
    std::optional<double> accuracy;
    std::optional<double> sensitivity;
    std::optional<double> specificity;
};

inline Metrics metrics(const ConfusionMatrix& cm) {
    Metrics m;
    if (cm.total() > 0)
        m.accuracy = double(cm.tp + cm.tn) / double(cm.total());
    if (cm.tp + cm.fn > 0)
        m.sensitivity = double(cm.tp) / double(cm.tp + cm.fn);
    if (cm.tn + cm.fp > 0)
        m.specificity = double(cm.tn) / double(cm.tn + cm.fp);
    return m;
}

struct RocCurve {
    std::vector<std::pair<double, double>> points; // (fpr, tpr)
    double auc = 0.0;
};

// Threshold sweep over the distinct scores (ties collapse into single
// steps), trapezoidal AUC. Integer accumulation keeps the area exactly equal
// to the Mann-Whitney statistic with ties counted one half.
inline RocCurve roc(const std::vector<double>& scores,
                    const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty())
        throw LengthMismatch("roc: score/label length mismatch");
    std::uint64_t n_pos = 0, n_neg = 0;
    for (int y : labels) (y == 1 ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0)
        throw SingleClass("roc needs both classes present");

    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });

    RocCurve curve;
    curve.points.emplace_back(0.0, 0.0);
    std::uint64_t tp = 0, fp = 0;
    unsigned long long area2 = 0; // twice the area, in units of 1/(P*N)

    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        std::uint64_t d_tp = 0, d_fp = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (labels[order[j]] == 1 ? d_tp : d_fp)++;
            ++j;
        }
        // trapezoid over the tie block: width d_fp, heights tp and tp + d_tp
        area2 += d_fp * (2 * tp + d_tp);
        tp += d_tp;
        fp += d_fp;
        curve.points.emplace_back(double(fp) / double(n_neg),
                                  double(tp) / double(n_pos));
        i = j;
    }
    curve.auc = double(area2) / (2.0 * double(n_pos) * double(n_neg));
    return curve;
}

struct EvalReport {
    std::string model_name;
    ConfusionMatrix cm;
    Metrics scalar_metrics;
    RocCurve curve;
    std::size_t n_samples = 0;
};

inline EvalReport evaluate(const std::string& model_name,
                           const std::vector<double>& scores,
                           const std::vector<int>& preds,
                           const std::vector<int>& labels) {
    if (scores.size() != preds.size() || preds.size() != labels.size())
        throw LengthMismatch("evaluate: input length mismatch");
    EvalReport rep;
    rep.model_name = model_name;
    rep.cm = confusion(preds, labels);
    rep.scalar_metrics = metrics(rep.cm);
    rep.curve = roc(scores, labels);
    rep.n_samples = labels.size();
    return rep;
}

inline nlohmann::json report_to_json(const EvalReport& rep) {
    nlohmann::json j;
    j["model"] = rep.model_name;
    j["n_samples"] = rep.n_samples;
    j["confusion"] = {{"tn", rep.cm.tn},
                      {"fp", rep.cm.fp},
                      {"fn", rep.cm.fn},
                      {"tp", rep.cm.tp}};
    const auto put = [&](const char* name, const std::optional<double>& v) {
        if (v) j["metrics"][name] = *v;
        else j["metrics"][name] = nullptr;
    };
    put("accuracy", rep.scalar_metrics.accuracy);
    put("sensitivity", rep.scalar_metrics.sensitivity);
    put("specificity", rep.scalar_metrics.specificity);
    j["roc"]["auc"] = rep.curve.auc;
    auto& pts = j["roc"]["points"];
    pts = nlohmann::json::array();
    for (const auto& [fpr, tpr] : rep.curve.points) {
        pts.push_back({fpr, tpr});
    }
    return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
    EvalReport rep;
    rep.model_name = j.at("model").get<std::string>();
    rep.n_samples = j.at("n_samples").get<std::size_t>();
    const auto& cm = j.at("confusion");
    rep.cm = {cm.at("tn").get<std::uint64_t>(), cm.at("fp").get<std::uint64_t>(),
              cm.at("fn").get<std::uint64_t>(), cm.at("tp").get<std::uint64_t>()};
    const auto& m = j.at("metrics");
    const auto get = [&](const char* name) -> std::optional<double> {
        if (m.at(name).is_null()) return std::nullopt;
        return m.at(name).get<double>();
    };
    rep.scalar_metrics.accuracy = get("accuracy");
    rep.scalar_metrics.sensitivity = get("sensitivity");
    rep.scalar_metrics.specificity = get("specificity");
    rep.curve.auc = j.at("roc").at("auc").get<double>();
    for (const auto& p : j.at("roc").at("points")) {
        rep.curve.points.emplace_back(p.at(0).get<double>(),
                                      p.at(1).get<double>());
    }
    return rep;
}

inline void write_report_json(const std::string& path, const EvalReport& rep) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write report: " + path);
    out << report_to_json(rep).dump(2) << '\n';
}

inline EvalReport read_report_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open report: " + path);
    nlohmann::json j;
    in >> j;
    return report_from_json(j);
}

inline void write_roc_csv(std::ostream& out, const RocCurve& curve) {
    detail::write_csv_row(out, {"fpr", "tpr"});
    for (const auto& [fpr, tpr] : curve.points) {
        detail::write_csv_row(
            out, {detail::format_double(fpr), detail::format_double(tpr)});
    }
}

// Standalone SVG plot, one polyline per curve; no external tooling needed to
// look at it.
inline std::string roc_svg(const std::vector<EvalReport>& reports) {
    constexpr int kSize = 480;
    constexpr int kMargin = 50;
    constexpr int kPlot = kSize - 2 * kMargin;
    static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                              "#9467bd", "#ff7f0e", "#8c564b"};
    const auto sx = [&](double fpr) { return kMargin + fpr * kPlot; };
    const auto sy = [&](double tpr) { return kSize - kMargin - tpr * kPlot; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize
        << "\" height=\"" << kSize << "\" viewBox=\"0 0 " << kSize << ' '
        << kSize << "\">\n";
    svg << "  <rect width=\"" << kSize << "\" height=\"" << kSize
        << "\" fill=\"white\"/>\n";
    svg << "  <rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\""
        << kPlot << "\" height=\"" << kPlot
        << "\" fill=\"none\" stroke=\"#333\"/>\n";
    svg << "  <line x1=\"" << sx(0) << "\" y1=\"" << sy(0) << "\" x2=\""
        << sx(1) << "\" y2=\"" << sy(1)
        << "\" stroke=\"#bbb\" stroke-dasharray=\"4 4\"/>\n";
    svg << "  <text x=\"" << kSize / 2 << "\" y=\"" << kSize - 12
        << "\" text-anchor=\"middle\" font-size=\"13\">false positive rate"
        << "</text>\n";
    svg << "  <text x=\"14\" y=\"" << kSize / 2
        << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 "
           "14 "
        << kSize / 2 << ")\">true positive rate</text>\n";

    for (std::size_t r = 0; r < reports.size(); ++r) {
        const char* color = kColors[r % 6];
        svg << "  <polyline fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"1.6\" points=\"";
        for (const auto& [fpr, tpr] : reports[r].curve.points) {
            svg << sx(fpr) << ',' << sy(tpr) << ' ';
        }
        svg << "\"/>\n";
        svg << "  <text x=\"" << kMargin + 10 << "\" y=\""
            << kMargin + 18 + 16 * int(r) << "\" font-size=\"12\" fill=\""
            << color << "\">" << reports[r].model_name << " (AUC "
            << detail::format_double(std::round(reports[r].curve.auc * 1000) /
                                     1000)
            << ")</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

// Plain-text comparison table in the style of the results summary.
inline std::string comparison_table(const std::vector<EvalReport>& reports) {
    std::ostringstream os;
    const auto pct = [](const std::optional<double>& v) -> std::string {
        if (!v) return "n/a";
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%.0f%%", *v * 100.0);
        return buf;
    };
    os << "Model      Accuracy  Sensitivity  Specificity  AUC\n";
    os << "---------  --------  -----------  -----------  -----\n";
    for (const auto& rep : reports) {
        char line[128];
        std::snprintf(line, sizeof(line), "%-9s  %-8s  %-11s  %-11s  %.3f\n",
                      rep.model_name.c_str(),
                      pct(rep.scalar_metrics.accuracy).c_str(),
                      pct(rep.scalar_metrics.sensitivity).c_str(),
                      pct(rep.scalar_metrics.specificity).c_str(),
                      rep.curve.auc);
        os << line;
    }
    return os.str();
}

} // namespace voicescreen::eval
