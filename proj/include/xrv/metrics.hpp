#pragma once

// Evaluation: confusion matrix, accuracy, per-class precision, and report
// assembly.
//
// Two precision variants are emitted. per_class_precision_rowwise is the
// row-wise definition (diagonal / true-class row sum) used throughout this
// pipeline's scoring; in standard terminology that quantity is per-class
// recall. per_class_precision_standard is the column-wise definition
// (diagonal / predicted-class column sum). Classes with an empty denominator
// are reported as undefined and excluded from macro averages.

#include <cstdint>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "xrv/errors.hpp"

namespace xrv {

struct ConfusionMatrix {
    std::size_t num_classes = 0;
    std::vector<std::uint64_t> counts;  // row-major, (true, predicted)
    std::vector<std::string> class_names;

    std::uint64_t at(std::size_t t, std::size_t p) const { return counts[t * num_classes + p]; }
    std::uint64_t& at(std::size_t t, std::size_t p) { return counts[t * num_classes + p]; }

    std::uint64_t total() const {
        std::uint64_t n = 0;
        for (std::uint64_t c : counts) n += c;
        return n;
    }

    std::uint64_t row_sum(std::size_t t) const {
        std::uint64_t n = 0;
        for (std::size_t p = 0; p < num_classes; ++p) n += at(t, p);
        return n;
    }

    std::uint64_t col_sum(std::size_t p) const {
        std::uint64_t n = 0;
        for (std::size_t t = 0; t < num_classes; ++t) n += at(t, p);
        return n;
    }
};

inline ConfusionMatrix confusion_matrix(const std::vector<int>& preds, const std::vector<int>& labels,
                                        std::size_t num_classes, std::vector<std::string> class_names = {}) {
    if (preds.size() != labels.size()) {
        throw ContractError("confusion_matrix: " + std::to_string(preds.size()) + " predictions vs " +
                            std::to_string(labels.size()) + " labels");
    }
    if (num_classes == 0) throw ContractError("confusion_matrix requires at least one class");
    ConfusionMatrix cm;
    cm.num_classes = num_classes;
    cm.counts.assign(num_classes * num_classes, 0);
    cm.class_names = std::move(class_names);
    if (cm.class_names.empty()) {
        for (std::size_t c = 0; c < num_classes; ++c) cm.class_names.push_back("class" + std::to_string(c));
    }
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes ||
            preds[i] < 0 || static_cast<std::size_t>(preds[i]) >= num_classes) {
            throw ContractError("confusion_matrix: class index out of range at sample " + std::to_string(i));
        }
        ++cm.at(static_cast<std::size_t>(labels[i]), static_cast<std::size_t>(preds[i]));
    }
    return cm;
}

// trace / total
inline double accuracy(const ConfusionMatrix& cm) {
    const std::uint64_t total = cm.total();
    if (total == 0) throw ContractError("accuracy of an empty confusion matrix");
    std::uint64_t trace = 0;
    for (std::size_t c = 0; c < cm.num_classes; ++c) trace += cm.at(c, c);
    return static_cast<double>(trace) / static_cast<double>(total);
}

struct PrecisionResult {
    std::vector<std::optional<double>> per_class;  // nullopt when the denominator is zero
    double macro = 0.0;                            // mean over defined components
};

// Row-wise: diagonal / true-class count.
inline PrecisionResult per_class_precision(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw ContractError("precision of an empty confusion matrix");
    PrecisionResult out;
    double sum = 0.0;
    std::size_t defined = 0;
    for (std::size_t c = 0; c < cm.num_classes; ++c) {
        const std::uint64_t denom = cm.row_sum(c);
        if (denom == 0) {
            out.per_class.push_back(std::nullopt);
        } else {
            const double v = static_cast<double>(cm.at(c, c)) / static_cast<double>(denom);
            out.per_class.push_back(v);
            sum += v;
            ++defined;
        }
    }
    out.macro = defined ? sum / static_cast<double>(defined) : 0.0;
    return out;
}

// Column-wise: diagonal / predicted-class count.
inline PrecisionResult per_class_precision_standard(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw ContractError("precision of an empty confusion matrix");
    PrecisionResult out;
    double sum = 0.0;
    std::size_t defined = 0;
    for (std::size_t c = 0; c < cm.num_classes; ++c) {
        const std::uint64_t denom = cm.col_sum(c);
        if (denom == 0) {
            out.per_class.push_back(std::nullopt);
        } else {
            const double v = static_cast<double>(cm.at(c, c)) / static_cast<double>(denom);
            out.per_class.push_back(v);
            sum += v;
            ++defined;
        }
    }
    out.macro = defined ? sum / static_cast<double>(defined) : 0.0;
    return out;
}

struct EvalReport {
    ConfusionMatrix cm;
    std::uint64_t sample_count = 0;
    double accuracy = 0.0;
    std::vector<std::optional<double>> per_class_precision_rowwise;
    double macro_precision = 0.0;
    double weighted_precision = 0.0;  // row-sum weighted; equals accuracy by identity
    std::vector<std::optional<double>> per_class_precision_standard;
    double macro_precision_standard = 0.0;
};

inline EvalReport report(const std::vector<int>& preds, const std::vector<int>& labels,
                         const std::vector<std::string>& class_names) {
    EvalReport r;
    r.cm = confusion_matrix(preds, labels, class_names.size(), class_names);
    r.sample_count = r.cm.total();
    r.accuracy = accuracy(r.cm);

    const PrecisionResult rowwise = per_class_precision(r.cm);
    r.per_class_precision_rowwise = rowwise.per_class;
    r.macro_precision = rowwise.macro;

    double weighted = 0.0;
    for (std::size_t c = 0; c < r.cm.num_classes; ++c) {
        if (rowwise.per_class[c]) {
            weighted += *rowwise.per_class[c] * static_cast<double>(r.cm.row_sum(c)) /
                        static_cast<double>(r.sample_count);
        }
    }
    r.weighted_precision = weighted;

    const PrecisionResult std_prec = per_class_precision_standard(r.cm);
    r.per_class_precision_standard = std_prec.per_class;
    r.macro_precision_standard = std_prec.macro;
    return r;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json optional_vec_to_json(const std::vector<std::optional<double>>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& x : v) {
        if (x) arr.push_back(*x);
        else arr.push_back(nullptr);
    }
    return arr;
}

inline std::vector<std::optional<double>> optional_vec_from_json(const nlohmann::json& arr) {
    std::vector<std::optional<double>> out;
    for (const auto& x : arr) {
        if (x.is_null()) out.push_back(std::nullopt);
        else out.push_back(x.get<double>());
    }
    return out;
}

}  // namespace detail

inline nlohmann::json report_to_json(const EvalReport& r) {
    nlohmann::json j;
    j["sample_count"] = r.sample_count;
    j["accuracy"] = r.accuracy;
    j["class_names"] = r.cm.class_names;
    j["confusion"] = nlohmann::json::array();
    for (std::size_t t = 0; t < r.cm.num_classes; ++t) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t p = 0; p < r.cm.num_classes; ++p) row.push_back(r.cm.at(t, p));
        j["confusion"].push_back(row);
    }
    j["per_class_precision_rowwise"] = detail::optional_vec_to_json(r.per_class_precision_rowwise);
    j["macro_precision"] = r.macro_precision;
    j["weighted_precision"] = r.weighted_precision;
    j["per_class_precision_standard"] = detail::optional_vec_to_json(r.per_class_precision_standard);
    j["macro_precision_standard"] = r.macro_precision_standard;
    return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
    EvalReport r;
    r.sample_count = j.at("sample_count").get<std::uint64_t>();
    r.accuracy = j.at("accuracy").get<double>();
    r.cm.class_names = j.at("class_names").get<std::vector<std::string>>();
    r.cm.num_classes = r.cm.class_names.size();
    r.cm.counts.assign(r.cm.num_classes * r.cm.num_classes, 0);
    const auto& conf = j.at("confusion");
    if (conf.size() != r.cm.num_classes) throw FormatError("report confusion matrix has wrong row count");
    for (std::size_t t = 0; t < r.cm.num_classes; ++t) {
        if (conf[t].size() != r.cm.num_classes) throw FormatError("report confusion matrix has wrong column count");
        for (std::size_t p = 0; p < r.cm.num_classes; ++p) r.cm.at(t, p) = conf[t][p].get<std::uint64_t>();
    }
    r.per_class_precision_rowwise = detail::optional_vec_from_json(j.at("per_class_precision_rowwise"));
    r.macro_precision = j.at("macro_precision").get<double>();
    r.weighted_precision = j.at("weighted_precision").get<double>();
    r.per_class_precision_standard = detail::optional_vec_from_json(j.at("per_class_precision_standard"));
    r.macro_precision_standard = j.at("macro_precision_standard").get<double>();
    return r;
}

inline std::string confusion_to_csv(const ConfusionMatrix& cm) {
    std::ostringstream os;
    os << "true\\pred";
    for (std::size_t p = 0; p < cm.num_classes; ++p) os << "," << cm.class_names[p];
    os << "\n";
    for (std::size_t t = 0; t < cm.num_classes; ++t) {
        os << cm.class_names[t];
        for (std::size_t p = 0; p < cm.num_classes; ++p) os << "," << cm.at(t, p);
        os << "\n";
    }
    return os.str();
}

inline std::string report_to_text(const EvalReport& r) {
    std::ostringstream os;
    std::size_t name_w = 10;
    for (const auto& n : r.cm.class_names) name_w = std::max(name_w, n.size() + 2);

    os << "samples:  " << r.sample_count << "\n";
    os << std::fixed << std::setprecision(4);
    os << "accuracy: " << r.accuracy << "\n\n";
    os << std::left << std::setw(static_cast<int>(name_w)) << "class" << std::right << std::setw(8) << "n"
       << std::setw(18) << "precision" << std::setw(18) << "precision(std)" << "\n";
    for (std::size_t c = 0; c < r.cm.num_classes; ++c) {
        os << std::left << std::setw(static_cast<int>(name_w)) << r.cm.class_names[c] << std::right
           << std::setw(8) << r.cm.row_sum(c);
        auto cell = [&](const std::optional<double>& v) {
            std::ostringstream s;
            if (v) s << std::fixed << std::setprecision(4) << *v;
            else s << "n/a";
            os << std::setw(18) << s.str();
        };
        cell(r.per_class_precision_rowwise[c]);
        cell(r.per_class_precision_standard[c]);
        os << "\n";
    }
    os << std::left << std::setw(static_cast<int>(name_w)) << "macro" << std::right << std::setw(8) << ""
       << std::setw(18) << r.macro_precision << std::setw(18) << r.macro_precision_standard << "\n";
    os << "\nconfusion matrix (rows = true, cols = predicted):\n";
    for (std::size_t t = 0; t < r.cm.num_classes; ++t) {
        os << std::left << std::setw(static_cast<int>(name_w)) << r.cm.class_names[t] << std::right;
        for (std::size_t p = 0; p < r.cm.num_classes; ++p) os << std::setw(8) << r.cm.at(t, p);
        os << "\n";
    }
    return os.str();
}

}  // namespace xrv
