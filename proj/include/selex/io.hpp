#pragma once
// File formats and run configuration: the .selx binary matrix format (float32
// on disk, double in memory), CSV matrices, the labels CSV, hierarchy and
// report JSON, the per-epoch metrics CSV, and the schema-checked RunConfig
// whose resolved form is echoed into every report.

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "selex/bssk.hpp"
#include "selex/hssk.hpp"
#include "selex/labels.hpp"
#include "selex/loss.hpp"
#include "selex/matrix.hpp"
#include "selex/train.hpp"

namespace selex {

using json = nlohmann::json;

namespace detail {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void put_u32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& s, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

inline std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

inline bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace detail

inline constexpr char kSelxMagic[4] = {'S', 'E', 'L', 'X'};
inline constexpr std::uint32_t kSelxVersion = 1;

inline void write_embeddings_selx(const std::string& path, const Matrix& m) {
    std::string bytes;
    bytes.reserve(24 + 4 * m.data.size());
    bytes.append(kSelxMagic, 4);
    detail::put_u32(bytes, kSelxVersion);
    detail::put_u64(bytes, m.rows);
    detail::put_u64(bytes, m.cols);
    for (double v : m.data) {
        float f = static_cast<float>(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        detail::put_u32(bytes, bits);
    }
    detail::write_file(path, bytes);
}

inline Matrix read_embeddings_selx(const std::string& path) {
    std::string bytes = detail::read_file(path);
    if (bytes.size() < 24) throw std::invalid_argument(path + ": truncated header");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (std::memcmp(p, kSelxMagic, 4) != 0)
        throw std::invalid_argument(path + ": bad magic");
    std::uint32_t version = detail::get_u32(p + 4);
    if (version != kSelxVersion)
        throw std::invalid_argument(path + ": unsupported version " +
                                    std::to_string(version));
    std::uint64_t n = detail::get_u64(p + 8);
    std::uint64_t d = detail::get_u64(p + 16);
    if (n == 0 || d == 0) throw std::invalid_argument(path + ": empty matrix");
    if (bytes.size() != 24 + 4 * n * d)
        throw std::invalid_argument(path + ": truncated payload");
    Matrix m(n, d);
    for (std::uint64_t t = 0; t < n * d; ++t) {
        std::uint32_t bits = detail::get_u32(p + 24 + 4 * t);
        float f;
        std::memcpy(&f, &bits, 4);
        if (!std::isfinite(f))
            throw std::invalid_argument(path + ": non-finite entry");
        m.data[t] = static_cast<double>(f);
    }
    return m;
}

inline void write_embeddings_csv(const std::string& path, const Matrix& m) {
    std::string out;
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) {
            if (j) out.push_back(',');
            out += detail::fmt_double(m.at(i, j));
        }
        out.push_back('\n');
    }
    detail::write_file(path, out);
}

inline Matrix read_embeddings_csv(const std::string& path) {
    std::string bytes = detail::read_file(path);
    std::vector<std::vector<double>> rows;
    std::istringstream in(bytes);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        std::size_t start = 0;
        while (start <= line.size()) {
            std::size_t comma = line.find(',', start);
            std::string cell = line.substr(
                start, comma == std::string::npos ? std::string::npos : comma - start);
            char* end = nullptr;
            double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str() || *end != '\0' || !std::isfinite(v))
                throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                            ": bad numeric cell '" + cell + "'");
            row.push_back(v);
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                        ": ragged row");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::invalid_argument(path + ": empty matrix");
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < m.cols; ++j) m.at(i, j) = rows[i][j];
    return m;
}

// Dispatch by extension: .selx binary, .csv text.
inline Matrix read_embeddings(const std::string& path) {
    if (detail::ends_with(path, ".selx")) return read_embeddings_selx(path);
    if (detail::ends_with(path, ".csv")) return read_embeddings_csv(path);
    throw std::invalid_argument(path + ": unknown embedding format (want .selx or .csv)");
}

inline void write_embeddings(const std::string& path, const Matrix& m) {
    if (detail::ends_with(path, ".selx")) return write_embeddings_selx(path, m);
    if (detail::ends_with(path, ".csv")) return write_embeddings_csv(path, m);
    throw std::invalid_argument(path + ": unknown embedding format (want .selx or .csv)");
}

inline constexpr const char* kLabelsHeader = "row,label,is_labeled,is_known_category";

inline void write_labels(const std::string& path, const LabelInfo& l) {
    std::string out = kLabelsHeader;
    out.push_back('\n');
    for (std::size_t i = 0; i < l.n(); ++i) {
        out += std::to_string(i);
        out.push_back(',');
        out += std::to_string(l.labels[i]);
        out.push_back(',');
        out += l.labeled_mask[i] ? '1' : '0';
        out.push_back(',');
        out += l.is_known(l.labels[i]) ? '1' : '0';
        out.push_back('\n');
    }
    detail::write_file(path, out);
}

inline LabelInfo read_labels(const std::string& path) {
    std::string bytes = detail::read_file(path);
    std::istringstream in(bytes);
    std::string line;
    if (!std::getline(in, line) || line != kLabelsHeader)
        throw std::invalid_argument(path + ": expected header '" +
                                    std::string(kLabelsHeader) + "'");
    struct Row {
        int label;
        bool labeled;
        bool known;
    };
    std::vector<std::optional<Row>> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        long long v[4];
        int field = 0;
        std::size_t start = 0;
        while (field < 4) {
            std::size_t comma = line.find(',', start);
            std::string cell = line.substr(
                start, comma == std::string::npos ? std::string::npos : comma - start);
            char* end = nullptr;
            v[field] = std::strtoll(cell.c_str(), &end, 10);
            if (end == cell.c_str() || *end != '\0')
                throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                            ": bad integer cell '" + cell + "'");
            ++field;
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (field != 4)
            throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                        ": expected 4 fields");
        if (v[0] < 0 || v[1] < 0 || (v[2] != 0 && v[2] != 1) || (v[3] != 0 && v[3] != 1))
            throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                        ": out-of-range field");
        auto row = static_cast<std::size_t>(v[0]);
        if (row >= rows.size()) rows.resize(row + 1);
        if (rows[row])
            throw std::invalid_argument(path + ": duplicate row id " + std::to_string(row));
        rows[row] = Row{static_cast<int>(v[1]), v[2] == 1, v[3] == 1};
    }
    if (rows.empty()) throw std::invalid_argument(path + ": no label rows");

    LabelInfo l;
    l.labels.resize(rows.size());
    l.labeled_mask.resize(rows.size());
    int k_max = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!rows[i])
            throw std::invalid_argument(path + ": missing row " + std::to_string(i));
        l.labels[i] = rows[i]->label;
        l.labeled_mask[i] = rows[i]->labeled;
        if (rows[i]->labeled && !rows[i]->known)
            throw std::invalid_argument(path + ": row " + std::to_string(i) +
                                        " is a labeled novel category");
        k_max = std::max(k_max, rows[i]->label);
    }
    l.k_total = k_max + 1;
    std::vector<int> known_flag(l.k_total, -1);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        int cat = rows[i]->label;
        int flag = rows[i]->known ? 1 : 0;
        if (known_flag[cat] == -1) known_flag[cat] = flag;
        else if (known_flag[cat] != flag)
            throw std::invalid_argument(path + ": category " + std::to_string(cat) +
                                        " marked both known and novel");
    }
    for (int c = 0; c < l.k_total; ++c)
        if (known_flag[c] == 1) l.known_categories.push_back(c);
    l.validate();
    return l;
}

inline json hierarchy_to_json(const Hierarchy& h, const json& config_echo,
                              std::uint64_t seed) {
    json levels = json::array();
    for (const auto& lv : h.levels) {
        levels.push_back({{"label_count", lv.label_count},
                          {"cluster_size", lv.cluster_size},
                          {"assignment", lv.assignment},
                          {"known_label_count", lv.known_label_count}});
    }
    return json{{"levels", levels},
                {"base_k", h.base_k},
                {"config_echo", config_echo},
                {"seed", seed}};
}

inline void write_report(const std::string& path, const json& report) {
    detail::write_file(path, report.dump(2) + "\n");
}

inline void write_hierarchy(const std::string& path, const Hierarchy& h,
                            const json& config_echo = json::object(),
                            std::uint64_t seed = 0) {
    write_report(path, hierarchy_to_json(h, config_echo, seed));
}

inline Hierarchy read_hierarchy(const std::string& path) {
    json doc;
    try {
        doc = json::parse(detail::read_file(path));
    } catch (const json::exception& ex) {
        throw std::invalid_argument(path + ": " + ex.what());
    }
    Hierarchy h;
    try {
        h.base_k = doc.at("base_k").get<int>();
        for (const auto& jl : doc.at("levels")) {
            HierarchyLevel lv;
            lv.label_count = jl.at("label_count").get<int>();
            lv.known_label_count = jl.at("known_label_count").get<int>();
            lv.cluster_size = jl.at("cluster_size").get<int>();
            lv.assignment = jl.at("assignment").get<std::vector<int>>();
            h.levels.push_back(std::move(lv));
        }
    } catch (const json::exception& ex) {
        throw std::invalid_argument(path + ": " + ex.what());
    }
    if (h.levels.empty()) throw std::invalid_argument(path + ": no levels");
    const std::size_t n = h.levels.front().assignment.size();
    for (const auto& lv : h.levels) {
        if (lv.assignment.size() != n)
            throw std::invalid_argument(path + ": inconsistent level lengths");
        for (int a : lv.assignment)
            if (a < 0 || a >= lv.label_count)
                throw std::invalid_argument(path + ": assignment id out of range");
    }
    // Rebuild the level-to-level projections; they must be functional.
    for (std::size_t k = 0; k + 1 < h.levels.size(); ++k) {
        std::vector<int> proj(h.levels[k].label_count, -1);
        for (std::size_t i = 0; i < n; ++i) {
            int from = h.levels[k].assignment[i];
            int to = h.levels[k + 1].assignment[i];
            if (proj[from] == -1) proj[from] = to;
            else if (proj[from] != to)
                throw std::invalid_argument(path + ": levels are not tree-consistent");
        }
        h.projections.push_back(std::move(proj));
    }
    return h;
}

inline void write_metrics_csv(const std::string& path,
                              const std::vector<EpochMetrics>& rows) {
    std::string out = "epoch,l_use,l_sse,l_se,acc_all,acc_known,acc_novel\n";
    for (const auto& em : rows) {
        out += std::to_string(em.epoch);
        out.push_back(',');
        out += detail::fmt_double(em.l_use);
        out.push_back(',');
        out += detail::fmt_double(em.l_sse);
        out.push_back(',');
        out += detail::fmt_double(em.l_se);
        out.push_back(',');
        out += detail::fmt_double(em.acc_all);
        out.push_back(',');
        if (em.acc_known) out += detail::fmt_double(*em.acc_known);
        out.push_back(',');
        if (em.acc_novel) out += detail::fmt_double(*em.acc_novel);
        out.push_back('\n');
    }
    detail::write_file(path, out);
}

// ---------------------------------------------------------------------------
// RunConfig: JSON document with sections {bssk, hssk, smoothing, loss, train,
// eval, io}; every field optional, unknown keys rejected, resolved form echoed
// into reports.

struct RunConfig {
    BsskConfig bssk;      // bssk.k = 0 means "take K from the labels file"
    LossConfig loss;
    int epochs = 5;
    int steps_per_epoch = 30;
    double learning_rate = 1e-3;
    int max_backoff = 40;

    TrainConfig train_config(std::uint64_t seed) const {
        TrainConfig tc;
        tc.epochs = epochs;
        tc.steps_per_epoch = steps_per_epoch;
        tc.learning_rate = learning_rate;
        tc.max_backoff = max_backoff;
        tc.loss = loss;
        tc.bssk = bssk;
        tc.seed = seed;
        return tc;
    }
};

namespace detail {

inline void reject_unknown(const json& obj, const char* section,
                           std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed)
            if (it.key() == a) ok = true;
        if (!ok)
            throw std::invalid_argument(std::string("config: unknown key '") + it.key() +
                                        "' in section '" + section + "'");
    }
}

template <typename T>
inline void maybe(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace detail

inline Normalization normalization_from_string(const std::string& s) {
    if (s == "none") return Normalization::none;
    if (s == "max") return Normalization::max;
    if (s == "row") return Normalization::row;
    throw std::invalid_argument("config: bad normalization '" + s + "'");
}

inline const char* to_string(Normalization n) {
    switch (n) {
        case Normalization::none: return "none";
        case Normalization::max: return "max";
        default: return "row";
    }
}

inline UnsupTargetVariant target_variant_from_string(const std::string& s) {
    if (s == "pseudo_label") return UnsupTargetVariant::pseudo_label;
    if (s == "radius") return UnsupTargetVariant::radius;
    throw std::invalid_argument("config: bad target_variant '" + s + "'");
}

inline const char* to_string(UnsupTargetVariant v) {
    return v == UnsupTargetVariant::pseudo_label ? "pseudo_label" : "radius";
}

inline RunConfig run_config_from_json(const json& doc) {
    if (!doc.is_object()) throw std::invalid_argument("config: document must be an object");
    detail::reject_unknown(doc, "<root>",
                           {"bssk", "hssk", "smoothing", "loss", "train", "eval", "io"});
    RunConfig rc;
    if (doc.contains("bssk")) {
        const json& b = doc.at("bssk");
        detail::reject_unknown(b, "bssk",
                               {"k", "cluster_size", "n_iter_refine", "n_iter_final",
                                "balanced"});
        detail::maybe(b, "k", rc.bssk.k);
        if (b.contains("cluster_size")) rc.bssk.cluster_size = b.at("cluster_size").get<int>();
        detail::maybe(b, "n_iter_refine", rc.bssk.n_iter_refine);
        detail::maybe(b, "n_iter_final", rc.bssk.n_iter_final);
        detail::maybe(b, "balanced", rc.bssk.balanced);
    }
    if (doc.contains("hssk")) detail::reject_unknown(doc.at("hssk"), "hssk", {});
    if (doc.contains("smoothing")) {
        const json& s = doc.at("smoothing");
        detail::reject_unknown(s, "smoothing", {"alpha", "normalization"});
        detail::maybe(s, "alpha", rc.loss.smoothing.alpha);
        if (s.contains("normalization"))
            rc.loss.smoothing.normalization =
                normalization_from_string(s.at("normalization").get<std::string>());
    }
    if (doc.contains("loss")) {
        const json& lo = doc.at("loss");
        detail::reject_unknown(lo, "loss",
                               {"lambda", "tau_unsup", "tau_sup", "eps", "target_variant",
                                "use_smoothed_target", "symmetrize_radius"});
        detail::maybe(lo, "lambda", rc.loss.lambda);
        detail::maybe(lo, "tau_unsup", rc.loss.tau_unsup);
        detail::maybe(lo, "tau_sup", rc.loss.tau_sup);
        detail::maybe(lo, "eps", rc.loss.eps);
        if (lo.contains("target_variant"))
            rc.loss.target_variant =
                target_variant_from_string(lo.at("target_variant").get<std::string>());
        detail::maybe(lo, "use_smoothed_target", rc.loss.use_smoothed_target);
        detail::maybe(lo, "symmetrize_radius", rc.loss.symmetrize_radius);
    }
    if (doc.contains("train")) {
        const json& t = doc.at("train");
        detail::reject_unknown(t, "train",
                               {"epochs", "steps_per_epoch", "learning_rate", "max_backoff"});
        detail::maybe(t, "epochs", rc.epochs);
        detail::maybe(t, "steps_per_epoch", rc.steps_per_epoch);
        detail::maybe(t, "learning_rate", rc.learning_rate);
        detail::maybe(t, "max_backoff", rc.max_backoff);
    }
    if (doc.contains("eval")) detail::reject_unknown(doc.at("eval"), "eval", {});
    if (doc.contains("io")) detail::reject_unknown(doc.at("io"), "io", {});
    rc.loss.validate();
    return rc;
}

inline RunConfig load_run_config(const std::string& path) {
    json doc;
    try {
        doc = json::parse(detail::read_file(path));
    } catch (const json::exception& ex) {
        throw std::invalid_argument(path + ": " + ex.what());
    }
    return run_config_from_json(doc);
}

// Fully resolved configuration, embedded verbatim in every output report.
inline json resolved_config(const RunConfig& rc) {
    json bssk{{"k", rc.bssk.k},
              {"n_iter_refine", rc.bssk.n_iter_refine},
              {"n_iter_final", rc.bssk.n_iter_final},
              {"balanced", rc.bssk.balanced}};
    if (rc.bssk.cluster_size) bssk["cluster_size"] = *rc.bssk.cluster_size;
    else bssk["cluster_size"] = nullptr;
    return json{
        {"bssk", bssk},
        {"hssk", json::object()},
        {"smoothing",
         {{"alpha", rc.loss.smoothing.alpha},
          {"normalization", to_string(rc.loss.smoothing.normalization)}}},
        {"loss",
         {{"lambda", rc.loss.lambda},
          {"tau_unsup", rc.loss.tau_unsup},
          {"tau_sup", rc.loss.tau_sup},
          {"eps", rc.loss.eps},
          {"target_variant", to_string(rc.loss.target_variant)},
          {"use_smoothed_target", rc.loss.use_smoothed_target},
          {"symmetrize_radius", rc.loss.symmetrize_radius}}},
        {"train",
         {{"epochs", rc.epochs},
          {"steps_per_epoch", rc.steps_per_epoch},
          {"learning_rate", rc.learning_rate},
          {"max_backoff", rc.max_backoff}}},
        {"eval", json::object()},
        {"io", json::object()}};
}

}  // namespace selex
