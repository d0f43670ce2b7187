#pragma once

// RegressorModel: one of the five observer families behind a single predict
// surface.  A model records the preprocessing recipe it was trained with
// (polynomial expansion, min-max scaling) and applies it internally, so
// callers always hand it raw telemetry features; mismatched input width is
// refused.
//
// Serialization: versioned self-describing container, magic "LKDM0001".  A
// JSON header carries the family tag, hyperparameters, recipe and metadata
// plus an array manifest; bulk parameter arrays follow as raw little-endian
// doubles, so a load reproduces predictions bit-exactly.

#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "leakdet/boosting.hpp"
#include "leakdet/common.hpp"
#include "leakdet/dataio.hpp"
#include "leakdet/forest.hpp"
#include "leakdet/mlp.hpp"
#include "leakdet/svr.hpp"
#include "leakdet/tree.hpp"

namespace leakdet::ml {

using json = nlohmann::json;

enum class Family { decision_tree, random_forest, gradient_boosting, svr, mlp };

inline const char* family_name(Family f) {
    switch (f) {
        case Family::decision_tree: return "decision_tree";
        case Family::random_forest: return "random_forest";
        case Family::gradient_boosting: return "gradient_boosting";
        case Family::svr: return "svr";
        case Family::mlp: return "mlp";
    }
    return "?";
}

inline Family family_from_name(const std::string& s) {
    if (s == "decision_tree" || s == "dt") return Family::decision_tree;
    if (s == "random_forest" || s == "rf") return Family::random_forest;
    if (s == "gradient_boosting" || s == "gb") return Family::gradient_boosting;
    if (s == "svr" || s == "svm") return Family::svr;
    if (s == "mlp" || s == "ann") return Family::mlp;
    throw config_error("unknown model family \"" + s + "\"");
}

// Short display names used in report tables.
inline const char* family_label(Family f) {
    switch (f) {
        case Family::decision_tree: return "DT";
        case Family::random_forest: return "RF";
        case Family::gradient_boosting: return "GB";
        case Family::svr: return "SVM";
        case Family::mlp: return "ANN";
    }
    return "?";
}

struct Recipe {
    std::size_t raw_width = 4;
    int poly_degree = 0;  // 0: no expansion
    std::optional<data::Scaler> scaler;

    Matrix apply(const Matrix& raw) const {
        if (raw.cols() != raw_width)
            throw data_error("model: input width " + std::to_string(raw.cols()) +
                             " does not match recipe width " + std::to_string(raw_width));
        Matrix m = poly_degree > 0 ? data::poly_expand(raw, poly_degree) : raw;
        if (scaler) m = scaler->transform(m);
        return m;
    }
};

class RegressorModel {
  public:
    Family family = Family::decision_tree;
    Recipe recipe;
    json hyperparameters = json::object();
    json metadata = json::object();

    std::variant<DecisionTree, RandomForest, GradientBoosting, Svr, Mlp> impl;

    std::vector<double> predict(const Matrix& raw) const {
        const Matrix m = recipe.apply(raw);
        return std::visit([&](const auto& model) { return model.predict(m); }, impl);
    }

    double predict_row(const std::vector<double>& raw) const {
        Matrix m(1, raw.size());
        std::copy(raw.begin(), raw.end(), m.row(0));
        return predict(m)[0];
    }

    void save(const std::string& path) const;
    static RegressorModel load(const std::string& path);
};

// ---------------------------------------------------------------------------
// Container plumbing.
// ---------------------------------------------------------------------------

namespace container {

constexpr char kMagic[8] = {'L', 'K', 'D', 'M', '0', '0', '0', '1'};

struct ArrayOut {
    std::string name;
    std::vector<double> values;
};

inline void tree_to_arrays(const DecisionTree& t, const std::string& prefix,
                           std::vector<ArrayOut>& arrays) {
    const auto& nodes = t.nodes();
    ArrayOut feat{prefix + "feature", {}}, thr{prefix + "threshold", {}},
        left{prefix + "left", {}}, right{prefix + "right", {}}, value{prefix + "value", {}},
        count{prefix + "n", {}};
    for (const auto& n : nodes) {
        feat.values.push_back(double(n.feature));
        thr.values.push_back(n.threshold);
        left.values.push_back(double(n.left));
        right.values.push_back(double(n.right));
        value.values.push_back(n.value);
        count.values.push_back(double(n.n_samples));
    }
    arrays.push_back(std::move(feat));
    arrays.push_back(std::move(thr));
    arrays.push_back(std::move(left));
    arrays.push_back(std::move(right));
    arrays.push_back(std::move(value));
    arrays.push_back(std::move(count));
}

inline DecisionTree tree_from_arrays(const std::vector<std::vector<double>>& a,
                                     std::size_t n_features) {
    DecisionTree t;
    t.set_n_features(n_features);
    const std::size_t n = a[0].size();
    auto& nodes = t.mutable_nodes();
    nodes.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        nodes[i].feature = int(a[0][i]);
        nodes[i].threshold = a[1][i];
        nodes[i].left = int(a[2][i]);
        nodes[i].right = int(a[3][i]);
        nodes[i].value = a[4][i];
        nodes[i].n_samples = std::uint64_t(a[5][i]);
    }
    return t;
}

}  // namespace container

inline void RegressorModel::save(const std::string& path) const {
    json header;
    header["format"] = "leakdet-model";
    header["version"] = 1;
    header["byte_order"] = "little";
    header["family"] = family_name(family);
    header["hyperparameters"] = hyperparameters;
    header["metadata"] = metadata;
    json rec;
    rec["raw_width"] = recipe.raw_width;
    rec["poly_degree"] = recipe.poly_degree;
    rec["scaled"] = bool(recipe.scaler);
    header["recipe"] = rec;

    std::vector<container::ArrayOut> arrays;
    if (recipe.scaler) {
        arrays.push_back({"scaler_min", recipe.scaler->minimums()});
        arrays.push_back({"scaler_range", recipe.scaler->ranges()});
    }

    json extra;
    if (const auto* dt = std::get_if<DecisionTree>(&impl)) {
        extra["n_features"] = dt->n_features();
        container::tree_to_arrays(*dt, "tree0.", arrays);
        extra["n_trees"] = 1;
    } else if (const auto* rf = std::get_if<RandomForest>(&impl)) {
        extra["n_trees"] = rf->trees().size();
        extra["n_features"] = rf->trees().empty() ? 0 : rf->trees()[0].n_features();
        for (std::size_t t = 0; t < rf->trees().size(); ++t)
            container::tree_to_arrays(rf->trees()[t], "tree" + std::to_string(t) + ".", arrays);
    } else if (const auto* gb = std::get_if<GradientBoosting>(&impl)) {
        extra["n_trees"] = gb->trees().size();
        extra["n_features"] = gb->trees().empty() ? 0 : gb->trees()[0].n_features();
        extra["init"] = gb->init();
        extra["learning_rate"] = gb->params().learning_rate;
        for (std::size_t t = 0; t < gb->trees().size(); ++t)
            container::tree_to_arrays(gb->trees()[t], "tree" + std::to_string(t) + ".", arrays);
    } else if (const auto* sv = std::get_if<Svr>(&impl)) {
        extra["kernel"] = sv->params().kernel == Kernel::rbf ? "rbf" : "linear";
        extra["gamma_used"] = sv->gamma_used();
        extra["bias"] = sv->bias();
        extra["n_features"] = sv->support_vectors().cols();
        extra["n_support"] = sv->support_vectors().rows();
        arrays.push_back({"support", sv->support_vectors().data()});
        arrays.push_back({"dual_coef", sv->dual_coef()});
    } else if (const auto* nn = std::get_if<Mlp>(&impl)) {
        extra["layer_sizes"] = nn->layer_sizes();
        for (std::size_t l = 0; l < nn->weights().size(); ++l) {
            arrays.push_back({"w" + std::to_string(l), nn->weights()[l].data()});
            arrays.push_back({"b" + std::to_string(l), nn->biases()[l]});
        }
    }
    header["model"] = extra;

    json manifest = json::array();
    for (const auto& a : arrays)
        manifest.push_back({{"name", a.name}, {"count", a.values.size()}});
    header["arrays"] = manifest;

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw data_error("model: cannot write \"" + path + "\"");
        out.write(container::kMagic, 8);
        const std::string head = header.dump();
        const std::uint64_t len = head.size();
        out.write(reinterpret_cast<const char*>(&len), 8);
        out.write(head.data(), std::streamsize(head.size()));
        for (const auto& a : arrays)
            out.write(reinterpret_cast<const char*>(a.values.data()),
                      std::streamsize(a.values.size() * sizeof(double)));
        if (!out) throw data_error("model: write failed for \"" + path + "\"");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw data_error("model: cannot move temporary file into \"" + path + "\"");
}

inline RegressorModel RegressorModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("model: cannot open \"" + path + "\"");
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, container::kMagic, 8) != 0)
        throw data_error("model: \"" + path + "\" is not a model container");
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 8);
    std::string head(len, '\0');
    in.read(head.data(), std::streamsize(len));
    if (!in) throw data_error("model: truncated header in \"" + path + "\"");
    json header = json::parse(head);
    if (header.value("version", 0) != 1)
        throw data_error("model: unsupported container version");

    std::vector<std::vector<double>> arrays;
    std::vector<std::string> names;
    for (const auto& entry : header["arrays"]) {
        const std::size_t count = entry["count"].get<std::size_t>();
        std::vector<double> a(count);
        in.read(reinterpret_cast<char*>(a.data()), std::streamsize(count * sizeof(double)));
        if (!in) throw data_error("model: truncated payload in \"" + path + "\"");
        arrays.push_back(std::move(a));
        names.push_back(entry["name"].get<std::string>());
    }
    auto find = [&](const std::string& n) -> const std::vector<double>& {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == n) return arrays[i];
        throw data_error("model: missing array \"" + n + "\" in \"" + path + "\"");
    };

    RegressorModel m;
    m.family = family_from_name(header["family"].get<std::string>());
    m.hyperparameters = header["hyperparameters"];
    m.metadata = header["metadata"];
    m.recipe.raw_width = header["recipe"]["raw_width"].get<std::size_t>();
    m.recipe.poly_degree = header["recipe"]["poly_degree"].get<int>();
    if (header["recipe"]["scaled"].get<bool>())
        m.recipe.scaler = data::Scaler::from_params(find("scaler_min"), find("scaler_range"));

    const json& extra = header["model"];
    auto load_tree = [&](std::size_t t, std::size_t nf) {
        const std::string p = "tree" + std::to_string(t) + ".";
        std::vector<std::vector<double>> cols = {find(p + "feature"), find(p + "threshold"),
                                                 find(p + "left"),    find(p + "right"),
                                                 find(p + "value"),   find(p + "n")};
        return container::tree_from_arrays(cols, nf);
    };

    switch (m.family) {
        case Family::decision_tree: {
            m.impl = load_tree(0, extra["n_features"].get<std::size_t>());
            break;
        }
        case Family::random_forest: {
            RandomForest rf;
            const auto nf = extra["n_features"].get<std::size_t>();
            const auto nt = extra["n_trees"].get<std::size_t>();
            rf.mutable_trees().resize(nt);
            for (std::size_t t = 0; t < nt; ++t) rf.mutable_trees()[t] = load_tree(t, nf);
            m.impl = std::move(rf);
            break;
        }
        case Family::gradient_boosting: {
            GradientBoosting gb;
            const auto nf = extra["n_features"].get<std::size_t>();
            const auto nt = extra["n_trees"].get<std::size_t>();
            gb.mutable_trees().resize(nt);
            for (std::size_t t = 0; t < nt; ++t) gb.mutable_trees()[t] = load_tree(t, nf);
            gb.set_init(extra["init"].get<double>());
            gb.mutable_params().learning_rate = extra["learning_rate"].get<double>();
            m.impl = std::move(gb);
            break;
        }
        case Family::svr: {
            Svr sv;
            SvrParams p;
            p.kernel = extra["kernel"].get<std::string>() == "rbf" ? Kernel::rbf : Kernel::linear;
            const auto nf = extra["n_features"].get<std::size_t>();
            const auto ns = extra["n_support"].get<std::size_t>();
            Matrix support(ns, nf);
            support.data() = find("support");
            sv.restore(p, extra["gamma_used"].get<double>(), extra["bias"].get<double>(),
                       std::move(support), find("dual_coef"), nf);
            m.impl = std::move(sv);
            break;
        }
        case Family::mlp: {
            Mlp nn;
            MlpParams p;
            const auto sizes = header["model"]["layer_sizes"].get<std::vector<int>>();
            for (std::size_t l = 1; l + 1 < sizes.size(); ++l) p.hidden.push_back(sizes[l]);
            nn.configure(std::size_t(sizes[0]), p);
            for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
                nn.mutable_weights()[l].data() = find("w" + std::to_string(l));
                nn.mutable_biases()[l] = find("b" + std::to_string(l));
            }
            m.impl = std::move(nn);
            break;
        }
    }
    return m;
}

}  // namespace leakdet::ml
