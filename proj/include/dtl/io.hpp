#pragma once

// JSON file formats for MDPs and feature matrices.
//
//   MDP:      {"n_states", "n_actions", "gamma", "rewards": [idx order],
//              "transitions": [[row-major n_states*n_states] per action]}
//   Features: {"d", "phi": [row-major, |S||A| * d]}

#include "dtl/error.hpp"
#include "dtl/linear_fa.hpp"
#include "dtl/mdp.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace dtl {

namespace detail {

inline const nlohmann::json& field(const nlohmann::json& doc, const char* key, const std::string& what) {
    if (!doc.is_object() || !doc.contains(key))
        throw UsageError(what + ": missing field '" + key + "'");
    return doc.at(key);
}

inline std::vector<double> numbers(const nlohmann::json& arr, const std::string& what, std::size_t expected) {
    if (!arr.is_array())
        throw UsageError(what + ": expected an array");
    if (arr.size() != expected)
        throw UsageError(what + ": expected " + std::to_string(expected) + " entries, found " +
                         std::to_string(arr.size()));
    std::vector<double> out;
    out.reserve(expected);
    for (const auto& v : arr) {
        if (!v.is_number())
            throw UsageError(what + ": non-numeric entry");
        out.push_back(v.get<double>());
    }
    return out;
}

inline int positive_int(const nlohmann::json& doc, const char* key, const std::string& what) {
    const auto& v = field(doc, key, what);
    if (!v.is_number_integer() || v.get<long long>() < 1)
        throw UsageError(what + ": '" + key + "' must be a positive integer");
    return v.get<int>();
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw UsageError("cannot open '" + path.string() + "' for reading");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw UsageError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw UsageError("cannot open '" + path.string() + "' for writing");
    out << doc.dump(2) << '\n';
    if (!out)
        throw UsageError("failed writing '" + path.string() + "'");
}

} // namespace detail

inline nlohmann::json mdp_to_json(const Mdp& mdp) {
    nlohmann::json doc;
    doc["n_states"] = mdp.n_states();
    doc["n_actions"] = mdp.n_actions();
    doc["gamma"] = mdp.gamma();
    doc["rewards"] = std::vector<double>(mdp.rewards().data(), mdp.rewards().data() + mdp.size());
    nlohmann::json transitions = nlohmann::json::array();
    for (const Mat& p : mdp.transitions()) {
        std::vector<double> flat;
        flat.reserve(static_cast<std::size_t>(p.size()));
        for (int s = 0; s < p.rows(); ++s)
            for (int s2 = 0; s2 < p.cols(); ++s2)
                flat.push_back(p(s, s2));
        transitions.push_back(std::move(flat));
    }
    doc["transitions"] = std::move(transitions);
    return doc;
}

inline Mdp mdp_from_json(const nlohmann::json& doc) {
    const std::string what = "MDP file";
    const int n_states = detail::positive_int(doc, "n_states", what);
    const int n_actions = detail::positive_int(doc, "n_actions", what);
    const auto& gamma = detail::field(doc, "gamma", what);
    if (!gamma.is_number())
        throw UsageError(what + ": 'gamma' must be a number");
    const auto rewards =
        detail::numbers(detail::field(doc, "rewards", what), what + " 'rewards'", std::size_t(n_states) * n_actions);
    const auto& trans = detail::field(doc, "transitions", what);
    if (!trans.is_array() || trans.size() != static_cast<std::size_t>(n_actions))
        throw UsageError(what + ": 'transitions' must hold one matrix per action");
    std::vector<Mat> transitions;
    for (int a = 0; a < n_actions; ++a) {
        const auto flat = detail::numbers(trans[a], what + " 'transitions'[" + std::to_string(a) + "]",
                                          std::size_t(n_states) * n_states);
        Mat p(n_states, n_states);
        for (int s = 0; s < n_states; ++s)
            for (int s2 = 0; s2 < n_states; ++s2)
                p(s, s2) = flat[std::size_t(s) * n_states + s2];
        transitions.push_back(std::move(p));
    }
    return Mdp(std::move(transitions), Eigen::Map<const Vec>(rewards.data(), Eigen::Index(rewards.size())),
               gamma.get<double>());
}

inline nlohmann::json features_to_json(const FeatureMap& fm) {
    nlohmann::json doc;
    doc["d"] = fm.dim();
    std::vector<double> flat(fm.matrix().data(), fm.matrix().data() + fm.matrix().size()); // row-major storage
    doc["phi"] = std::move(flat);
    return doc;
}

/// The row count is inferred from the length of `phi`.
inline FeatureMap features_from_json(const nlohmann::json& doc) {
    const std::string what = "feature file";
    const int d = detail::positive_int(doc, "d", what);
    const auto& phi = detail::field(doc, "phi", what);
    if (!phi.is_array() || phi.empty() || phi.size() % static_cast<std::size_t>(d) != 0)
        throw UsageError(what + ": 'phi' length must be a positive multiple of d");
    const auto flat = detail::numbers(phi, what + " 'phi'", phi.size());
    const auto rows = static_cast<Eigen::Index>(flat.size() / static_cast<std::size_t>(d));
    return FeatureMap(Eigen::Map<const RowMatrix>(flat.data(), rows, d));
}

inline Mdp load_mdp(const std::filesystem::path& path) { return mdp_from_json(detail::read_json(path)); }
inline void save_mdp(const std::filesystem::path& path, const Mdp& mdp) { detail::write_json(path, mdp_to_json(mdp)); }

inline FeatureMap load_features(const std::filesystem::path& path) {
    return features_from_json(detail::read_json(path));
}
inline void save_features(const std::filesystem::path& path, const FeatureMap& fm) {
    detail::write_json(path, features_to_json(fm));
}

} // namespace dtl
