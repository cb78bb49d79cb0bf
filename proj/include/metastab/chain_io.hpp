#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "metastab/chain.hpp"

namespace metastab {

/// {"states": [labels], "rates": [[from, to, rate], ...], "speedup": s}
inline nlohmann::json chain_to_json(const Chain& chain) {
    nlohmann::json j;
    j["states"] = chain.space().labels();
    auto rates = nlohmann::json::array();
    for (StateIndex i = 0; i < chain.size(); ++i) {
        for (const auto& t : chain.transitions(i)) rates.push_back({chain.label(i), chain.label(t.to), t.rate});
    }
    j["rates"] = std::move(rates);
    j["speedup"] = chain.speedup();
    return j;
}

inline std::string label_from_json(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number()) {
        std::ostringstream os;
        os << v.get<double>();
        return os.str();
    }
    throw Error(Errc::ParseError, "state labels must be strings or numbers");
}

inline Chain chain_from_json(const nlohmann::json& j) {
    try {
        std::vector<std::string> labels;
        for (const auto& v : j.at("states")) labels.push_back(label_from_json(v));
        std::vector<RateEntry> entries;
        for (const auto& r : j.at("rates")) {
            if (!r.is_array() || r.size() != 3) throw Error(Errc::ParseError, "each rate must be [from, to, rate]");
            entries.push_back({label_from_json(r[0]), label_from_json(r[1]), r[2].get<double>()});
        }
        const double speedup = j.value("speedup", 1.0);
        return build_chain(std::move(labels), entries, speedup);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ParseError, std::string("malformed chain JSON: ") + e.what());
    }
}

inline Chain load_chain(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::ParseError, "cannot open chain file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ParseError, "invalid JSON in '" + path + "': " + e.what());
    }
    return chain_from_json(j);
}

inline void save_chain(const Chain& chain, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(Errc::ParseError, "cannot write chain file '" + path + "'");
    out << chain_to_json(chain).dump(2) << '\n';
}

}  // namespace metastab
