#include "plab/harness/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace plab::harness {

namespace {

struct Cursor {
    const std::string& s;
    std::size_t i = 0;
    int line = 1;

    bool done() const { return i >= s.size(); }
    char peek() const { return s[i]; }
    char take() {
        const char c = s[i++];
        if (c == '\n') ++line;
        return c;
    }
    void skip_ws_inline() {
        while (!done() && (peek() == ' ' || peek() == '\t')) take();
    }
    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError("TOML parse error at line " + std::to_string(line) + ": " + msg);
    }
};

void skip_to_eol(Cursor& c) {
    while (!c.done() && c.peek() != '\n') c.take();
    if (!c.done()) c.take();
}

std::string parse_key(Cursor& c) {
    std::string key;
    while (!c.done() &&
           (std::isalnum(static_cast<unsigned char>(c.peek())) || c.peek() == '_' ||
            c.peek() == '-' || c.peek() == '.')) {
        key.push_back(c.take());
    }
    if (key.empty()) c.fail("expected a key");
    return key;
}

json parse_value(Cursor& c);

json parse_array(Cursor& c) {
    c.take();  // [
    json arr = json::array();
    for (;;) {
        c.skip_ws_inline();
        while (!c.done() && (c.peek() == '\n' || c.peek() == '#')) {
            if (c.peek() == '#') skip_to_eol(c);
            else c.take();
            c.skip_ws_inline();
        }
        if (c.done()) c.fail("unterminated array");
        if (c.peek() == ']') {
            c.take();
            return arr;
        }
        arr.push_back(parse_value(c));
        c.skip_ws_inline();
        while (!c.done() && (c.peek() == '\n' || c.peek() == '#')) {
            if (c.peek() == '#') skip_to_eol(c);
            else c.take();
            c.skip_ws_inline();
        }
        if (!c.done() && c.peek() == ',') c.take();
    }
}

json parse_value(Cursor& c) {
    c.skip_ws_inline();
    if (c.done()) c.fail("expected a value");
    const char ch = c.peek();
    if (ch == '"') {
        c.take();
        std::string out;
        while (!c.done() && c.peek() != '"') {
            char d = c.take();
            if (d == '\\' && !c.done()) {
                const char e = c.take();
                switch (e) {
                    case 'n': d = '\n'; break;
                    case 't': d = '\t'; break;
                    case '"': d = '"'; break;
                    case '\\': d = '\\'; break;
                    default: c.fail("unsupported escape");
                }
            }
            out.push_back(d);
        }
        if (c.done()) c.fail("unterminated string");
        c.take();
        return out;
    }
    if (ch == '[') return parse_array(c);
    std::string tok;
    while (!c.done() && c.peek() != '\n' && c.peek() != ',' && c.peek() != ']' &&
           c.peek() != '#' && c.peek() != ' ' && c.peek() != '\t') {
        tok.push_back(c.take());
    }
    if (tok == "true") return true;
    if (tok == "false") return false;
    try {
        std::size_t used = 0;
        if (tok.find_first_of(".eE") == std::string::npos &&
            tok.find("inf") == std::string::npos && tok.find("nan") == std::string::npos) {
            const long long v = std::stoll(tok, &used);
            if (used == tok.size()) return v;
        }
        const double v = std::stod(tok, &used);
        if (used == tok.size()) return v;
    } catch (const std::exception&) {
    }
    c.fail("cannot parse value token '" + tok + "'");
}

json* descend(json& root, const std::string& dotted, Cursor& c) {
    json* node = &root;
    std::size_t pos = 0;
    for (;;) {
        const std::size_t dot = dotted.find('.', pos);
        const std::string part = dotted.substr(pos, dot - pos);
        if (part.empty()) c.fail("empty key segment");
        node = &(*node)[part];
        if (node->is_array()) {
            if (node->empty()) c.fail("key path crosses an empty table list");
            node = &node->back();
        }
        if (dot == std::string::npos) return node;
        pos = dot + 1;
    }
}

} // namespace

json parse_toml(const std::string& text) {
    json root = json::object();
    json* table = &root;
    Cursor c{text};
    while (!c.done()) {
        c.skip_ws_inline();
        if (c.done()) break;
        const char ch = c.peek();
        if (ch == '\n') {
            c.take();
            continue;
        }
        if (ch == '#') {
            skip_to_eol(c);
            continue;
        }
        if (ch == '[') {
            c.take();
            const bool list = !c.done() && c.peek() == '[';
            if (list) c.take();
            c.skip_ws_inline();
            const std::string name = parse_key(c);
            c.skip_ws_inline();
            if (c.done() || c.take() != ']') c.fail("expected ']'");
            if (list && (c.done() || c.take() != ']')) c.fail("expected ']]'");
            if (list) {
                json* arr = descend(root, name, c);
                if (arr->is_null()) *arr = json::array();
                // descend lands inside the last element once the array exists;
                // resolve the raw array instead.
                json* holder = &root;
                std::size_t pos = 0;
                for (;;) {
                    const std::size_t dot = name.find('.', pos);
                    const std::string part = name.substr(pos, dot - pos);
                    holder = &(*holder)[part];
                    if (dot == std::string::npos) break;
                    if (holder->is_array()) holder = &holder->back();
                    pos = dot + 1;
                }
                if (holder->is_null()) *holder = json::array();
                if (!holder->is_array()) c.fail("'" + name + "' is not a table list");
                holder->push_back(json::object());
                table = &holder->back();
            } else {
                table = descend(root, name, c);
                if (table->is_null()) *table = json::object();
            }
            skip_to_eol(c);
            continue;
        }
        const std::string key = parse_key(c);
        c.skip_ws_inline();
        if (c.done() || c.take() != '=') c.fail("expected '=' after key '" + key + "'");
        json value = parse_value(c);
        json* slot = key.find('.') == std::string::npos ? &(*table)[key] : descend(*table, key, c);
        *slot = std::move(value);
        c.skip_ws_inline();
        if (!c.done() && c.peek() == '#') skip_to_eol(c);
        else if (!c.done() && c.peek() == '\n') c.take();
        else if (!c.done()) c.fail("trailing characters after value of '" + key + "'");
    }
    return root;
}

json parse_toml_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_toml(ss.str());
}

json ExperimentConfig::to_json() const {
    json j;
    j["preset"] = preset;
    j["experiment"] = experiment;
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    j["lattice"] = {{"dim", spec.dim},
                    {"a", spec.a},
                    {"n_cell", spec.n_cell},
                    {"multiplier", spec.multiplier}};
    j["site"] = json::array();
    for (const auto& s : sites) {
        json centers = json::array();
        for (int ax = 0; ax < spec.dim; ++ax) centers.push_back(s.center[static_cast<std::size_t>(ax)]);
        j["site"].push_back({{"center", centers}, {"sigma", s.sigma}, {"charge", s.charge}});
    }
    j["physics"] = {{"mass", mass}, {"kernel", kernel}, {"screening", screening}};
    j["scf"] = {{"mixing", scf.mixing},
                {"kerker_q0", scf.kerker_q0},
                {"max_iter", scf.max_iter},
                {"tol", scf.tol},
                {"gap_tol", scf.gap_tol}};
    j["response"] = {{"gap_tol", response.gap_tol},
                     {"max_iter", response.max_iter},
                     {"variant", response.variant == response::FwVariant::FwLineSearch
                                     ? "fw_linesearch"
                                     : "frank_wolfe"}};
    j["polaron"] = {{"outer_tol", outer_tol},
                    {"max_outer", max_outer},
                    {"n_particles", n_particles},
                    {"statistics", statistics},
                    {"disable_interaction", disable_interaction},
                    {"disable_response", disable_response}};
    j["params"] = params.is_null() ? json::object() : params;
    return j;
}

namespace {

void toml_value(std::ostream& os, const json& v) {
    if (v.is_string()) {
        os << '"' << v.get<std::string>() << '"';
    } else if (v.is_boolean()) {
        os << (v.get<bool>() ? "true" : "false");
    } else if (v.is_number_integer()) {
        os << v.get<long long>();
    } else if (v.is_number_unsigned()) {
        os << v.get<unsigned long long>();
    } else if (v.is_number_float()) {
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%.17g", v.get<double>());
        os << buf;
        if (std::string(buf).find_first_of(".eE") == std::string::npos) os << ".0";
    } else if (v.is_array()) {
        os << '[';
        bool first = true;
        for (const auto& e : v) {
            if (!first) os << ", ";
            first = false;
            toml_value(os, e);
        }
        os << ']';
    } else {
        throw ConfigError("unsupported TOML value");
    }
}

} // namespace

std::string ExperimentConfig::to_toml() const {
    const json j = to_json();
    std::ostringstream os;
    for (const auto& [key, value] : j.items()) {
        if (value.is_object() || value.is_array()) continue;
        os << key << " = ";
        toml_value(os, value);
        os << '\n';
    }
    for (const auto& [key, value] : j.items()) {
        if (value.is_object()) {
            os << '\n' << '[' << key << "]\n";
            for (const auto& [k2, v2] : value.items()) {
                os << k2 << " = ";
                toml_value(os, v2);
                os << '\n';
            }
        } else if (value.is_array()) {
            for (const auto& elem : value) {
                os << '\n' << "[[" << key << "]]\n";
                for (const auto& [k2, v2] : elem.items()) {
                    os << k2 << " = ";
                    toml_value(os, v2);
                    os << '\n';
                }
            }
        }
    }
    return os.str();
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig cfg;
    if (!j.contains("preset") && !j.contains("lattice"))
        throw ConfigError("config needs a 'preset' or a [lattice] section");
    if (j.contains("preset") && !j["preset"].get<std::string>().empty())
        cfg = preset_config(j["preset"].get<std::string>());

    auto get = [&](const char* sect, const char* key, auto& target) {
        if (j.contains(sect) && j[sect].contains(key)) {
            using T = std::decay_t<decltype(target)>;
            target = j[sect][key].get<T>();
        }
    };
    if (j.contains("experiment")) cfg.experiment = j["experiment"].get<std::string>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<unsigned long long>();
    if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();

    if (j.contains("lattice")) {
        int dim = cfg.spec.dim, nc = cfg.spec.n_cell, mult = cfg.spec.multiplier;
        double a = cfg.spec.a;
        get("lattice", "dim", dim);
        get("lattice", "a", a);
        get("lattice", "n_cell", nc);
        get("lattice", "multiplier", mult);
        try {
            cfg.spec = grid::LatticeSpec(dim, a, nc, mult);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("invalid lattice: ") + e.what());
        }
    }
    if (j.contains("site")) {
        cfg.sites.clear();
        for (const auto& s : j["site"]) {
            crystal::GaussianSite site;
            if (s.contains("center")) {
                const auto& c = s["center"];
                for (std::size_t ax = 0; ax < c.size() && ax < 3; ++ax)
                    site.center[ax] = c[ax].get<double>();
            }
            if (s.contains("sigma")) site.sigma = s["sigma"].get<double>();
            if (s.contains("charge")) site.charge = s["charge"].get<double>();
            cfg.sites.push_back(site);
        }
    }
    get("physics", "mass", cfg.mass);
    get("physics", "kernel", cfg.kernel);
    get("physics", "screening", cfg.screening);
    get("scf", "mixing", cfg.scf.mixing);
    get("scf", "kerker_q0", cfg.scf.kerker_q0);
    get("scf", "max_iter", cfg.scf.max_iter);
    get("scf", "tol", cfg.scf.tol);
    get("scf", "gap_tol", cfg.scf.gap_tol);
    get("response", "gap_tol", cfg.response.gap_tol);
    get("response", "max_iter", cfg.response.max_iter);
    if (j.contains("response") && j["response"].contains("variant")) {
        const std::string v = j["response"]["variant"].get<std::string>();
        if (v == "fw_linesearch") cfg.response.variant = response::FwVariant::FwLineSearch;
        else if (v == "frank_wolfe") cfg.response.variant = response::FwVariant::FrankWolfe;
        else throw ConfigError("unknown response variant: " + v);
    }
    get("polaron", "outer_tol", cfg.outer_tol);
    get("polaron", "max_outer", cfg.max_outer);
    get("polaron", "n_particles", cfg.n_particles);
    get("polaron", "statistics", cfg.statistics);
    get("polaron", "disable_interaction", cfg.disable_interaction);
    get("polaron", "disable_response", cfg.disable_response);
    if (j.contains("params")) {
        if (cfg.params.is_null() || cfg.params.empty()) cfg.params = j["params"];
        else
            for (const auto& [k, v] : j["params"].items()) cfg.params[k] = v;
    }
    if (j.contains("preset")) cfg.preset = j["preset"].get<std::string>();

    if (cfg.kernel != "bare" && cfg.kernel != "yukawa")
        throw ConfigError("unknown kernel mode: " + cfg.kernel);
    if (cfg.statistics != "fermionic" && cfg.statistics != "bosonic")
        throw ConfigError("unknown statistics: " + cfg.statistics);
    if (!(cfg.mass > 0.0)) throw ConfigError("mass must be positive");
    if (cfg.sites.empty()) throw ConfigError("at least one nuclear site is required");
    return cfg;
}

coulomb::CoulombKernel ExperimentConfig::make_kernel() const {
    if (kernel == "yukawa") return coulomb::CoulombKernel::yukawa(spec, screening);
    return coulomb::CoulombKernel::bare(spec);
}

crystal::NuclearDensity ExperimentConfig::nuclear() const {
    return crystal::NuclearDensity(sites);
}

std::vector<double> ExperimentConfig::param_list(const std::string& key,
                                                 const std::vector<double>& fallback) const {
    if (!params.is_object() || !params.contains(key)) return fallback;
    std::vector<double> out;
    for (const auto& v : params.at(key)) out.push_back(v.get<double>());
    return out;
}

double ExperimentConfig::param_num(const std::string& key, double fallback) const {
    if (!params.is_object() || !params.contains(key)) return fallback;
    return params.at(key).get<double>();
}

ExperimentConfig config_from_toml(const std::string& text) {
    try {
        return ExperimentConfig::from_json(parse_toml(text));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_toml(ss.str());
}

std::vector<std::string> preset_names() {
    return {"free", "deepwell-1d", "deepwell-3d-small", "two-bump-1d"};
}

ExperimentConfig preset_config(const std::string& name) {
    ExperimentConfig cfg;
    cfg.preset = name;
    if (name == "free") {
        // Nearly uniform nuclear charge: the first SCF iterate has V = 0 and
        // the free 1d bands touch at the zone edge, so the gap check trips.
        cfg.spec = grid::LatticeSpec(1, 1.0, 16, 4);
        cfg.sites = {crystal::GaussianSite{{0.5, 0.0, 0.0}, 4.0, 1.0}};
        cfg.experiment = "exp-crystal";
    } else if (name == "deepwell-1d") {
        cfg.spec = grid::LatticeSpec(1, 1.0, 16, 16);
        cfg.sites = {crystal::GaussianSite{{0.5, 0.0, 0.0}, 0.12, 1.0}};
        cfg.experiment = "exp-e1";
    } else if (name == "deepwell-3d-small") {
        // deep enough for a 3d gap at modest resolution; the box is small so
        // the trial sweep uses sub-cell dilations
        cfg.spec = grid::LatticeSpec(3, 1.0, 4, 2);
        cfg.sites = {crystal::GaussianSite{{0.5, 0.5, 0.5}, 0.2, 2.0}};
        cfg.experiment = "exp-e1";
        cfg.params = {{"lambda_list", {0.2, 0.3, 0.4}}};
    } else if (name == "two-bump-1d") {
        cfg.spec = grid::LatticeSpec(1, 1.0, 8, 64);
        cfg.sites = {crystal::GaussianSite{{0.5, 0.0, 0.0}, 0.12, 1.0}};
        cfg.experiment = "exp-decoupling";
        cfg.params = {{"s_list", {2.0, 4.0, 8.0, 16.0}}, {"bump_sigma", 0.5}};
    } else {
        throw ConfigError("unknown preset: " + name);
    }
    return cfg;
}

std::string fnv1a_hex(const std::string& bytes) {
    unsigned long long h = 14695981039346656037ull;
    for (const unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", h);
    return buf;
}

std::string config_hash(const ExperimentConfig& cfg) {
    json j = cfg.to_json();
    // The output directory does not affect the science.
    j.erase("out_dir");
    return fnv1a_hex(j.dump());
}

} // namespace plab::harness
