#pragma once

#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "kfcs/errors.hpp"
#include "kfcs/harness.hpp"

namespace kfcs {

/// Flat key = value configuration with dotted keys. '#' starts a comment;
/// blank lines are ignored. Serialization is sorted, so a resolved config
/// is byte-stable.
class Config {
public:
    static Config from_string(const std::string& text, const std::string& origin = "<string>") {
        Config cfg;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos) {
                throw ContractViolation(origin + ":" + std::to_string(lineno) +
                                        ": expected key = value");
            }
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty()) {
                throw ContractViolation(origin + ":" + std::to_string(lineno) + ": empty key");
            }
            cfg.kv_[key] = value;
        }
        return cfg;
    }

    static Config from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ContractViolation("config file not found: " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        return from_string(ss.str(), path);
    }

    void set(const std::string& key, const std::string& value) { kv_[key] = value; }
    bool has(const std::string& key) const { return kv_.count(key) != 0; }

    std::string get_str(const std::string& key, const std::string& fallback) const {
        auto it = kv_.find(key);
        return it == kv_.end() ? fallback : it->second;
    }

    std::string require_str(const std::string& key) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) throw ContractViolation("config: missing key '" + key + "'");
        return it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        return parse_double(key, it->second);
    }

    long long get_int(const std::string& key, long long fallback) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        try {
            std::size_t pos = 0;
            const long long v = std::stoll(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("");
            return v;
        } catch (...) {
            throw ContractViolation("config: key '" + key + "' is not an integer: " + it->second);
        }
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        try {
            std::size_t pos = 0;
            const unsigned long long v = std::stoull(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("");
            return v;
        } catch (...) {
            throw ContractViolation("config: key '" + key + "' is not an unsigned integer: " +
                                    it->second);
        }
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw ContractViolation("config: key '" + key + "' is not a boolean: " + it->second);
    }

    /// "--set key=value" style override.
    void apply_override(const std::string& assignment) {
        const auto eq = assignment.find('=');
        if (eq == std::string::npos) {
            throw ContractViolation("override must look like key=value: " + assignment);
        }
        set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
    }

    std::string serialize() const {
        std::string out;
        for (const auto& [k, v] : kv_) {
            out += k;
            out += " = ";
            out += v;
            out += "\n";
        }
        return out;
    }

    const std::map<std::string, std::string>& entries() const { return kv_; }

    static std::string trim(const std::string& s) {
        std::size_t b = 0, e = s.size();
        while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
        return s.substr(b, e - b);
    }

private:
    static double parse_double(const std::string& key, const std::string& raw) {
        try {
            std::size_t pos = 0;
            const double v = std::stod(raw, &pos);
            if (pos != raw.size()) throw std::invalid_argument("");
            return v;
        } catch (...) {
            throw ContractViolation("config: key '" + key + "' is not a number: " + raw);
        }
    }

    std::map<std::string, std::string> kv_;
};

/// Shortest round-trip formatting of a double, stable across runs.
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline std::vector<std::string> split_list(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            const std::string t = Config::trim(cur);
            if (!t.empty()) out.push_back(t);
            cur.clear();
        } else {
            cur += c;
        }
    }
    const std::string t = Config::trim(cur);
    if (!t.empty()) out.push_back(t);
    return out;
}

} // namespace detail

/// Materialize an ExperimentConfig from a flat config, filling defaults
/// that depend on other keys (thresholds, max_add) the way the reference
/// experiments do.
inline ExperimentConfig experiment_from_config(const Config& c) {
    ExperimentConfig cfg;
    cfg.m = static_cast<int>(c.get_int("m", 256));
    cfg.n = static_cast<int>(c.get_int("n", 72));
    const std::string sched = c.get_str("schedule", "experiment1");
    if (sched == "experiment1") {
        cfg.schedule = ScheduleKind::Experiment1;
    } else if (sched == "experiment2") {
        cfg.schedule = ScheduleKind::Experiment2;
    } else if (sched == "custom") {
        cfg.schedule = ScheduleKind::Custom;
        for (const std::string& item : detail::split_list(c.get_str("schedule.custom", ""), ',')) {
            const auto colon = item.find(':');
            if (colon == std::string::npos) {
                throw ContractViolation("schedule.custom entries must be time:count, got " + item);
            }
            cfg.custom_schedule.emplace_back(std::stoi(item.substr(0, colon)),
                                             std::stoi(item.substr(colon + 1)));
        }
    } else {
        throw ContractViolation("config: unknown schedule '" + sched + "'");
    }
    cfg.sigma_sys_sq = c.get_double("sigma_sys_sq", 1.0);
    cfg.sigma_init_sq = c.get_double("sigma_init_sq", 3.0 * cfg.sigma_sys_sq);
    cfg.sigma_obs_sq = c.get_double("sigma_obs_sq", (16.0 / 9.0) / cfg.n);
    const std::string base = c.get_str("lambda_log_base", "2");
    if (base == "2") {
        cfg.lambda_log_base = '2';
    } else if (base == "e") {
        cfg.lambda_log_base = 'e';
    } else {
        throw ContractViolation("config: lambda_log_base must be 2 or e");
    }
    cfg.thresholds.alpha_a = c.get_double("thresholds.alpha_a", 9.0 * cfg.sigma_obs_sq);
    cfg.thresholds.alpha_fe = c.get_double("thresholds.alpha_fe", 2.0 * cfg.n);
    cfg.thresholds.alpha_z = c.get_double("thresholds.alpha_z", cfg.sigma_obs_sq);
    cfg.thresholds.k = static_cast<int>(c.get_int("thresholds.k", 5));
    cfg.thresholds.k_prime = static_cast<int>(c.get_int("thresholds.k_prime", 3));
    cfg.thresholds.max_add = static_cast<int>(c.get_int(
        "thresholds.max_add",
        static_cast<long long>(1.25 * cfg.n / std::log2(static_cast<double>(cfg.m)))));
    cfg.thresholds.final_ls = c.get_bool("thresholds.final_ls", false);
    cfg.thresholds.deletion_enabled = c.get_bool("thresholds.deletion_enabled", true);
    const std::string algos = c.get_str("algorithms", "kfcs,lscs,simple_cs,ga_kf,ga_ls");
    cfg.algorithms.clear();
    for (const std::string& name : detail::split_list(algos, ',')) {
        cfg.algorithms.push_back(algorithm_from_name(name));
    }
    cfg.n_trials = static_cast<int>(c.get_int("n_trials", 100));
    cfg.horizon = static_cast<int>(c.get_int("horizon", 100));
    cfg.master_seed = c.get_u64("master_seed", 1);
    const std::string noise = c.get_str("noise_kind", "gaussian");
    if (noise == "gaussian") {
        cfg.noise_kind = NoiseKind::Gaussian;
    } else if (noise == "truncated_gaussian") {
        cfg.noise_kind = NoiseKind::TruncatedGaussian;
    } else {
        throw ContractViolation("config: noise_kind must be gaussian or truncated_gaussian");
    }
    cfg.share_matrix = c.get_bool("share_matrix", true);
    cfg.share_schedule = c.get_bool("share_schedule", false);
    cfg.validate();
    return cfg;
}

/// Fully resolved config (every effective key explicit) for run manifests.
inline Config config_from_experiment(const ExperimentConfig& cfg) {
    Config c;
    c.set("m", std::to_string(cfg.m));
    c.set("n", std::to_string(cfg.n));
    switch (cfg.schedule) {
        case ScheduleKind::Experiment1: c.set("schedule", "experiment1"); break;
        case ScheduleKind::Experiment2: c.set("schedule", "experiment2"); break;
        case ScheduleKind::Custom: {
            c.set("schedule", "custom");
            std::string s;
            for (auto [t, count] : cfg.custom_schedule) {
                if (!s.empty()) s += ",";
                s += std::to_string(t) + ":" + std::to_string(count);
            }
            c.set("schedule.custom", s);
            break;
        }
    }
    c.set("sigma_sys_sq", format_double(cfg.sigma_sys_sq));
    c.set("sigma_init_sq", format_double(cfg.sigma_init_sq));
    c.set("sigma_obs_sq", format_double(cfg.sigma_obs_sq));
    c.set("lambda_log_base", cfg.lambda_log_base == '2' ? "2" : "e");
    c.set("thresholds.alpha_a", format_double(cfg.thresholds.alpha_a));
    c.set("thresholds.alpha_fe", format_double(cfg.thresholds.alpha_fe));
    c.set("thresholds.alpha_z", format_double(cfg.thresholds.alpha_z));
    c.set("thresholds.k", std::to_string(cfg.thresholds.k));
    c.set("thresholds.k_prime", std::to_string(cfg.thresholds.k_prime));
    c.set("thresholds.max_add", std::to_string(cfg.thresholds.max_add));
    c.set("thresholds.final_ls", cfg.thresholds.final_ls ? "true" : "false");
    c.set("thresholds.deletion_enabled", cfg.thresholds.deletion_enabled ? "true" : "false");
    std::string algos;
    for (Algorithm a : cfg.algorithms) {
        if (!algos.empty()) algos += ",";
        algos += algorithm_name(a);
    }
    c.set("algorithms", algos);
    c.set("n_trials", std::to_string(cfg.n_trials));
    c.set("horizon", std::to_string(cfg.horizon));
    c.set("master_seed", std::to_string(cfg.master_seed));
    c.set("noise_kind",
          cfg.noise_kind == NoiseKind::Gaussian ? "gaussian" : "truncated_gaussian");
    c.set("share_matrix", cfg.share_matrix ? "true" : "false");
    c.set("share_schedule", cfg.share_schedule ? "true" : "false");
    return c;
}

/// Built-in named configurations for the two reference experiments.
inline Config builtin_config(const std::string& name) {
    Config c;
    if (name == "experiment1") {
        c.set("schedule", "experiment1");
    } else if (name == "experiment2") {
        c.set("schedule", "experiment2");
    } else {
        throw ContractViolation("unknown built-in config: " + name);
    }
    return c;
}

} // namespace kfcs
