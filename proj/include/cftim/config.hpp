#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cftim/core.hpp"
#include "cftim/errors.hpp"

namespace cftim {

/// Raw `key = value` config text, one pair per line. `#` starts a comment.
/// Duplicate keys are rejected at parse time; unknown keys are rejected when
/// the raw config is turned into a scenario.
struct RawConfig {
    struct Entry {
        std::string value;
        int line = 0;
    };
    std::map<std::string, Entry> entries;
    std::string source = "<memory>";
};

namespace detail {

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const RawConfig& raw, const std::string& key,
                           const std::string& text) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last)
        throw SimError(ErrorKind::ParseError, key,
                       "not a number at " + raw.source + ":" +
                           std::to_string(raw.entries.at(key).line));
    return v;
}

inline std::vector<double> parse_doubles(const RawConfig& raw, const std::string& key,
                                         const std::string& text, std::size_t count) {
    std::istringstream in(text);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) out.push_back(parse_double(raw, key, tok));
    if (out.size() != count)
        throw SimError(ErrorKind::ParseError, key,
                       "expected " + std::to_string(count) + " numbers, got " +
                           std::to_string(out.size()));
    return out;
}

}  // namespace detail

inline RawConfig parse_config_text(std::istream& in, const std::string& source = "<memory>") {
    RawConfig raw;
    raw.source = source;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw SimError(ErrorKind::ParseError, "",
                           "missing '=' at " + source + ":" + std::to_string(lineno));
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw SimError(ErrorKind::ParseError, key,
                           "empty key or value at " + source + ":" + std::to_string(lineno));
        if (raw.entries.count(key))
            throw SimError(ErrorKind::ParseError, key,
                           "duplicate key at " + source + ":" + std::to_string(lineno) +
                               " (first at line " +
                               std::to_string(raw.entries[key].line) + ")");
        raw.entries[key] = {value, lineno};
    }
    return raw;
}

inline RawConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw SimError(ErrorKind::ParseError, "config", "cannot open " + path);
    return parse_config_text(in, path);
}

/// Turns raw key-value text into a validated ScenarioConfig. Every Table-style
/// core parameter is required; everything else falls back to its default.
inline ScenarioConfig to_scenario(const RawConfig& raw) {
    static const std::vector<std::string> required = {
        "n_sources",       "n_relays",          "channels",        "sim_duration_s",
        "tx_power_dbm",    "noise_floor_dbm",   "data_rate_bps",   "packet_size_bytes",
        "pathloss_exponent", "sinr_threshold_db", "slot_duration_s", "max_retries",
        "k_history",       "p_min_slack",       "rng_seed",        "scheme",
    };
    static const std::vector<std::string> optional = {
        "beacon_slots",   "cap_slots",        "or_window_slots", "active_window",
        "p_max_slack",    "cw_min",           "cw_max",          "reference_distance_m",
        "reference_loss_db", "area_side_m",   "tau_s_s",         "p_thr",
        "state_penalty_db", "markov_matrix",  "initial_energy_j", "power_tx_mw",
        "power_rx_mw",    "power_sense_mw",   "power_idle_mw",   "power_switch_mw",
        "switch_duration_s",
    };

    for (const auto& [key, entry] : raw.entries) {
        bool known = false;
        for (const auto& k : required) known = known || k == key;
        for (const auto& k : optional) known = known || k == key;
        if (!known)
            throw SimError(ErrorKind::ParseError, key,
                           "unknown key at " + raw.source + ":" + std::to_string(entry.line));
    }
    for (const auto& k : required)
        if (!raw.entries.count(k))
            throw SimError(ErrorKind::MissingField, k, "required key missing");

    auto get = [&](const std::string& key) -> const std::string& {
        return raw.entries.at(key).value;
    };
    auto num = [&](const std::string& key) { return detail::parse_double(raw, key, get(key)); };
    auto num_or = [&](const std::string& key, double fallback) {
        return raw.entries.count(key) ? num(key) : fallback;
    };
    auto int_of = [&](double v, const std::string& key) {
        auto i = static_cast<std::int64_t>(v);
        if (static_cast<double>(i) != v)
            throw SimError(ErrorKind::ParseError, key, "expected an integer");
        return static_cast<int>(i);
    };

    ScenarioConfig cfg;
    cfg.n_sources = int_of(num("n_sources"), "n_sources");
    cfg.n_relays = int_of(num("n_relays"), "n_relays");
    cfg.channel_count = int_of(num("channels"), "channels");
    cfg.sim_duration_s = num("sim_duration_s");
    cfg.tx_power_dbm = num("tx_power_dbm");
    cfg.noise_floor_dbm = num("noise_floor_dbm");
    cfg.data_rate_bps = num("data_rate_bps");
    cfg.packet_size_bytes = int_of(num("packet_size_bytes"), "packet_size_bytes");
    cfg.pathloss_exponent = num("pathloss_exponent");
    cfg.sinr_threshold_db = num("sinr_threshold_db");
    cfg.slot_duration_s = num("slot_duration_s");
    cfg.max_retries = int_of(num("max_retries"), "max_retries");
    cfg.k_history = int_of(num("k_history"), "k_history");
    cfg.p_min_slack = int_of(num("p_min_slack"), "p_min_slack");
    double seed = num("rng_seed");
    if (seed < 0)
        throw SimError(ErrorKind::ParseError, "rng_seed", "seed must be non-negative");
    cfg.rng_seed = static_cast<std::uint64_t>(seed);
    auto scheme = scheme_from_string(get("scheme"));
    if (!scheme)
        throw SimError(ErrorKind::ParseError, "scheme", "expected cftim, or, or tdma");
    cfg.scheme = *scheme;

    cfg.beacon_slots = int_of(num_or("beacon_slots", cfg.beacon_slots), "beacon_slots");
    cfg.cap_slots = int_of(num_or("cap_slots", cfg.cap_slots), "cap_slots");
    cfg.or_window_slots =
        int_of(num_or("or_window_slots", cfg.or_window_slots), "or_window_slots");
    cfg.active_window = int_of(num_or("active_window", cfg.active_window), "active_window");
    cfg.p_max_slack = int_of(num_or("p_max_slack", cfg.p_max_slack), "p_max_slack");
    cfg.cw_min = int_of(num_or("cw_min", cfg.cw_min), "cw_min");
    cfg.cw_max = int_of(num_or("cw_max", cfg.cw_max), "cw_max");
    cfg.reference_distance_m = num_or("reference_distance_m", cfg.reference_distance_m);
    cfg.reference_loss_db = num_or("reference_loss_db", cfg.reference_loss_db);
    cfg.area_side_m = num_or("area_side_m", cfg.area_side_m);
    cfg.tau_s_s = num_or("tau_s_s", cfg.slot_duration_s / 10.0);
    cfg.p_thr = num_or("p_thr", cfg.p_thr);
    cfg.initial_energy_j = num_or("initial_energy_j", cfg.initial_energy_j);
    cfg.energy.tx_mw = num_or("power_tx_mw", cfg.energy.tx_mw);
    cfg.energy.rx_mw = num_or("power_rx_mw", cfg.energy.rx_mw);
    cfg.energy.sense_mw = num_or("power_sense_mw", cfg.energy.sense_mw);
    cfg.energy.idle_mw = num_or("power_idle_mw", cfg.energy.idle_mw);
    cfg.energy.switch_mw = num_or("power_switch_mw", cfg.energy.switch_mw);
    cfg.energy.switch_duration_s = num_or("switch_duration_s", cfg.energy.switch_duration_s);

    if (raw.entries.count("state_penalty_db")) {
        auto v = detail::parse_doubles(raw, "state_penalty_db", get("state_penalty_db"), 3);
        cfg.state_penalty_db = {v[0], v[1], v[2]};
    }
    if (raw.entries.count("markov_matrix")) {
        auto v = detail::parse_doubles(raw, "markov_matrix", get("markov_matrix"), 9);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) cfg.markov_matrix[r][c] = v[r * 3 + c];
    }

    return validate_scenario(cfg);
}

}  // namespace cftim
