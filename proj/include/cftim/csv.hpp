#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cftim/engine.hpp"
#include "cftim/errors.hpp"
#include "cftim/metrics.hpp"
#include "cftim/simulation.hpp"

namespace cftim {

/// 6 significant digits; fixed formatting rules so identical runs produce
/// byte-identical files.
inline std::string format_sig(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

/// Time column keeps microsecond resolution out to full-run timescales.
inline std::string format_time(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

inline constexpr const char* kTimeseriesHeader =
    "frame,time_s,avg_sinr_db,running_mean_sinr_db,eq6_residual,cum_energy_j,delivered,"
    "collisions,outage";

inline std::string timeseries_csv(const std::vector<MetricsFrame>& frames) {
    std::string out;
    out.reserve(frames.size() * 72 + 96);
    out += kTimeseriesHeader;
    out += '\n';
    for (const auto& f : frames) {
        out += std::to_string(f.frame);
        out += ',';
        out += format_time(f.time_s);
        out += ',';
        out += format_sig(f.avg_sinr_db);
        out += ',';
        out += format_sig(f.running_mean_sinr_db);
        out += ',';
        out += format_sig(f.eq6_residual);
        out += ',';
        out += format_sig(f.cum_energy_j);
        out += ',';
        out += std::to_string(f.delivered);
        out += ',';
        out += std::to_string(f.collisions);
        out += ',';
        out += f.outage ? '1' : '0';
        out += '\n';
    }
    return out;
}

inline constexpr const char* kSummaryHeader =
    "scheme,seed,frames,sim_time_s,final_cum_energy_j,mean_throughput_msg_s,"
    "outage_probability,final_running_mean_sinr_db,delivered_total,relay_drops,"
    "no_stable_deferrals,exhausted_nodes";

inline std::string summary_row(const RunSummary& s) {
    std::string out;
    out += to_string(s.scheme);
    out += ',';
    out += std::to_string(s.seed);
    out += ',';
    out += std::to_string(s.frames);
    out += ',';
    out += format_time(s.sim_time_s);
    out += ',';
    out += format_sig(s.final_energy_j);
    out += ',';
    out += format_sig(s.mean_throughput_msg_s);
    out += ',';
    out += format_sig(s.outage_probability);
    out += ',';
    out += format_sig(s.final_running_mean_sinr_db);
    out += ',';
    out += std::to_string(s.delivered_total);
    out += ',';
    out += std::to_string(s.relay_drops);
    out += ',';
    out += std::to_string(s.no_stable_deferrals);
    out += ',';
    out += std::to_string(s.exhausted_nodes);
    out += '\n';
    return out;
}

/// Line-delimited event trace records.
inline std::string trace_lines(const Trace& trace) {
    std::string out;
    out.reserve(trace.size() * 64);
    for (const auto& ev : trace) {
        out += "t=";
        out += format_time(ev.time_s);
        out += " seq=";
        out += std::to_string(ev.sequence);
        out += " frame=";
        out += std::to_string(ev.frame);
        out += " kind=";
        out += to_string(ev.kind);
        if (ev.node.value >= 0) {
            out += " node=";
            out += std::to_string(ev.node.value);
        }
        if (ev.slot >= 0) {
            out += " slot=";
            out += std::to_string(ev.slot);
        }
        if (ev.channel >= 0) {
            out += " chan=";
            out += std::to_string(ev.channel);
        }
        out += '\n';
    }
    return out;
}

/// Refuses to clobber existing files unless overwrite is set.
inline void write_file(const std::filesystem::path& path, const std::string& content,
                       bool overwrite) {
    if (!overwrite && std::filesystem::exists(path))
        throw SimError(ErrorKind::OutputExists, path.string(),
                       "refusing to overwrite; pass --overwrite");
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw SimError(ErrorKind::InvalidValue, path.string(), "cannot open for writing");
    out << content;
}

inline std::string timeseries_filename(Scheme scheme, std::uint64_t seed) {
    return std::string("timeseries_") + to_string(scheme) + "_seed" + std::to_string(seed) +
           ".csv";
}

}  // namespace cftim
