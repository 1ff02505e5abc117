// cftim: discrete-event simulator of the CFTIM intra-WBAN MAC scheme and its
// opportunistic-relaying / traditional-TDMA baselines, plus the analytical
// outage-probability checker.
//
// Subcommands:
//   run        one scenario -> timeseries CSV + summary CSV
//   compare    paired-seed sweeps across schemes
//   lemma1     Monte-Carlo outage comparison of probabilistic assignment
//   stability  channel stability calculator for a supplied Markov matrix

#include <cstdlib>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cftim/analysis.hpp"
#include "cftim/config.hpp"
#include "cftim/csv.hpp"
#include "cftim/simulation.hpp"

namespace {

using namespace cftim;

int exit_code_for(const SimError& e) {
    switch (e.kind()) {
        case ErrorKind::ParseError:
        case ErrorKind::MissingField:
        case ErrorKind::NonPositiveDuration:
        case ErrorKind::ChannelCountTooSmall:
        case ErrorKind::NoCoordinator:
        case ErrorKind::NonStochasticInput:
        case ErrorKind::InvalidValue:
            return 2;
        case ErrorKind::OutputExists:
            return 3;
        default:
            return 4;
    }
}

std::string default_out_dir() {
    if (const char* env = std::getenv("CFTIM_OUT_DIR")) return env;
    return "out";
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    auto range = text.find("..");
    if (range != std::string::npos) {
        std::uint64_t lo = std::stoull(text.substr(0, range));
        std::uint64_t hi = std::stoull(text.substr(range + 2));
        if (hi < lo) throw SimError(ErrorKind::InvalidValue, "seeds", "range is reversed");
        for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
        return seeds;
    }
    std::istringstream in(text);
    std::string tok;
    while (std::getline(in, tok, ',')) seeds.push_back(std::stoull(tok));
    if (seeds.empty()) throw SimError(ErrorKind::InvalidValue, "seeds", "no seeds given");
    return seeds;
}

ScenarioConfig load_scenario(const std::string& config_path, const std::string& scheme,
                             std::int64_t seed, double duration_s) {
    RawConfig raw = parse_config(config_path);
    if (!scheme.empty()) raw.entries["scheme"] = {scheme, 0};
    if (seed >= 0) raw.entries["rng_seed"] = {std::to_string(seed), 0};
    if (duration_s > 0.0) raw.entries["sim_duration_s"] = {format_sig(duration_s), 0};
    return to_scenario(raw);
}

void write_run_outputs(const std::filesystem::path& dir, const RunResult& result,
                       bool overwrite, const Trace* trace) {
    const auto& s = result.summary;
    write_file(dir / timeseries_filename(s.scheme, s.seed), timeseries_csv(result.frames),
               overwrite);
    if (trace)
        write_file(dir / (std::string("trace_") + to_string(s.scheme) + "_seed" +
                          std::to_string(s.seed) + ".txt"),
                   trace_lines(*trace), overwrite);
}

int cmd_run(const std::string& config_path, const std::string& scheme, std::int64_t seed,
            double duration_s, const std::string& out_dir, bool overwrite, bool trace) {
    ScenarioConfig cfg = load_scenario(config_path, scheme, seed, duration_s);
    RunOptions opts;
    opts.capture_trace = trace;
    RunResult result = run_scenario(cfg, opts);

    std::filesystem::path dir(out_dir);
    write_run_outputs(dir, result, overwrite, trace ? &result.trace : nullptr);
    write_file(dir / "summary.csv",
               std::string(kSummaryHeader) + "\n" + summary_row(result.summary), overwrite);

    const auto& s = result.summary;
    std::cout << "scheme=" << to_string(s.scheme) << " seed=" << s.seed
              << " frames=" << s.frames << " delivered=" << s.delivered_total
              << " energy_j=" << format_sig(s.final_energy_j)
              << " throughput_msg_s=" << format_sig(s.mean_throughput_msg_s)
              << " mean_sinr_db=" << format_sig(s.final_running_mean_sinr_db)
              << " outage=" << format_sig(s.outage_probability) << "\n";
    return 0;
}

int cmd_compare(const std::string& config_path, std::vector<std::string> schemes,
                const std::string& seeds_text, double duration_s, const std::string& out_dir,
                bool overwrite) {
    if (schemes.empty()) schemes = {"cftim", "or", "tdma"};
    std::vector<std::uint64_t> seeds = parse_seeds(seeds_text);

    struct Job {
        std::string scheme;
        std::uint64_t seed;
        std::future<RunResult> future;
    };
    std::vector<Job> jobs;
    for (const auto& scheme : schemes)
        for (std::uint64_t seed : seeds) {
            ScenarioConfig cfg = load_scenario(config_path, scheme,
                                               static_cast<std::int64_t>(seed), duration_s);
            jobs.push_back(
                {scheme, seed, std::async(std::launch::async, [cfg] { return run_scenario(cfg); })});
        }

    std::filesystem::path dir(out_dir);
    std::string summary = std::string(kSummaryHeader) + "\n";
    std::map<std::string, std::map<std::uint64_t, RunSummary>> by_scheme;
    for (auto& job : jobs) {
        RunResult result = job.future.get();
        write_run_outputs(dir, result, overwrite, nullptr);
        summary += summary_row(result.summary);
        by_scheme[job.scheme][job.seed] = result.summary;
    }
    write_file(dir / "summary.csv", summary, overwrite);

    // Paired deltas against the first scheme listed.
    const auto& baseline = by_scheme.at(schemes.front());
    for (std::size_t i = 1; i < schemes.size(); ++i) {
        const auto& other = by_scheme.at(schemes[i]);
        double d_sinr = 0.0, d_energy = 0.0, d_thr = 0.0;
        int sinr_wins = 0, energy_wins = 0, thr_wins = 0;
        for (std::uint64_t seed : seeds) {
            const auto& a = baseline.at(seed);
            const auto& b = other.at(seed);
            d_sinr += a.final_running_mean_sinr_db - b.final_running_mean_sinr_db;
            d_energy += b.final_energy_j - a.final_energy_j;
            d_thr += a.mean_throughput_msg_s - b.mean_throughput_msg_s;
            sinr_wins += a.final_running_mean_sinr_db > b.final_running_mean_sinr_db;
            energy_wins += a.final_energy_j < b.final_energy_j;
            thr_wins += a.mean_throughput_msg_s >= b.mean_throughput_msg_s;
        }
        double n = static_cast<double>(seeds.size());
        std::cout << schemes.front() << " vs " << schemes[i] << ": mean_dSINR_db="
                  << format_sig(d_sinr / n) << " (" << sinr_wins << "/" << seeds.size()
                  << " seeds), mean_extra_energy_j=" << format_sig(d_energy / n) << " ("
                  << energy_wins << "/" << seeds.size()
                  << "), mean_dthroughput=" << format_sig(d_thr / n) << " (" << thr_wins << "/"
                  << seeds.size() << ")\n";
    }
    std::cout << "wrote " << jobs.size() << " timeseries files + summary.csv under " << out_dir
              << "\n";
    return 0;
}

int cmd_lemma1(std::int64_t trials, std::uint64_t seed, double thr, int is_size, double lo,
               double hi, const std::string& out_path, bool overwrite) {
    struct Row {
        InterferenceScenario sc;
        std::string label;
    };
    std::vector<Row> rows;
    if (is_size > 0) {
        InterferenceScenario sc;
        sc.is_size = is_size;
        sc.delta_thr = thr;
        sc.dist = DeltaDistribution::uniform(lo * thr, hi * thr);
        rows.push_back({sc, "custom"});
    } else {
        // Default sweep: 5 interference-set sizes x 4 delta distributions.
        const int sizes[] = {2, 4, 8, 12, 16};
        const std::pair<double, double> ranges[] = {
            {0.0, 1.0}, {0.25, 1.0}, {0.5, 0.9}, {0.1, 0.5}};
        for (int n : sizes)
            for (auto [a, b] : ranges) {
                InterferenceScenario sc;
                sc.is_size = n;
                sc.delta_thr = thr;
                sc.dist = DeltaDistribution::uniform(a * thr, b * thr);
                std::ostringstream label;
                label << "n=" << n << " U(" << a << "," << b << ")*thr";
                rows.push_back({sc, label.str()});
            }
    }

    RngStreams rngs(seed);
    std::ostringstream table;
    table << "scenario,p_original,ci_original,p_probabilistic,ci_probabilistic,holds,strict\n";
    std::cout << "lemma1: " << rows.size() << " parameterizations x " << trials << " trials\n";
    bool all_hold = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto rng = rngs.make("lemma1-" + std::to_string(i));
        Lemma1Result r = verify_lemma1(rows[i].sc, trials, rng);
        all_hold = all_hold && r.holds;
        std::cout << "  " << rows[i].label << ": P_orig=" << format_sig(r.p_original) << "+-"
                  << format_sig(r.ci_original) << " P_prob=" << format_sig(r.p_probabilistic)
                  << "+-" << format_sig(r.ci_probabilistic)
                  << (r.holds ? (r.strict ? "  [holds, strict]" : "  [holds]") : "  [VIOLATED]")
                  << "\n";
        table << rows[i].label << ',' << format_sig(r.p_original) << ','
              << format_sig(r.ci_original) << ',' << format_sig(r.p_probabilistic) << ','
              << format_sig(r.ci_probabilistic) << ',' << (r.holds ? 1 : 0) << ','
              << (r.strict ? 1 : 0) << '\n';
    }
    if (!out_path.empty()) write_file(out_path, table.str(), overwrite);
    std::cout << (all_hold ? "P_probabilistic <= P_original in every parameterization\n"
                           : "violation detected\n");
    return all_hold ? 0 : 4;
}

int cmd_stability(const std::vector<double>& matrix, int state, int wait_slots, double slot_s,
                  double data_s, int sensed, double tau_s, double p_thr) {
    Matrix3 m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m[r][c] = matrix[r * 3 + c];
    MarkovChannel ch{0, state, m, slot_s};
    double mu = wait_slots * slot_s + data_s - sensed * tau_s;
    bool stable = is_stable(ch, wait_slots, slot_s, data_s, sensed, tau_s, p_thr);
    std::cout << "mu_s=" << format_sig(mu);
    if (state == 3) {
        std::cout << " state=3 (no check needed) stable=1\n";
        return 0;
    }
    auto n = static_cast<std::int64_t>(std::llround(mu / slot_s));
    Matrix3 pw = matrix_power(m, n);
    double stay = pw[state - 1][state - 1];
    double down = state >= 2 ? pw[state - 1][state - 2] : 0.0;
    std::cout << " n=" << n << " P_mu(i,i)=" << format_sig(stay)
              << " P_mu(i,i-1)=" << format_sig(down) << " sum=" << format_sig(stay + down)
              << " p_thr=" << format_sig(p_thr) << " stable=" << (stable ? 1 : 0) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CFTIM intra-WBAN interference-mitigation simulator"};
    app.require_subcommand(1);

    std::string config_path, scheme, out_dir = default_out_dir(), seeds_text = "1";
    std::string lemma_out;
    std::int64_t seed = -1;
    double duration_s = -1.0;
    bool overwrite = false, trace = false;
    std::vector<std::string> schemes;

    auto* run = app.add_subcommand("run", "simulate one scenario");
    run->add_option("--config", config_path, "scenario config file")->required();
    run->add_option("--scheme", scheme, "override: cftim|or|tdma");
    run->add_option("--seed", seed, "override rng seed");
    run->add_option("--duration-s", duration_s, "override duration in seconds");
    run->add_option("--out", out_dir, "output directory (env CFTIM_OUT_DIR)");
    run->add_flag("--overwrite", overwrite, "allow clobbering existing outputs");
    run->add_flag("--trace", trace, "also export the event trace");

    auto* compare = app.add_subcommand("compare", "paired-seed scheme comparison");
    compare->add_option("--config", config_path, "scenario config file")->required();
    compare->add_option("--schemes", schemes, "schemes to pair (default all three)")
        ->delimiter(',');
    compare->add_option("--seeds", seeds_text, "e.g. 1,2,3 or 1..10");
    compare->add_option("--duration-s", duration_s, "override duration in seconds");
    compare->add_option("--out", out_dir, "output directory");
    compare->add_flag("--overwrite", overwrite, "allow clobbering existing outputs");

    std::int64_t trials = 100000;
    std::uint64_t lemma_seed = 1;
    double thr = 1.0, lo = 0.0, hi = 1.0;
    int is_size = 0;
    auto* lemma = app.add_subcommand("lemma1", "probabilistic-assignment outage check");
    lemma->add_option("--trials", trials, "Monte-Carlo trials per scenario");
    lemma->add_option("--seed", lemma_seed, "rng seed");
    lemma->add_option("--thr", thr, "delta threshold (linear)");
    lemma->add_option("--is-size", is_size, "custom scenario: interference-set size");
    lemma->add_option("--lo", lo, "custom scenario: lower delta fraction");
    lemma->add_option("--hi", hi, "custom scenario: upper delta fraction");
    lemma->add_option("--out", lemma_out, "also write the table as CSV");
    lemma->add_flag("--overwrite", overwrite, "allow clobbering existing outputs");

    std::vector<double> matrix;
    int state = 2, wait_slots = 0, sensed = 0;
    double slot_s = 1e-3, data_s = 384e-6, tau_s = 1e-4, p_thr = 0.8;
    auto* stability = app.add_subcommand("stability", "channel stability calculator");
    stability->add_option("--matrix", matrix, "9 row-major transition probabilities")
        ->expected(9)
        ->required();
    stability->add_option("--state", state, "current channel state 1..3");
    stability->add_option("--wait-slots", wait_slots, "slots until the transmission (K)");
    stability->add_option("--slot-s", slot_s, "slot duration T in seconds");
    stability->add_option("--data-s", data_s, "data transmission time in seconds");
    stability->add_option("--sensed", sensed, "channels sensed so far (x)");
    stability->add_option("--tau-s", tau_s, "sensing time per channel in seconds");
    stability->add_option("--p-thr", p_thr, "stability probability threshold");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return cmd_run(config_path, scheme, seed, duration_s, out_dir, overwrite, trace);
        if (compare->parsed())
            return cmd_compare(config_path, schemes, seeds_text, duration_s, out_dir,
                               overwrite);
        if (lemma->parsed())
            return cmd_lemma1(trials, lemma_seed, thr, is_size, lo, hi, lemma_out, overwrite);
        if (stability->parsed())
            return cmd_stability(matrix, state, wait_slots, slot_s, data_s, sensed, tau_s,
                                 p_thr);
    } catch (const SimError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 1;
}
