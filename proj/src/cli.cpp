#include "mixscope/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mixscope/attack.hpp"
#include "mixscope/diagnostics.hpp"
#include "mixscope/error.hpp"
#include "mixscope/evaluation.hpp"
#include "mixscope/generator.hpp"
#include "mixscope/mixer.hpp"
#include "mixscope/trace.hpp"

namespace mixscope {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

// Flags shared by every subcommand that turns a trace into rounds.
struct MixFlags {
    std::optional<std::size_t> threshold;
    std::optional<double> timed;

    void attach(CLI::App* cmd) {
        auto* t = cmd->add_option("--threshold", threshold, "Threshold mix: flush every t messages");
        auto* tau = cmd->add_option("--timed", timed, "Timed mix: flush every tau seconds");
        t->excludes(tau);
    }

    bool given() const { return threshold.has_value() || timed.has_value(); }

    MixConfig config() const {
        if (threshold) return MixConfig::threshold(*threshold);
        if (timed) return MixConfig::timed(*timed);
        throw ValidationError("one of --threshold or --timed is required");
    }

    json echo() const {
        if (threshold) return {{"kind", "threshold"}, {"t", *threshold}};
        if (timed) return {{"kind", "timed"}, {"tau", *timed}};
        return nullptr;
    }
};

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    return out;
}

void write_json(const std::string& path, const json& j) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failure on '" + path + "'");
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

// Seed precedence: --seed flag, then MIXSCOPE_SEED, then the config file.
std::uint64_t resolve_seed(std::uint64_t config_seed, const std::optional<std::uint64_t>& flag) {
    if (flag) return *flag;
    if (const char* env = std::getenv("MIXSCOPE_SEED"); env && *env) {
        try {
            std::size_t used = 0;
            const auto v = std::stoull(env, &used);
            if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw ValidationError(std::string("MIXSCOPE_SEED is not an unsigned integer: '") + env + "'");
        }
    }
    return config_seed;
}

PopulationSpec load_population(const std::string& path, const std::optional<std::uint64_t>& seed_flag) {
    auto config = read_json(path);
    auto spec = population_from_json(config, fs::path(path).parent_path().string());
    const auto seed = resolve_seed(spec.seed, seed_flag);
    if (seed != spec.seed) {
        // Random profiles are drawn from the seed, so rebuild them with the override.
        if (config.contains("random_profile")) {
            config["seed"] = seed;
            spec = population_from_json(config, fs::path(path).parent_path().string());
        } else {
            spec.seed = seed;
        }
    }
    return spec;
}

json stats_json(const RoundStats& s) {
    return {{"rounds", s.rounds},
            {"senders", s.senders},
            {"receivers", s.receivers},
            {"mean_messages", s.mean_messages},
            {"min_messages", s.min_messages},
            {"max_messages", s.max_messages}};
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"mixscope: mix anonymization, least-squares disclosure attack and error analysis"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.fallthrough();

    unsigned threads = 0;
    std::optional<std::uint64_t> seed_flag;
    app.add_option("--threads", threads, "Worker threads (0 = all cores)")->capture_default_str();
    app.add_option("--seed", seed_flag, "Seed override (takes precedence over MIXSCOPE_SEED and config)");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Validate a trace CSV and optionally keep the top-k senders");
    std::string ingest_in, ingest_out;
    std::optional<std::size_t> top_k;
    ingest->add_option("--input", ingest_in, "Trace CSV")->required();
    ingest->add_option("--output", ingest_out, "Normalized trace CSV")->required();
    ingest->add_option("--top-senders", top_k, "Keep the k most active senders")->check(CLI::PositiveNumber);

    // mix
    auto* mix = app.add_subcommand("mix", "Anonymize a trace into U.csv / Y.csv");
    std::string mix_trace, mix_dir;
    MixFlags mix_flags;
    mix->add_option("--trace", mix_trace, "Trace CSV")->required();
    mix->add_option("--out-dir", mix_dir, "Output directory")->required();
    mix_flags.attach(mix);

    // attack
    auto* attack = app.add_subcommand("attack", "Run the least-squares disclosure attack on U/Y");
    std::string att_u, att_y, att_out, att_report;
    attack->add_option("--u", att_u, "Input counts (U.csv)")->required();
    attack->add_option("--y", att_y, "Output counts (Y.csv)")->required();
    attack->add_option("--output", att_out, "Estimated profile CSV")->required();
    attack->add_option("--report", att_report, "Optional JSON with condition diagnostics");

    // diagnose
    auto* diagnose = app.add_subcommand("diagnose", "Input covariance, histogram and recipient-spread reports");
    std::string diag_trace, diag_u, diag_y, diag_dir, diag_model;
    std::size_t diag_budget = 100000;
    MixFlags diag_flags;
    diagnose->add_option("--trace", diag_trace, "Trace CSV (with --threshold/--timed)");
    diagnose->add_option("--u", diag_u, "Input counts (U.csv); alternative to --trace");
    diagnose->add_option("--y", diag_y, "Output counts (Y.csv)");
    diagnose->add_option("--out-dir", diag_dir, "Output directory")->required();
    diagnose->add_option("--budget", diag_budget, "Tuple samples per covariance statistic")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    diagnose->add_option("--model", diag_model, "Histogram reference model: poisson or multinomial")
        ->check(CLI::IsMember({"poisson", "multinomial"}));
    diag_flags.attach(diagnose);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic population");
    std::string syn_config, syn_dir;
    std::size_t syn_rounds = 0;
    bool syn_trace = false;
    double syn_period = 1.0;
    synth->add_option("--config", syn_config, "Population JSON")->required();
    synth->add_option("--rounds", syn_rounds, "Number of rounds")->required()->check(CLI::PositiveNumber);
    synth->add_option("--out-dir", syn_dir, "Output directory")->required();
    synth->add_flag("--trace", syn_trace, "Write trace.csv instead of U.csv / Y.csv");
    synth->add_option("--period", syn_period, "Seconds between synthetic rounds in trace output")
        ->check(CLI::PositiveNumber);

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Prefix-grid attack runs against both error predictions");
    std::string ev_trace, ev_config, ev_out, ev_csv;
    std::optional<std::size_t> ev_top_k;
    std::size_t ev_rounds = 0;
    MixFlags ev_flags;
    evaluate->add_option("--trace", ev_trace, "Trace CSV (with --threshold/--timed)");
    evaluate->add_option("--config", ev_config, "Population JSON (with --rounds)");
    evaluate->add_option("--rounds", ev_rounds, "Synthetic rounds (rho_max)")->check(CLI::PositiveNumber);
    evaluate->add_option("--top-senders", ev_top_k, "Keep the k most active senders")->check(CLI::PositiveNumber);
    evaluate->add_option("--output", ev_out, "Report JSON")->required();
    evaluate->add_option("--csv", ev_csv, "Flat CSV of the averaged curves");
    ev_flags.attach(evaluate);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (*ingest) {
            auto trace = read_trace_file(ingest_in);
            if (top_k) trace = restrict_to_top_senders(trace, *top_k);
            write_trace_file(ingest_out, trace);
            out << json{{"events", trace.size()}, {"senders", trace.senders()}, {"receivers", trace.receivers()}}.dump()
                << '\n';
        } else if (*mix) {
            const auto config = mix_flags.config();
            const auto trace = read_trace_file(mix_trace);
            const auto obs = anonymize(trace, config);
            write_observation(mix_dir, obs);
            json summary = stats_json(round_stats(obs));
            summary["mix"] = mix_flags.echo();
            summary["trace"] = mix_trace;
            write_json((fs::path(mix_dir) / "rounds.json").string(), summary);
            out << summary.dump() << '\n';
        } else if (*attack) {
            const auto obs = read_observation(att_u, att_y);
            const auto result = lsda(obs, threads);
            write_profile_file(att_out, result.estimate);
            json summary{{"rounds", obs.rounds()},
                         {"senders", obs.senders()},
                         {"receivers", obs.receivers()},
                         {"condition_number", result.condition_number},
                         {"rank", result.rank},
                         {"rank_deficient", result.rank_deficient}};
            if (!att_report.empty()) write_json(att_report, summary);
            out << summary.dump() << '\n';
        } else if (*diagnose) {
            std::optional<Trace> trace;
            std::vector<RoundSpan> spans;
            std::optional<ObservationWindow> obs;
            InputModel model = InputModel::Poisson;
            if (!diag_trace.empty()) {
                const auto config = diag_flags.config();
                trace = read_trace_file(diag_trace);
                spans = partition_rounds(*trace, config);
                obs = tally_rounds(*trace, spans);
                if (config.kind() == MixKind::Threshold) model = InputModel::MultinomialThreshold;
            } else if (!diag_u.empty() && !diag_y.empty()) {
                obs = read_observation(diag_u, diag_y);
            } else {
                throw ValidationError("diagnose needs --trace with a mix flag, or both --u and --y");
            }
            if (!diag_model.empty()) {
                model = diag_model == "poisson" ? InputModel::Poisson : InputModel::MultinomialThreshold;
            }
            const std::uint64_t seed = resolve_seed(0, seed_flag);
            ensure_dir(diag_dir);
            const auto report = covariance_report(*obs, {diag_budget, seed});
            {
                auto f = open_out((fs::path(diag_dir) / "covariance.csv").string());
                write_covariance_csv(f, report);
            }
            {
                auto f = open_out((fs::path(diag_dir) / "histogram.csv").string());
                write_histogram_csv(f, input_histogram(*obs), fitted_input_pmf(*obs, model));
            }
            json summary{{"rounds", obs->rounds()}, {"violation", report.any_violation()}, {"seed", seed}};
            if (trace) {
                const auto spread = recipient_spread(*trace, spans);
                auto f = open_out((fs::path(diag_dir) / "recipient_spread.csv").string());
                write_recipient_spread_csv(f, spread);
                summary["average_contacts"] = spread.average_contacts;
            }
            out << summary.dump() << '\n';
        } else if (*synth) {
            const auto spec = load_population(syn_config, seed_flag);
            ensure_dir(syn_dir);
            if (syn_trace) {
                write_trace_file((fs::path(syn_dir) / "trace.csv").string(),
                                 synthesize_trace(spec, syn_rounds, syn_period, threads));
            } else {
                write_observation(syn_dir, generate_rounds(spec, syn_rounds, threads));
            }
            write_profile_file((fs::path(syn_dir) / "P.csv").string(), spec.profile);
            json echo = population_to_json(spec);
            echo["rounds"] = syn_rounds;
            write_json((fs::path(syn_dir) / "population.json").string(), echo);
            out << json{{"rounds", syn_rounds}, {"seed", spec.seed}, {"senders", spec.senders()},
                        {"receivers", spec.receivers()}}
                       .dump()
                << '\n';
        } else if (*evaluate) {
            std::optional<ObservationWindow> obs;
            ProfileMatrix truth;
            std::vector<std::string> names;
            json config_echo;
            if (!ev_trace.empty() && !ev_config.empty()) {
                throw ValidationError("--trace and --config are mutually exclusive");
            }
            if (!ev_trace.empty()) {
                auto trace = read_trace_file(ev_trace);
                if (ev_top_k) trace = restrict_to_top_senders(trace, *ev_top_k);
                obs = anonymize(trace, ev_flags.config());
                truth = ground_truth_profiles(trace);
                names = trace.sender_names();
                config_echo = {{"source", "trace"}, {"trace", ev_trace}, {"mix", ev_flags.echo()}};
                if (ev_top_k) config_echo["top_senders"] = *ev_top_k;
            } else if (!ev_config.empty()) {
                if (ev_rounds == 0) throw ValidationError("--config requires --rounds");
                if (ev_flags.given()) throw ValidationError("mix flags apply to --trace input only");
                const auto spec = load_population(ev_config, seed_flag);
                obs = generate_rounds(spec, ev_rounds, threads);
                truth = spec.profile;
                names = spec.sender_names;
                config_echo = {{"source", "synthetic"}, {"population", population_to_json(spec)}, {"rounds", ev_rounds}};
            } else {
                throw ValidationError("evaluate needs --trace (with a mix flag) or --config (with --rounds)");
            }
            const auto selection = select_evaluation_users(*obs, obs->rounds());
            EvaluationOptions options;
            options.threads = threads;
            const auto report = run_evaluation(*obs, truth, selection.users, options);
            json j = report_to_json(report, names);
            j["config"] = config_echo;
            j["user_selection_fallback"] = selection.fallback;
            j["rho_max"] = obs->rounds();
            write_json(ev_out, j);
            if (!ev_csv.empty()) {
                auto f = open_out(ev_csv);
                write_report_csv(f, report);
            }
            out << json{{"rho_max", obs->rounds()}, {"users", selection.users.size()}, {"verdict", j["verdict"]}}.dump()
                << '\n';
        }
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const json::exception& e) {
        err << "error: invalid config: " << e.what() << '\n';
        return kExitValidation;
    }
    return kExitOk;
}

}  // namespace mixscope
