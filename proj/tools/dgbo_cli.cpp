#include <cstdio>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"

#include "dgbo/experiment.hpp"

namespace {

using dgbo::json;

struct Flag {
    const char* name;
    const char* key;  ///< dotted path into the parameter tree
    const char* help;
};

const std::map<std::string, std::vector<Flag>>& subcommand_flags() {
    static const Flag alpha{"--alpha", "alpha", "dispersion exponent in [1, 2]"};
    static const Flag L{"--L", "grid.half_length", "grid half-length"};
    static const Flag N{"--N", "grid.n", "grid points (power of two)"};
    static const Flag state{"--state", "state", "ground-state binary (Q.bin)"};
    static const Flag dt{"--dt", "dt", "time step"};
    static const Flag t_end{"--t-end", "t_end", "final time"};
    static const Flag every{"--checkpoint-every", "checkpoint_every", "steps between checkpoints"};
    static const Flag run{"--run", "run", "run directory written by evolve"};
    static const std::map<std::string, std::vector<Flag>> m{
        {"ground-state", {alpha, L, N, {"--decay", "decay", "also fit the tail exponent (true/false)"}}},
        {"evolve",
         {alpha, L, N, state, dt, t_end, every,
          {"--initial", "initial", "initial data as JSON, e.g. {\"profile\":\"soliton\",\"scale\":1.05}"},
          {"--nonlinearity", "nonlinearity", "focusing or defocusing"},
          {"--sobolev-growth-limit", "sobolev_growth_limit", "stop once the H^{a/2} norm grows by this factor"},
          {"--keep-frames", "keep_frames", "store every checkpoint under frames/ (true/false)"}}},
        {"spectrum",
         {alpha, L, N, state, {"--coercivity-trials", "coercivity_trials", "randomized coercivity trials"}}},
        {"modulate", {run, state}},
        {"monotonicity",
         {run, state, {"--r", "r", "weight decay exponent"}, {"--A", "A", "weight scale (default: selected)"},
          {"--mu", "mu", "shift fraction in (0, 1)"}, {"--x0", "x0", "offsets, a:b:step or JSON array"},
          {"--c0", "c0", "right/left error constant"}, {"--c-eta", "c_eta", "eta error constant"},
          {"--calibrate", "calibrate", "calibrate the constants on this run (true/false)"}}},
        {"blowup-scan",
         {alpha, L, N, dt, t_end, every, {"--amplitudes", "amplitudes", "a:b:step or JSON array"},
          {"--controls", "controls", "bounded control amplitudes"},
          {"--sobolev-growth-limit", "sobolev_growth_limit", "divergence indicator threshold"},
          {"--start", "start", "initial soliton center"}, {"--threads", "threads", "worker threads (0: all cores)"},
          {"--perturbation", "perturbation", "extra gaussians/noise as JSON"}}},
        {"liouville-probe",
         {alpha, L, N, state, dt, t_end, every, {"--window", "window", "half-width B of the local window"},
          {"--initial", "initial", "initial perturbation as JSON"}}},
    };
    return m;
}

/// Numbers, booleans, arrays and objects are read as JSON; anything else stays a string.
json flag_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
        return text;
    }
}

void set_path(json& root, const std::string& dotted, json value) {
    json* node = &root;
    std::size_t start = 0;
    for (std::size_t dot; (dot = dotted.find('.', start)) != std::string::npos; start = dot + 1) {
        const std::string part = dotted.substr(start, dot - start);
        if (!node->contains(part) || !(*node)[part].is_object()) (*node)[part] = json::object();
        node = &(*node)[part];
    }
    (*node)[dotted.substr(start)] = std::move(value);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical laboratory for the dispersion-generalized Benjamin-Ono equation"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path, output_dir;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> sets;
    app.add_option("--config", config_path, "JSON config file; flags override it")->check(CLI::ExistingFile);
    app.add_option("-o,--output", output_dir, "output directory");
    app.add_option("--seed", seed, "rng seed");
    app.add_option("--set", sets, "extra parameter as key=value (dotted keys allowed)");
    app.set_version_flag("--version", dgbo::kVersion);

    std::map<std::string, std::map<std::string, std::string>> given;
    for (const auto& [name, flags] : subcommand_flags()) {
        auto* sub = app.add_subcommand(name);
        for (const auto& f : flags) sub->add_option_function<std::string>(f.name, [&given, name = name, key = f.key](const std::string& v) { given[name][key] = v; }, f.help);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(dgbo::ExitCode::config);
    }

    dgbo::ExperimentConfig cfg;
    try {
        if (!config_path.empty()) cfg = dgbo::ExperimentConfig::from_json(dgbo::read_json(config_path));
        const std::string kind = app.get_subcommands().front()->get_name();
        if (!cfg.kind.empty() && cfg.kind != kind)
            throw dgbo::ConfigError("config kind '" + cfg.kind + "' does not match subcommand '" + kind + "'");
        cfg.kind = kind;
        for (const auto& [key, value] : given[kind]) set_path(cfg.parameters, key, flag_value(value));
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos || eq == 0) throw dgbo::ConfigError("--set expects key=value, got '" + s + "'");
            set_path(cfg.parameters, s.substr(0, eq), flag_value(s.substr(eq + 1)));
        }
        if (!output_dir.empty()) cfg.output_dir = output_dir;
        if (seed) cfg.rng_seed = *seed;
    } catch (const dgbo::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(dgbo::ExitCode::config);
    }

    std::string message;
    const dgbo::ExitCode code = dgbo::run(cfg, &message);
    if (!message.empty()) std::cerr << "error: " << message << "\n";
    std::cout << cfg.kind << ": exit " << static_cast<int>(code) << ", artifacts in " << cfg.output_dir.string() << "\n";
    return static_cast<int>(code);
}
