#include <semfm/cli.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <set>

using namespace semfm;
using namespace semfm::cli;

namespace {

const std::vector<std::string> kPipelineKeys = {"k",     "k0",    "step",  "k_final", "M",        "eps_scale",
                                                "K",     "alpha", "k_nn",  "sigma",   "t_scale",  "reg_weight",
                                                "mode",  "threshold", "method", "wks_energies", "wks_sigma_scale"};
const std::vector<std::string> kSemanticKeys = {"M", "eps_scale", "K", "alpha", "k_nn", "sigma"};

struct Command {
    std::string name;
    std::string help;
    std::vector<std::string> keys;
    std::vector<std::string> switches; // boolean keys exposed as flags
};

std::vector<Command> commands()
{
    auto join = [](std::vector<std::string> a, const std::vector<std::string>& b) {
        a.insert(a.end(), b.begin(), b.end());
        return a;
    };
    return {
        {"transfer", "transfer an affordance region from a source object to a target object",
         join({"source_mesh", "target_mesh", "source_samples", "target_samples", "source_affordance",
               "target_affordance", "gt_map", "output", "cache_dir", "seed"},
              kPipelineKeys),
         {"cache", "write_maps"}},
        {"eval-category", "evaluate all ordered pairs of a category manifest",
         join({"manifest", "output", "cache_dir", "workers", "seed"}, kPipelineKeys),
         {"cache", "baseline"}},
        {"synth", "generate a synthetic category (meshes, samples, ground truth, manifest)",
         {"output", "spec", "base", "N", "amplitude", "d", "noise", "affordance_radius", "samples_per_object", "seed"},
         {}},
        {"anchors", "dump the cluster similarity matrix and anchor set as JSON",
         join({"source_mesh", "target_mesh", "source_samples", "target_samples", "output", "seed"}, kSemanticKeys),
         {}},
    };
}

std::map<std::string, std::string> default_texts()
{
    std::map<std::string, std::string> d;
    const Json params = params_to_json(PipelineParams{});
    const Json spec = spec_to_json(CategorySpec{});
    for (const auto& [k, v] : params.items()) d[k] = v.is_string() ? v.get<std::string>() : v.dump();
    d["wks_energies"] = std::to_string(kDefaultWksEnergies);
    d["wks_sigma_scale"] = Json(kDefaultWksSigmaScale).dump();
    for (const auto& [k, v] : spec.items()) d[k] = v.is_string() ? v.get<std::string>() : v.dump();
    d["seed"] = "0 (synth: 7)";
    d["cache_dir"] = default_cache_dir();
    d["workers"] = "1";
    return d;
}

std::string flag_name(const std::string& key)
{
    if (key.size() == 1) return "-" + key + ",--" + key;
    std::string s = key;
    for (auto& c : s)
        if (c == '_') c = '-';
    return "--" + s;
}

struct Bound {
    std::map<std::string, std::string> values;
    std::map<std::string, bool> switches;
    std::map<std::string, CLI::Option*> options;
    std::string config;
};

int run_command(const Command& cmd, const Bound& bound)
{
    RunConfig cfg;
    const std::set<std::string> allowed(cmd.keys.begin(), cmd.keys.end());
    const std::set<std::string> allowed_switches(cmd.switches.begin(), cmd.switches.end());
    if (!bound.config.empty()) {
        const Json file = stage("load config " + bound.config, [&] { return read_config_file(bound.config); });
        if (!file.is_object()) throw CommandError(kUsage, bound.config + ": config must be a flat key/value object");
        for (auto it = file.begin(); it != file.end(); ++it) {
            if (!cli::detail::find_key(it.key()))
                throw CommandError(kUsage, bound.config + ": unknown config key '" + it.key() + "'");
            if (!allowed.count(it.key()) && !allowed_switches.count(it.key()))
                throw CommandError(kUsage, bound.config + ": key '" + it.key() + "' is not used by '" + cmd.name + "'");
        }
        stage("config " + bound.config, [&] { apply_config(cfg, file, bound.config); });
    }
    // flags override the file
    for (const auto& key : cmd.keys) {
        if (auto it = bound.values.find(key); it != bound.values.end())
            stage("option " + flag_name(key), [&] { cli::detail::find_key(key)->set(cfg, flag_value(it->second)); });
    }
    for (const auto& [key, on] : bound.switches)
        if (on) cli::detail::find_key(key)->set(cfg, Json(key == "baseline"));

    if (cmd.name == "transfer") {
        if (cfg.output.empty()) throw CommandError(kUsage, "transfer: missing required option --output");
        const Json report = cmd_transfer(cfg);
        std::cout << report.dump(2) << '\n';
    } else if (cmd.name == "eval-category") {
        const Json report = cmd_eval_category(cfg);
        if (cfg.output.empty()) std::cout << report.dump(2) << '\n';
    } else if (cmd.name == "synth") {
        cmd_synth(cfg);
    } else {
        std::cout << cmd_anchors(cfg).dump(2) << '\n';
    }
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Semantic anchored functional maps: affordance transfer between objects"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "semfm 0.1.0");

    const auto defaults = default_texts();
    const auto cmds = commands();
    std::vector<Bound> bound(cmds.size());
    std::vector<CLI::App*> subs;
    for (std::size_t c = 0; c < cmds.size(); ++c) {
        const Command& cmd = cmds[c];
        CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
        sub->add_option("--config", bound[c].config, "flat JSON or key = value file; flags override it");
        for (const auto& key : cmd.keys) {
            const auto* k = cli::detail::find_key(key);
            auto* opt = sub->add_option(flag_name(key), bound[c].values[key], k->help);
            bound[c].options[key] = opt;
            if (auto d = defaults.find(key); d != defaults.end()) opt->description(k->help + " [default: " + d->second + "]");
        }
        for (const auto& key : cmd.switches) {
            if (key == "cache")
                sub->add_flag("--no-cache", bound[c].switches[key], "recompute bases instead of using the cache");
            else if (key == "write_maps")
                sub->add_flag("--no-maps", bound[c].switches[key], "skip fmap.json and map.json");
            else if (key == "baseline")
                sub->add_flag("--baseline", bound[c].switches[key], "also run fm-wks and report the IoU gap");
        }
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    // drop options that were not given so they do not override the config file
    for (std::size_t c = 0; c < cmds.size(); ++c) {
        if (!subs[c]->parsed()) continue;
        for (const auto& key : cmds[c].keys)
            if (bound[c].options.at(key)->count() == 0) bound[c].values.erase(key);
        try {
            return run_command(cmds[c], bound[c]);
        } catch (const CommandError& e) {
            std::cerr << "semfm " << cmds[c].name << ": error: " << e.what() << '\n';
            return e.code();
        } catch (const std::exception& e) {
            std::cerr << "semfm " << cmds[c].name << ": internal error: " << e.what() << '\n';
            return kInternal;
        }
    }
    return kUsage;
}
