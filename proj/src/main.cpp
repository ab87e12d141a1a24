#include <CLI11.hpp>
#include <iostream>
#include <json.hpp>

#include "fairitr/commands.hpp"
#include "fairitr/common.hpp"

namespace {

int fail(int code, const std::string& kind, const std::string& message) {
    std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fairness-constrained individualized treatment rules"};
    app.require_subcommand(1);

    std::string config_path, out_dir, command;
    std::vector<std::string> overrides;
    long long seed = -1;

    for (const char* name : {"train", "predict", "evaluate", "simulate", "sweep", "tune"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path)->required();
        sub->add_option("--set", overrides);
        sub->add_option("--seed", seed);
        sub->add_option("--out", out_dir);
        sub->callback([&command, name] { command = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::stringstream ss;
        int code = CLI::App().exit(e, ss, ss);
        (void)code;
        return fail(2, "config", e.what());
    }

    try {
        nlohmann::json cfg = fairitr::load_config(config_path, overrides, seed);
        nlohmann::json result = fairitr::run_command(command, cfg, out_dir);
        std::cout << result.dump(2) << "\n";
        return 0;
    } catch (const fairitr::ConfigError& e) {
        return fail(2, "config", e.what());
    } catch (const fairitr::NumericError& e) {
        return fail(3, "numeric", e.what());
    } catch (const std::exception& e) {
        return fail(3, "numeric", e.what());
    }
}
