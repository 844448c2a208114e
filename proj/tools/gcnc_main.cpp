#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "gcnc/commands.hpp"
#include "gcnc/config.hpp"
#include "gcnc/errors.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Geometric complexity and neural collapse experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;

    for (gcnc::Command c : {gcnc::Command::train, gcnc::Command::sweep, gcnc::Command::transfer,
                            gcnc::Command::estimate_gc, gcnc::Command::bounds,
                            gcnc::Command::verify}) {
        CLI::App* sub = app.add_subcommand(std::string(gcnc::to_string(c)));
        sub->add_option("--config", config_path, "experiment config file")->required();
        sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
        sub->add_option("--seed", seed, "seed override for every run");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int status = app.exit(e);
        return status == 0 ? 0 : gcnc::exit_code::config_error;
    }

    const gcnc::Command command = gcnc::command_from_string(app.get_subcommands().front()->get_name());
    gcnc::CommandOptions opts;
    if (!out_dir.empty()) opts.out_dir = out_dir;
    opts.seed = seed;

    try {
        const gcnc::ExperimentConfig cfg = gcnc::load_config(config_path);
        return gcnc::run_command(cfg, command, opts, std::cout);
    } catch (const gcnc::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return gcnc::exit_code::config_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return gcnc::exit_code::failure;
    }
}
