#include <string>

#include "CLI11.hpp"

#include "wassinc/scenario.hpp"

int main(int argc, char** argv) {
    CLI::App app{"particle-measure differential inclusion toolkit"};
    app.require_subcommand(1);

    std::string run_file, report_dir, validate_file;
    CLI::App* run = app.add_subcommand("run", "execute a scenario file");
    run->add_option("file", run_file, "scenario file")->required();
    CLI::App* report = app.add_subcommand("report", "summarize a finished run");
    report->add_option("dir", report_dir, "run output directory")->required();
    CLI::App* validate =
        app.add_subcommand("validate", "schema and hypothesis battery only");
    validate->add_option("file", validate_file, "scenario file")->required();

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return wassinc::run_scenario(run_file);
    if (report->parsed()) return wassinc::report_run(report_dir);
    return wassinc::validate_scenario(validate_file);
}
