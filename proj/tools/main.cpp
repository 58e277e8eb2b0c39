#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hypogen/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Multi-agent hypothesis generation over mass-spectrometry presence data"};
    app.require_subcommand(1);

    hypogen::cli::RunArgs run_args;
    int iterations_flag = 0;
    std::string provider_flag, out_flag;
    auto* run = app.add_subcommand("run", "Execute a configured multi-agent run");
    run->add_option("--config", run_args.config_path, "Run configuration (TOML)")->required();
    auto* iter_opt = run->add_option("--iterations", iterations_flag, "Override iteration count");
    auto* prov_opt = run->add_option("--provider", provider_flag, "Provider id to use");
    auto* out_opt = run->add_option("--out", out_flag, "Output directory for run artifacts");

    std::string resume_dir;
    auto* resume = app.add_subcommand("resume", "Continue a persisted run");
    resume->add_option("run_dir", resume_dir, "Run directory")->required();

    std::string verify_dir, verify_data;
    auto* verify = app.add_subcommand("verify", "Check hypothesis grounding against the data");
    verify->add_option("run_dir", verify_dir, "Run directory")->required();
    verify->add_option("--data", verify_data, "Presence table (LaTeX or CSV)")->required();

    std::string eval_dir, eval_scores;
    auto* eval = app.add_subcommand("eval", "Classify and aggregate expert scorecards");
    eval->add_option("run_dir", eval_dir, "Run directory")->required();
    eval->add_option("--scores", eval_scores, "Scorecard CSV")->required();

    std::string report_dir, report_scores, report_out;
    auto* report = app.add_subcommand("report", "Write the Markdown evaluation report");
    report->add_option("run_dir", report_dir, "Run directory")->required();
    report->add_option("--scores", report_scores, "Scorecard CSV")->required();
    report->add_option("--out", report_out, "Report output path")->required();

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) {
        if (*iter_opt) run_args.iterations = iterations_flag;
        if (*prov_opt) run_args.provider = provider_flag;
        if (*out_opt) run_args.out_dir = out_flag;
        return hypogen::cli::cmd_run(run_args, std::cout, std::cerr);
    }
    if (resume->parsed()) return hypogen::cli::cmd_resume(resume_dir, std::cout, std::cerr);
    if (verify->parsed())
        return hypogen::cli::cmd_verify(verify_dir, verify_data, std::cout, std::cerr);
    if (eval->parsed()) return hypogen::cli::cmd_eval(eval_dir, eval_scores, std::cout, std::cerr);
    if (report->parsed())
        return hypogen::cli::cmd_report(report_dir, report_scores, report_out, std::cout, std::cerr);
    return 1;
}
