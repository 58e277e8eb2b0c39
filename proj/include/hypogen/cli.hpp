#pragma once

#include <optional>
#include <ostream>
#include <string>

namespace hypogen::cli {

/// Exit codes: 0 success, 1 configuration/input error, 2 run failure or
/// grounding violations (per command contract).
struct RunArgs {
    std::string config_path;
    std::optional<int> iterations;
    std::optional<std::string> provider;
    std::optional<std::string> out_dir;
};

int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err);
int cmd_resume(const std::string& run_dir, std::ostream& out, std::ostream& err);
int cmd_verify(const std::string& run_dir, const std::string& data_path, std::ostream& out,
               std::ostream& err);
int cmd_eval(const std::string& run_dir, const std::string& scores_csv, std::ostream& out,
             std::ostream& err);
int cmd_report(const std::string& run_dir, const std::string& scores_csv,
               const std::string& out_path, std::ostream& out, std::ostream& err);

}  // namespace hypogen::cli
