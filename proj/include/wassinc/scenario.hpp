#pragma once

#include <string>

namespace wassinc {

// Batch entry points behind the command-line tool. Exit codes: 0 success,
// 1 certificate failure, 2 infeasibility or refusal, 3 input error.
int run_scenario(const std::string& scenario_file);
int report_run(const std::string& run_dir);
int validate_scenario(const std::string& scenario_file);

}  // namespace wassinc
