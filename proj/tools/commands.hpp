#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "config.hpp"
#include "pks/inequalities.hpp"
#include "pks/jko.hpp"

namespace pks::cli {

// Exit codes: 0 success, 1 failed checks or module failure, 2 invalid configuration.
int cmd_simulate(const RunConfig& rc, const std::string& out_dir, const std::string& resume_dir,
                 std::ostream& log);
int cmd_validate(const RunConfig& rc, const std::string& out_dir, std::ostream& log);
int cmd_ot_selftest(const RunConfig& rc, const std::string& out_dir, std::ostream& log);
int cmd_steady_state(const RunConfig& rc, const std::string& out_dir, std::ostream& log);

std::vector<std::string> diagnostics_header();
std::vector<std::string> diagnostics_row(const StepRecord& r);
std::vector<std::string> check_header();
std::vector<std::string> check_row(const std::string& density, const InequalityReport& r);

// Human-readable name of the inequality behind a check.
std::string inequality_title(const std::string& check);

}  // namespace pks::cli
