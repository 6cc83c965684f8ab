#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace bemag::cli {

// Runs one subcommand. args excludes the program name, e.g.
// {"predict", "--calibration", "cal.json", "--currents", "-5.74,1.70,0.14"}.
// Exit status contract: 0 success, 1 input error, 2 numerical failure;
// failures additionally emit one machine-readable JSON line on err.
int dispatch(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace bemag::cli
