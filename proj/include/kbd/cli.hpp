#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace kbd {

/// Runs the kbdetect command line. args excludes the program name.
/// Returns 0 on success, 1 on runtime or validation failure, 2 on usage errors.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kbd
