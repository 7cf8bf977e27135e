#ifndef SEGNER_CLI_HPP
#define SEGNER_CLI_HPP

#include <iosfwd>

namespace segner {

/// Exit codes: 0 success, 1 check failure, 2 usage or input error.
int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out,
            std::ostream& err);

}  // namespace segner

#endif  // SEGNER_CLI_HPP
