#ifndef TREEMAP_CLI_HPP
#define TREEMAP_CLI_HPP

#include <string>
#include <vector>

namespace treemap {

// Entry point shared by the binary and the tests; args excludes the program
// name. Returns 0 on success, 1 on usage or configuration errors, 2 on data
// errors.
int run(const std::vector<std::string>& args);

} // namespace treemap

#endif
