#ifndef INFOFLOW_CLI_UTIL_HPP
#define INFOFLOW_CLI_UTIL_HPP

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace cliutil {

namespace fs = std::filesystem;

/// Runs the CLI with the given arguments; stdout and stderr go to `log`. Returns the exit status.
inline int run(const std::string &args, const fs::path &log)
{
    const std::string cmd = std::string("\"") + INFOFLOW_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    if (status == -1 || !WIFEXITED(status))
    {
        return -1;
    }
    return WEXITSTATUS(status);
}

inline std::string slurp(const fs::path &p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Fresh scratch directory under the system temp dir.
inline fs::path scratch(const std::string &name)
{
    const fs::path dir = fs::temp_directory_path() / ("infoflow_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace cliutil

#endif
